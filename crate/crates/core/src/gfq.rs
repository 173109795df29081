//! Exact arithmetic and dense linear algebra over a prime field 𝔽_q.
//!
//! Matrices follow the column convention used throughout the crate: a
//! matrix `A` with `m` rows and `n` columns describes `n` linear forms on
//! 𝔽_q^m, and `Aᵀx` is evaluated with [`FieldMatrix::apply_transpose`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("modulus {0} is not a prime")]
    NotPrime(u32),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("matrix with {cols} columns has rank {rank}, expected full column rank")]
    NotFullRank { rank: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("field moduli differ ({0} vs {1})")]
    ModulusMismatch(u32, u32),
    #[error("entry {value} is not reduced modulo {q}")]
    OutOfRange { value: u32, q: u32 },
}

pub type Result<T> = std::result::Result<T, GfError>;

/// The prime field 𝔽_q. Construction checks primality by trial division.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct PrimeField {
    q: u32,
}

impl TryFrom<u32> for PrimeField {
    type Error = GfError;

    fn try_from(q: u32) -> Result<Self> {
        Self::new(q)
    }
}

impl From<PrimeField> for u32 {
    fn from(f: PrimeField) -> u32 {
        f.q
    }
}

fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    let q = q as u64;
    let mut d = 2u64;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    pub fn new(q: u32) -> Result<Self> {
        if is_prime(q) {
            Ok(Self { q })
        } else {
            Err(GfError::NotPrime(q))
        }
    }

    #[inline]
    pub fn order(self) -> u32 {
        self.q
    }

    /// `q^k` as a `usize`, the number of vectors in 𝔽_q^k.
    pub fn pow_size(self, k: usize) -> usize {
        (self.q as usize).pow(k as u32)
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.q as u64) as u32
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.q as u64 - b as u64) % self.q as u64) as u32
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.q as u64) as u32
    }

    pub fn pow(self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inv(self, a: u32) -> Result<u32> {
        if a.is_multiple_of(self.q) {
            return Err(GfError::ZeroInverse);
        }
        Ok(self.pow(a, self.q as u64 - 2))
    }

    pub fn elem(self, value: u32) -> Result<FieldElem> {
        FieldElem::new(value, self)
    }

    /// Little-endian radix-q digits of `index` (first coordinate least significant).
    pub fn digits(self, mut index: usize, len: usize) -> Vec<u32> {
        let q = self.q as usize;
        (0..len)
            .map(|_| {
                let d = index % q;
                index /= q;
                d as u32
            })
            .collect()
    }

    /// Inverse of [`PrimeField::digits`].
    pub fn index_of(self, digits: &[u32]) -> usize {
        let q = self.q as usize;
        digits.iter().rev().fold(0usize, |acc, &d| acc * q + d as usize)
    }
}

/// A single element of 𝔽_q carrying its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElem {
    value: u32,
    field: PrimeField,
}

impl FieldElem {
    pub fn new(value: u32, field: PrimeField) -> Result<Self> {
        if value >= field.q {
            return Err(GfError::OutOfRange { value, q: field.q });
        }
        Ok(Self { value, field })
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn field(self) -> PrimeField {
        self.field
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Add for FieldElem {
    type Output = FieldElem;

    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.field, rhs.field, "mixed moduli");
        Self { value: self.field.add(self.value, rhs.value), field: self.field }
    }
}

impl Sub for FieldElem {
    type Output = FieldElem;

    fn sub(self, rhs: Self) -> Self {
        assert_eq!(self.field, rhs.field, "mixed moduli");
        Self { value: self.field.sub(self.value, rhs.value), field: self.field }
    }
}

impl Mul for FieldElem {
    type Output = FieldElem;

    fn mul(self, rhs: Self) -> Self {
        assert_eq!(self.field, rhs.field, "mixed moduli");
        Self { value: self.field.mul(self.value, rhs.value), field: self.field }
    }
}

impl Neg for FieldElem {
    type Output = FieldElem;

    fn neg(self) -> Self {
        Self { value: self.field.neg(self.value), field: self.field }
    }
}

/// Multiplicative inverse of a nonzero field element.
pub fn field_inv(a: FieldElem) -> Result<FieldElem> {
    let value = a.field.inv(a.value)?;
    Ok(FieldElem { value, field: a.field })
}

/// Dense row-major matrix over 𝔽_q.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    q: u32,
    rows: usize,
    cols: usize,
    entries: Vec<Vec<u32>>,
}

impl TryFrom<MatrixRepr> for FieldMatrix {
    type Error = GfError;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let field = PrimeField::new(r.q)?;
        if r.entries.len() != r.rows {
            return Err(GfError::DimensionMismatch(format!(
                "declared {} rows, found {}",
                r.rows,
                r.entries.len()
            )));
        }
        FieldMatrix::from_rows_with_cols(field, r.cols, &r.entries)
    }
}

impl From<FieldMatrix> for MatrixRepr {
    fn from(m: FieldMatrix) -> Self {
        MatrixRepr {
            q: m.field.q,
            rows: m.rows,
            cols: m.cols,
            entries: (0..m.rows).map(|i| m.row(i).to_vec()).collect(),
        }
    }
}

impl FieldMatrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from row vectors. All rows must have the same length.
    pub fn from_rows(field: PrimeField, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        Self::from_rows_with_cols(field, cols, rows)
    }

    pub fn from_rows_with_cols(field: PrimeField, cols: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(GfError::DimensionMismatch(format!(
                    "row of length {} in a matrix with {} columns",
                    row.len(),
                    cols
                )));
            }
            for &v in row {
                if v >= field.q {
                    return Err(GfError::OutOfRange { value: v, q: field.q });
                }
                data.push(v);
            }
        }
        Ok(Self { field, rows: rows.len(), cols, data })
    }

    /// Builds an `m × n` matrix whose columns are the given `m`-vectors.
    pub fn from_columns(field: PrimeField, m: usize, columns: &[Vec<u32>]) -> Result<Self> {
        let mut out = Self::zeros(field, m, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != m {
                return Err(GfError::DimensionMismatch(format!(
                    "column of length {} in a matrix with {} rows",
                    col.len(),
                    m
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                if v >= field.q {
                    return Err(GfError::OutOfRange { value: v, q: field.q });
                }
                out.data[i * out.cols + j] = v;
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v % self.field.q;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<u32> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<u32>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn entries(&self) -> &[u32] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    fn check_field(&self, other: &Self) -> Result<()> {
        if self.field != other.field {
            return Err(GfError::ModulusMismatch(self.field.q, other.field.q));
        }
        Ok(())
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.check_field(rhs)?;
        if self.cols != rhs.rows {
            return Err(GfError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let q = self.field.q as u64;
        let mut out = Self::zeros(self.field, self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = 0u64;
                for k in 0..self.cols {
                    acc += self.get(i, k) as u64 * rhs.get(k, j) as u64;
                }
                out.data[i * rhs.cols + j] = (acc % q) as u32;
            }
        }
        Ok(out)
    }

    /// Evaluates `Aᵀx` for an `m`-vector `x`, giving one value per column.
    pub fn apply_transpose(&self, x: &[u32]) -> Vec<u32> {
        debug_assert_eq!(x.len(), self.rows);
        let q = self.field.q as u64;
        (0..self.cols)
            .map(|j| {
                let acc: u64 = (0..self.rows).map(|i| self.get(i, j) as u64 * x[i] as u64).sum();
                (acc % q) as u32
            })
            .collect()
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        if self.rows != other.rows {
            return Err(GfError::DimensionMismatch(format!(
                "hstack of {} and {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut out = Self::zeros(self.field, self.rows, cols);
        for i in 0..self.rows {
            out.data[i * cols..i * cols + self.cols].copy_from_slice(self.row(i));
            out.data[i * cols + self.cols..(i + 1) * cols].copy_from_slice(other.row(i));
        }
        Ok(out)
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        self.check_field(other)?;
        if self.cols != other.cols {
            return Err(GfError::DimensionMismatch(format!(
                "vstack of {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { field: self.field, rows: self.rows + other.rows, cols: self.cols, data })
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.field, self.rows, idx.len());
        for i in 0..self.rows {
            for (jj, &j) in idx.iter().enumerate() {
                out.data[i * idx.len() + jj] = self.get(i, j);
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { field: self.field, rows: idx.len(), cols: self.cols, data }
    }

    /// Reduced row-echelon form and the (strictly increasing) pivot columns.
    pub fn rref(&self) -> (FieldMatrix, Vec<usize>) {
        let f = self.field;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(p) = (r..m.rows).find(|&i| m.get(i, c) != 0) else {
                continue;
            };
            m.swap_rows(r, p);
            let inv = f.inv(m.get(r, c)).expect("pivot is nonzero");
            for j in c..m.cols {
                let v = f.mul(m.get(r, j), inv);
                m.data[r * m.cols + j] = v;
            }
            for i in 0..m.rows {
                if i != r {
                    let factor = m.get(i, c);
                    if factor != 0 {
                        for j in c..m.cols {
                            let v = f.sub(m.get(i, j), f.mul(factor, m.get(r, j)));
                            m.data[i * m.cols + j] = v;
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel `{x : Mx = 0}`, one basis vector per row.
    pub fn null_space(&self) -> FieldMatrix {
        let f = self.field;
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = Self::zeros(f, free.len(), self.cols);
        for (k, &fc) in free.iter().enumerate() {
            out.data[k * self.cols + fc] = 1;
            for (i, &pc) in pivots.iter().enumerate() {
                out.data[k * self.cols + pc] = f.neg(r.get(i, fc));
            }
        }
        out
    }

    /// Inverse of a square full-rank matrix (Gauss-Jordan).
    pub fn inverse(&self) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(GfError::DimensionMismatch(format!(
                "inverse of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let aug = self.hstack(&Self::identity(self.field, n))?;
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(GfError::Singular);
        }
        let right: Vec<usize> = (n..2 * n).collect();
        Ok(r.select_columns(&right))
    }

    /// Completes the columns of a full-column-rank `m × n` matrix `A` to a basis
    /// of 𝔽_q^m, returning `Ã` (`m × (m−n)`) such that `[A Ã]` is invertible.
    ///
    /// Standard basis vectors are tried in order `e₁, e₂, …`, so the completion
    /// is the lexicographically smallest one.
    pub fn basis_extend(&self) -> Result<FieldMatrix> {
        let rank = self.rank();
        if rank < self.cols {
            return Err(GfError::NotFullRank { rank, cols: self.cols });
        }
        let m = self.rows;
        let mut span = self.transpose();
        let mut chosen = Vec::new();
        for j in 0..m {
            if chosen.len() + self.cols == m {
                break;
            }
            let mut e = vec![0u32; m];
            e[j] = 1;
            let candidate = span.vstack(&Self::from_rows_with_cols(self.field, m, &[e.clone()])?)?;
            if candidate.rank() > span.rows {
                span = candidate;
                chosen.push(e);
            }
        }
        Self::from_columns(self.field, m, &chosen)
    }
}

impl fmt::Display for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(u32::to_string).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

pub fn mat_rank(m: &FieldMatrix) -> usize {
    m.rank()
}

pub fn rref(m: &FieldMatrix) -> (FieldMatrix, Vec<usize>) {
    m.rref()
}

pub fn basis_extend(a: &FieldMatrix) -> Result<FieldMatrix> {
    a.basis_extend()
}

pub fn mat_inverse(m: &FieldMatrix) -> Result<FieldMatrix> {
    m.inverse()
}
