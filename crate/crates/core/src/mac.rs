//! Explicit discrete m-user MACs over 𝔽_q and the polarization transforms.
//!
//! Inputs are indexed by the little-endian radix-q integer of the input
//! vector `(x₁, …, x_m)`, so `x₁` is the least significant digit. Outputs are
//! plain indices `0..outputs`; no labels are kept.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gfq::{FieldMatrix, GfError, PrimeField};
use crate::users::{BadIndexSet, UserSet, MAX_USERS};

/// Row-sum tolerance for a valid transition table.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Default relative tolerance used when merging proportional output columns.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("row for input {x} sums to {sum}")]
    BadRowSum { x: usize, sum: f64 },
    #[error("negative probability at input {x}, output {y}")]
    NegativeProbability { x: usize, y: usize },
    #[error(transparent)]
    BadIndexSet(#[from] BadIndexSet),
    #[error("[A B] has rank {rank}, expected {expected}")]
    NotFullRank { rank: usize, expected: usize },
    #[error("channel has {0} users, expected a single-user channel")]
    NotSingleUser(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("output alphabet of {outputs} exceeds the cap of {cap}")]
    TooLarge { outputs: usize, cap: usize },
    #[error(transparent)]
    Field(#[from] GfError),
}

pub type Result<T> = std::result::Result<T, MacError>;

/// Conditional distribution `P(y | x₁ … x_m)` stored row-major by input index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MacRepr", into = "MacRepr")]
pub struct DiscreteMac {
    field: PrimeField,
    m: usize,
    outputs: usize,
    table: Vec<f64>,
}

/// JSON layout: `{q, m, outputs, rows}` with one row per input vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MacRepr {
    pub q: u32,
    pub m: usize,
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<MacRepr> for DiscreteMac {
    type Error = MacError;

    fn try_from(r: MacRepr) -> Result<Self> {
        let field = PrimeField::new(r.q)?;
        let n_inputs = checked_inputs(field, r.m)?;
        if r.rows.len() != n_inputs {
            return Err(MacError::Shape(format!("expected {n_inputs} rows, got {}", r.rows.len())));
        }
        if let Some((x, row)) = r.rows.iter().enumerate().find(|(_, row)| row.len() != r.outputs) {
            return Err(MacError::Shape(format!("row {x} has {} entries, expected {}", row.len(), r.outputs)));
        }
        DiscreteMac::new(field, r.m, r.outputs, r.rows.concat())
    }
}

impl From<DiscreteMac> for MacRepr {
    fn from(p: DiscreteMac) -> Self {
        let rows = (0..p.inputs()).map(|x| p.row(x).to_vec()).collect();
        MacRepr { q: p.field.order(), m: p.m, outputs: p.outputs, rows }
    }
}

fn checked_inputs(field: PrimeField, m: usize) -> Result<usize> {
    if m == 0 || m > MAX_USERS {
        return Err(MacError::Shape(format!("user count {m} outside 1..={MAX_USERS}")));
    }
    (field.order() as usize)
        .checked_pow(m as u32)
        .ok_or_else(|| MacError::Shape(format!("q^m overflows for q={}, m={m}", field.order())))
}

impl DiscreteMac {
    /// Builds and validates a channel from a row-major `q^m × outputs` table.
    pub fn new(field: PrimeField, m: usize, outputs: usize, table: Vec<f64>) -> Result<Self> {
        let n = checked_inputs(field, m)?;
        if table.len() != n * outputs {
            return Err(MacError::Shape(format!(
                "table has {} entries, expected {n}×{outputs}",
                table.len()
            )));
        }
        let p = Self { field, m, outputs, table };
        p.validate()?;
        Ok(p)
    }

    fn from_parts(field: PrimeField, m: usize, outputs: usize, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), field.pow_size(m) * outputs);
        Self { field, m, outputs, table }
    }

    /// Checks non-negativity and unit row sums.
    pub fn validate(&self) -> Result<()> {
        for x in 0..self.inputs() {
            let row = self.row(x);
            if let Some(y) = row.iter().position(|&v| v < 0.0 || v.is_nan()) {
                return Err(MacError::NegativeProbability { x, y });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MacError::BadRowSum { x, sum });
            }
        }
        Ok(())
    }

    /// The deterministic channel `y = x` (as an input index).
    pub fn identity(field: PrimeField, m: usize) -> Result<Self> {
        let n = checked_inputs(field, m)?;
        let mut table = vec![0.0; n * n];
        for x in 0..n {
            table[x * n + x] = 1.0;
        }
        Ok(Self::from_parts(field, m, n, table))
    }

    /// A single-output channel carrying no information.
    pub fn useless(field: PrimeField, m: usize) -> Result<Self> {
        let n = checked_inputs(field, m)?;
        Ok(Self::from_parts(field, m, 1, vec![1.0; n]))
    }

    /// Deterministic channel `y = f(x)` given the output for each input index.
    pub fn deterministic(field: PrimeField, m: usize, outputs: usize, map: &[usize]) -> Result<Self> {
        let n = checked_inputs(field, m)?;
        if map.len() != n || map.iter().any(|&y| y >= outputs) {
            return Err(MacError::Shape("deterministic map does not fit the alphabet".into()));
        }
        let mut table = vec![0.0; n * outputs];
        for (x, &y) in map.iter().enumerate() {
            table[x * outputs + y] = 1.0;
        }
        Ok(Self::from_parts(field, m, outputs, table))
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn q(&self) -> u32 {
        self.field.order()
    }

    pub fn users(&self) -> usize {
        self.m
    }

    pub fn inputs(&self) -> usize {
        self.table.len() / self.outputs.max(1)
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.outputs + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.outputs..(x + 1) * self.outputs]
    }

    pub fn column(&self, y: usize) -> Vec<f64> {
        (0..self.inputs()).map(|x| self.prob(x, y)).collect()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Digits of input index `x`.
    pub fn input_vector(&self, x: usize) -> Vec<u32> {
        self.field.digits(x, self.m)
    }

    /// `I(X(S); Y, X(Sᶜ))` in base-q units under independent uniform inputs.
    pub fn mutual_info(&self, users: UserSet) -> Result<f64> {
        users.check_nonempty(self.m)?;
        let n = self.inputs();
        let q = self.field.order() as usize;
        // class of x = index of its S-complement part
        let comp = users.complement(self.m);
        let comp_idx = comp.indices();
        let class: Vec<usize> = (0..n)
            .map(|x| {
                let d = self.field.digits(x, self.m);
                comp_idx.iter().rev().fold(0usize, |acc, &i| acc * q + d[i] as usize)
            })
            .collect();
        let n_classes = self.field.pow_size(comp_idx.len());
        let mut class_sum = vec![0.0f64; n_classes];
        let mut cond_entropy = 0.0; // natural-log units, scaled by 1/n at the end
        for y in 0..self.outputs {
            class_sum.iter_mut().for_each(|v| *v = 0.0);
            for x in 0..n {
                class_sum[class[x]] += self.prob(x, y);
            }
            for x in 0..n {
                let p = self.prob(x, y);
                if p > 0.0 {
                    cond_entropy -= p * (p / class_sum[class[x]]).ln();
                }
            }
        }
        let h = cond_entropy / n as f64 / (q as f64).ln();
        let s = users.len() as f64;
        Ok((s - h).clamp(0.0, s))
    }

    /// Mutual information of all users jointly, `I[{1..m}](P)`.
    pub fn sum_capacity(&self) -> f64 {
        self.mutual_info(UserSet::full(self.m)).expect("full user set is valid")
    }

    /// All `I[S]` in increasing mask order of `S`.
    pub fn all_mutual_info(&self) -> Vec<(UserSet, f64)> {
        UserSet::nonempty_subsets(self.m)
            .map(|s| (s, self.mutual_info(s).expect("subset is valid")))
            .collect()
    }

    fn add_table(&self) -> Vec<usize> {
        let n = self.inputs();
        let digits: Vec<Vec<u32>> = (0..n).map(|x| self.input_vector(x)).collect();
        let mut t = vec![0usize; n * n];
        for a in 0..n {
            for b in 0..n {
                let s: Vec<u32> = digits[a].iter().zip(&digits[b]).map(|(&u, &v)| self.field.add(u, v)).collect();
                t[a * n + b] = self.field.index_of(&s);
            }
        }
        t
    }

    /// `P⁻(y₁, y₂ | u¹) = q^{-m} Σ_{u²} P(y₁ | u¹+u²) P(y₂ | u²)`, output `y₁·|Y| + y₂`.
    pub fn transform_minus(&self) -> DiscreteMac {
        let n = self.inputs();
        let ny = self.outputs;
        let add = self.add_table();
        let w = 1.0 / n as f64;
        let mut table = vec![0.0; n * ny * ny];
        for u1 in 0..n {
            let row = &mut table[u1 * ny * ny..(u1 + 1) * ny * ny];
            for u2 in 0..n {
                let r1 = self.row(add[u1 * n + u2]);
                let r2 = self.row(u2);
                for (y1, &a) in r1.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (y2, &b) in r2.iter().enumerate() {
                        row[y1 * ny + y2] += w * a * b;
                    }
                }
            }
        }
        Self::from_parts(self.field, self.m, ny * ny, table)
    }

    /// `P⁺(y₁, y₂, u¹ | u²) = q^{-m} P(y₁ | u¹+u²) P(y₂ | u²)`, output `(y₁·|Y| + y₂)·q^m + u¹`.
    pub fn transform_plus(&self) -> DiscreteMac {
        let n = self.inputs();
        let ny = self.outputs;
        let add = self.add_table();
        let w = 1.0 / n as f64;
        let out = ny * ny * n;
        let mut table = vec![0.0; n * out];
        for u2 in 0..n {
            let r2 = self.row(u2);
            for u1 in 0..n {
                let r1 = self.row(add[u1 * n + u2]);
                for (y1, &a) in r1.iter().enumerate() {
                    for (y2, &b) in r2.iter().enumerate() {
                        table[u2 * out + (y1 * ny + y2) * n + u1] = w * a * b;
                    }
                }
            }
        }
        Self::from_parts(self.field, self.m, out, table)
    }

    /// [`transform_minus`](Self::transform_minus) followed by
    /// [`merge_outputs`](Self::merge_outputs), without materializing the
    /// unmerged table.
    pub fn transform_minus_merged(&self, tol: f64, max_outputs: usize) -> Result<DiscreteMac> {
        let n = self.inputs();
        let ny = self.outputs;
        let add = self.add_table();
        let w = 1.0 / n as f64;
        let mut merger = OutputMerger::new(n, tol);
        let mut col = vec![0.0; n];
        for y1 in 0..ny {
            for y2 in 0..ny {
                for (u1, c) in col.iter_mut().enumerate() {
                    *c = (0..n).map(|u2| self.prob(add[u1 * n + u2], y1) * self.prob(u2, y2)).sum::<f64>() * w;
                }
                merger.push(&col);
                merger.check_cap(max_outputs)?;
            }
        }
        Ok(merger.finish(self.field, self.m))
    }

    /// [`transform_plus`](Self::transform_plus) followed by
    /// [`merge_outputs`](Self::merge_outputs), streamed column by column.
    pub fn transform_plus_merged(&self, tol: f64, max_outputs: usize) -> Result<DiscreteMac> {
        let n = self.inputs();
        let ny = self.outputs;
        let add = self.add_table();
        let w = 1.0 / n as f64;
        let mut merger = OutputMerger::new(n, tol);
        let mut col = vec![0.0; n];
        for y1 in 0..ny {
            for y2 in 0..ny {
                for u1 in 0..n {
                    for (u2, c) in col.iter_mut().enumerate() {
                        *c = w * self.prob(add[u1 * n + u2], y1) * self.prob(u2, y2);
                    }
                    merger.push(&col);
                    merger.check_cap(max_outputs)?;
                }
            }
        }
        Ok(merger.finish(self.field, self.m))
    }

    /// The restricted channel `P[A|B]`: users are `u = Aᵀx`, the receiver sees
    /// `y` and `v = Bᵀx`. Output index is `y·q^{n₂} + index(v)`.
    ///
    /// `b = None` (or an `m × 0` matrix) means no side information.
    pub fn restrict(&self, a: &FieldMatrix, b: Option<&FieldMatrix>) -> Result<DiscreteMac> {
        let empty = FieldMatrix::zeros(self.field, self.m, 0);
        let b = b.unwrap_or(&empty);
        if a.rows() != self.m || b.rows() != self.m {
            return Err(MacError::Shape(format!(
                "restriction matrices need {} rows (got {} and {})",
                self.m,
                a.rows(),
                b.rows()
            )));
        }
        if a.field() != self.field || b.field() != self.field {
            return Err(GfError::ModulusMismatch(self.q(), a.field().order()).into());
        }
        let (n1, n2) = (a.cols(), b.cols());
        if n1 == 0 {
            return Err(MacError::Shape("restriction needs at least one user column".into()));
        }
        let ab = a.hstack(b)?;
        let rank = ab.rank();
        if rank < n1 + n2 {
            return Err(MacError::NotFullRank { rank, expected: n1 + n2 });
        }
        let nu = self.field.pow_size(n1);
        let nv = self.field.pow_size(n2);
        let out = self.outputs * nv;
        let w = 1.0 / self.field.pow_size(self.m - n1) as f64;
        let mut table = vec![0.0; nu * out];
        for x in 0..self.inputs() {
            let xv = self.input_vector(x);
            let u = self.field.index_of(&a.apply_transpose(&xv));
            let v = self.field.index_of(&b.apply_transpose(&xv));
            for (y, &p) in self.row(x).iter().enumerate() {
                table[u * out + y * nv + v] += w * p;
            }
        }
        Ok(Self::from_parts(self.field, n1, out, table))
    }

    /// Merges outputs whose columns are proportional within relative tolerance
    /// `tol` and drops all-zero outputs. The first occurrence fixes the order.
    pub fn merge_outputs(&self, tol: f64) -> DiscreteMac {
        let n = self.inputs();
        let mut merger = OutputMerger::new(n, tol);
        for y in 0..self.outputs {
            merger.push(&self.column(y));
        }
        merger.finish(self.field, self.m)
    }

    /// Channel with outputs permuted into a canonical order (lexicographic on
    /// the column vectors), so equivalent channels compare equal up to rounding.
    pub fn canonical_columns(&self) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = (0..self.outputs).map(|y| self.column(y)).collect();
        cols.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        cols
    }

    /// Bhattacharyya parameter of a single-user channel.
    pub fn bhattacharyya(&self) -> Result<f64> {
        if self.m != 1 {
            return Err(MacError::NotSingleUser(self.m));
        }
        let q = self.inputs();
        let mut acc = 0.0;
        for x in 0..q {
            for x2 in 0..q {
                if x != x2 {
                    acc += self.row(x).iter().zip(self.row(x2)).map(|(a, b)| (a * b).sqrt()).sum::<f64>();
                }
            }
        }
        Ok((acc / (q * (q - 1)) as f64).clamp(0.0, 1.0))
    }
}

/// A single-user channel over 𝔽_q.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserChannel(DiscreteMac);

impl TryFrom<DiscreteMac> for SingleUserChannel {
    type Error = MacError;

    fn try_from(p: DiscreteMac) -> Result<Self> {
        if p.users() != 1 {
            return Err(MacError::NotSingleUser(p.users()));
        }
        Ok(Self(p))
    }
}

impl SingleUserChannel {
    pub fn channel(&self) -> &DiscreteMac {
        &self.0
    }

    pub fn bhattacharyya(&self) -> f64 {
        self.0.bhattacharyya().expect("single-user by construction")
    }

    pub fn capacity(&self) -> f64 {
        self.0.sum_capacity()
    }
}

/// Incrementally merges proportional columns of a transition table.
struct OutputMerger {
    n: usize,
    tol: f64,
    index: HashMap<Vec<u64>, usize>,
    columns: Vec<Vec<f64>>,
}

impl OutputMerger {
    fn new(n: usize, tol: f64) -> Self {
        Self { n, tol: tol.max(0.0), index: HashMap::new(), columns: Vec::new() }
    }

    fn key(&self, col: &[f64], max: f64) -> Vec<u64> {
        col.iter()
            .map(|&v| {
                let r = v / max;
                if self.tol > 0.0 {
                    (r / self.tol).round() as u64
                } else {
                    r.to_bits()
                }
            })
            .collect()
    }

    fn push(&mut self, col: &[f64]) {
        let max = col.iter().cloned().fold(0.0f64, f64::max);
        if max <= 0.0 {
            return;
        }
        let key = self.key(col, max);
        match self.index.get(&key) {
            Some(&j) => self.columns[j].iter_mut().zip(col).for_each(|(a, b)| *a += b),
            None => {
                self.index.insert(key, self.columns.len());
                self.columns.push(col.to_vec());
            }
        }
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        if self.columns.len() > cap {
            return Err(MacError::TooLarge { outputs: self.columns.len(), cap });
        }
        Ok(())
    }

    fn finish(self, field: PrimeField, m: usize) -> DiscreteMac {
        let out = self.columns.len();
        let mut table = vec![0.0; self.n * out];
        for (y, col) in self.columns.iter().enumerate() {
            for (x, &v) in col.iter().enumerate() {
                table[x * out + y] = v;
            }
        }
        DiscreteMac::from_parts(field, m, out, table)
    }
}

pub fn mutual_info_s(p: &DiscreteMac, users: UserSet) -> Result<f64> {
    p.mutual_info(users)
}

pub fn sum_capacity(p: &DiscreteMac) -> f64 {
    p.sum_capacity()
}

pub fn transform_minus(p: &DiscreteMac) -> DiscreteMac {
    p.transform_minus()
}

pub fn transform_plus(p: &DiscreteMac) -> DiscreteMac {
    p.transform_plus()
}

pub fn restrict(p: &DiscreteMac, a: &FieldMatrix, b: Option<&FieldMatrix>) -> Result<DiscreteMac> {
    p.restrict(a, b)
}

pub fn bhattacharyya(q: &SingleUserChannel) -> f64 {
    q.bhattacharyya()
}

pub fn merge_outputs(p: &DiscreteMac, tol: f64) -> DiscreteMac {
    p.merge_outputs(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(q: u32) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    fn s(labels: &[usize], m: usize) -> UserSet {
        UserSet::from_labels(labels, m).unwrap()
    }

    /// Deterministic channel over F_2^2 revealing x1 + x2.
    fn xor_channel() -> DiscreteMac {
        let map: Vec<usize> = (0..4).map(|x| (x & 1) ^ (x >> 1)).collect();
        DiscreteMac::deterministic(f(2), 2, 2, &map).unwrap()
    }

    #[test]
    fn validation_errors() {
        assert!(DiscreteMac::identity(f(2), 2).unwrap().validate().is_ok());
        let bad = DiscreteMac::new(f(2), 1, 2, vec![0.5, 0.4, 0.5, 0.5]);
        assert!(matches!(bad, Err(MacError::BadRowSum { x: 0, .. })));
        let neg = DiscreteMac::new(f(2), 1, 2, vec![1.1, -0.1, 0.5, 0.5]);
        assert!(matches!(neg, Err(MacError::NegativeProbability { x: 0, y: 1 })));
    }

    #[test]
    fn mutual_info_examples() {
        let id = DiscreteMac::identity(f(2), 2).unwrap();
        assert!((id.mutual_info(s(&[1, 2], 2)).unwrap() - 2.0).abs() < 1e-12);
        assert!((id.sum_capacity() - 2.0).abs() < 1e-12);
        let useless = DiscreteMac::useless(f(3), 2).unwrap();
        for (_, i) in useless.all_mutual_info() {
            assert!(i.abs() < 1e-12);
        }
        let x = xor_channel();
        assert!((x.mutual_info(s(&[1], 2)).unwrap() - 1.0).abs() < 1e-12);
        assert!((x.mutual_info(s(&[2], 2)).unwrap() - 1.0).abs() < 1e-12);
        assert!((x.sum_capacity() - 1.0).abs() < 1e-12);
        assert!(x.mutual_info(UserSet::empty()).is_err());
    }

    #[test]
    fn transform_examples() {
        let useless = DiscreteMac::useless(f(2), 2).unwrap();
        assert!(useless.transform_minus().sum_capacity().abs() < 1e-12);
        let id = DiscreteMac::identity(f(2), 2).unwrap();
        assert!((id.transform_plus().sum_capacity() - 2.0).abs() < 1e-12);
        assert_eq!(id.transform_plus().outputs(), 16 * 4);
        let xm = xor_channel().transform_minus();
        assert!((xm.mutual_info(s(&[1], 2)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restrict_examples() {
        let id = DiscreteMac::identity(f(2), 2).unwrap();
        let a = FieldMatrix::from_columns(f(2), 2, &[vec![1, 0]]).unwrap();
        let b = FieldMatrix::from_columns(f(2), 2, &[vec![0, 1]]).unwrap();
        let r = id.restrict(&a, Some(&b)).unwrap();
        assert_eq!(r.users(), 1);
        assert!((r.sum_capacity() - 1.0).abs() < 1e-12);
        let same = id.restrict(&FieldMatrix::identity(f(2), 2), None).unwrap();
        assert_eq!(same.canonical_columns(), id.canonical_columns());
        let dup = FieldMatrix::from_columns(f(2), 2, &[vec![1, 0], vec![1, 0]]).unwrap();
        assert!(matches!(id.restrict(&dup, None), Err(MacError::NotFullRank { rank: 1, expected: 2 })));
    }

    #[test]
    fn bhattacharyya_examples() {
        let perfect = DiscreteMac::identity(f(2), 1).unwrap();
        assert!(perfect.bhattacharyya().unwrap().abs() < 1e-15);
        let useless = DiscreteMac::useless(f(3), 1).unwrap();
        assert!((useless.bhattacharyya().unwrap() - 1.0).abs() < 1e-12);
        let bsc = DiscreteMac::new(f(2), 1, 2, vec![0.75, 0.25, 0.25, 0.75]).unwrap();
        let z = SingleUserChannel::try_from(bsc).unwrap().bhattacharyya();
        assert!((z - 2.0 * (0.25f64 * 0.75).sqrt()).abs() < 1e-12);
        assert!((z - 0.866025).abs() < 1e-6);
        assert!(matches!(xor_channel().bhattacharyya(), Err(MacError::NotSingleUser(2))));
    }

    #[test]
    fn merge_examples() {
        // duplicated column
        let p = DiscreteMac::new(f(2), 1, 3, vec![0.5, 0.25, 0.25, 0.2, 0.4, 0.4]).unwrap();
        let merged = p.merge_outputs(DEFAULT_MERGE_TOL);
        assert_eq!(merged.outputs(), 2);
        assert!((merged.sum_capacity() - p.sum_capacity()).abs() < 1e-12);
        // no proportional columns, exact mode keeps everything in place
        let p = DiscreteMac::new(f(2), 1, 2, vec![0.7, 0.3, 0.2, 0.8]).unwrap();
        assert_eq!(p.merge_outputs(0.0), p);
        // minus transform of the xor channel
        let xm = xor_channel().transform_minus();
        let merged = xm.merge_outputs(DEFAULT_MERGE_TOL);
        assert!(merged.outputs() <= 2);
        for (set, i) in xm.all_mutual_info() {
            assert!((merged.mutual_info(set).unwrap() - i).abs() < 1e-10);
        }
    }

    #[test]
    fn streamed_transforms_match_merged_full_tables() {
        let p = DiscreteMac::new(f(3), 1, 2, vec![0.6, 0.4, 0.1, 0.9, 0.3, 0.7]).unwrap();
        let a = p.transform_minus().merge_outputs(DEFAULT_MERGE_TOL);
        let b = p.transform_minus_merged(DEFAULT_MERGE_TOL, usize::MAX).unwrap();
        let (ca, cb) = (a.canonical_columns(), b.canonical_columns());
        assert_eq!(ca.len(), cb.len());
        for (x, y) in ca.iter().flatten().zip(cb.iter().flatten()) {
            assert!((x - y).abs() < 1e-15);
        }
        let a = p.transform_plus().merge_outputs(DEFAULT_MERGE_TOL);
        let b = p.transform_plus_merged(DEFAULT_MERGE_TOL, usize::MAX).unwrap();
        assert_eq!(a.outputs(), b.outputs());
        for (set, i) in a.all_mutual_info() {
            assert!((b.mutual_info(set).unwrap() - i).abs() < 1e-12);
        }
        assert!(matches!(p.transform_plus_merged(DEFAULT_MERGE_TOL, 2), Err(MacError::TooLarge { .. })));
    }

    #[test]
    fn json_round_trip() {
        let p = xor_channel();
        let s = serde_json::to_string(&p).unwrap();
        let back: DiscreteMac = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"q":2,"m":1,"outputs":2,"rows":[[0.5,0.5]]}"#;
        assert!(serde_json::from_str::<DiscreteMac>(bad).is_err());
    }

    fn arb_mac() -> impl Strategy<Value = DiscreteMac> {
        (prop_oneof![Just(2u32), Just(3u32)], 1usize..=4).prop_flat_map(|(q, ny)| {
            let n = (q * q) as usize;
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, ny), n).prop_map(move |rows| {
                let table: Vec<f64> = rows
                    .iter()
                    .flat_map(|r| {
                        let s: f64 = r.iter().sum::<f64>() + 1e-9;
                        let mut v: Vec<f64> = r.iter().map(|x| (x + 1e-9 / ny as f64) / s).collect();
                        let t: f64 = v.iter().sum();
                        v.iter_mut().for_each(|x| *x /= t);
                        v
                    })
                    .collect();
                DiscreteMac::new(PrimeField::new(q).unwrap(), 2, ny, table).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn info_bounds_and_martingale(p in arb_mac()) {
            let (minus, plus) = (p.transform_minus(), p.transform_plus());
            for set in UserSet::nonempty_subsets(2) {
                let i = p.mutual_info(set)?;
                prop_assert!((0.0..=set.len() as f64).contains(&i));
                let total = minus.mutual_info(set)? + plus.mutual_info(set)?;
                prop_assert!(total <= 2.0 * i + 1e-9);
                if set == UserSet::full(2) {
                    prop_assert!((total - 2.0 * i).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn merge_preserves_information(p in arb_mac()) {
            let full = p.transform_plus();
            let merged = full.merge_outputs(DEFAULT_MERGE_TOL);
            for set in UserSet::nonempty_subsets(2) {
                prop_assert!((full.mutual_info(set)? - merged.mutual_info(set)?).abs() < 1e-9);
            }
        }
    }
}
