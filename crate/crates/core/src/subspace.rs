//! Canonical subspaces of 𝔽_q^m and their lattice operations.
//!
//! A [`Subspace`] is stored by its reduced row-echelon basis, so structural
//! equality is subspace equality. The ordering used everywhere (closures,
//! enumeration, witness search) is by dimension, then lexicographic on the
//! basis entries.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::gfq::{FieldMatrix, GfError, PrimeField};
use crate::users::{BadIndexSet, UserSet};

/// Default cap on the number of subspaces an enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubspaceError {
    #[error("ambient spaces differ: F_{q1}^{m1} vs F_{q2}^{m2}")]
    AmbientMismatch { q1: u32, m1: usize, q2: u32, m2: usize },
    #[error(transparent)]
    BadIndexSet(#[from] BadIndexSet),
    #[error("subspace enumeration would visit {count} subspaces (cap {cap})")]
    TooLarge { count: u128, cap: u128 },
    #[error(transparent)]
    Field(#[from] GfError),
}

pub type Result<T> = std::result::Result<T, SubspaceError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient: usize,
    /// RREF rows, no zero rows; `dim × ambient`.
    basis: FieldMatrix,
}

impl Subspace {
    fn from_reduced(ambient: usize, reduced: FieldMatrix, rank: usize) -> Self {
        let keep: Vec<usize> = (0..rank).collect();
        Self { ambient, basis: reduced.select_rows(&keep) }
    }

    pub fn zero(field: PrimeField, m: usize) -> Self {
        Self { ambient: m, basis: FieldMatrix::zeros(field, 0, m) }
    }

    pub fn full(field: PrimeField, m: usize) -> Self {
        Self { ambient: m, basis: FieldMatrix::identity(field, m) }
    }

    /// Span of the columns of an `m × n` matrix.
    pub fn span(a: &FieldMatrix) -> Self {
        Self::row_span(&a.transpose())
    }

    /// Span of the rows of a `k × m` matrix.
    pub fn row_span(rows: &FieldMatrix) -> Self {
        let (r, pivots) = rows.rref();
        Self::from_reduced(rows.cols(), r, pivots.len())
    }

    /// Span of the given vectors of 𝔽_q^m.
    pub fn from_vectors(field: PrimeField, m: usize, vectors: &[Vec<u32>]) -> Result<Self> {
        let rows = FieldMatrix::from_rows_with_cols(field, m, vectors)?;
        Ok(Self::row_span(&rows))
    }

    pub fn field(&self) -> PrimeField {
        self.basis.field()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// Canonical basis, one RREF row per basis vector.
    pub fn basis(&self) -> &FieldMatrix {
        &self.basis
    }

    /// The canonical basis as the columns of an `m × dim` matrix.
    pub fn basis_columns(&self) -> FieldMatrix {
        self.basis.transpose()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.ambient != other.ambient || self.field() != other.field() {
            return Err(SubspaceError::AmbientMismatch {
                q1: self.field().order(),
                m1: self.ambient,
                q2: other.field().order(),
                m2: other.ambient,
            });
        }
        Ok(())
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        let f = self.field();
        let mut v = v.to_vec();
        for i in 0..self.dim() {
            let row = self.basis.row(i);
            let pivot = row.iter().position(|&x| x != 0).expect("basis rows are nonzero");
            let c = v[pivot];
            if c != 0 {
                for (vj, &rj) in v.iter_mut().zip(row) {
                    *vj = f.sub(*vj, f.mul(c, rj));
                }
            }
        }
        v.iter().all(|&x| x == 0)
    }

    pub fn is_subspace_of(&self, other: &Self) -> Result<bool> {
        self.check_same(other)?;
        Ok((0..self.dim()).all(|i| other.contains(self.basis.row(i))))
    }

    /// All `q^dim` vectors of the subspace, ordered by their coefficient index.
    pub fn vectors(&self) -> Vec<Vec<u32>> {
        let f = self.field();
        let d = self.dim();
        (0..f.pow_size(d))
            .map(|idx| {
                let coeffs = f.digits(idx, d);
                let mut v = vec![0u32; self.ambient];
                for (i, &c) in coeffs.iter().enumerate() {
                    if c != 0 {
                        for (vj, &bj) in v.iter_mut().zip(self.basis.row(i)) {
                            *vj = f.add(*vj, f.mul(c, bj));
                        }
                    }
                }
                v
            })
            .collect()
    }

    /// Annihilator `{y : ⟨x, y⟩ = 0 ∀x ∈ self}` under the standard bilinear form.
    pub fn annihilator(&self) -> Subspace {
        let ns = if self.dim() == 0 {
            FieldMatrix::identity(self.field(), self.ambient)
        } else {
            self.basis.null_space()
        };
        Self::row_span(&ns)
    }

    pub fn sum(&self, other: &Self) -> Result<Subspace> {
        self.check_same(other)?;
        Ok(Self::row_span(&self.basis.vstack(&other.basis)?))
    }

    /// `U ∩ W = ann(ann U + ann W)`; the standard form is non-degenerate so
    /// the double annihilator is the identity.
    pub fn intersect(&self, other: &Self) -> Result<Subspace> {
        self.check_same(other)?;
        Ok(self.annihilator().sum(&other.annihilator())?.annihilator())
    }

    /// Image under the coordinate projection onto `users`, a subspace of 𝔽_q^{|S|}.
    pub fn project(&self, users: UserSet) -> Result<Subspace> {
        users.check_nonempty(self.ambient)?;
        let cols = users.indices();
        let selected = self.basis.select_columns(&cols);
        Ok(Self::row_span(&selected))
    }

    /// Enumerates every subspace of 𝔽_q^m (or only those of dimension `dim`)
    /// in canonical order. Fails when the count exceeds `cap`.
    pub fn enumerate(field: PrimeField, m: usize, dim: Option<usize>, cap: u128) -> Result<Vec<Subspace>> {
        let dims: Vec<usize> = match dim {
            Some(d) => {
                if d > m {
                    return Ok(Vec::new());
                }
                vec![d]
            }
            None => (0..=m).collect(),
        };
        let count: u128 = dims
            .iter()
            .map(|&d| gaussian_binomial(field.order() as u128, m, d))
            .fold(0u128, u128::saturating_add);
        if count > cap {
            return Err(SubspaceError::TooLarge { count, cap });
        }
        let mut out = Vec::with_capacity(count as usize);
        for &d in &dims {
            for pivots in combinations(m, d) {
                // free positions: right of the row's pivot, not in a pivot column
                let mut free = Vec::new();
                for (i, &p) in pivots.iter().enumerate() {
                    for c in p + 1..m {
                        if !pivots.contains(&c) {
                            free.push((i, c));
                        }
                    }
                }
                for assign in 0..field.pow_size(free.len()) {
                    let vals = field.digits(assign, free.len());
                    let mut b = FieldMatrix::zeros(field, d, m);
                    for (i, &p) in pivots.iter().enumerate() {
                        b.set(i, p, 1);
                    }
                    for (&(i, c), &v) in free.iter().zip(&vals) {
                        b.set(i, c, v);
                    }
                    out.push(Subspace { ambient: m, basis: b });
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

impl Ord for Subspace {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.field(), self.ambient, self.dim())
            .cmp(&(other.field(), other.ambient, other.dim()))
            .then_with(|| self.basis.entries().cmp(other.basis.entries()))
    }
}

impl PartialOrd for Subspace {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim() == 0 {
            return write!(f, "span{{}}");
        }
        let rows: Vec<String> = (0..self.dim())
            .map(|i| {
                let r: Vec<String> = self.basis.row(i).iter().map(u32::to_string).collect();
                format!("({})", r.join(","))
            })
            .collect();
        write!(f, "span{{{}}}", rows.join(","))
    }
}

/// Number of `d`-dimensional subspaces of 𝔽_q^m, saturating.
pub fn gaussian_binomial(q: u128, m: usize, d: usize) -> u128 {
    if d > m {
        return 0;
    }
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..d {
        let a = q.saturating_pow((m - i) as u32).saturating_sub(1);
        let b = q.saturating_pow((i + 1) as u32).saturating_sub(1);
        num = num.saturating_mul(a);
        den = den.saturating_mul(b);
        if num == u128::MAX || den == u128::MAX {
            return u128::MAX;
        }
    }
    num / den
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn check_family(family: &[Subspace]) -> Result<()> {
    if let Some(first) = family.first() {
        for v in &family[1..] {
            first.check_same(v)?;
        }
    }
    Ok(())
}

pub fn span(a: &FieldMatrix) -> Subspace {
    Subspace::span(a)
}

pub fn intersect(u: &Subspace, w: &Subspace) -> Result<Subspace> {
    u.intersect(w)
}

pub fn sum(u: &Subspace, w: &Subspace) -> Result<Subspace> {
    u.sum(w)
}

pub fn project(u: &Subspace, users: UserSet) -> Result<Subspace> {
    u.project(users)
}

/// Smallest family containing `family` that is closed under `∩` and `+`.
pub fn closure(family: &[Subspace]) -> Result<BTreeSet<Subspace>> {
    check_family(family)?;
    let mut set: BTreeSet<Subspace> = family.iter().cloned().collect();
    loop {
        let items: Vec<Subspace> = set.iter().cloned().collect();
        let mut added = false;
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                for c in [a.intersect(b)?, a.sum(b)?] {
                    added |= set.insert(c);
                }
            }
        }
        if !added {
            return Ok(set);
        }
    }
}

/// Whether `proj_S(V₁ ∩ V₂) = proj_S(V₁) ∩ proj_S(V₂)` for every pair in the closure.
pub fn consistency_check(family: &[Subspace], users: UserSet) -> Result<bool> {
    let cl: Vec<Subspace> = closure(family)?.into_iter().collect();
    if let Some(v) = cl.first() {
        users.check_nonempty(v.ambient())?;
    }
    let projected: Vec<Subspace> = cl.iter().map(|v| v.project(users)).collect::<Result<_>>()?;
    for i in 0..cl.len() {
        for j in i + 1..cl.len() {
            let lhs = cl[i].intersect(&cl[j])?.project(users)?;
            let rhs = projected[i].intersect(&projected[j])?;
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Searches for a subspace `V_S` of dimension `|S|` projecting onto all of
/// 𝔽_q^S such that `proj_S(V_S ∩ V) = proj_S(V)` for every `V` in the family.
/// Returns the first witness in canonical order.
pub fn orthogonal_passage_check(family: &[Subspace], users: UserSet, cap: u128) -> Result<Option<Subspace>> {
    check_family(family)?;
    let Some(first) = family.first() else {
        return Ok(None);
    };
    let (field, m) = (first.field(), first.ambient());
    users.check_nonempty(m)?;
    let targets: Vec<Subspace> = family.iter().map(|v| v.project(users)).collect::<Result<_>>()?;
    for cand in Subspace::enumerate(field, m, Some(users.len()), cap)? {
        if !cand.project(users)?.is_full() {
            continue;
        }
        let mut ok = true;
        for (v, target) in family.iter().zip(&targets) {
            if &cand.intersect(v)?.project(users)? != target {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(cand));
        }
    }
    Ok(None)
}
