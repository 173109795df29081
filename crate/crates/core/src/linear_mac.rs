//! Combinations of linear deterministic channels.
//!
//! Such a channel picks subspace `V_k` with probability `p_k`, reveals `k`
//! and outputs `A_kᵀx` for a basis `A_k` of `V_k`. Everything about it that
//! matters here (mutual informations, the polarization transforms) is a
//! function of the weighted subspace list alone, so this module works on
//! that representation exactly and only materializes a table on request.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gfq::{GfError, PrimeField};
use crate::mac::{DiscreteMac, MacError};
use crate::region::{RateRegion, TooManyUsers};
use crate::subspace::{consistency_check, Subspace, SubspaceError};
use crate::users::{BadIndexSet, UserSet};

/// Weight-sum tolerance.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Default cap on `q^m × outputs` when building an explicit table.
pub const DEFAULT_TABLE_CAP: usize = 1 << 24;
/// Deepest level that may be enumerated exhaustively.
pub const MAX_ENUMERATE_DEPTH: usize = 20;
/// A state counts as extremal when one weight is at least `1 − EXTREMAL_TOL`.
pub const EXTREMAL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearMacError {
    #[error("weights sum to {0}, expected 1")]
    BadWeights(f64),
    #[error("weight {0} is not positive")]
    NonPositiveWeight(f64),
    #[error("explicit table of {size} entries exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("depth {depth} exceeds the enumeration cap of {cap}")]
    TooDeep { depth: usize, cap: usize },
    #[error("combination has no terms")]
    Empty,
    #[error("the closed-form recursion needs q = 2 and m = 2, got q = {q}, m = {m}")]
    NotBinaryTwoUser { q: u32, m: usize },
    #[error(transparent)]
    TooManyUsers(#[from] TooManyUsers),
    #[error(transparent)]
    BadIndexSet(#[from] BadIndexSet),
    #[error(transparent)]
    Subspace(#[from] SubspaceError),
    #[error(transparent)]
    Field(#[from] GfError),
    #[error(transparent)]
    Mac(#[from] MacError),
}

pub type Result<T> = std::result::Result<T, LinearMacError>;

/// `Σ p_k 𝒞_{V_k}` with distinct subspaces kept in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComboRepr", into = "ComboRepr")]
pub struct LinearComboMac {
    field: PrimeField,
    m: usize,
    terms: Vec<(f64, Subspace)>,
}

/// JSON layout: `{q, m, terms: [{p, basis: [[..], ..]}]}`; each basis lists
/// spanning row vectors of 𝔽_q^m (they need not be independent).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComboRepr {
    pub q: u32,
    pub m: usize,
    pub terms: Vec<TermRepr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermRepr {
    pub p: f64,
    pub basis: Vec<Vec<u32>>,
}

impl TryFrom<ComboRepr> for LinearComboMac {
    type Error = LinearMacError;

    fn try_from(r: ComboRepr) -> Result<Self> {
        let field = PrimeField::new(r.q)?;
        let terms = r
            .terms
            .iter()
            .map(|t| Ok((t.p, Subspace::from_vectors(field, r.m, &t.basis)?)))
            .collect::<Result<Vec<_>>>()?;
        LinearComboMac::new(field, r.m, terms)
    }
}

impl From<LinearComboMac> for ComboRepr {
    fn from(c: LinearComboMac) -> Self {
        let terms = c
            .terms
            .iter()
            .map(|(p, v)| TermRepr { p: *p, basis: (0..v.dim()).map(|i| v.basis().row(i).to_vec()).collect() })
            .collect();
        ComboRepr { q: c.field.order(), m: c.m, terms }
    }
}

impl LinearComboMac {
    /// Validates weights and merges terms with equal subspaces.
    pub fn new(field: PrimeField, m: usize, terms: Vec<(f64, Subspace)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(LinearMacError::Empty);
        }
        let mut merged: BTreeMap<Subspace, f64> = BTreeMap::new();
        for (p, v) in terms {
            if !(p > 0.0) {
                return Err(LinearMacError::NonPositiveWeight(p));
            }
            if v.field() != field || v.ambient() != m {
                return Err(SubspaceError::AmbientMismatch {
                    q1: field.order(),
                    m1: m,
                    q2: v.field().order(),
                    m2: v.ambient(),
                }
                .into());
            }
            *merged.entry(v).or_insert(0.0) += p;
        }
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(LinearMacError::BadWeights(total));
        }
        Ok(Self { field, m, terms: merged.into_iter().map(|(v, p)| (p, v)).collect() })
    }

    /// The single linear channel `𝒞_V`.
    pub fn single(v: Subspace) -> Self {
        Self { field: v.field(), m: v.ambient(), terms: vec![(1.0, v)] }
    }

    fn from_map(field: PrimeField, m: usize, merged: BTreeMap<Subspace, f64>) -> Self {
        let terms = merged.into_iter().filter(|(_, p)| *p > 0.0).map(|(v, p)| (p, v)).collect();
        Self { field, m, terms }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn users(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> &[(f64, Subspace)] {
        &self.terms
    }

    pub fn subspaces(&self) -> Vec<Subspace> {
        self.terms.iter().map(|(_, v)| v.clone()).collect()
    }

    /// Weight attached to `v` (zero when absent).
    pub fn weight_of(&self, v: &Subspace) -> f64 {
        self.terms.iter().find(|(_, w)| w == v).map_or(0.0, |(p, _)| *p)
    }

    /// Explicit transition table; term `k` contributes outputs
    /// `offset_k + index(A_kᵀx)` where `A_k` has the canonical basis as columns.
    pub fn to_explicit(&self, cap: usize) -> Result<DiscreteMac> {
        let n = self.field.pow_size(self.m);
        let outputs: usize = self.terms.iter().map(|(_, v)| self.field.pow_size(v.dim())).sum();
        let size = n.saturating_mul(outputs);
        if size > cap {
            return Err(LinearMacError::TooLarge { size, cap });
        }
        let mut table = vec![0.0; size];
        let mut offset = 0;
        for (p, v) in &self.terms {
            let a = v.basis_columns();
            for x in 0..n {
                let xv = self.field.digits(x, self.m);
                let y = offset + self.field.index_of(&a.apply_transpose(&xv));
                table[x * outputs + y] += p;
            }
            offset += self.field.pow_size(v.dim());
        }
        Ok(DiscreteMac::new(self.field, self.m, outputs, table)?)
    }

    /// `I[S] = Σ p_k dim proj_S(V_k)`.
    pub fn mutual_info(&self, users: UserSet) -> Result<f64> {
        users.check_nonempty(self.m)?;
        let mut acc = 0.0;
        for (p, v) in &self.terms {
            acc += p * v.project(users)?.dim() as f64;
        }
        Ok(acc)
    }

    pub fn sum_capacity(&self) -> f64 {
        self.terms.iter().map(|(p, v)| p * v.dim() as f64).sum()
    }

    pub fn all_mutual_info(&self) -> Vec<(UserSet, f64)> {
        UserSet::nonempty_subsets(self.m)
            .map(|s| (s, self.mutual_info(s).expect("subset is valid")))
            .collect()
    }

    fn combine(&self, op: impl Fn(&Subspace, &Subspace) -> Subspace) -> Self {
        let mut merged: BTreeMap<Subspace, f64> = BTreeMap::new();
        for (p1, v1) in &self.terms {
            for (p2, v2) in &self.terms {
                *merged.entry(op(v1, v2)).or_insert(0.0) += p1 * p2;
            }
        }
        Self::from_map(self.field, self.m, merged)
    }

    /// `P⁻ ≡ Σ p_{k₁} p_{k₂} 𝒞_{V_{k₁} ∩ V_{k₂}}`.
    pub fn minus(&self) -> Self {
        self.combine(|a, b| a.intersect(b).expect("terms share the ambient space"))
    }

    /// `P⁺ ≡ Σ p_{k₁} p_{k₂} 𝒞_{V_{k₁} + V_{k₂}}`.
    pub fn plus(&self) -> Self {
        self.combine(|a, b| a.sum(b).expect("terms share the ambient space"))
    }

    /// Whether `I[S]` is preserved by polarization: the subspace family is
    /// consistent with respect to `S`.
    pub fn preservation_check(&self, users: UserSet) -> Result<bool> {
        users.check_nonempty(self.m)?;
        Ok(consistency_check(&self.subspaces(), users)?)
    }

    /// Constraint list and dominant-face corner points (m ≤ 4).
    pub fn region(&self) -> Result<RateRegion> {
        if self.m > crate::region::MAX_REGION_USERS {
            return Err(TooManyUsers(self.m).into());
        }
        Ok(RateRegion::from_fn(self.m, |s| self.mutual_info(s).expect("subset is valid"))?)
    }

    /// The five-weight view when `q = 2, m = 2`.
    pub fn to_binary2(&self) -> Result<Binary2State> {
        if self.field.order() != 2 || self.m != 2 {
            return Err(LinearMacError::NotBinaryTwoUser { q: self.field.order(), m: self.m });
        }
        let vs = binary2_subspaces();
        let mut p = [0.0; 5];
        for (k, v) in vs.iter().enumerate() {
            p[k] = self.weight_of(v);
        }
        Ok(Binary2State { p })
    }
}

pub fn to_explicit(p: &LinearComboMac, cap: usize) -> Result<DiscreteMac> {
    p.to_explicit(cap)
}

pub fn li_mutual_info_s(p: &LinearComboMac, users: UserSet) -> Result<f64> {
    p.mutual_info(users)
}

pub fn li_minus(p: &LinearComboMac) -> LinearComboMac {
    p.minus()
}

pub fn li_plus(p: &LinearComboMac) -> LinearComboMac {
    p.plus()
}

pub fn preservation_check(p: &LinearComboMac, users: UserSet) -> Result<bool> {
    p.preservation_check(users)
}

pub fn region_vertices(p: &LinearComboMac) -> Result<RateRegion> {
    p.region()
}

/// The subspaces of 𝔽₂² in the order `V₀ = {0}`, `V₁ = ⟨(1,0)⟩`,
/// `V₂ = ⟨(0,1)⟩`, `V₃ = ⟨(1,1)⟩`, `V₄ = 𝔽₂²`.
pub fn binary2_subspaces() -> [Subspace; 5] {
    let f = PrimeField::new(2).expect("2 is prime");
    let line = |v: Vec<u32>| Subspace::from_vectors(f, 2, &[v]).expect("valid vector");
    [Subspace::zero(f, 2), line(vec![1, 0]), line(vec![0, 1]), line(vec![1, 1]), Subspace::full(f, 2)]
}

/// Weights `(p₀, …, p₄)` of a binary two-user combination, indexed as in
/// [`binary2_subspaces`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binary2State {
    pub p: [f64; 5],
}

impl Binary2State {
    pub fn new(p: [f64; 5]) -> Result<Self> {
        if let Some(&bad) = p.iter().find(|&&x| !(x >= 0.0)) {
            return Err(LinearMacError::NonPositiveWeight(bad));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(LinearMacError::BadWeights(total));
        }
        Ok(Self { p })
    }

    pub fn uniform() -> Self {
        Self { p: [0.2; 5] }
    }

    /// `I[{1}] = p₁ + p₃ + p₄`.
    pub fn i1(&self) -> f64 {
        self.p[1] + self.p[3] + self.p[4]
    }

    /// `I[{2}] = p₂ + p₃ + p₄`.
    pub fn i2(&self) -> f64 {
        self.p[2] + self.p[3] + self.p[4]
    }

    /// `I = p₁ + p₂ + p₃ + 2p₄`.
    pub fn sum_capacity(&self) -> f64 {
        self.p[1] + self.p[2] + self.p[3] + 2.0 * self.p[4]
    }

    pub fn is_extremal(&self, tol: f64) -> bool {
        self.p.iter().any(|&x| x >= 1.0 - tol)
    }

    /// Both children of one polarization step, in closed form.
    ///
    /// The `p₄⁺` polynomial is the mirror image of `p₀⁻`:
    /// `p₄² + 2p₄(p₀+p₁+p₂+p₃) + 2(p₁p₂ + p₂p₃ + p₁p₃)` — a sum of two distinct
    /// lines is the whole plane, and anything plus `V₄` is `V₄`.
    pub fn step(&self) -> (Binary2State, Binary2State) {
        let [p0, p1, p2, p3, p4] = self.p;
        let cross = 2.0 * (p1 * p2 + p2 * p3 + p1 * p3);
        let minus = [
            p0 * p0 + 2.0 * p0 * (p1 + p2 + p3 + p4) + cross,
            p1 * p1 + 2.0 * p1 * p4,
            p2 * p2 + 2.0 * p2 * p4,
            p3 * p3 + 2.0 * p3 * p4,
            p4 * p4,
        ];
        let plus = [
            p0 * p0,
            p1 * p1 + 2.0 * p1 * p0,
            p2 * p2 + 2.0 * p2 * p0,
            p3 * p3 + 2.0 * p3 * p0,
            p4 * p4 + 2.0 * p4 * (p0 + p1 + p2 + p3) + cross,
        ];
        (Binary2State { p: minus }, Binary2State { p: plus })
    }

    pub fn to_combo(&self) -> LinearComboMac {
        let f = PrimeField::new(2).expect("2 is prime");
        let mut merged = BTreeMap::new();
        for (p, v) in self.p.iter().zip(binary2_subspaces()) {
            merged.insert(v, *p);
        }
        LinearComboMac::from_map(f, 2, merged)
    }

    /// The sufficient condition `p₃ ≤ max(p₁, p₂)` for total loss in the
    /// dominant face.
    pub fn total_loss_predict(&self) -> bool {
        self.p[3] <= self.p[1].max(self.p[2])
    }
}

pub fn binary2_step(st: &Binary2State) -> (Binary2State, Binary2State) {
    st.step()
}

pub fn total_loss_predict(st: &Binary2State) -> bool {
    st.total_loss_predict()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvolveMode {
    /// All `2^l` branches.
    Enumerate,
    /// `paths` uniformly random sign sequences from a seeded generator.
    Sample { paths: usize, seed: u64 },
}

/// Statistics over the branches at one depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: usize,
    /// Branch averages `p_k^{(l)}`.
    pub p: [f64; 5],
    /// Standard errors of `p` (sampling mode only).
    pub p_stderr: Option<[f64; 5]>,
    pub i1: f64,
    pub i2: f64,
    pub i: f64,
    pub extremal_fraction: f64,
    pub branches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveReport {
    pub initial: Binary2State,
    pub mode: EvolveMode,
    pub levels: Vec<LevelStats>,
}

impl EvolveReport {
    pub fn last(&self) -> &LevelStats {
        self.levels.last().expect("level 0 is always present")
    }
}

fn level_stats(level: usize, states: &[Binary2State], with_stderr: bool) -> LevelStats {
    let n = states.len() as f64;
    let mut mean = [0.0; 5];
    for st in states {
        for k in 0..5 {
            mean[k] += st.p[k];
        }
    }
    mean.iter_mut().for_each(|x| *x /= n);
    let p_stderr = with_stderr.then(|| {
        let mut var = [0.0; 5];
        for st in states {
            for k in 0..5 {
                var[k] += (st.p[k] - mean[k]).powi(2);
            }
        }
        let denom = (n - 1.0).max(1.0);
        var.map(|v| (v / denom / n).sqrt())
    });
    let avg = Binary2State { p: mean };
    let extremal = states.iter().filter(|s| s.is_extremal(EXTREMAL_TOL)).count() as f64 / n;
    LevelStats {
        level,
        p: mean,
        p_stderr,
        i1: avg.i1(),
        i2: avg.i2(),
        i: avg.sum_capacity(),
        extremal_fraction: extremal,
        branches: states.len(),
    }
}

/// Evolves a binary two-user state `l` levels deep, reporting every level.
pub fn binary2_evolve(st: &Binary2State, l: usize, mode: EvolveMode) -> Result<EvolveReport> {
    let mut levels = Vec::with_capacity(l + 1);
    match mode {
        EvolveMode::Enumerate => {
            if l > MAX_ENUMERATE_DEPTH {
                return Err(LinearMacError::TooDeep { depth: l, cap: MAX_ENUMERATE_DEPTH });
            }
            // children of branch index b at depth k are b and b | 1<<k
            let mut states = vec![*st];
            levels.push(level_stats(0, &states, false));
            for level in 1..=l {
                let mut next = vec![*st; states.len() * 2];
                let half = states.len();
                for (b, s) in states.iter().enumerate() {
                    let (minus, plus) = s.step();
                    next[b] = minus;
                    next[b + half] = plus;
                }
                states = next;
                levels.push(level_stats(level, &states, false));
            }
        }
        EvolveMode::Sample { paths, seed } => {
            if paths == 0 {
                return Err(LinearMacError::TooDeep { depth: 0, cap: 0 });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut states = vec![*st; paths];
            levels.push(level_stats(0, &states, true));
            for level in 1..=l {
                for s in states.iter_mut() {
                    let (minus, plus) = s.step();
                    *s = if rng.gen::<bool>() { plus } else { minus };
                }
                levels.push(level_stats(level, &states, true));
            }
        }
    }
    Ok(EvolveReport { initial: *st, mode, levels })
}

/// All depth-`l` branches of a combination, indexed by branch signature
/// (bit `i` set when step `i+1` is `+`).
pub fn combo_tree(p: &LinearComboMac, l: usize) -> Result<Vec<Vec<LinearComboMac>>> {
    if l > MAX_ENUMERATE_DEPTH {
        return Err(LinearMacError::TooDeep { depth: l, cap: MAX_ENUMERATE_DEPTH });
    }
    let mut levels = vec![vec![p.clone()]];
    for _ in 0..l {
        let prev = levels.last().expect("non-empty");
        let half = prev.len();
        let mut next = Vec::with_capacity(half * 2);
        next.extend(prev.iter().map(LinearComboMac::minus));
        next.extend(prev.iter().map(LinearComboMac::plus));
        debug_assert_eq!(next.len(), 2 * half);
        levels.push(next);
    }
    Ok(levels)
}

/// Per-level branch averages of every `I[S]`, for any `q` and `m`.
pub fn combo_evolve(p: &LinearComboMac, l: usize) -> Result<Vec<Vec<(UserSet, f64)>>> {
    let tree = combo_tree(p, l)?;
    Ok(tree
        .iter()
        .map(|level| {
            UserSet::nonempty_subsets(p.users())
                .map(|s| {
                    let avg = level.iter().map(|c| c.mutual_info(s).expect("valid subset")).sum::<f64>() / level.len() as f64;
                    (s, avg)
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(labels: &[usize]) -> UserSet {
        UserSet::from_labels(labels, 2).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn explicit_examples() {
        let vs = binary2_subspaces();
        let full = LinearComboMac::single(vs[4].clone());
        assert!((full.to_explicit(DEFAULT_TABLE_CAP).unwrap().sum_capacity() - 2.0).abs() < 1e-12);
        let zero = LinearComboMac::single(vs[0].clone());
        assert!(zero.to_explicit(DEFAULT_TABLE_CAP).unwrap().sum_capacity().abs() < 1e-12);
        let uni = Binary2State::uniform().to_combo();
        let e = uni.to_explicit(DEFAULT_TABLE_CAP).unwrap();
        assert!((e.mutual_info(s(&[1])).unwrap() - 0.6).abs() < 1e-12);
        assert!((e.sum_capacity() - 1.0).abs() < 1e-12);
        assert!(matches!(uni.to_explicit(10), Err(LinearMacError::TooLarge { .. })));
    }

    #[test]
    fn li_info_examples() {
        let vs = binary2_subspaces();
        assert_eq!(LinearComboMac::single(vs[4].clone()).mutual_info(s(&[1, 2])).unwrap(), 2.0);
        let uni = Binary2State::uniform().to_combo();
        assert!((uni.mutual_info(s(&[2])).unwrap() - 0.6).abs() < 1e-12);
        assert!((uni.sum_capacity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_examples() {
        let vs = binary2_subspaces();
        let single = LinearComboMac::single(vs[3].clone());
        assert_eq!(single.minus(), single);
        assert_eq!(single.plus(), single);
        let st = Binary2State::new([0.0, 0.5, 0.5, 0.0, 0.0]).unwrap();
        let c = st.to_combo();
        assert!(close(&c.minus().to_binary2().unwrap().p, &[0.5, 0.25, 0.25, 0.0, 0.0], 1e-15));
        assert!(close(&c.plus().to_binary2().unwrap().p, &[0.0, 0.25, 0.25, 0.0, 0.5], 1e-15));
        let (m, p) = st.step();
        assert!(close(&m.p, &[0.5, 0.25, 0.25, 0.0, 0.0], 1e-15));
        assert!(close(&p.p, &[0.0, 0.25, 0.25, 0.0, 0.5], 1e-15));
    }

    #[test]
    fn step_fixed_points() {
        for k in [0, 4] {
            let mut p = [0.0; 5];
            p[k] = 1.0;
            let st = Binary2State::new(p).unwrap();
            let (m, pl) = st.step();
            assert_eq!(m, st);
            assert_eq!(pl, st);
        }
    }

    #[test]
    fn preservation_examples() {
        let vs = binary2_subspaces();
        assert!(LinearComboMac::single(vs[4].clone()).preservation_check(s(&[1])).unwrap());
        let c = LinearComboMac::new(vs[1].field(), 2, vec![(0.3, vs[1].clone()), (0.7, vs[3].clone())]).unwrap();
        assert!(!c.preservation_check(s(&[1])).unwrap());
    }

    #[test]
    fn total_loss_examples() {
        assert!(Binary2State::new([0.0, 0.3, 0.3, 0.1, 0.3]).unwrap().total_loss_predict());
        assert!(!Binary2State::new([0.0, 0.1, 0.1, 0.5, 0.3]).unwrap().total_loss_predict());
        assert!(Binary2State::new([0.0, 0.2, 0.2, 0.2, 0.4]).unwrap().total_loss_predict());
    }

    #[test]
    fn region_examples() {
        let vs = binary2_subspaces();
        let r = LinearComboMac::single(vs[4].clone()).region().unwrap();
        assert_eq!(r.vertices, vec![vec![1.0, 1.0]]);
        let r = Binary2State::uniform().to_combo().region().unwrap();
        assert_eq!(r.vertices, vec![vec![0.4, 0.6], vec![0.6, 0.4]]);
        let r = LinearComboMac::single(vs[0].clone()).region().unwrap();
        assert_eq!(r.vertices, vec![vec![0.0, 0.0]]);
        let f = PrimeField::new(2).unwrap();
        assert!(matches!(
            LinearComboMac::single(Subspace::full(f, 5)).region(),
            Err(LinearMacError::TooManyUsers(_))
        ));
    }

    #[test]
    fn evolve_basics() {
        let st = Binary2State::new([0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let r = binary2_evolve(&st, 0, EvolveMode::Enumerate).unwrap();
        assert_eq!(r.levels.len(), 1);
        assert!(close(&r.levels[0].p, &st.p, 1e-15));
        let r = binary2_evolve(&st, 10, EvolveMode::Enumerate).unwrap();
        for lv in &r.levels {
            assert!((lv.i - st.sum_capacity()).abs() < 1e-9);
        }
        assert!(matches!(binary2_evolve(&st, 21, EvolveMode::Enumerate), Err(LinearMacError::TooDeep { .. })));
        let a = binary2_evolve(&st, 30, EvolveMode::Sample { paths: 200, seed: 7 }).unwrap();
        let b = binary2_evolve(&st, 30, EvolveMode::Sample { paths: 200, seed: 7 }).unwrap();
        assert_eq!(a, b);
        assert!(a.last().p_stderr.is_some());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"q":2,"m":2,"terms":[{"p":0.5,"basis":[[1,1]]},{"p":0.5,"basis":[[1,1],[0,0]]}]}"#;
        let c: LinearComboMac = serde_json::from_str(text).unwrap();
        assert_eq!(c.terms().len(), 1);
        let back: LinearComboMac = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"q":2,"m":2,"terms":[{"p":0.4,"basis":[[1,1]]}]}"#;
        assert!(serde_json::from_str::<LinearComboMac>(bad).is_err());
    }

    fn arb_state() -> impl Strategy<Value = Binary2State> {
        prop::array::uniform5(0.0f64..1.0).prop_filter_map("non-degenerate", |raw| {
            let t: f64 = raw.iter().sum();
            (t > 1e-6).then(|| {
                let mut p = raw.map(|x| x / t);
                let t2: f64 = p.iter().sum();
                p[0] += 1.0 - t2;
                Binary2State { p: p.map(|x| x.max(0.0)) }
            })
        })
    }

    proptest! {
        #[test]
        fn step_conserves_weight_and_matches_lattice(st in arb_state()) {
            let (m, p) = st.step();
            prop_assert!((m.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((p.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let c = st.to_combo();
            let cm = c.minus().to_binary2()?;
            let cp = c.plus().to_binary2()?;
            prop_assert!(close(&cm.p, &m.p, 1e-12));
            prop_assert!(close(&cp.p, &p.p, 1e-12));
        }

        #[test]
        fn explicit_and_li_informations_agree(st in arb_state()) {
            let c = st.to_combo();
            let e = c.to_explicit(DEFAULT_TABLE_CAP)?;
            for (set, i) in c.all_mutual_info() {
                prop_assert!((e.mutual_info(set)? - i).abs() < 1e-9);
            }
        }
    }
}
