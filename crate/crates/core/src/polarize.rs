//! The polarization tree, emergent linear-channel detection and code
//! construction.
//!
//! Branch signatures `s = s₁…s_l` apply `s₁` first. A signature is stored as
//! an integer with bit `i−1` set when `s_i = +`; the successive-cancellation
//! order (last differing position decides, `−` before `+`) is then plain
//! integer order on that index.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gfq::{FieldMatrix, PrimeField};
use crate::mac::{DiscreteMac, MacError, DEFAULT_MERGE_TOL};
use crate::subspace::Subspace;
use crate::users::UserSet;

/// Default cap on a merged output alphabet.
pub const DEFAULT_MAX_OUTPUTS: usize = 100_000;
/// Deepest tree that may be enumerated.
pub const MAX_TREE_DEPTH: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolarizeError {
    #[error("signatures have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid branch signature {0:?}: use '-' and '+'")]
    BadSignature(String),
    #[error("merged output alphabet of {outputs} exceeds the cap of {cap}")]
    TooLarge { outputs: usize, cap: usize },
    #[error("depth {0} exceeds the enumeration cap of {MAX_TREE_DEPTH}")]
    TooDeep(usize),
    #[error("eps must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error("inconsistent code specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Mac(MacError),
}

impl From<MacError> for PolarizeError {
    fn from(e: MacError) -> Self {
        match e {
            MacError::TooLarge { outputs, cap } => PolarizeError::TooLarge { outputs, cap },
            other => PolarizeError::Mac(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, PolarizeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

/// A branch signature in `{−,+}^l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BranchSig {
    signs: Vec<Sign>,
}

impl BranchSig {
    pub fn new(signs: Vec<Sign>) -> Self {
        Self { signs }
    }

    pub fn empty() -> Self {
        Self { signs: Vec::new() }
    }

    /// Signature of length `l` from its index (bit `i` is step `i+1`).
    pub fn from_index(index: usize, l: usize) -> Self {
        let signs = (0..l).map(|i| if index >> i & 1 == 1 { Sign::Plus } else { Sign::Minus }).collect();
        Self { signs }
    }

    pub fn index(&self) -> usize {
        self.signs.iter().enumerate().filter(|(_, s)| **s == Sign::Plus).map(|(i, _)| 1usize << i).sum()
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    /// All signatures of length `l` in decoding order.
    pub fn all(l: usize) -> impl Iterator<Item = BranchSig> {
        (0..1usize << l).map(move |i| BranchSig::from_index(i, l))
    }
}

impl fmt::Display for BranchSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.signs {
            f.write_str(if *s == Sign::Plus { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for BranchSig {
    type Err = PolarizeError;

    fn from_str(text: &str) -> Result<Self> {
        let signs = text
            .chars()
            .map(|c| match c {
                '-' => Ok(Sign::Minus),
                '+' => Ok(Sign::Plus),
                _ => Err(PolarizeError::BadSignature(text.to_string())),
            })
            .collect::<Result<_>>()?;
        Ok(Self { signs })
    }
}

impl Serialize for BranchSig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BranchSig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// The decoding order: the last position at which the signatures differ
/// decides, and `−` comes before `+`.
pub fn branch_order_cmp(a: &BranchSig, b: &BranchSig) -> Result<Ordering> {
    if a.len() != b.len() {
        return Err(PolarizeError::LengthMismatch(a.len(), b.len()));
    }
    for (x, y) in a.signs.iter().zip(&b.signs).rev() {
        match (x, y) {
            (Sign::Minus, Sign::Plus) => return Ok(Ordering::Less),
            (Sign::Plus, Sign::Minus) => return Ok(Ordering::Greater),
            _ => {}
        }
    }
    Ok(Ordering::Equal)
}

/// Merging tolerance and alphabet cap applied after every transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizeOptions {
    pub merge_tol: f64,
    pub max_outputs: usize,
}

impl Default for PolarizeOptions {
    fn default() -> Self {
        Self { merge_tol: DEFAULT_MERGE_TOL, max_outputs: DEFAULT_MAX_OUTPUTS }
    }
}

fn step(p: &DiscreteMac, sign: Sign, opts: &PolarizeOptions) -> Result<DiscreteMac> {
    Ok(match sign {
        Sign::Minus => p.transform_minus_merged(opts.merge_tol, opts.max_outputs)?,
        Sign::Plus => p.transform_plus_merged(opts.merge_tol, opts.max_outputs)?,
    })
}

/// `P^s`: the transforms applied left to right, merging after each step.
pub fn polarize_branch(p: &DiscreteMac, s: &BranchSig, opts: &PolarizeOptions) -> Result<DiscreteMac> {
    let mut cur = p.merge_outputs(opts.merge_tol);
    for &sign in s.signs() {
        cur = step(&cur, sign, opts)?;
    }
    Ok(cur)
}

/// Every level `0..=l` of the tree; level `k` is indexed by branch index.
pub fn polarize_tree(p: &DiscreteMac, l: usize, opts: &PolarizeOptions) -> Result<Vec<Vec<DiscreteMac>>> {
    if l > MAX_TREE_DEPTH {
        return Err(PolarizeError::TooDeep(l));
    }
    let mut levels = vec![vec![p.merge_outputs(opts.merge_tol)]];
    for _ in 0..l {
        let prev = levels.last().expect("non-empty");
        let children: Vec<(DiscreteMac, DiscreteMac)> = prev
            .par_iter()
            .map(|c| Ok((step(c, Sign::Minus, opts)?, step(c, Sign::Plus, opts)?)))
            .collect::<Result<_>>()?;
        let (minus, plus): (Vec<_>, Vec<_>) = children.into_iter().unzip();
        levels.push(minus.into_iter().chain(plus).collect());
    }
    Ok(levels)
}

/// The `2^l` channels at depth `l`, indexed by branch index.
pub fn polarize_level(p: &DiscreteMac, l: usize, opts: &PolarizeOptions) -> Result<Vec<DiscreteMac>> {
    if l > MAX_TREE_DEPTH {
        return Err(PolarizeError::TooDeep(l));
    }
    let mut level = vec![p.merge_outputs(opts.merge_tol)];
    for _ in 0..l {
        let children: Vec<(DiscreteMac, DiscreteMac)> = level
            .par_iter()
            .map(|c| Ok((step(c, Sign::Minus, opts)?, step(c, Sign::Plus, opts)?)))
            .collect::<Result<_>>()?;
        let (minus, plus): (Vec<_>, Vec<_>) = children.into_iter().unzip();
        level = minus.into_iter().chain(plus).collect();
    }
    Ok(level)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub level: usize,
    pub users: UserSet,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub m: usize,
    pub rows: Vec<MartingaleRow>,
    /// Full-set average stays within 1e-6 of its level-0 value.
    pub full_set_constant: bool,
    /// Every strict-subset average is non-increasing within 1e-9.
    pub strict_non_increasing: bool,
}

impl MartingaleReport {
    pub fn average(&self, level: usize, users: UserSet) -> Option<f64> {
        self.rows.iter().find(|r| r.level == level && r.users == users).map(|r| r.average)
    }
}

/// Branch averages of every `I[S]` for levels `0..=l`.
pub fn martingale_report(p: &DiscreteMac, l: usize, opts: &PolarizeOptions) -> Result<MartingaleReport> {
    let tree = polarize_tree(p, l, opts)?;
    Ok(martingale_from_tree(p.users(), &tree))
}

pub fn martingale_from_tree(m: usize, tree: &[Vec<DiscreteMac>]) -> MartingaleReport {
    let full = UserSet::full(m);
    let mut rows = Vec::new();
    for (level, chans) in tree.iter().enumerate() {
        for s in UserSet::nonempty_subsets(m) {
            let total: f64 = chans.par_iter().map(|c| c.mutual_info(s).expect("valid subset")).sum();
            rows.push(MartingaleRow { level, users: s, average: total / chans.len() as f64 });
        }
    }
    let mut full_set_constant = true;
    let mut strict_non_increasing = true;
    let base_full = rows.iter().find(|r| r.level == 0 && r.users == full).map(|r| r.average).unwrap_or(0.0);
    for r in &rows {
        if r.users == full {
            full_set_constant &= (r.average - base_full).abs() <= 1e-6;
        } else if r.level > 0 {
            let prev = rows.iter().find(|x| x.level == r.level - 1 && x.users == r.users).expect("previous level");
            strict_non_increasing &= r.average <= prev.average + 1e-9;
        }
    }
    MartingaleReport { m, rows, full_set_constant, strict_non_increasing }
}

/// One representative per line of 𝔽_q^m (first nonzero coordinate equal to
/// 1), in increasing input-index order.
pub fn projective_directions(field: PrimeField, m: usize) -> Vec<Vec<u32>> {
    (1..field.pow_size(m))
        .map(|i| field.digits(i, m))
        .filter(|v| v.iter().find(|&&x| x != 0) == Some(&1))
        .collect()
}

/// Capacity and Bhattacharyya parameter of `P[α|Φ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionStat {
    pub alpha: Vec<u32>,
    pub info: f64,
    pub z: f64,
}

pub fn direction_stat(p: &DiscreteMac, alpha: &[u32]) -> Result<DirectionStat> {
    let a = FieldMatrix::from_columns(p.field(), p.users(), &[alpha.to_vec()]).map_err(MacError::from)?;
    let r = p.restrict(&a, None)?;
    Ok(DirectionStat { alpha: alpha.to_vec(), info: r.sum_capacity(), z: r.bhattacharyya()? })
}

pub fn direction_stats(p: &DiscreteMac) -> Result<Vec<DirectionStat>> {
    projective_directions(p.field(), p.users()).iter().map(|a| direction_stat(p, a)).collect()
}

/// A detected linear structure: `A_s` (columns are the canonical basis of
/// the good-direction span) and its rank `r_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub a: FieldMatrix,
    pub rank: usize,
}

/// Collects directions with `I(P[α|Φ]) > 1 − eps`; succeeds when every
/// direction in their span is itself good.
pub fn detect_linear(p: &DiscreteMac, eps: f64) -> Result<Option<Detection>> {
    let stats = direction_stats(p)?;
    Ok(detect_from_stats(p.field(), p.users(), &stats, eps))
}

pub fn detect_from_stats(field: PrimeField, m: usize, stats: &[DirectionStat], eps: f64) -> Option<Detection> {
    let good: Vec<Vec<u32>> = stats.iter().filter(|d| d.info > 1.0 - eps).map(|d| d.alpha.clone()).collect();
    let span = Subspace::from_vectors(field, m, &good).expect("directions live in F_q^m");
    let all_good = stats
        .iter()
        .filter(|d| span.contains(&d.alpha))
        .all(|d| d.info > 1.0 - eps);
    all_good.then(|| Detection { a: span.basis_columns(), rank: span.dim() })
}

/// Per-branch direction statistics and detection result.
#[derive(Debug, Clone)]
pub struct BranchReport {
    pub sig: BranchSig,
    pub channel: DiscreteMac,
    pub directions: Vec<DirectionStat>,
    pub detected: Option<Detection>,
}

pub fn branch_reports(p: &DiscreteMac, l: usize, eps: f64, opts: &PolarizeOptions) -> Result<Vec<BranchReport>> {
    check_eps(eps)?;
    let level = polarize_level(p, l, opts)?;
    level
        .into_par_iter()
        .enumerate()
        .map(|(i, channel)| {
            let directions = direction_stats(&channel)?;
            let detected = detect_from_stats(channel.field(), channel.users(), &directions, eps);
            Ok(BranchReport { sig: BranchSig::from_index(i, l), channel, directions, detected })
        })
        .collect()
}

/// Fraction of branches whose per-direction capacities are all within
/// `threshold` of 0 or 1.
pub fn polarized_fraction(reports: &[BranchReport], threshold: f64) -> f64 {
    let n = reports.iter().filter(|r| r.directions.iter().all(|d| d.info.min(1.0 - d.info) < threshold)).count();
    n as f64 / reports.len().max(1) as f64
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(PolarizeError::BadEps(eps));
    }
    Ok(())
}

/// Per-branch part of a [`CodeSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCode {
    pub sig: BranchSig,
    /// `s ∈ E_l`.
    pub good: bool,
    /// `I(P^s)`.
    pub capacity: f64,
    /// `r_s` (0 when not in `E_l`).
    pub rank: usize,
    /// Columns `α₁ … α_{r_s}` of `A_s`, in decision order.
    pub directions: Vec<Vec<u32>>,
    /// `Z(P^s[α_h|Φ])` per column.
    pub z: Vec<f64>,
    /// One-based labels of the information users `S_s`.
    pub info_users: Vec<usize>,
    /// `F(s,k)` for `k = 1..m`.
    pub frozen: Vec<bool>,
}

impl BranchCode {
    pub fn a_matrix(&self, field: PrimeField, m: usize) -> FieldMatrix {
        FieldMatrix::from_columns(field, m, &self.directions).expect("directions have m entries")
    }

    pub fn z_sum(&self) -> f64 {
        self.z.iter().sum()
    }
}

/// A constructed polar code for an m-user MAC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub q: u32,
    pub m: usize,
    pub l: usize,
    pub eps: f64,
    pub z_budget: f64,
    /// `I(P)` of the channel the code was built for.
    pub capacity: f64,
    /// Branches indexed by branch index (decoding order).
    pub branches: Vec<BranchCode>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// `Σ_{s∈E_l} q Σ_h Z(P^s[α_h|Φ])`.
    pub union_bound: f64,
    pub good_count: usize,
}

impl CodeSpec {
    pub fn field(&self) -> PrimeField {
        PrimeField::new(self.q).expect("validated modulus")
    }

    pub fn block_length(&self) -> usize {
        1 << self.l
    }

    pub fn info_symbol_count(&self) -> usize {
        self.branches.iter().map(|b| b.info_users.len()).sum()
    }

    /// Checks the internal invariants of the specification.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PolarizeError::InvalidSpec(msg));
        let field = PrimeField::new(self.q).map_err(|e| PolarizeError::Mac(e.into()))?;
        if self.branches.len() != 1 << self.l {
            return bad(format!("{} branches for l = {}", self.branches.len(), self.l));
        }
        let mut counts = vec![0usize; self.m];
        let mut total_rank = 0;
        let mut union = 0.0;
        for (i, b) in self.branches.iter().enumerate() {
            if b.sig.len() != self.l || b.sig.index() != i {
                return bad(format!("branch {i} has signature {}", b.sig));
            }
            if b.frozen.len() != self.m {
                return bad(format!("branch {} has {} frozen flags", b.sig, b.frozen.len()));
            }
            if b.directions.iter().any(|d| d.len() != self.m || d.iter().any(|&x| x >= self.q)) {
                return bad(format!("branch {} has a malformed direction", b.sig));
            }
            if b.z.len() != b.directions.len() {
                return bad(format!("branch {} has {} Z values", b.sig, b.z.len()));
            }
            if !b.good {
                if b.rank != 0 || !b.info_users.is_empty() || b.frozen.iter().any(|f| !f) {
                    return bad(format!("branch {} is outside E_l but carries information", b.sig));
                }
                continue;
            }
            let a = b.a_matrix(field, self.m);
            if a.rank() != b.rank || b.directions.len() != b.rank || b.info_users.len() != b.rank {
                return bad(format!("branch {}: rank bookkeeping is inconsistent", b.sig));
            }
            let rows: Vec<usize> = b.info_users.iter().map(|k| k - 1).collect();
            if rows.iter().any(|&k| k >= self.m) || a.select_rows(&rows).rank() != b.rank {
                return bad(format!("branch {}: information rows of A_s are dependent", b.sig));
            }
            for k in 0..self.m {
                if b.frozen[k] == rows.contains(&k) {
                    return bad(format!("branch {}: F(s,{}) disagrees with S_s", b.sig, k + 1));
                }
                if !b.frozen[k] {
                    counts[k] += 1;
                }
            }
            total_rank += b.rank;
            union += self.q as f64 * b.z_sum();
        }
        let n = (1usize << self.l) as f64;
        for (k, &c) in counts.iter().enumerate() {
            if (self.rates.get(k).copied().unwrap_or(f64::NAN) - c as f64 / n).abs() > 1e-12 {
                return bad(format!("rate of user {} disagrees with the frozen map", k + 1));
            }
        }
        if self.rates.len() != self.m || (self.sum_rate - total_rank as f64 / n).abs() > 1e-12 {
            return bad("sum rate disagrees with the branch ranks".into());
        }
        if (self.union_bound - union).abs() > 1e-9 * union.max(1.0) {
            return bad("union bound disagrees with the branch Z values".into());
        }
        Ok(())
    }
}

/// Lexicographically smallest set of row indices of `a` whose rows are
/// linearly independent and of full size `rank(a)`.
pub fn independent_rows(a: &FieldMatrix) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..a.rows() {
        let mut trial = chosen.clone();
        trial.push(i);
        if a.select_rows(&trial).rank() == trial.len() {
            chosen = trial;
        }
    }
    chosen
}

/// Builds the code: detection per branch, the `E_l` membership test with
/// `eps/2` margins and the `Z` budget, then `S_s` and the frozen map.
pub fn build_code(p: &DiscreteMac, l: usize, eps: f64, z_budget: f64, opts: &PolarizeOptions) -> Result<CodeSpec> {
    let reports = branch_reports(p, l, eps, opts)?;
    Ok(code_from_reports(p, l, eps, z_budget, &reports))
}

pub fn code_from_reports(p: &DiscreteMac, l: usize, eps: f64, z_budget: f64, reports: &[BranchReport]) -> CodeSpec {
    let (field, m) = (p.field(), p.users());
    let branches: Vec<BranchCode> = reports
        .par_iter()
        .map(|r| {
            let capacity = r.channel.sum_capacity();
            let frozen_branch = BranchCode {
                sig: r.sig.clone(),
                good: false,
                capacity,
                rank: 0,
                directions: Vec::new(),
                z: Vec::new(),
                info_users: Vec::new(),
                frozen: vec![true; m],
            };
            let Some(det) = &r.detected else {
                return frozen_branch;
            };
            let directions = det.a.columns();
            let (joint_info, z) = if det.rank == 0 {
                (0.0, Vec::new())
            } else {
                let joint = r.channel.restrict(&det.a, None).expect("A_s has full column rank").sum_capacity();
                let z: Vec<f64> = directions
                    .iter()
                    .map(|alpha| {
                        r.directions
                            .iter()
                            .find(|d| &d.alpha == alpha)
                            .map(|d| d.z)
                            .unwrap_or_else(|| direction_stat(&r.channel, alpha).expect("nonzero direction").z)
                    })
                    .collect();
                (joint, z)
            };
            let good = (joint_info - capacity).abs() < eps / 2.0
                && (det.rank as f64 - capacity).abs() < eps / 2.0
                && z.iter().sum::<f64>() < z_budget;
            if !good {
                return frozen_branch;
            }
            let rows = independent_rows(&det.a);
            let frozen = (0..m).map(|k| !rows.contains(&k)).collect();
            BranchCode {
                sig: r.sig.clone(),
                good: true,
                capacity,
                rank: det.rank,
                directions,
                z,
                info_users: rows.iter().map(|k| k + 1).collect(),
                frozen,
            }
        })
        .collect();
    let n = (1usize << l) as f64;
    let rates: Vec<f64> = (0..m)
        .map(|k| branches.iter().filter(|b| b.good && !b.frozen[k]).count() as f64 / n)
        .collect();
    let sum_rate = branches.iter().map(|b| b.rank).sum::<usize>() as f64 / n;
    let union_bound = branches.iter().filter(|b| b.good).map(|b| field.order() as f64 * b.z_sum()).sum();
    let good_count = branches.iter().filter(|b| b.good).count();
    CodeSpec {
        q: field.order(),
        m,
        l,
        eps,
        z_budget,
        capacity: p.sum_capacity(),
        branches,
        rates,
        sum_rate,
        union_bound,
        good_count,
    }
}

/// The threshold `2^{−2^{β′ l}}` used in the asymptotic analysis, for reporting.
pub fn asymptotic_z_threshold(beta_prime: f64, l: usize) -> f64 {
    (2.0f64).powf(-(2.0f64).powf(beta_prime * l as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_mac::{binary2_subspaces, Binary2State, LinearComboMac, DEFAULT_TABLE_CAP};

    fn f2() -> PrimeField {
        PrimeField::new(2).unwrap()
    }

    fn sig(s: &str) -> BranchSig {
        s.parse().unwrap()
    }

    #[test]
    fn order_examples() {
        assert_eq!(branch_order_cmp(&sig("--"), &sig("++")).unwrap(), Ordering::Less);
        assert_eq!(branch_order_cmp(&sig("+-"), &sig("-+")).unwrap(), Ordering::Less);
        let mut all: Vec<BranchSig> = BranchSig::all(2).collect();
        all.reverse();
        all.sort_by(|a, b| branch_order_cmp(a, b).unwrap());
        let names: Vec<String> = all.iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["--", "+-", "-+", "++"]);
        assert!(matches!(branch_order_cmp(&sig("-"), &sig("--")), Err(PolarizeError::LengthMismatch(1, 2))));
        assert!("-x".parse::<BranchSig>().is_err());
    }

    #[test]
    fn order_is_index_order() {
        for l in 0..6 {
            for a in BranchSig::all(l) {
                for b in BranchSig::all(l) {
                    assert_eq!(branch_order_cmp(&a, &b).unwrap(), a.index().cmp(&b.index()));
                }
            }
        }
    }

    #[test]
    fn directions_are_projective_representatives() {
        let d = projective_directions(f2(), 2);
        assert_eq!(d, vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        let f3 = PrimeField::new(3).unwrap();
        assert_eq!(projective_directions(f3, 3).len(), 13);
    }

    #[test]
    fn detect_examples() {
        let v3 = LinearComboMac::single(binary2_subspaces()[3].clone()).to_explicit(DEFAULT_TABLE_CAP).unwrap();
        let det = detect_linear(&v3, 0.1).unwrap().unwrap();
        assert_eq!(det.rank, 1);
        assert_eq!(det.a.columns(), vec![vec![1, 1]]);
        let perfect = DiscreteMac::identity(f2(), 2).unwrap();
        assert_eq!(detect_linear(&perfect, 0.1).unwrap().unwrap().rank, 2);
        let useless = DiscreteMac::useless(f2(), 2).unwrap();
        let det = detect_linear(&useless, 0.1).unwrap().unwrap();
        assert_eq!((det.rank, det.a.cols()), (0, 0));
    }

    #[test]
    fn polarize_branch_examples() {
        let opts = PolarizeOptions::default();
        let p = Binary2State::new([0.1, 0.2, 0.3, 0.15, 0.25]).unwrap().to_combo();
        let e = p.to_explicit(DEFAULT_TABLE_CAP).unwrap();
        let same = polarize_branch(&e, &BranchSig::empty(), &opts).unwrap();
        assert!((same.sum_capacity() - e.sum_capacity()).abs() < 1e-12);
        let minus = polarize_branch(&e, &sig("-"), &opts).unwrap();
        for (s, i) in p.minus().all_mutual_info() {
            assert!((minus.mutual_info(s).unwrap() - i).abs() < 1e-9);
        }
        let level = polarize_level(&e, 4, &opts).unwrap();
        let total: f64 = level.iter().map(DiscreteMac::sum_capacity).sum();
        assert!((total - 16.0 * e.sum_capacity()).abs() < 1e-6);
        let direct = polarize_branch(&e, &BranchSig::from_index(11, 4), &opts).unwrap();
        assert!((direct.sum_capacity() - level[11].sum_capacity()).abs() < 1e-12);
    }

    #[test]
    fn martingale_examples() {
        let e = Binary2State::uniform().to_combo().to_explicit(DEFAULT_TABLE_CAP).unwrap();
        let r = martingale_report(&e, 3, &PolarizeOptions::default()).unwrap();
        let s1 = UserSet::from_labels(&[1], 2).unwrap();
        assert!((r.average(0, s1).unwrap() - 0.6).abs() < 1e-12);
        assert!(r.full_set_constant && r.strict_non_increasing);
    }

    #[test]
    fn build_code_extremes() {
        let opts = PolarizeOptions::default();
        let perfect = DiscreteMac::identity(f2(), 2).unwrap();
        let c = build_code(&perfect, 3, 0.2, 0.01, &opts).unwrap();
        c.validate().unwrap();
        assert_eq!(c.good_count, 8);
        assert!((c.sum_rate - 2.0).abs() < 1e-12);
        let useless = DiscreteMac::useless(f2(), 2).unwrap();
        let c = build_code(&useless, 3, 0.2, 0.01, &opts).unwrap();
        c.validate().unwrap();
        assert_eq!(c.good_count, 8);
        assert!(c.branches.iter().all(|b| b.rank == 0 && b.frozen.iter().all(|&f| f)));
        assert_eq!(c.sum_rate, 0.0);
        let json = serde_json::to_string(&c).unwrap();
        let back: CodeSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn independent_row_choice() {
        let a = FieldMatrix::from_columns(f2(), 3, &[vec![0, 1, 1]]).unwrap();
        assert_eq!(independent_rows(&a), vec![1]);
        let a = FieldMatrix::from_columns(f2(), 3, &[vec![1, 1, 0], vec![1, 1, 1]]).unwrap();
        assert_eq!(independent_rows(&a), vec![0, 2]);
    }

    #[test]
    fn validate_catches_tampering() {
        let e = Binary2State::uniform().to_combo().to_explicit(DEFAULT_TABLE_CAP).unwrap();
        let c = build_code(&e, 4, 0.2, 0.5, &PolarizeOptions::default()).unwrap();
        c.validate().unwrap();
        let mut t = c.clone();
        t.sum_rate += 0.1;
        assert!(t.validate().is_err());
        let mut t = c.clone();
        if let Some(b) = t.branches.iter_mut().find(|b| b.good && b.rank > 0) {
            b.frozen = vec![true; 2];
            assert!(t.validate().is_err());
        }
    }
}
