//! Encoding, successive-cancellation decoding and the block-error harness.
//!
//! Labels. The encoder recursion works on symbols `U_s` labelled by
//! `s ∈ {−,+}^l` and sends `U_{s,Φ}` through the channel copy labelled `s`.
//! Following that recursion, the symbol labelled `s` sees the synthesized
//! channel whose first transform is `s_l` — i.e. `P^{rev(s)}` in the
//! apply-`s₁`-first convention of [`crate::polarize`]. The code for branch
//! `b` is therefore placed at label `rev(b)`. Decoding in the label order
//! (last position decides) then visits branches with `s₁ = −` before `s₁ = +`,
//! recursively, which is exactly the recursive SC schedule used here.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::gfq::PrimeField;
use crate::mac::DiscreteMac;
use crate::polarize::CodeSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("code and channel/message do not match: {0}")]
    SpecMismatch(String),
    #[error("at least one trial is required")]
    NoTrials,
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// Per-branch input vectors `u_b ∈ 𝔽_q^m`, indexed by branch index. Entries
/// at frozen positions hold the frozen symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageAssignment {
    pub symbols: Vec<Vec<u32>>,
}

impl MessageAssignment {
    /// Information symbols in branch order, then user order.
    pub fn info_symbols(&self, spec: &CodeSpec) -> Vec<u32> {
        spec.branches
            .iter()
            .zip(&self.symbols)
            .flat_map(|(b, u)| b.info_users.iter().map(move |&k| u[k - 1]))
            .collect()
    }

    /// Random information symbols over the given frozen symbols.
    pub fn random(spec: &CodeSpec, frozen: &FrozenSymbols, rng: &mut impl Rng) -> Self {
        let q = spec.q;
        let symbols = spec
            .branches
            .iter()
            .zip(&frozen.symbols)
            .map(|(b, fz)| (0..spec.m).map(|k| if b.frozen[k] { fz[k] } else { rng.gen_range(0..q) }).collect())
            .collect();
        Self { symbols }
    }

    pub fn check(&self, spec: &CodeSpec) -> Result<()> {
        if self.symbols.len() != spec.block_length()
            || self.symbols.iter().any(|u| u.len() != spec.m || u.iter().any(|&x| x >= spec.q))
        {
            return Err(CodecError::SpecMismatch(format!(
                "message needs {} vectors of {} symbols below {}",
                spec.block_length(),
                spec.m,
                spec.q
            )));
        }
        Ok(())
    }
}

/// Values of every `(s, k)` slot used where `F(s,k) = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrozenSymbols {
    pub symbols: Vec<Vec<u32>>,
}

impl FrozenSymbols {
    pub fn zeros(spec: &CodeSpec) -> Self {
        Self { symbols: vec![vec![0; spec.m]; spec.block_length()] }
    }

    /// Uniform frozen symbols reproducible from `seed`.
    pub fn from_seed(spec: &CodeSpec, seed: u64) -> Self {
        Self::random(spec, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn random(spec: &CodeSpec, rng: &mut impl Rng) -> Self {
        let symbols = (0..spec.block_length()).map(|_| (0..spec.m).map(|_| rng.gen_range(0..spec.q)).collect()).collect();
        Self { symbols }
    }
}

/// Channel inputs `X_c ∈ 𝔽_q^m` per channel copy, indexed by copy label
/// (bit `i` of the index is position `i+1` of the label).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodewordBlock {
    pub inputs: Vec<Vec<u32>>,
}

fn bit_reverse(x: usize, bits: usize) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS as usize - bits)
    }
}

fn add_vec(f: PrimeField, a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(&x, &y)| f.add(x, y)).collect()
}

/// The labelled recursion: `U_{(s₁;−),s₂} = U_{s₁,(s₂;+)} + U_{s₁,(s₂;−)}` and
/// `U_{(s₁;+),s₂} = U_{s₁,(s₂;+)}`, from `U_{Φ,s} = U_s` to `U_{s,Φ}`.
/// Input and output are indexed by label.
pub fn encode_labelled(field: PrimeField, l: usize, u: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut w = u.to_vec();
    for lp in 1..=l {
        // index = s₁ (positions 0..l'-1) followed by s₂ (positions l'..l-1)
        let mut next = w.clone();
        for (t, slot) in next.iter_mut().enumerate() {
            let s1 = t & ((1 << (lp - 1)) - 1);
            let a = t >> (lp - 1) & 1;
            let s2 = t >> lp;
            let base = s1 | s2 << (lp - 1);
            let plus = &w[base | 1 << (l - 1)];
            *slot = if a == 0 { add_vec(field, plus, &w[base]) } else { plus.clone() };
        }
        w = next;
    }
    w
}

/// Encodes per-branch vectors: branch `b` goes to label `rev(b)`.
pub fn encode(spec: &CodeSpec, msg: &MessageAssignment) -> Result<CodewordBlock> {
    msg.check(spec)?;
    let l = spec.l;
    let mut labelled = vec![Vec::new(); spec.block_length()];
    for (b, u) in msg.symbols.iter().enumerate() {
        labelled[bit_reverse(b, l)] = u.clone();
    }
    Ok(CodewordBlock { inputs: encode_labelled(spec.field(), l, &labelled) })
}

/// Butterfly form of [`encode`]: branch-indexed input, output indexed by
/// copy label. The pair `(2j, 2j+1)` is combined by the first transform.
pub fn encode_butterfly(field: PrimeField, u: &[Vec<u32>]) -> Vec<Vec<u32>> {
    if u.len() == 1 {
        return u.to_vec();
    }
    let minus: Vec<Vec<u32>> = u.iter().step_by(2).cloned().collect();
    let plus: Vec<Vec<u32>> = u.iter().skip(1).step_by(2).cloned().collect();
    let a = encode_butterfly(field, &minus);
    let b = encode_butterfly(field, &plus);
    let mut x = Vec::with_capacity(u.len());
    for (aj, bj) in a.iter().zip(&b) {
        x.push(add_vec(field, aj, bj));
        x.push(bj.clone());
    }
    x
}

/// Draws `y ~ P(·|X_c)` for every copy; copy `c` uses stream `c` of a
/// generator seeded with `seed`.
pub fn simulate_channel(p: &DiscreteMac, block: &CodewordBlock, seed: u64) -> Vec<usize> {
    let sampler = ChannelSampler::new(p);
    sampler.sample_block(block, seed)
}

struct ChannelSampler<'a> {
    p: &'a DiscreteMac,
    rows: Vec<WeightedIndex<f64>>,
}

impl<'a> ChannelSampler<'a> {
    fn new(p: &'a DiscreteMac) -> Self {
        let rows = (0..p.inputs()).map(|x| WeightedIndex::new(p.row(x)).expect("validated channel rows")).collect();
        Self { p, rows }
    }

    fn sample_block(&self, block: &CodewordBlock, seed: u64) -> Vec<usize> {
        let f = self.p.field();
        block
            .inputs
            .iter()
            .enumerate()
            .map(|(c, x)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                self.rows[f.index_of(x)].sample(&mut rng)
            })
            .collect()
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x -= max);
    }
    v
}

/// Precomputed vector addition on input indices.
struct Adder {
    n: usize,
    table: Vec<usize>,
}

impl Adder {
    fn new(field: PrimeField, m: usize) -> Self {
        let n = field.pow_size(m);
        let digits: Vec<Vec<u32>> = (0..n).map(|x| field.digits(x, m)).collect();
        let mut table = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                table[a * n + b] = field.index_of(&add_vec(field, &digits[a], &digits[b]));
            }
        }
        Self { n, table }
    }

    fn add(&self, a: usize, b: usize) -> usize {
        self.table[a * self.n + b]
    }
}

/// Log-likelihood of the minus input of a pair:
/// `L⁻(z₁) = log Σ_{z₂} exp(L₀(z₁+z₂) + L₁(z₂))` (no normalization).
pub fn minus_llr(field: PrimeField, m: usize, l0: &[f64], l1: &[f64]) -> Vec<f64> {
    minus_with(&Adder::new(field, m), l0, l1)
}

/// Log-likelihood of the plus input given the decided minus input `a`:
/// `L⁺(z₂) = L₀(a+z₂) + L₁(z₂)` (no normalization).
pub fn plus_llr(field: PrimeField, m: usize, l0: &[f64], l1: &[f64], a: usize) -> Vec<f64> {
    plus_with(&Adder::new(field, m), l0, l1, a)
}

fn minus_with(add: &Adder, l0: &[f64], l1: &[f64]) -> Vec<f64> {
    (0..add.n).map(|z1| log_sum_exp((0..add.n).map(|z2| l0[add.add(z1, z2)] + l1[z2]))).collect()
}

fn plus_with(add: &Adder, l0: &[f64], l1: &[f64], a: usize) -> Vec<f64> {
    (0..add.n).map(|z2| l0[add.add(a, z2)] + l1[z2]).collect()
}

/// Normalized posterior of `u` from its log-likelihood under a uniform prior.
pub fn posterior(llr: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = normalize(llr.to_vec()).iter().map(|x| x.exp()).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

struct Decoder<'a> {
    spec: &'a CodeSpec,
    field: PrimeField,
    adder: Adder,
    frozen: &'a FrozenSymbols,
    genie: Option<&'a MessageAssignment>,
    /// Digits of every input index.
    digits: Vec<Vec<u32>>,
    decided: Vec<Vec<u32>>,
}

impl Decoder<'_> {
    /// Decides branch `b` from the log-likelihood of its input vector.
    fn decide_leaf(&self, b: usize, llr: &[f64]) -> Vec<u32> {
        let br = &self.spec.branches[b];
        let fz = &self.frozen.symbols[b];
        if !br.good || br.rank == 0 {
            return fz.clone();
        }
        let post = posterior(llr);
        let q = self.spec.q;
        // candidates consistent with the frozen coordinates
        let mut cand: Vec<usize> = (0..post.len())
            .filter(|&x| (0..self.spec.m).all(|k| !br.frozen[k] || self.digits[x][k] == fz[k]))
            .collect();
        for alpha in &br.directions {
            let mut mass = vec![0.0f64; q as usize];
            let dot = |x: usize| -> usize {
                self.digits[x].iter().zip(alpha).fold(0u32, |acc, (&u, &a)| self.field.add(acc, self.field.mul(u, a))) as usize
            };
            for &x in &cand {
                mass[dot(x)] += post[x];
            }
            // ties go to the smallest field element
            let mut best = 0;
            for v in 1..mass.len() {
                if mass[v] > mass[best] {
                    best = v;
                }
            }
            cand.retain(|&x| dot(x) == best);
        }
        debug_assert_eq!(cand.len(), 1, "information rows of A_s determine u");
        self.digits[cand[0]].clone()
    }

    /// Decodes the subtree whose branches are `prefix | j << depth`; returns
    /// the subtree codeword as input indices in butterfly order.
    fn decode(&mut self, llrs: Vec<Vec<f64>>, prefix: usize, depth: usize) -> Vec<usize> {
        if llrs.len() == 1 {
            let b = prefix;
            let u = self.decide_leaf(b, &llrs[0]);
            self.decided[b] = u;
            let used = match self.genie {
                Some(truth) => &truth.symbols[b],
                None => &self.decided[b],
            };
            return vec![self.field.index_of(used)];
        }
        let half = llrs.len() / 2;
        let minus: Vec<Vec<f64>> = (0..half).map(|j| normalize(minus_with(&self.adder, &llrs[2 * j], &llrs[2 * j + 1]))).collect();
        let a = self.decode(minus, prefix, depth + 1);
        let plus: Vec<Vec<f64>> = (0..half)
            .map(|j| normalize(plus_with(&self.adder, &llrs[2 * j], &llrs[2 * j + 1], a[j])))
            .collect();
        let bcw = self.decode(plus, prefix | 1 << depth, depth + 1);
        let mut x = Vec::with_capacity(2 * half);
        for j in 0..half {
            x.push(self.adder.add(a[j], bcw[j]));
            x.push(bcw[j]);
        }
        x
    }
}

/// Successive-cancellation decoding of `received` (indexed by copy label).
///
/// With `genie = Some(truth)`, every branch is decided from the true
/// predecessors instead of the decoded ones.
fn check_channel(spec: &CodeSpec, p: &DiscreteMac) -> Result<()> {
    if p.q() != spec.q || p.users() != spec.m {
        return Err(CodecError::SpecMismatch(format!(
            "code is for q={}, m={} but the channel has q={}, m={}",
            spec.q,
            spec.m,
            p.q(),
            p.users()
        )));
    }
    Ok(())
}

pub fn sc_decode(
    spec: &CodeSpec,
    p: &DiscreteMac,
    received: &[usize],
    frozen: &FrozenSymbols,
    genie: Option<&MessageAssignment>,
) -> Result<MessageAssignment> {
    let n = spec.block_length();
    check_channel(spec, p)?;
    if received.len() != n || received.iter().any(|&y| y >= p.outputs()) {
        return Err(CodecError::SpecMismatch(format!("expected {n} received symbols inside the output alphabet")));
    }
    if frozen.symbols.len() != n {
        return Err(CodecError::SpecMismatch("frozen symbols do not cover every branch".into()));
    }
    let field = spec.field();
    let inputs = p.inputs();
    let llrs: Vec<Vec<f64>> = (0..n)
        .map(|pos| {
            let y = received[pos];
            normalize((0..inputs).map(|x| p.prob(x, y).ln()).collect())
        })
        .collect();
    let mut dec = Decoder {
        spec,
        field,
        adder: Adder::new(field, spec.m),
        frozen,
        genie,
        digits: (0..inputs).map(|x| field.digits(x, spec.m)).collect(),
        decided: vec![Vec::new(); n],
    };
    dec.decode(llrs, 0, 0);
    Ok(MessageAssignment { symbols: dec.decided })
}

/// How frozen symbols are chosen across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrozenMode {
    /// Fresh uniform frozen symbols in every trial.
    PerTrial,
    /// One frozen assignment drawn from the given seed, shared by all trials.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub q: u32,
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub eps: f64,
    pub z_budget: f64,
    pub sum_rate: f64,
    pub union_bound: f64,
    pub trials: usize,
    pub errors: usize,
    pub bler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl TrialReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "q", "m", "l", "N", "eps", "z_budget", "sum_rate", "union_bound", "trials", "errors", "bler", "ci_low", "ci_high", "seed",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.q.to_string(),
            self.m.to_string(),
            self.l.to_string(),
            self.n.to_string(),
            self.eps.to_string(),
            self.z_budget.to_string(),
            self.sum_rate.to_string(),
            self.union_bound.to_string(),
            self.trials.to_string(),
            self.errors.to_string(),
            self.bler.to_string(),
            self.ci_low.to_string(),
            self.ci_high.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Two-sided 95% Clopper–Pearson interval for `k` successes in `n` trials.
pub fn clopper_pearson(k: usize, n: usize) -> (f64, f64) {
    let alpha = 0.05;
    let (kf, nf) = (k as f64, n as f64);
    let low = if k == 0 { 0.0 } else { Beta::new(kf, nf - kf + 1.0).expect("positive shape").inverse_cdf(alpha / 2.0) };
    let high = if k == n { 1.0 } else { Beta::new(kf + 1.0, nf - kf).expect("positive shape").inverse_cdf(1.0 - alpha / 2.0) };
    (low, high)
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub block_error: bool,
    pub sent: MessageAssignment,
    pub decoded: MessageAssignment,
    pub genie: MessageAssignment,
}

/// Runs trial `index`: its generator is `ChaCha8Rng::seed_from_u64(seed)` on
/// stream `index`, which draws frozen symbols (per-trial mode), information
/// symbols and the channel seed, in that order.
pub fn run_trial(spec: &CodeSpec, p: &DiscreteMac, seed: u64, index: u64, mode: FrozenMode) -> Result<TrialOutcome> {
    let sampler = ChannelSampler::new(p);
    run_trial_with(spec, p, &sampler, seed, index, mode)
}

fn run_trial_with(
    spec: &CodeSpec,
    p: &DiscreteMac,
    sampler: &ChannelSampler<'_>,
    seed: u64,
    index: u64,
    mode: FrozenMode,
) -> Result<TrialOutcome> {
    check_channel(spec, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let frozen = match mode {
        FrozenMode::PerTrial => FrozenSymbols::random(spec, &mut rng),
        FrozenMode::Fixed(s) => FrozenSymbols::from_seed(spec, s),
    };
    let sent = MessageAssignment::random(spec, &frozen, &mut rng);
    let channel_seed: u64 = rng.gen();
    let block = encode(spec, &sent)?;
    let received = sampler.sample_block(&block, channel_seed);
    let decoded = sc_decode(spec, p, &received, &frozen, None)?;
    let genie = sc_decode(spec, p, &received, &frozen, Some(&sent))?;
    let block_error = decoded.info_symbols(spec) != sent.info_symbols(spec);
    Ok(TrialOutcome { block_error, sent, decoded, genie })
}

/// Monte Carlo block-error estimate; trials run in parallel and the result
/// does not depend on scheduling.
pub fn run_trials(spec: &CodeSpec, p: &DiscreteMac, n_trials: usize, seed: u64, mode: FrozenMode) -> Result<TrialReport> {
    if n_trials == 0 {
        return Err(CodecError::NoTrials);
    }
    let sampler = ChannelSampler::new(p);
    let errors = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial_with(spec, p, &sampler, seed, t, mode).map(|o| usize::from(o.block_error)))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (ci_low, ci_high) = clopper_pearson(errors, n_trials);
    Ok(TrialReport {
        q: spec.q,
        m: spec.m,
        l: spec.l,
        n: spec.block_length(),
        eps: spec.eps,
        z_budget: spec.z_budget,
        sum_rate: spec.sum_rate,
        union_bound: spec.union_bound,
        trials: n_trials,
        errors,
        bler: errors as f64 / n_trials as f64,
        ci_low,
        ci_high,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarize::{build_code, PolarizeOptions};

    fn f(q: u32) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    #[test]
    fn single_step_encoding() {
        let x = encode_labelled(f(2), 1, &[vec![1], vec![1]]);
        assert_eq!(x, vec![vec![0], vec![1]]);
    }

    #[test]
    fn labelled_and_butterfly_forms_agree() {
        let field = f(3);
        for l in 0..=5 {
            let n = 1usize << l;
            let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
            let u: Vec<Vec<u32>> = (0..n).map(|_| vec![rng.gen_range(0..3), rng.gen_range(0..3)]).collect();
            let labelled: Vec<Vec<u32>> = (0..n).map(|s| u[bit_reverse(s, l)].clone()).collect();
            let x = encode_labelled(field, l, &labelled);
            let xb = encode_butterfly(field, &u);
            assert_eq!(xb, x);
        }
    }

    #[test]
    fn clopper_pearson_bounds() {
        let (lo, hi) = clopper_pearson(0, 1000);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.003682).abs() < 1e-5);
        let (lo, hi) = clopper_pearson(10, 100);
        assert!(lo < 0.1 && hi > 0.1);
    }

    #[test]
    fn perfect_round_trip() {
        let p = DiscreteMac::identity(f(2), 2).unwrap();
        let spec = build_code(&p, 3, 0.2, 0.01, &PolarizeOptions::default()).unwrap();
        let r = run_trials(&spec, &p, 50, 1, FrozenMode::PerTrial).unwrap();
        assert_eq!(r.errors, 0);
        assert!(matches!(run_trials(&spec, &p, 0, 1, FrozenMode::PerTrial), Err(CodecError::NoTrials)));
    }
}
