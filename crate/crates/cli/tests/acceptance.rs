//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! This target reports verdicts rather than aborting on the first failure, so
//! every criterion is evaluated and shown in a single run. Criteria whose
//! thresholds are out of reach at these block lengths print FAIL together with
//! the measured values.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use polarmac::codec::{run_trials, FrozenMode};
use polarmac::gfq::{FieldMatrix, PrimeField};
use polarmac::linear_mac::*;
use polarmac::mac::DiscreteMac;
use polarmac::polarize::*;
use polarmac::subspace::{consistency_check, Subspace};
use polarmac::users::UserSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn field(q: u32) -> PrimeField {
    PrimeField::new(q).unwrap()
}

fn random_mac(q: u32, m: usize, outputs: usize, rng: &mut impl Rng) -> DiscreteMac {
    let n = (q as usize).pow(m as u32);
    let mut table = Vec::with_capacity(n * outputs);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..outputs).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen::<f64>() }).collect();
        if row.iter().all(|&x| x == 0.0) {
            row[0] = 1.0;
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
        let t: f64 = row.iter().sum();
        let last = row.iter().rposition(|&x| x > 0.0).unwrap();
        row[last] += 1.0 - t;
        table.extend(row);
    }
    DiscreteMac::new(field(q), m, outputs, table).unwrap()
}

fn random_invertible(f: PrimeField, n: usize, rng: &mut impl Rng) -> FieldMatrix {
    loop {
        let rows: Vec<Vec<u32>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(0..f.order())).collect()).collect();
        let m = FieldMatrix::from_rows(f, &rows).unwrap();
        if m.rank() == n {
            return m;
        }
    }
}

fn random_combo(q: u32, m: usize, rng: &mut impl Rng) -> LinearComboMac {
    let f = field(q);
    let k = rng.gen_range(1..=4);
    let mut weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.05).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    let t: f64 = weights.iter().sum();
    weights[0] += 1.0 - t;
    let terms = weights
        .into_iter()
        .map(|w| {
            let d = rng.gen_range(0..=m);
            let vecs: Vec<Vec<u32>> = (0..d).map(|_| (0..m).map(|_| rng.gen_range(0..q)).collect()).collect();
            (w, Subspace::from_vectors(f, m, &vecs).unwrap())
        })
        .collect();
    LinearComboMac::new(f, m, terms).unwrap()
}

fn random_state(rng: &mut impl Rng) -> Binary2State {
    let raw: [f64; 5] = std::array::from_fn(|_| rng.gen::<f64>());
    let t: f64 = raw.iter().sum();
    let mut p = raw.map(|x| x / t);
    let t2: f64 = p.iter().sum();
    p[4] += 1.0 - t2;
    Binary2State::new(p).unwrap()
}

fn cols(m: &FieldMatrix, idx: std::ops::Range<usize>) -> FieldMatrix {
    m.select_columns(&idx.collect::<Vec<_>>())
}

fn uniform_combo_of(family: &[&Subspace]) -> LinearComboMac {
    let w = 1.0 / family.len() as f64;
    LinearComboMac::new(field(2), 2, family.iter().map(|v| (w, (*v).clone())).collect()).unwrap()
}

/// Criterion 1: over 200 random MACs, I[S](P⁻)+I[S](P⁺) ≤ 2I[S](P)+1e-9, with
/// equality within 1e-9 on the full set.
fn martingale() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_excess, mut worst_full) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..200 {
        let q = if rng.gen_bool(0.5) { 2 } else { 3 };
        let p = random_mac(q, 2, rng.gen_range(1..=8), &mut rng);
        let (minus, plus) = (p.transform_minus(), p.transform_plus());
        for s in UserSet::nonempty_subsets(2) {
            let d = minus.mutual_info(s).unwrap() + plus.mutual_info(s).unwrap() - 2.0 * p.mutual_info(s).unwrap();
            worst_excess = worst_excess.max(d);
            if s == UserSet::full(2) {
                worst_full = worst_full.max(d.abs());
            }
        }
    }
    Verdict {
        pass: worst_excess <= 1e-9 && worst_full <= 1e-9,
        detail: format!("max excess {worst_excess:.2e}, max full-set deviation {worst_full:.2e} (tol 1e-9)"),
    }
}

/// Criterion 2: restrict∘restrict equals the single restriction with
/// [B AB′], after canonical column sorting, on 100 random instances.
fn composition() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut shape_mismatch = 0;
    for _ in 0..100 {
        let (q, m) = [(2u32, 2usize), (2, 3), (3, 2), (3, 3)][rng.gen_range(0..4)];
        let f = field(q);
        let p = random_mac(q, m, rng.gen_range(1..=4), &mut rng);
        let big = random_invertible(f, m, &mut rng);
        let n1 = rng.gen_range(1..=m);
        let n2 = rng.gen_range(0..=m - n1);
        let (a, b) = (cols(&big, 0..n1), cols(&big, n1..n1 + n2));
        let small = random_invertible(f, n1, &mut rng);
        let n1p = rng.gen_range(1..=n1);
        let n2p = rng.gen_range(0..=n1 - n1p);
        let (ap, bp) = (cols(&small, 0..n1p), cols(&small, n1p..n1p + n2p));
        let lhs = p.restrict(&a, Some(&b)).unwrap().restrict(&ap, Some(&bp)).unwrap();
        let combined_b = b.hstack(&a.mul(&bp).unwrap()).unwrap();
        let rhs = p.restrict(&a.mul(&ap).unwrap(), Some(&combined_b)).unwrap();
        let (cl, cr) = (lhs.canonical_columns(), rhs.canonical_columns());
        if cl.len() != cr.len() || cl.iter().zip(&cr).any(|(x, y)| x.len() != y.len()) {
            shape_mismatch += 1;
            continue;
        }
        for (x, y) in cl.iter().flatten().zip(cr.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
    }
    Verdict {
        pass: shape_mismatch == 0 && worst <= 1e-12,
        detail: format!("{shape_mismatch} shape mismatches, max entry difference {worst:.2e} (tol 1e-12)"),
    }
}

/// Criterion 3: minus commutation, chain rule and plus-side degradation on
/// 100 random instances.
fn restriction_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut commute, mut chain) = (0.0f64, 0.0f64);
    let mut violations = 0;
    for _ in 0..100 {
        let (q, m) = [(2u32, 2usize), (2, 3), (3, 2)][rng.gen_range(0..3)];
        let f = field(q);
        let p = random_mac(q, m, rng.gen_range(2..=3), &mut rng);
        let big = random_invertible(f, m, &mut rng);
        let n1 = rng.gen_range(2..=m);
        let n2 = rng.gen_range(0..=m - n1);
        let (a, b) = (cols(&big, 0..n1), cols(&big, n1..n1 + n2));
        let (a1, a2) = (cols(&big, 0..1), cols(&big, 1..n1));
        let whole = p.restrict(&a, Some(&b)).unwrap().sum_capacity();
        let parts = p.restrict(&a1, Some(&b)).unwrap().sum_capacity()
            + p.restrict(&a2, Some(&b.hstack(&a1).unwrap())).unwrap().sum_capacity();
        chain = chain.max((whole - parts).abs());

        let ar = cols(&big, 0..rng.gen_range(1..=m));
        let lhs = p.transform_minus().restrict(&ar, None).unwrap().sum_capacity();
        let rhs = p.restrict(&ar, None).unwrap().transform_minus().sum_capacity();
        commute = commute.max((lhs - rhs).abs());

        let plus_then = p.transform_plus().restrict(&a, Some(&b)).unwrap().sum_capacity();
        let then_plus = p.restrict(&a, Some(&b)).unwrap().transform_plus().sum_capacity();
        if plus_then < then_plus - 1e-9 {
            violations += 1;
        }
        let alpha = cols(&big, 0..1);
        let z1 = p.transform_plus().restrict(&alpha, None).unwrap().bhattacharyya().unwrap();
        let z2 = p.restrict(&alpha, None).unwrap().transform_plus().bhattacharyya().unwrap();
        if z1 > z2 + 1e-9 {
            violations += 1;
        }
    }
    Verdict {
        pass: commute <= 1e-9 && chain <= 1e-9 && violations == 0,
        detail: format!("minus commutation {commute:.2e}, chain rule {chain:.2e} (tol 1e-9), {violations} degradation violations"),
    }
}

/// Criterion 4: exact subspace formulas against explicit tables, and the
/// subspace-level transforms against the generic ones through depth 3.
fn linear_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = PolarizeOptions::default();
    let (mut mi, mut tree_dev) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (q, m) = [(2u32, 2usize), (2, 3), (3, 2), (3, 3)][rng.gen_range(0..4)];
        let c = random_combo(q, m, &mut rng);
        let e = c.to_explicit(DEFAULT_TABLE_CAP).unwrap();
        for (s, i) in c.all_mutual_info() {
            mi = mi.max((e.mutual_info(s).unwrap() - i).abs());
        }
        let generic = polarize_tree(&e, 3, &opts).unwrap();
        let exact = combo_tree(&c, 3).unwrap();
        for (gl, el) in generic.iter().zip(&exact).skip(1) {
            for (g, x) in gl.iter().zip(el) {
                for (s, i) in x.all_mutual_info() {
                    tree_dev = tree_dev.max((g.mutual_info(s).unwrap() - i).abs());
                }
            }
        }
    }
    Verdict {
        pass: mi <= 1e-9 && tree_dev <= 1e-9,
        detail: format!("I[S] vs explicit {mi:.2e}, transforms through l=3 {tree_dev:.2e} (tol 1e-9)"),
    }
}

/// Criterion 5: closed-form step against the subspace transforms on 10⁴
/// states; order of (p1, p2, p3) along all 2^10 branches for 100 starts.
fn binary_recursion() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dev = 0.0f64;
    for _ in 0..10_000 {
        let st = random_state(&mut rng);
        let (m, p) = st.step();
        let c = st.to_combo();
        let (lm, lp) = (c.minus().to_binary2().unwrap(), c.plus().to_binary2().unwrap());
        for k in 0..5 {
            dev = dev.max((m.p[k] - lm.p[k]).abs()).max((p.p[k] - lp.p[k]).abs());
        }
    }
    let mut reversals = 0usize;
    for _ in 0..100 {
        let st = random_state(&mut rng);
        let mut level = vec![st];
        for _ in 0..10 {
            level = level.iter().flat_map(|s| { let (a, b) = s.step(); [a, b] }).collect();
            for s in &level {
                for (i, j) in [(1, 2), (1, 3), (2, 3)] {
                    // a strict order may only collapse through underflow to zero
                    let kept = match st.p[i].total_cmp(&st.p[j]) {
                        std::cmp::Ordering::Less => s.p[i] < s.p[j] || s.p[j] < 1e-300,
                        std::cmp::Ordering::Greater => s.p[i] > s.p[j] || s.p[i] < 1e-300,
                        std::cmp::Ordering::Equal => (s.p[i] - s.p[j]).abs() <= 1e-12,
                    };
                    reversals += usize::from(!kept);
                }
            }
        }
    }
    Verdict {
        pass: dev <= 1e-12 && reversals == 0,
        detail: format!("step vs subspace transforms {dev:.2e} (tol 1e-12), {reversals} order violations"),
    }
}

/// The first 20 points, in lexicographic order of numerators, of the simplex
/// grid with step 1/5 that satisfy 0 < p3 ≤ max(p1, p2).
fn total_loss_grid() -> Vec<[f64; 5]> {
    let n = 5usize;
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                for d in 0..=n - a - b - c {
                    if d > 0 && d <= b.max(c) {
                        out.push([a, b, c, d, n - a - b - c - d].map(|k| k as f64 / n as f64));
                    }
                }
            }
        }
    }
    out.truncate(20);
    out
}

/// Criterion 6: p3^(14) < 1e-3 and I^(l) constant within 1e-9 on the grid.
fn total_loss() -> Verdict {
    let grid = total_loss_grid();
    let (mut failing, mut worst_p3, mut worst_i) = (Vec::new(), 0.0f64, 0.0f64);
    for p in &grid {
        let st = Binary2State::new(*p).unwrap();
        let r = binary2_evolve(&st, 14, EvolveMode::Enumerate).unwrap();
        let p3 = r.last().p[3];
        worst_p3 = worst_p3.max(p3);
        for lv in &r.levels {
            worst_i = worst_i.max((lv.i - st.sum_capacity()).abs());
        }
        if p3 >= 1e-3 {
            failing.push(format!("{p:?} -> {p3:.2e}"));
        }
    }
    Verdict {
        pass: failing.is_empty() && worst_i <= 1e-9,
        detail: format!(
            "{} grid states, max p3^(14) {worst_p3:.2e} (tol 1e-3), max I drift {worst_i:.2e} (tol 1e-9); {} states above tolerance{}",
            grid.len(),
            failing.len(),
            if failing.is_empty() { String::new() } else { format!(": {}", failing.join(", ")) }
        ),
    }
}

/// Criterion 7: preserved families keep I[S] at every node through l=6; the
/// family {V1, V3} loses I[{1}] at l=1.
fn preservation() -> Verdict {
    let vs = binary2_subspaces();
    let s1 = UserSet::from_labels(&[1], 2).unwrap();
    let mut ok = true;
    let mut worst = 0.0f64;
    for family in [vec![&vs[4]], vec![&vs[1], &vs[2]]] {
        let owned: Vec<Subspace> = family.iter().map(|v| (*v).clone()).collect();
        ok &= consistency_check(&owned, s1).unwrap();
        let tree = combo_tree(&uniform_combo_of(&family), 6).unwrap();
        for level in &tree[..6] {
            for c in level {
                let d = c.minus().mutual_info(s1).unwrap() + c.plus().mutual_info(s1).unwrap()
                    - 2.0 * c.mutual_info(s1).unwrap();
                worst = worst.max(d.abs());
            }
        }
    }
    let lossy = [vs[1].clone(), vs[3].clone()];
    let inconsistent = !consistency_check(&lossy, s1).unwrap();
    let avgs = combo_evolve(&uniform_combo_of(&[&vs[1], &vs[3]]), 1).unwrap();
    let at = |l: usize| avgs[l].iter().find(|(u, _)| *u == s1).unwrap().1;
    let drop = at(0) - at(1);
    Verdict {
        pass: ok && worst <= 1e-12 && inconsistent && drop > 1e-9,
        detail: format!(
            "preserved families consistent={ok}, max per-node loss {worst:.2e} (tol 1e-12); {{V1,V3}} consistent={}, drop at l=1 {drop:.4}",
            !inconsistent
        ),
    }
}

/// Criterion 8: extremal fraction non-decreasing over l = 2..12 and above 0.9
/// at l = 12 for the uniform state.
fn polarization_trend() -> Verdict {
    let r = binary2_evolve(&Binary2State::uniform(), 12, EvolveMode::Enumerate).unwrap();
    let fr: Vec<f64> = r.levels[2..].iter().map(|lv| lv.extremal_fraction).collect();
    let monotone = fr.windows(2).all(|w| w[1] >= w[0]);
    let last = *fr.last().unwrap();
    let shown: Vec<String> = fr.iter().map(|x| format!("{x:.3}")).collect();
    Verdict {
        pass: monotone && last > 0.9,
        detail: format!("fractions l=2..12 [{}], non-decreasing={monotone}, final {last:.4} (needs > 0.9)", shown.join(" ")),
    }
}

/// Criterion 9: construction rate, union-bound agreement and error-free
/// decoding on a deterministic channel.
fn end_to_end() -> Verdict {
    const TRIALS: usize = 1000;
    const SEED: u64 = 2024;
    const Z_BUDGET: f64 = 0.01;
    let opts = PolarizeOptions::default();
    let p = Binary2State::uniform().to_combo().to_explicit(DEFAULT_TABLE_CAP).unwrap();
    let spec = build_code(&p, 8, 0.2, Z_BUDGET, &opts).unwrap();
    let rate_ok = spec.sum_rate >= p.sum_capacity() - 0.2;
    let report = run_trials(&spec, &p, TRIALS, SEED, FrozenMode::PerTrial).unwrap();
    let b = spec.union_bound.min(1.0);
    let slack = 3.0 * (b * (1.0 - b) / TRIALS as f64).sqrt();
    let bound_ok = report.bler <= spec.union_bound + slack;

    let v3 = LinearComboMac::single(binary2_subspaces()[3].clone()).to_explicit(DEFAULT_TABLE_CAP).unwrap();
    let det_spec = build_code(&v3, 8, 0.2, Z_BUDGET, &opts).unwrap();
    let det = run_trials(&det_spec, &v3, TRIALS, SEED, FrozenMode::PerTrial).unwrap();
    Verdict {
        pass: rate_ok && bound_ok && det.errors == 0,
        detail: format!(
            "R={:.4} vs I(P)-eps={:.4} ({}); BLER {:.4} vs union bound {:.4} + 3σ {:.4} ({}); deterministic channel {} errors in {TRIALS}",
            spec.sum_rate,
            p.sum_capacity() - 0.2,
            if rate_ok { "ok" } else { "short" },
            report.bler,
            spec.union_bound,
            slack,
            if bound_ok { "ok" } else { "exceeded" },
            det.errors
        ),
    }
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_polarmac")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Criterion 10: two runs of every command with the same seed give
/// byte-identical outputs.
fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let d = dir.path();
    let uni = d.join("uniform.json");
    std::fs::write(&uni, r#"{"binary2":[0.2,0.2,0.2,0.2,0.2]}"#).unwrap();
    let ch = uni.to_str().unwrap();
    let path = |name: &str| d.join(name).to_str().unwrap().to_string();
    let read = |p: &Path| std::fs::read(p).unwrap();

    let mut differing = Vec::new();
    let mut run_twice = |name: &str, make: &dyn Fn(usize) -> Vec<String>, extra: &dyn Fn(usize) -> Option<String>| {
        let outs: Vec<(Vec<u8>, Option<Vec<u8>>)> = (0..2)
            .map(|k| {
                let args = make(k);
                let argv: Vec<&str> = args.iter().map(String::as_str).collect();
                let stdout = run_cli(&argv);
                (stdout, extra(k).map(|p| read(Path::new(&p))))
            })
            .collect();
        if outs[0] != outs[1] {
            differing.push(name.to_string());
        }
    };
    let plain = |_: usize| None;
    run_twice("analyze", &|_| vec!["analyze".into(), "--channel".into(), ch.into(), "--no-timestamp".into()], &plain);
    run_twice(
        "polarize",
        &|_| vec!["polarize".into(), "--channel".into(), ch.into(), "--l".into(), "5".into(), "--no-timestamp".into()],
        &plain,
    );
    // both runs use the same paths: the paths are part of the echoed config
    let code = |_: usize| path("code.json");
    run_twice(
        "construct",
        &|k| {
            ["construct", "--channel", ch, "--l", "6", "--eps", "0.2", "--z-budget", "0.01", "--code", &code(k), "--no-timestamp"]
                .map(String::from)
                .to_vec()
        },
        &|k| Some(code(k)),
    );
    let csv = |_: usize| path("sim.csv");
    run_twice(
        "simulate",
        &|k| {
            let c = code(k);
            ["simulate", "--code", &c, "--channel", ch, "--trials", "300", "--seed", "11", "--out", &csv(k), "--no-timestamp"]
                .map(String::from)
                .to_vec()
        },
        &|k| Some(csv(k)),
    );
    run_twice(
        "evolve",
        &|_| {
            ["evolve", "--channel", ch, "--l", "10", "--mode", "sample:500", "--seed", "3", "--no-timestamp"]
                .map(String::from)
                .to_vec()
        },
        &plain,
    );
    run_twice(
        "probe-conjectures",
        &|_| ["probe-conjectures", "--grid", "simplex:3", "--l", "8", "--no-timestamp"].map(String::from).to_vec(),
        &plain,
    );
    Verdict {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            "analyze, polarize, construct, simulate, evolve, probe-conjectures reproduce byte-identical output".into()
        } else {
            format!("outputs differ for: {}", differing.join(", "))
        },
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("martingale identities", martingale),
        ("restriction composition", composition),
        ("minus commutation, chain rule, plus degradation", restriction_identities),
        ("linear-combination oracle equivalence", linear_oracle),
        ("binary two-user recursion", binary_recursion),
        ("total loss at depth 14", total_loss),
        ("preservation characterization", preservation),
        ("polarization trend", polarization_trend),
        ("end-to-end coding", end_to_end),
        ("round-trip determinism", determinism),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        passed += usize::from(v.pass);
        println!(
            "criterion {:>2}: {} - {name}: {} [{:.1}s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
}
