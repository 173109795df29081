//! Searches for evidence about the two open conjectures.
//!
//! - Total loss: initial binary two-user states with `p3 > max(p1, p2)` are
//!   evolved to depth `l`; the smallest final `p3` is reported.
//! - Necessity of the orthogonal-passage condition: small subspace families
//!   are scanned for index sets where the consistency check holds but no
//!   orthogonal-passage witness exists. Each such instance is checked
//!   empirically for information preservation.
//!
//! Findings are evidence, not proof.

use std::path::Path;

use polarmac::gfq::PrimeField;
use polarmac::linear_mac::{binary2_evolve, combo_evolve, Binary2State, EvolveMode, LinearComboMac};
use polarmac::subspace::{consistency_check, orthogonal_passage_check, Subspace, DEFAULT_ENUMERATION_CAP};
use polarmac::users::UserSet;

use crate::commands::ProbeArgs;
use crate::error::{CliError, Result};
use crate::output::{num, Table};

/// Grid points of the 5-simplex with coordinates in multiples of `1/n`, in
/// lexicographic order of the integer numerators.
pub fn simplex_grid(n: usize) -> Vec<[f64; 5]> {
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                for d in 0..=n - a - b - c {
                    let e = n - a - b - c - d;
                    out.push([a, b, c, d, e].map(|k| k as f64 / n as f64));
                }
            }
        }
    }
    out
}

fn parse_vectors(text: &str) -> Result<Vec<[f64; 5]>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let v: Vec<f64> = s
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::BadGrid(format!("`{x}`: {e}"))))
                .collect::<Result<_>>()?;
            v.try_into().map_err(|v: Vec<f64>| CliError::BadGrid(format!("state with {} entries", v.len())))
        })
        .collect()
}

pub fn parse_grid(spec: &str) -> Result<Vec<Binary2State>> {
    let raw = if let Some(n) = spec.strip_prefix("simplex:") {
        let n: usize = n.parse().map_err(|e| CliError::BadGrid(format!("simplex step `{n}`: {e}")))?;
        if n == 0 {
            return Err(CliError::BadGrid("simplex step must be positive".into()));
        }
        simplex_grid(n)
    } else if let Some(list) = spec.strip_prefix("states:") {
        parse_vectors(list)?
    } else {
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, &e))?
    };
    if raw.is_empty() {
        return Err(CliError::BadGrid(format!("`{spec}` contains no states")));
    }
    raw.into_iter()
        .map(|p| Binary2State::new(p).map_err(|e| CliError::BadGrid(e.to_string())))
        .collect()
}

fn state_label(st: &Binary2State) -> String {
    st.p.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
}

pub fn run(args: &ProbeArgs) -> Result<Table> {
    let grid = parse_grid(&args.grid)?;
    let mut t = Table::new(&["conjecture", "instance", "users", "quantity", "value", "finding"]);
    t.note("evidence, not proof: finite-depth numerics cannot settle either conjecture");

    // Total loss under p3 > max(p1, p2).
    let instances: Vec<&Binary2State> = grid.iter().filter(|s| s.p[3] > s.p[1].max(s.p[2])).collect();
    let mut min_p3: Option<f64> = None;
    for st in &instances {
        let report = binary2_evolve(st, args.l, EvolveMode::Enumerate)?;
        let p3 = report.last().p[3];
        min_p3 = Some(min_p3.map_or(p3, |m: f64| m.min(p3)));
        let finding = if p3 < args.tolerance { "total_loss_reached" } else { "no_total_loss_observed" };
        t.push(vec!["2".into(), state_label(st), String::new(), format!("p3^({})", args.l), num(p3), finding.into()]);
    }
    match min_p3 {
        Some(m) => t.push(vec![
            "2".into(),
            "summary".into(),
            String::new(),
            "min_p3".into(),
            num(m),
            format!("{} instances", instances.len()),
        ]),
        None => t.push(vec![
            "2".into(),
            "summary".into(),
            String::new(),
            "instances".into(),
            "0".into(),
            "no conjecture-2 instances in grid".into(),
        ]),
    }

    // Families where consistency holds without an orthogonal-passage witness.
    let field = PrimeField::new(args.q)?;
    let all = Subspace::enumerate(field, args.m, None, DEFAULT_ENUMERATION_CAP)?;
    let mut scanned = 0usize;
    let mut found = 0usize;
    for family in families(&all, args.family_size) {
        for s in UserSet::nonempty_subsets(args.m) {
            scanned += 1;
            if !consistency_check(&family, s)? || orthogonal_passage_check(&family, s, DEFAULT_ENUMERATION_CAP)?.is_some() {
                continue;
            }
            found += 1;
            let w = 1.0 / family.len() as f64;
            let combo = LinearComboMac::new(field, args.m, family.iter().map(|v| (w, v.clone())).collect())?;
            let levels = combo_evolve(&combo, args.preservation_depth)?;
            let start = levels[0].iter().find(|(u, _)| *u == s).map(|x| x.1).unwrap_or(0.0);
            let drop = levels
                .iter()
                .filter_map(|lv| lv.iter().find(|(u, _)| *u == s).map(|x| start - x.1))
                .fold(0.0f64, f64::max);
            let finding = if drop < args.tolerance { "preserved_without_witness" } else { "not_preserved" };
            let label: Vec<String> = family.iter().map(Subspace::to_string).collect();
            t.push(vec!["1".into(), label.join(" "), s.to_string(), "max_drop".into(), num(drop), finding.into()]);
        }
    }
    t.push(vec![
        "1".into(),
        "summary".into(),
        String::new(),
        "instances".into(),
        found.to_string(),
        format!("{scanned} (family, set) pairs scanned"),
    ]);
    Ok(t)
}

/// Non-empty families of at most `k` distinct subspaces, in combination order.
fn families(all: &[Subspace], k: usize) -> Vec<Vec<Subspace>> {
    fn rec(all: &[Subspace], start: usize, k: usize, cur: &mut Vec<Subspace>, out: &mut Vec<Vec<Subspace>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for i in start..all.len() {
            cur.push(all[i].clone());
            rec(all, i + 1, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(all, 0, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_grid_counts_compositions() {
        // C(n + 4, 4) points
        assert_eq!(simplex_grid(1).len(), 5);
        assert_eq!(simplex_grid(5).len(), 126);
        for p in simplex_grid(4) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_grids_are_rejected() {
        assert!(matches!(parse_grid("states:"), Err(CliError::BadGrid(_))));
        assert!(matches!(parse_grid("simplex:0"), Err(CliError::BadGrid(_))));
    }

    #[test]
    fn family_enumeration_is_exhaustive() {
        let f = PrimeField::new(2).unwrap();
        let all = Subspace::enumerate(f, 2, None, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(families(&all, 3).len(), 5 + 10 + 10);
    }
}
