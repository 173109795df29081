//! The six subcommands. Each takes its resolved argument struct, which is
//! echoed verbatim into the output preamble.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use polarmac::codec::{run_trials, FrozenMode, TrialReport};
use polarmac::linear_mac::{binary2_evolve, combo_evolve, Binary2State, EvolveMode, EvolveReport, LinearComboMac};
use polarmac::mac::{DEFAULT_MERGE_TOL, ROW_SUM_TOL};
use polarmac::polarize::{
    asymptotic_z_threshold, build_code, detect_from_stats, direction_stats, martingale_from_tree, polarize_tree,
    BranchSig, PolarizeOptions, DEFAULT_MAX_OUTPUTS,
};
use polarmac::region::{RateRegion, MAX_REGION_USERS};
use polarmac::users::UserSet;
use serde::{Serialize, Serializer};

use crate::channel::{load_channel, load_code, Channel};
use crate::error::{CliError, Result};
use crate::output::{emit_csv, json_bytes, num, write_bytes, OutputArgs, Table};
use crate::probe;

#[derive(Debug, Clone, Args, Serialize)]
pub struct TransformArgs {
    /// Relative tolerance for merging proportional output columns.
    #[arg(long, default_value_t = DEFAULT_MERGE_TOL)]
    pub merge_tol: f64,
    /// Cap on a merged output alphabet.
    #[arg(long, default_value_t = DEFAULT_MAX_OUTPUTS)]
    pub max_outputs: usize,
}

impl TransformArgs {
    fn options(&self) -> PolarizeOptions {
        PolarizeOptions { merge_tol: self.merge_tol, max_outputs: self.max_outputs }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Channel JSON file.
    #[arg(long)]
    pub channel: PathBuf,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PolarizeArgs {
    #[arg(long)]
    pub channel: PathBuf,
    /// Recursion depth; the block length is 2^l.
    #[arg(long)]
    pub l: usize,
    /// Threshold for calling a direction good or bad in the detection column.
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[command(flatten)]
    pub transform: TransformArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstructArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub eps: f64,
    /// Upper bound on the Bhattacharyya sum of a good branch.
    #[arg(long)]
    pub z_budget: f64,
    /// Where to write the code specification JSON.
    #[arg(long)]
    pub code: PathBuf,
    /// Also report the asymptotic threshold 2^(-2^(beta' l)).
    #[arg(long)]
    pub beta_prime: Option<f64>,
    #[command(flatten)]
    pub transform: TransformArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrozenArg {
    /// Fresh frozen symbols every trial.
    PerTrial,
    /// One frozen assignment derived from the seed.
    Fixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Code specification written by `construct`.
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FrozenArg::PerTrial)]
    pub frozen: FrozenArg,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// `enumerate` or `sample:N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Enumerate,
    Sample(usize),
}

impl FromStr for ModeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "enumerate" {
            return Ok(ModeArg::Enumerate);
        }
        match s.strip_prefix("sample:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(ModeArg::Sample(n)),
            _ => Err(format!("expected `enumerate` or `sample:N` with N > 0, got `{s}`")),
        }
    }
}

impl fmt::Display for ModeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeArg::Enumerate => f.write_str("enumerate"),
            ModeArg::Sample(n) => write!(f, "sample:{n}"),
        }
    }
}

impl Serialize for ModeArg {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvolveArgs {
    /// Linear-combination channel JSON (or a `binary2` state).
    #[arg(long, conflicts_with = "state", required_unless_present = "state")]
    pub channel: Option<PathBuf>,
    /// Binary two-user state `p0,p1,p2,p3,p4`.
    #[arg(long)]
    pub state: Option<String>,
    #[arg(long)]
    pub l: usize,
    #[arg(long, default_value = "enumerate")]
    pub mode: ModeArg,
    /// Seed for the sampling mode.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Final `p3` below this counts as observed total loss.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProbeArgs {
    /// Initial states: `simplex:N`, `states:a,b,c,d,e;...`, or a JSON file of 5-vectors.
    #[arg(long)]
    pub grid: String,
    #[arg(long)]
    pub l: usize,
    /// Threshold for total loss and for preservation deviations.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Field size for the subspace-family scan.
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    /// Number of users for the subspace-family scan.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Largest family size in the subspace-family scan.
    #[arg(long, default_value_t = 3)]
    pub family_size: usize,
    /// Depth of the empirical preservation check on scanned families.
    #[arg(long, default_value_t = 6)]
    pub preservation_depth: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let channel = load_channel(&args.channel)?;
    let m = channel.users();
    let infos = match &channel {
        Channel::Explicit(p) => p.all_mutual_info(),
        Channel::Linear(c) => c.all_mutual_info(),
    };
    let lookup = |s: UserSet| infos.iter().find(|(t, _)| *t == s).map(|x| x.1).unwrap_or(0.0);
    let sum_capacity = lookup(UserSet::full(m));
    let region = (m <= MAX_REGION_USERS)
        .then(|| RateRegion::from_fn(m, lookup))
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if args.json {
        #[derive(Serialize)]
        struct Report<'a> {
            q: u32,
            m: usize,
            mutual_info: Vec<(String, f64)>,
            sum_capacity: f64,
            vertices: Option<&'a [Vec<f64>]>,
        }
        let report = Report {
            q: channel.q(),
            m,
            mutual_info: infos.iter().map(|(s, i)| (s.to_string(), *i)).collect(),
            sum_capacity,
            vertices: region.as_ref().map(|r| r.vertices.as_slice()),
        };
        return write_bytes(args.output.out.as_deref(), &json_bytes(&report)?);
    }
    let mut t = Table::new(&["kind", "users", "vertex", "value"]);
    for (s, i) in &infos {
        t.push(vec!["mutual_info".into(), s.to_string(), String::new(), num(*i)]);
    }
    t.push(vec!["sum_capacity".into(), UserSet::full(m).to_string(), String::new(), num(sum_capacity)]);
    if let Some(r) = &region {
        for (v, rates) in r.vertices.iter().enumerate() {
            for (k, rk) in rates.iter().enumerate() {
                t.push(vec!["vertex".into(), format!("{{{}}}", k + 1), v.to_string(), num(*rk)]);
            }
        }
    }
    emit_csv("analyze", args, &args.output, &t)
}

pub fn polarize(args: &PolarizeArgs) -> Result<()> {
    let p = load_channel(&args.channel)?.explicit()?;
    let tree = polarize_tree(&p, args.l, &args.transform.options())?;
    let report = martingale_from_tree(p.users(), &tree);
    let mut t = Table::new(&["kind", "level", "branch", "users", "alpha", "info", "z", "detected_rank"]);
    for r in &report.rows {
        t.push(vec![
            "average".into(),
            r.level.to_string(),
            String::new(),
            r.users.to_string(),
            String::new(),
            num(r.average),
            String::new(),
            String::new(),
        ]);
    }
    let last = tree.last().expect("level 0 is always present");
    for (b, c) in last.iter().enumerate() {
        let stats = direction_stats(c)?;
        let rank = detect_from_stats(c.field(), c.users(), &stats, args.eps)
            .map(|d| d.rank.to_string())
            .unwrap_or_else(|| "none".into());
        let sig = BranchSig::from_index(b, args.l).to_string();
        for d in &stats {
            let alpha: Vec<String> = d.alpha.iter().map(u32::to_string).collect();
            t.push(vec![
                "direction".into(),
                args.l.to_string(),
                sig.clone(),
                String::new(),
                format!("({})", alpha.join(",")),
                num(d.info),
                num(d.z),
                rank.clone(),
            ]);
        }
    }
    t.note(format!("full_set_constant={}", report.full_set_constant));
    t.note(format!("strict_non_increasing={}", report.strict_non_increasing));
    emit_csv("polarize", args, &args.output, &t)
}

pub fn construct(args: &ConstructArgs) -> Result<()> {
    let p = load_channel(&args.channel)?.explicit()?;
    if !(args.z_budget > 0.0) {
        return Err(CliError::Config(format!("z-budget must be positive, got {}", args.z_budget)));
    }
    let spec = build_code(&p, args.l, args.eps, args.z_budget, &args.transform.options())?;
    write_bytes(Some(&args.code), &json_bytes(&spec)?)?;
    let mut t = Table::new(&["quantity", "value"]);
    let mut row = |k: &str, v: String| t.push(vec![k.into(), v]);
    row("block_length", spec.block_length().to_string());
    row("capacity", num(spec.capacity));
    row("sum_rate", num(spec.sum_rate));
    for (k, r) in spec.rates.iter().enumerate() {
        row(&format!("rate_{}", k + 1), num(*r));
    }
    row("rate_target", num(spec.capacity - spec.eps));
    row("meets_target", (spec.sum_rate >= spec.capacity - spec.eps - ROW_SUM_TOL).to_string());
    row("good_branches", spec.good_count.to_string());
    row("info_symbols", spec.info_symbol_count().to_string());
    row("union_bound", num(spec.union_bound));
    if let Some(beta) = args.beta_prime {
        row("asymptotic_z_threshold", num(asymptotic_z_threshold(beta, args.l)));
    }
    emit_csv("construct", args, &args.output, &t)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let spec = load_code(&args.code)?;
    let p = load_channel(&args.channel)?.explicit()?;
    let mode = match args.frozen {
        FrozenArg::PerTrial => FrozenMode::PerTrial,
        FrozenArg::Fixed => FrozenMode::Fixed(args.seed),
    };
    let report = run_trials(&spec, &p, args.trials, args.seed, mode)?;
    if let Some(path) = &args.json {
        write_bytes(Some(path), &json_bytes(&report)?)?;
    }
    let mut t = Table::new(&TrialReport::CSV_HEADER);
    t.push(report.csv_record());
    emit_csv("simulate", args, &args.output, &t)
}

fn parse_state(text: &str) -> Result<Binary2State> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad state entry `{v}`: {e}"))))
        .collect::<Result<_>>()?;
    let arr: [f64; 5] = vals
        .try_into()
        .map_err(|v: Vec<f64>| CliError::Config(format!("a state has 5 entries, got {}", v.len())))?;
    Ok(Binary2State::new(arr)?)
}

pub fn evolve(args: &EvolveArgs) -> Result<()> {
    let combo: LinearComboMac = match (&args.state, &args.channel) {
        (Some(s), _) => parse_state(s)?.to_combo(),
        (None, Some(path)) => match load_channel(path)? {
            Channel::Linear(c) => c,
            Channel::Explicit(_) => {
                return Err(CliError::Config("evolve needs a linear-combination channel".into()));
            }
        },
        (None, None) => return Err(CliError::Config("pass --state or --channel".into())),
    };
    if combo.field().order() == 2 && combo.users() == 2 {
        let st = combo.to_binary2()?;
        let mode = match args.mode {
            ModeArg::Enumerate => EvolveMode::Enumerate,
            ModeArg::Sample(paths) => EvolveMode::Sample { paths, seed: args.seed },
        };
        let report = binary2_evolve(&st, args.l, mode)?;
        return emit_csv("evolve", args, &args.output, &binary2_table(&report, args.tolerance));
    }
    if args.mode != ModeArg::Enumerate {
        return Err(CliError::Config("sampling mode needs a binary two-user channel".into()));
    }
    let levels = combo_evolve(&combo, args.l)?;
    let mut t = Table::new(&["level", "users", "average"]);
    for (level, rows) in levels.iter().enumerate() {
        for (s, avg) in rows {
            t.push(vec![level.to_string(), s.to_string(), num(*avg)]);
        }
    }
    emit_csv("evolve", args, &args.output, &t)
}

fn binary2_table(report: &EvolveReport, tolerance: f64) -> Table {
    let mut t = Table::new(&[
        "level", "branches", "p0", "p1", "p2", "p3", "p4", "p0_se", "p1_se", "p2_se", "p3_se", "p4_se", "i1", "i2",
        "i", "extremal_fraction",
    ]);
    for lv in &report.levels {
        let mut row = vec![lv.level.to_string(), lv.branches.to_string()];
        row.extend(lv.p.iter().map(|x| num(*x)));
        match lv.p_stderr {
            Some(se) => row.extend(se.iter().map(|x| num(*x))),
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        row.extend([num(lv.i1), num(lv.i2), num(lv.i), num(lv.extremal_fraction)]);
        t.push(row);
    }
    let predicted = report.initial.total_loss_predict();
    let p3 = report.last().p[3];
    let observed = p3 < tolerance;
    t.note(format!("total_loss_predicted={predicted}"));
    t.note(format!("final_p3={} total_loss_observed={observed}", num(p3)));
    t.note(format!("prediction_agrees={}", predicted == observed));
    t
}

pub fn probe_conjectures(args: &ProbeArgs) -> Result<()> {
    let table = probe::run(args)?;
    emit_csv("probe-conjectures", args, &args.output, &table)
}
