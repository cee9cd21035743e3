//! `pot`: exact partial optimal transport from the command line.
//!
//! Point clouds are CSV files with a header, numeric feature columns and an
//! optional integer `label` column; both clouds get uniform unit mass.
//! Every subcommand prints its JSON report on stdout and, with `--out DIR`,
//! also writes its files there.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use partial_ot::experiment::{self, run_experiment, ExperimentConfig};
use partial_ot::gw::{diameter_bound, lipschitz_bound};
use partial_ot::io::{self, ConfigValue, FlatConfig, PlanSummary};
use partial_ot::scenario::{generate_scenario, ScenarioSpec, RNG_NAME};
use partial_ot::{
    euclidean_cost, fw_gap_bound, multi_start, solve_exact_ot, solve_partial_w, FwOptions, GwProblem, Histogram,
    InitClouds, InitStrategy, PartialProblem, PointCloud, TransportPlan,
};

#[derive(Parser)]
#[command(
    name = "pot",
    about = "Exact partial optimal transport and PU learning",
    disable_version_flag = true
)]
struct Cli {
    /// Print version and build information.
    #[arg(long, short = 'V')]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Balanced exact transport between two uniform clouds.
    Emd(EmdArgs),
    /// Partial Wasserstein transport of a given mass.
    PartialW(PartialWArgs),
    /// Partial Gromov-Wasserstein transport by Frank-Wolfe.
    PartialGw(PartialGwArgs),
    /// Positive-unlabeled classification of CSV data.
    Pu(ExperimentArgs),
    /// Write a synthetic scenario as `unlabeled.csv` and `positive.csv`.
    Generate(GenerateArgs),
    /// Run a seeded experiment from a config file and/or flags.
    Run(ExperimentArgs),
}

#[derive(Args)]
struct PairArgs {
    /// Source point-cloud CSV.
    #[arg(long)]
    source: PathBuf,
    /// Target point-cloud CSV.
    #[arg(long)]
    target: PathBuf,
    /// Exponent of the Euclidean ground cost.
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmdArgs {
    #[command(flatten)]
    pair: PairArgs,
}

#[derive(Args)]
struct PartialWArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Transported mass, at most 1.
    #[arg(long)]
    mass: f64,
    /// Cost of sending mass to a dummy point.
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
    /// Dummy-to-dummy penalty; defaults to twice the largest cost plus one.
    #[arg(long)]
    penalty: Option<f64>,
}

#[derive(Args)]
struct PartialGwArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Transported mass, at most 1.
    #[arg(long)]
    mass: f64,
    /// Frank-Wolfe iteration cap.
    #[arg(long, default_value_t = FwOptions::default().max_iter)]
    max_iter: usize,
    /// Absolute gap tolerance; defaults to 1e-9 times the first gap.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// `barycenter2`, `partial-w`, `outer`, a comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    init: String,
    /// Seeds per seeded strategy.
    #[arg(long, default_value_t = 1)]
    starts: usize,
    /// Seed of the first seeded start.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    /// `two_gaussians`, `rotated_domain` or `feature_split`.
    #[arg(long)]
    kind: String,
    /// Number of unlabeled points.
    #[arg(long)]
    n_unl: usize,
    /// Number of labeled positives.
    #[arg(long)]
    n_pos: usize,
    /// Fraction of positives among the unlabeled points.
    #[arg(long)]
    true_prior: f64,
    /// Rotation of the unlabeled cloud in radians, `rotated_domain` only.
    #[arg(long, default_value_t = 0.0)]
    rotation_angle: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature dimension of the unlabeled cloud.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Standard deviation of the positives.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Distance between the class means in units of sigma.
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    /// Standard deviation of the negatives relative to sigma.
    #[arg(long, default_value_t = 1.0)]
    neg_spread: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Flags shared by `pu` and `run`; each one overrides the config key of the
/// same name.
#[derive(Args, Default)]
struct ExperimentArgs {
    /// Flat TOML or JSON file with keys named like these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Unlabeled point-cloud CSV; a `label` column is used as ground truth.
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// Labeled-positive point-cloud CSV.
    #[arg(long)]
    positive: Option<PathBuf>,
    /// Generator kind, instead of data files.
    #[arg(long)]
    scenario: Option<String>,
    /// Generator: number of unlabeled points.
    #[arg(long)]
    n_unl: Option<u64>,
    /// Generator: number of labeled positives.
    #[arg(long)]
    n_pos: Option<u64>,
    /// Generator: fraction of positives among the unlabeled points.
    #[arg(long)]
    true_prior: Option<f64>,
    /// Generator: rotation of the unlabeled cloud in radians.
    #[arg(long)]
    rotation_angle: Option<f64>,
    /// Generator: feature dimension.
    #[arg(long)]
    dim: Option<u64>,
    /// Generator: standard deviation of the positives.
    #[arg(long)]
    sigma: Option<f64>,
    /// Generator: distance between the class means in units of sigma.
    #[arg(long)]
    separation: Option<f64>,
    /// Generator: standard deviation of the negatives relative to sigma.
    #[arg(long)]
    neg_spread: Option<f64>,
    /// Class prior used by the solver; defaults to the generator's.
    #[arg(long)]
    prior: Option<f64>,
    /// Mass the positives receive from the dummy point rather than from unlabeled points.
    #[arg(long)]
    noise: Option<f64>,
    /// `w` or `gw`.
    #[arg(long)]
    mode: Option<String>,
    /// Group penalty weight.
    #[arg(long)]
    eta: Option<f64>,
    /// Cost of sending mass to a dummy point.
    #[arg(long)]
    xi: Option<f64>,
    /// Exponent of the Euclidean ground cost.
    #[arg(long)]
    exponent: Option<f64>,
    /// Number of trials.
    #[arg(long)]
    runs: Option<u64>,
    /// Seed of trial 0; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Frank-Wolfe iteration cap.
    #[arg(long)]
    max_iter: Option<u64>,
    /// Absolute Frank-Wolfe gap tolerance.
    #[arg(long)]
    gap_tol: Option<f64>,
    /// Row-split tolerance of the group penalty solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of the group penalty solver.
    #[arg(long)]
    max_mm_iter: Option<u64>,
    /// Branch-and-bound node budget of the Wasserstein solver.
    #[arg(long)]
    node_limit: Option<u64>,
    /// Init strategies for `gw` mode: a comma-separated list or `all`.
    #[arg(long)]
    init: Option<String>,
    /// Seeds per seeded init strategy.
    #[arg(long)]
    starts: Option<u64>,
    /// Round an off-grid prior to the nearest feasible one.
    #[arg(long)]
    relax_grid: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

const PATH_KEYS: [&str; 3] = ["unlabeled", "positive", "out"];

impl ExperimentArgs {
    /// Config file keys, with relative paths resolved against the file's
    /// directory, overridden by the flags given on the command line.
    fn flat(&self) -> Result<FlatConfig> {
        let mut map = FlatConfig::new();
        if let Some(path) = &self.config {
            map = io::load_config(path).with_context(|| format!("reading {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new(""));
            for key in PATH_KEYS {
                if let Some(ConfigValue::Str(p)) = map.get(key) {
                    if Path::new(p).is_relative() {
                        let joined = base.join(p).display().to_string();
                        map.insert(key.into(), ConfigValue::Str(joined));
                    }
                }
            }
        }
        let mut set = |key: &str, v: Option<ConfigValue>| {
            if let Some(v) = v {
                map.insert(key.into(), v);
            }
        };
        let s = |v: &Option<String>| v.clone().map(ConfigValue::Str);
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| ConfigValue::Str(p.display().to_string()));
        let f = |v: Option<f64>| v.map(ConfigValue::Float);
        let i = |v: Option<u64>| v.map(|v| ConfigValue::Int(v.min(i64::MAX as u64) as i64));
        set("unlabeled", p(&self.unlabeled));
        set("positive", p(&self.positive));
        set("scenario", s(&self.scenario));
        set("n-unl", i(self.n_unl));
        set("n-pos", i(self.n_pos));
        set("true-prior", f(self.true_prior));
        set("rotation-angle", f(self.rotation_angle));
        set("dim", i(self.dim));
        set("sigma", f(self.sigma));
        set("separation", f(self.separation));
        set("neg-spread", f(self.neg_spread));
        set("prior", f(self.prior));
        set("noise", f(self.noise));
        set("mode", s(&self.mode));
        set("eta", f(self.eta));
        set("xi", f(self.xi));
        set("exponent", f(self.exponent));
        set("runs", i(self.runs));
        set("seed", i(self.seed));
        set("max-iter", i(self.max_iter));
        set("gap-tol", f(self.gap_tol));
        set("tol", f(self.tol));
        set("max-mm-iter", i(self.max_mm_iter));
        set("node-limit", i(self.node_limit));
        set("init", s(&self.init));
        set("starts", i(self.starts));
        set("relax-grid", self.relax_grid.then_some(ConfigValue::Bool(true)));
        set("out", p(&self.out));
        Ok(map)
    }
}

fn version_text() -> String {
    format!(
        "pot {}\nlibrary: partial-ot {}\ntarget: {}-{}\nprofile: {}\nrng: {RNG_NAME}\nlinear solver: network simplex\n",
        env!("CARGO_PKG_VERSION"),
        partial_ot::VERSION,
        std::env::consts::ARCH,
        std::env::consts::OS,
        if cfg!(debug_assertions) { "debug" } else { "release" },
    )
}

fn load(path: &Path) -> Result<PointCloud> {
    io::load_pointcloud(path).with_context(|| format!("reading {}", path.display()))
}

fn uniform(cloud: &PointCloud) -> Histogram {
    Histogram::uniform(cloud.len(), 1.0)
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_plan_files(dir: &Path, plan: &TransportPlan, summary: &PlanSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_plan_triplets(plan, File::create(dir.join("plan.csv"))?)?;
    io::write_json(summary, File::create(dir.join("plan.json"))?)?;
    Ok(())
}

fn write_report(dir: &Path, report: &serde_json::Value) -> Result<()> {
    io::write_json(report, File::create(dir.join("report.json"))?)?;
    Ok(())
}

fn emd(args: &EmdArgs) -> Result<()> {
    let (x, y) = (load(&args.pair.source)?, load(&args.pair.target)?);
    let cost = euclidean_cost(&x, &y, args.pair.exponent)?;
    let (p, q) = (uniform(&x), uniform(&y));
    let plan = solve_exact_ot(&p, &q, &cost)?;
    let summary = PlanSummary::new(&plan, p.weights(), q.weights(), false);
    let report = json!({ "objective": plan.objective(), "plan": summary });
    if let Some(dir) = &args.pair.out {
        write_plan_files(dir, &plan, &summary)?;
        write_report(dir, &report)?;
    }
    print_json(&report)
}

fn partial_w(args: &PartialWArgs) -> Result<()> {
    let (x, y) = (load(&args.pair.source)?, load(&args.pair.target)?);
    let cost = euclidean_cost(&x, &y, args.pair.exponent)?;
    let (p, q) = (uniform(&x), uniform(&y));
    let mut prob = PartialProblem::new(p.clone(), q.clone(), cost, args.mass)?.with_xi(args.xi)?;
    if let Some(a) = args.penalty {
        prob = prob.with_penalty(a)?;
    }
    let sol = solve_partial_w(&prob)?;
    let summary = PlanSummary::new(&sol.plan, p.weights(), q.weights(), true);
    let report = json!({
        "partial_cost": sol.partial_cost,
        "extended_objective": sol.extended_objective,
        "corner_entry": sol.corner,
        "mass_transported": sol.mass_transported(),
        "plan": summary,
    });
    if let Some(dir) = &args.pair.out {
        write_plan_files(dir, &sol.plan, &summary)?;
        write_report(dir, &report)?;
    }
    print_json(&report)
}

fn partial_gw(args: &PartialGwArgs) -> Result<()> {
    let (x, y) = (load(&args.pair.source)?, load(&args.pair.target)?);
    let e = args.pair.exponent;
    let (p, q) = (uniform(&x), uniform(&y));
    let prob = GwProblem::new(
        euclidean_cost(&x, &x, e)?,
        euclidean_cost(&y, &y, e)?,
        p.clone(),
        q.clone(),
        args.mass,
    )?;
    let strategies = InitStrategy::expand_list(&args.init, args.starts, args.seed)?;
    let clouds = InitClouds {
        source: &x,
        target: &y,
        exponent: e,
    };
    let opts = FwOptions {
        max_iter: args.max_iter,
        gap_tol: args.gap_tol,
    };
    let runs = multi_start(&prob, &strategies, Some(clouds), opts)?;
    let state = &runs.best;
    let summary = PlanSummary::new(&state.plan, p.weights(), q.weights(), true);
    let per_strategy: Vec<_> = strategies
        .iter()
        .zip(runs.losses.iter().zip(&runs.errors))
        .map(|(st, (loss, err))| json!({ "strategy": st.kind.name(), "seed": st.seed, "loss": loss, "error": err }))
        .collect();
    let report = json!({
        "pgw_value": state.loss(),
        "iterations": state.iteration,
        "final_gap": state.final_gap(),
        "gap_bound": fw_gap_bound(&prob, state.initial_loss(), state.iteration),
        "lipschitz": lipschitz_bound(&prob),
        "diameter": diameter_bound(&prob),
        "loss_trace": state.loss_trace,
        "best_strategy": runs.best_index,
        "strategies": per_strategy,
        "plan": summary,
    });
    if let Some(dir) = &args.pair.out {
        write_plan_files(dir, &state.plan, &summary)?;
        write_report(dir, &report)?;
        experiment::write_trace(Some(state), File::create(dir.join("trace.csv"))?)?;
    }
    print_json(&report)
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let spec = ScenarioSpec {
        kind: args.kind.parse()?,
        n_unl: args.n_unl,
        n_pos: args.n_pos,
        true_prior: args.true_prior,
        rotation_angle: args.rotation_angle,
        seed: args.seed,
        dim: args.dim,
        sigma: args.sigma,
        separation: args.separation,
        neg_spread: args.neg_spread,
    };
    let sc = generate_scenario(&spec)?;
    fs::create_dir_all(&args.out)?;
    io::write_pointcloud(&sc.unl, File::create(args.out.join("unlabeled.csv"))?)?;
    io::write_pointcloud(&sc.pos, File::create(args.out.join("positive.csv"))?)?;
    print_json(&json!({ "rng": RNG_NAME, "scenario": spec }))
}

/// Returns whether at least one trial completed.
fn experiment(args: &ExperimentArgs) -> Result<bool> {
    let cfg = ExperimentConfig::from_flat(&args.flat()?, None)?;
    let result = run_experiment(&cfg)?;
    let r = &result.report;
    for t in r.trials.iter().filter(|t| !t.ok) {
        eprintln!(
            "trial {} (seed {}) failed: {}",
            t.index,
            t.seed,
            t.error.as_deref().unwrap_or("unknown")
        );
    }
    if let Some(adj) = r.trials.iter().find_map(|t| t.grid_adjustment) {
        eprintln!(
            "prior moved from {} to {} to fit the mass grid",
            adj.requested_prior, adj.used_prior
        );
    }
    print_json(&json!({
        "accuracy_mean": r.accuracy_mean,
        "accuracy_std": r.accuracy_std,
        "runs": r.runs,
        "completed_runs": r.completed_runs,
        "group_violation_max": r.group_violation_max,
    }))?;
    Ok(r.completed_runs > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.version {
        print!("{}", version_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required; see `pot --help`");
        return ExitCode::from(2);
    };
    let outcome = match &command {
        Command::Emd(a) => emd(a).map(|_| true),
        Command::PartialW(a) => partial_w(a).map(|_| true),
        Command::PartialGw(a) => partial_gw(a).map(|_| true),
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Pu(a) | Command::Run(a) => experiment(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: every trial failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
