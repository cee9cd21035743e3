//! Seeded PU experiments: configuration, trials, aggregation, and the
//! output directory layout.
//!
//! An output directory holds `report.json`, `labels.csv`, `plan.csv` and
//! `trace.csv`. The three CSVs describe the first successful trial.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gw::{diameter_bound, fw_gap_bound, lipschitz_bound, FwOptions, FwState};
use crate::init::InitStrategy;
use crate::io::{self, ConfigValue, FlatConfig};
use crate::measure::PointCloud;
use crate::plan::TransportPlan;
use crate::pu::{
    self, evaluate, solve_pu_gw, solve_pu_w, PuGwOptions, PuMode, PuOptions, PuProblem, DEFAULT_ETA,
    DEFAULT_MAX_MM_ITER, DEFAULT_NODE_LIMIT, DEFAULT_TOL,
};
use crate::scenario::{generate_scenario, ScenarioKind, ScenarioSpec, RNG_NAME};

/// Where the unlabeled and positive clouds come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { unlabeled: PathBuf, positive: PathBuf },
    Generated(ScenarioSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Class prior; defaults to the scenario's `true_prior`.
    pub prior: Option<f64>,
    pub noise: f64,
    pub mode: PuMode,
    pub runs: usize,
    pub seed: u64,
    pub eta: f64,
    pub xi: f64,
    pub exponent: f64,
    pub max_iter: usize,
    pub gap_tol: Option<f64>,
    pub tol: f64,
    pub max_mm_iter: usize,
    /// Branch-and-bound node budget of the Wasserstein solver.
    pub node_limit: usize,
    /// `all` or a comma-separated list of init strategy names.
    pub init: String,
    /// Number of seeds per seeded strategy.
    pub starts: usize,
    /// Snap an off-grid prior to the nearest feasible one instead of failing.
    pub relax_grid: bool,
    pub outdir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: DataSource) -> Self {
        Self {
            source,
            prior: None,
            noise: 0.0,
            mode: PuMode::Wasserstein,
            runs: 1,
            seed: 0,
            eta: DEFAULT_ETA,
            xi: 0.0,
            exponent: 2.0,
            max_iter: FwOptions::default().max_iter,
            gap_tol: None,
            tol: DEFAULT_TOL,
            max_mm_iter: DEFAULT_MAX_MM_ITER,
            node_limit: DEFAULT_NODE_LIMIT,
            init: "all".into(),
            starts: 1,
            relax_grid: false,
            outdir: None,
        }
    }

    /// Builds a config from flat keys named like the CLI flags. Data comes
    /// from `unlabeled` and `positive` paths, or from `scenario` plus the
    /// generator keys `n-unl`, `n-pos`, `true-prior`, `rotation-angle`,
    /// `dim`, `sigma`, `separation` and `neg-spread`. Relative paths are
    /// resolved against `base`.
    pub fn from_flat(map: &FlatConfig, base: Option<&Path>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let mut keys = Keys { map, used: Vec::new() };
        let path = |p: String| match base {
            Some(b) if Path::new(&p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        };
        let source = match (
            keys.string("unlabeled")?,
            keys.string("positive")?,
            keys.string("scenario")?,
        ) {
            (Some(u), Some(p), None) => DataSource::Files {
                unlabeled: path(u),
                positive: path(p),
            },
            (None, None, Some(kind)) => {
                let kind: ScenarioKind = kind.parse()?;
                let n_unl = keys.usize("n-unl")?.ok_or_else(|| missing("n-unl"))?;
                let n_pos = keys.usize("n-pos")?.ok_or_else(|| missing("n-pos"))?;
                let true_prior = keys.f64("true-prior")?.ok_or_else(|| missing("true-prior"))?;
                let mut spec = ScenarioSpec::new(kind, n_unl, n_pos, true_prior, 0);
                if let Some(v) = keys.f64("rotation-angle")? {
                    spec.rotation_angle = v;
                }
                if let Some(v) = keys.usize("dim")? {
                    spec.dim = v;
                }
                if let Some(v) = keys.f64("sigma")? {
                    spec.sigma = v;
                }
                if let Some(v) = keys.f64("separation")? {
                    spec.separation = v;
                }
                if let Some(v) = keys.f64("neg-spread")? {
                    spec.neg_spread = v;
                }
                DataSource::Generated(spec)
            }
            _ => {
                return Err(Error::Config(
                    "give either `unlabeled` and `positive` files or a `scenario`".into(),
                ))
            }
        };
        let mut cfg = Self::new(source);
        cfg.prior = keys.f64("prior")?;
        if let Some(v) = keys.f64("noise")? {
            cfg.noise = v;
        }
        if let Some(v) = keys.string("mode")? {
            cfg.mode = v.parse()?;
        }
        if let Some(v) = keys.usize("runs")? {
            cfg.runs = v;
        }
        if let Some(v) = keys.u64("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = keys.f64("eta")? {
            cfg.eta = v;
        }
        if let Some(v) = keys.f64("xi")? {
            cfg.xi = v;
        }
        if let Some(v) = keys.f64("exponent")? {
            cfg.exponent = v;
        }
        if let Some(v) = keys.usize("max-iter")? {
            cfg.max_iter = v;
        }
        cfg.gap_tol = keys.f64("gap-tol")?;
        if let Some(v) = keys.f64("tol")? {
            cfg.tol = v;
        }
        if let Some(v) = keys.usize("max-mm-iter")? {
            cfg.max_mm_iter = v;
        }
        if let Some(v) = keys.usize("node-limit")? {
            cfg.node_limit = v;
        }
        if let Some(v) = keys.string("init")? {
            cfg.init = v;
        }
        if let Some(v) = keys.usize("starts")? {
            cfg.starts = v;
        }
        if let Some(v) = keys.bool("relax-grid")? {
            cfg.relax_grid = v;
        }
        cfg.outdir = keys.string("out")?.map(path);
        keys.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.starts == 0 {
            return bad("starts must be at least 1".into());
        }
        if let DataSource::Generated(spec) = &self.source {
            spec.validate()?;
        } else if self.prior.is_none() {
            return bad("`prior` is required with file input".into());
        }
        if let Some(p) = self.prior {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("prior must lie in (0, 1), got {p}"));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be nonnegative, got {}", self.noise));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be nonnegative, got {}", self.eta));
        }
        if !self.xi.is_finite() {
            return bad(format!("xi must be finite, got {}", self.xi));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return bad(format!("exponent must be positive, got {}", self.exponent));
        }
        if let Some(t) = self.gap_tol {
            if !(t >= 0.0) {
                return bad(format!("gap-tol must be nonnegative, got {t}"));
            }
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        self.strategies(0).map(|_| ())
    }

    /// Strategy list for one trial; see [`InitStrategy::expand_list`].
    pub fn strategies(&self, seed: u64) -> Result<Vec<InitStrategy>> {
        InitStrategy::expand_list(&self.init, self.starts, seed)
    }

    fn options(&self) -> PuGwOptions {
        PuGwOptions {
            pu: PuOptions {
                tol: self.tol,
                max_mm_iter: self.max_mm_iter,
                node_limit: self.node_limit,
                ..PuOptions::default()
            },
            fw: FwOptions {
                max_iter: self.max_iter,
                gap_tol: self.gap_tol,
            },
        }
    }

    /// Flat echo of the effective settings, recorded in the report.
    fn echo(&self) -> ConfigEcho {
        let (data, scenario) = match &self.source {
            DataSource::Files { unlabeled, positive } => (
                Some(DataFiles {
                    unlabeled: unlabeled.display().to_string(),
                    positive: positive.display().to_string(),
                }),
                None,
            ),
            DataSource::Generated(spec) => (None, Some(spec.clone())),
        };
        ConfigEcho {
            data,
            scenario,
            prior: self.prior,
            noise: self.noise,
            mode: self.mode.name(),
            runs: self.runs,
            seed: self.seed,
            eta: self.eta,
            xi: self.xi,
            exponent: self.exponent,
            max_iter: self.max_iter,
            gap_tol: self.gap_tol,
            tol: self.tol,
            max_mm_iter: self.max_mm_iter,
            node_limit: self.node_limit,
            init: self.init.clone(),
            starts: self.starts,
            relax_grid: self.relax_grid,
        }
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing key `{key}`"))
}

/// Typed access to a [`FlatConfig`] that rejects keys left unread at the end.
/// Every key [`ExperimentConfig::from_flat`] reads.
pub const CONFIG_KEYS: [&str; 28] = [
    "unlabeled",
    "positive",
    "scenario",
    "n-unl",
    "n-pos",
    "true-prior",
    "rotation-angle",
    "dim",
    "sigma",
    "separation",
    "neg-spread",
    "prior",
    "noise",
    "mode",
    "runs",
    "seed",
    "eta",
    "xi",
    "exponent",
    "max-iter",
    "gap-tol",
    "tol",
    "max-mm-iter",
    "node-limit",
    "init",
    "starts",
    "relax-grid",
    "out",
];

struct Keys<'a> {
    map: &'a FlatConfig,
    used: Vec<&'static str>,
}

impl Keys<'_> {
    fn get(&mut self, key: &'static str) -> Option<&ConfigValue> {
        self.used.push(key);
        self.map.get(key)
    }

    fn typed<T>(&mut self, key: &'static str, what: &str, f: impl Fn(&ConfigValue) -> Option<T>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => f(v)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("`{key}` must be {what}, got {v:?}"))),
        }
    }

    fn string(&mut self, key: &'static str) -> Result<Option<String>> {
        self.typed(key, "a string", |v| v.as_str().map(String::from))
    }

    fn f64(&mut self, key: &'static str) -> Result<Option<f64>> {
        self.typed(key, "a number", ConfigValue::as_f64)
    }

    fn u64(&mut self, key: &'static str) -> Result<Option<u64>> {
        self.typed(key, "a nonnegative integer", ConfigValue::as_u64)
    }

    fn usize(&mut self, key: &'static str) -> Result<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    fn bool(&mut self, key: &'static str) -> Result<Option<bool>> {
        self.typed(key, "a boolean", ConfigValue::as_bool)
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!("key `{k}` does not apply to this data source"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataFiles {
    pub unlabeled: String,
    pub positive: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub data: Option<DataFiles>,
    pub scenario: Option<ScenarioSpec>,
    pub prior: Option<f64>,
    pub noise: f64,
    pub mode: &'static str,
    pub runs: usize,
    pub seed: u64,
    pub eta: f64,
    pub xi: f64,
    pub exponent: f64,
    pub max_iter: usize,
    pub gap_tol: Option<f64>,
    pub tol: f64,
    pub max_mm_iter: usize,
    pub node_limit: usize,
    pub init: String,
    pub starts: usize,
    pub relax_grid: bool,
}

/// Prior snapped onto the feasible grid by `relax_grid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridAdjustment {
    pub requested_prior: f64,
    pub used_prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub strategy: &'static str,
    pub seed: u64,
    pub loss: Option<f64>,
    pub error: Option<String>,
}

/// Frank-Wolfe certificate of a Gromov-Wasserstein trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwTrialReport {
    pub pgw_value: f64,
    pub iterations: usize,
    pub final_gap: f64,
    pub gap_bound: f64,
    pub lipschitz: f64,
    pub diameter: f64,
    pub best_strategy: usize,
    pub strategies: Vec<StrategyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub index: usize,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub accuracy: Option<f64>,
    /// `⟨C, T⟩` in Wasserstein mode, the loss in Gromov mode.
    pub objective: Option<f64>,
    pub group_residual: Option<f64>,
    pub transported_rows: Option<usize>,
    /// Wasserstein mode: branch and bound proved the row set optimal.
    pub proven_optimal: Option<bool>,
    pub grid_adjustment: Option<GridAdjustment>,
    pub gw: Option<GwTrialReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng: &'static str,
    pub config: ConfigEcho,
    pub runs: usize,
    pub completed_runs: usize,
    /// Over completed trials with ground truth.
    pub accuracy_mean: Option<f64>,
    /// Population standard deviation of the trial accuracies.
    pub accuracy_std: Option<f64>,
    pub group_violation_max: Option<f64>,
    /// Trial behind `labels.csv`, `plan.csv` and `trace.csv`.
    pub exported_trial: Option<usize>,
    pub trials: Vec<TrialReport>,
}

/// Per-trial artifacts kept for export.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub labels: Vec<i64>,
    pub plan: TransportPlan,
    pub state: Option<FwState>,
}

/// Report plus the exported trial's artifacts.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: Report,
    pub exported: Option<TrialOutput>,
}

fn load(cfg: &ExperimentConfig, seed: u64) -> Result<(PointCloud, PointCloud, Option<Vec<i64>>, f64)> {
    match &cfg.source {
        DataSource::Files { unlabeled, positive } => {
            let unl = io::load_pointcloud(unlabeled)?;
            let pos = io::load_pointcloud(positive)?;
            let truth = unl.labels().map(<[i64]>::to_vec);
            Ok((unl, pos, truth, cfg.prior.expect("validated")))
        }
        DataSource::Generated(spec) => {
            let spec = ScenarioSpec { seed, ..spec.clone() };
            let sc = generate_scenario(&spec)?;
            Ok((sc.unl, sc.pos, Some(sc.truth), cfg.prior.unwrap_or(spec.true_prior)))
        }
    }
}

fn run_trial(cfg: &ExperimentConfig, index: usize) -> (TrialReport, Option<TrialOutput>) {
    let seed = cfg.seed.wrapping_add(index as u64);
    let mut report = TrialReport {
        index,
        seed,
        ok: false,
        error: None,
        accuracy: None,
        objective: None,
        group_residual: None,
        transported_rows: None,
        proven_optimal: None,
        grid_adjustment: None,
        gw: None,
    };
    match trial(cfg, seed, &mut report) {
        Ok(out) => {
            report.ok = true;
            (report, Some(out))
        }
        Err(e) => {
            report.error = Some(e.to_string());
            (report, None)
        }
    }
}

fn trial(cfg: &ExperimentConfig, seed: u64, report: &mut TrialReport) -> Result<TrialOutput> {
    let (unl, pos, truth, prior) = load(cfg, seed)?;
    let mut prob = PuProblem::new(unl, pos, prior, cfg.mode)?
        .with_noise(cfg.noise)?
        .with_eta(cfg.eta)?
        .with_xi(cfg.xi)?
        .with_exponent(cfg.exponent)?;
    if prob.transported_rows().is_err() && cfg.relax_grid {
        let (snapped, requested) = prob.snapped_to_grid()?;
        report.grid_adjustment = Some(GridAdjustment {
            requested_prior: requested,
            used_prior: snapped.prior(),
        });
        prob = snapped;
    }
    let opts = cfg.options();
    let (plan, state) = match cfg.mode {
        PuMode::Wasserstein => {
            let r = solve_pu_w(&prob, opts.pu)?;
            report.objective = Some(r.plan.objective());
            (r, None)
        }
        PuMode::Gromov => {
            let strategies = cfg.strategies(seed)?;
            let r = solve_pu_gw(&prob, &strategies, opts)?;
            let gw_prob = pu::gw_problem(&prob)?;
            report.objective = Some(r.state.loss());
            report.gw = Some(GwTrialReport {
                pgw_value: r.state.loss(),
                iterations: r.state.iteration,
                final_gap: r.state.final_gap(),
                gap_bound: fw_gap_bound(&gw_prob, r.state.initial_loss(), r.state.iteration),
                lipschitz: lipschitz_bound(&gw_prob),
                diameter: diameter_bound(&gw_prob),
                best_strategy: r.best_index,
                strategies: strategies
                    .iter()
                    .zip(r.losses.iter().zip(&r.errors))
                    .map(|(st, (loss, err))| StrategyReport {
                        strategy: st.kind.name(),
                        seed: st.seed,
                        loss: *loss,
                        error: err.clone(),
                    })
                    .collect(),
            });
            (r.plan, Some(r.state))
        }
    };
    report.group_residual = Some(plan.group_residual);
    report.transported_rows = Some(plan.labels.iter().filter(|&&l| l == 1).count());
    if cfg.mode == PuMode::Wasserstein {
        report.proven_optimal = Some(plan.proven_optimal);
    }
    if let Some(truth) = &truth {
        report.accuracy = Some(evaluate(&plan.labels, truth)?);
    }
    Ok(TrialOutput {
        labels: plan.labels,
        plan: plan.plan,
        state,
    })
}

/// Mean and population standard deviation.
fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Runs every trial (in parallel), aggregates in trial order, and writes
/// the output directory when one is configured. Trial failures are
/// recorded in the report rather than returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let outcomes: Vec<(TrialReport, Option<TrialOutput>)> =
        (0..cfg.runs).into_par_iter().map(|i| run_trial(cfg, i)).collect();

    let accuracies: Vec<f64> = outcomes.iter().filter_map(|(r, _)| r.accuracy).collect();
    let stats = mean_std(&accuracies);
    let group_violation_max = outcomes.iter().filter_map(|(r, _)| r.group_residual).reduce(f64::max);
    let exported_trial = outcomes.iter().position(|(r, _)| r.ok);
    let mut exported = None;
    let mut trials = Vec::with_capacity(outcomes.len());
    for (r, out) in outcomes {
        if Some(r.index) == exported_trial {
            exported = out;
        }
        trials.push(r);
    }
    let report = Report {
        tool: "pot",
        version: env!("CARGO_PKG_VERSION"),
        rng: RNG_NAME,
        config: cfg.echo(),
        runs: cfg.runs,
        completed_runs: trials.iter().filter(|t| t.ok).count(),
        accuracy_mean: stats.map(|s| s.0),
        accuracy_std: stats.map(|s| s.1),
        group_violation_max,
        exported_trial,
        trials,
    };
    let result = ExperimentResult { report, exported };
    if let Some(dir) = &cfg.outdir {
        write_outputs(dir, &result)?;
    }
    Ok(result)
}

/// Writes `report.json` and, when a trial succeeded, `labels.csv`,
/// `plan.csv` and `trace.csv`.
pub fn write_outputs(dir: &Path, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    io::write_json(&result.report, File::create(dir.join("report.json"))?)?;
    if let Some(out) = &result.exported {
        io::write_labels(&out.labels, File::create(dir.join("labels.csv"))?)?;
        io::write_plan_triplets(&out.plan, File::create(dir.join("plan.csv"))?)?;
        write_trace(out.state.as_ref(), File::create(dir.join("trace.csv"))?)?;
    }
    Ok(())
}

/// Per-iterate `k,loss,gap,gamma`. The gap and step columns are empty where
/// the run stopped before measuring or taking them. Without a
/// Frank-Wolfe state only the header is written.
pub fn write_trace<W: Write>(state: Option<&FwState>, out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "k,loss,gap,gamma")?;
    if let Some(s) = state {
        let cell = |v: Option<&f64>| v.map_or(String::new(), f64::to_string);
        for (k, loss) in s.loss_trace.iter().enumerate() {
            writeln!(
                w,
                "{k},{loss},{},{}",
                cell(s.gap_trace.get(k)),
                cell(s.step_trace.get(k))
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
