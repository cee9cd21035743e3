//! Starting plans for the non-convex partial GW solve, and multi-start.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cost::CostMatrix;
use crate::emd::solve_exact_ot;
use crate::error::{Error, Result};
use crate::gw::{solve_partial_gw, FwOptions, FwState, GwProblem};
use crate::measure::{Histogram, PointCloud};
use crate::partial::{solve_partial_w, PartialProblem};
use crate::plan::TransportPlan;

pub const DEFAULT_LLOYD_ITERS: usize = 50;
const LLOYD_TOL: f64 = 1e-8;
const MAX_RESEEDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitKind {
    Barycenter2,
    PartialW,
    OuterProduct,
}

impl InitKind {
    pub const ALL: [InitKind; 3] = [InitKind::Barycenter2, InitKind::PartialW, InitKind::OuterProduct];

    pub fn name(self) -> &'static str {
        match self {
            InitKind::Barycenter2 => "barycenter2",
            InitKind::PartialW => "partial-w",
            InitKind::OuterProduct => "outer",
        }
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "barycenter2" | "barycenter" => Ok(InitKind::Barycenter2),
            "partial-w" | "partialw" => Ok(InitKind::PartialW),
            "outer" | "outer-product" => Ok(InitKind::OuterProduct),
            other => Err(Error::InvalidInput(format!("unknown init strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitStrategy {
    pub kind: InitKind,
    pub seed: u64,
    pub lloyd_iters: usize,
}

impl InitStrategy {
    pub fn new(kind: InitKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            lloyd_iters: DEFAULT_LLOYD_ITERS,
        }
    }

    /// Parses `all` or a comma-separated list of strategy names.
    pub fn parse_list(names: &str, seed: u64) -> Result<Vec<Self>> {
        if names.trim().eq_ignore_ascii_case("all") {
            return Ok(InitKind::ALL.iter().map(|&k| Self::new(k, seed)).collect());
        }
        let list = names
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| Ok(Self::new(s.parse()?, seed)))
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(Error::InvalidInput("empty init strategy list".into()));
        }
        Ok(list)
    }

    /// [`InitStrategy::parse_list`] with `starts` starts: seeded strategies
    /// repeat with seeds `seed, seed + 1, …`, deterministic ones appear once.
    pub fn expand_list(names: &str, starts: usize, seed: u64) -> Result<Vec<Self>> {
        if starts == 0 {
            return Err(Error::InvalidInput("starts must be at least 1".into()));
        }
        let base = Self::parse_list(names, seed)?;
        let mut out = Vec::new();
        for start in 0..starts as u64 {
            for st in &base {
                if start == 0 || st.kind == InitKind::Barycenter2 {
                    out.push(Self {
                        seed: seed.wrapping_add(start),
                        ..*st
                    });
                }
            }
        }
        Ok(out)
    }
}

/// `T = s·p qᵀ / (‖p‖₁‖q‖₁)`: the `n × m` block of `p̄ q̄ᵀ / ‖p̄‖₁` rescaled
/// to mass `s`. Rows are proportional to `p` and stay below it.
pub fn init_outer_product(p: &Histogram, q: &Histogram, s: f64) -> Result<TransportPlan> {
    let max = p.total().min(q.total());
    if !(0.0..=max + 1e-12).contains(&s) {
        return Err(Error::InvalidMass { mass: s, max });
    }
    if s == 0.0 {
        return Ok(TransportPlan::zeros(p.len(), q.len()));
    }
    let scale = s / (p.total() * q.total());
    let (pw, qw) = (p.weights(), q.weights());
    TransportPlan::new(
        Array2::from_shape_fn((p.len(), q.len()), |(i, j)| scale * pw[i] * qw[j]),
        0.0,
    )
}

/// Two free-support atoms fitted to a weighted cloud with fixed atom masses
/// `[prior, 1 − prior]`.
#[derive(Debug, Clone)]
pub struct Barycenter {
    /// `2 × d`; row 0 is the atom of mass `prior`.
    pub atoms: Array2<f64>,
    /// `2 × n` optimal coupling between the atoms and the cloud.
    pub coupling: Array2<f64>,
    /// `W₂²` after each atom update, starting from the seeded atoms.
    pub objective_trace: Vec<f64>,
    pub reseeds: usize,
}

impl Barycenter {
    /// Fraction of each point's mass carried by the `prior` atom.
    pub fn prior_fraction(&self, weights: &[f64]) -> Vec<f64> {
        weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                if w > 0.0 {
                    (self.coupling[[0, i]] / w).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Alternating minimization of `W₂²([prior, 1 − prior], weights)` over two
/// atom positions. Atoms start at two distinct cloud points drawn with
/// `seed`; coinciding atoms trigger a re-seed.
pub fn barycenter2(
    cloud: &PointCloud,
    weights: &Histogram,
    prior: f64,
    seed: u64,
    lloyd_iters: usize,
) -> Result<Barycenter> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::InvalidInput(format!("prior must lie in (0, 1), got {prior}")));
    }
    if weights.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            left: cloud.len(),
            right: weights.len(),
        });
    }
    if cloud.len() < 2 || weights.total() <= 0.0 {
        return Err(Error::DegenerateCluster("need at least two weighted points".into()));
    }
    let w = weights.scaled(1.0 / weights.total());
    let b = Histogram::new(vec![prior, 1.0 - prior])?;
    let x = cloud.points();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    for attempt in 0..MAX_RESEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let picks = sample(&mut rng, cloud.len(), 2);
        let mut atoms = Array2::zeros((2, cloud.dim()));
        atoms.row_mut(0).assign(&x.row(picks.index(0)));
        atoms.row_mut(1).assign(&x.row(picks.index(1)));

        let mut trace = Vec::new();
        let mut coupling = Array2::zeros((2, cloud.len()));
        for _ in 0..lloyd_iters.max(1) {
            let cost = atom_cost(&atoms, x)?;
            let plan = solve_exact_ot(&b, &w, &cost)?;
            let obj = plan.objective();
            coupling = plan.into_entries();
            let stalled = trace.last().is_some_and(|prev: &f64| prev - obj <= LLOYD_TOL);
            trace.push(obj);
            if stalled {
                break;
            }
            for a in 0..2 {
                let mass = b.weights()[a];
                let centroid = coupling.row(a).dot(x) / mass;
                atoms.row_mut(a).assign(&centroid);
            }
        }
        let gap: f64 = atoms
            .row(0)
            .iter()
            .zip(atoms.row(1))
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        if gap > 1e-12 * scale {
            return Ok(Barycenter {
                atoms,
                coupling,
                objective_trace: trace,
                reseeds: attempt,
            });
        }
    }
    Err(Error::DegenerateCluster(format!(
        "both atoms collapsed to one point after {MAX_RESEEDS} seeds"
    )))
}

fn atom_cost(atoms: &Array2<f64>, x: &Array2<f64>) -> Result<CostMatrix> {
    CostMatrix::new(Array2::from_shape_fn((2, x.nrows()), |(a, i)| {
        atoms.row(a).iter().zip(x.row(i)).map(|(u, v)| (u - v) * (u - v)).sum()
    }))
}

/// Plan supported on the rows captured by the mass-`s/‖p‖₁` atom of a
/// two-atom barycenter of the source cloud. Row `i` carries `f_i p_i`, where
/// `f_i` is its captured fraction, spread over columns proportionally to `q`.
pub fn init_barycenter2(
    source: &PointCloud,
    p: &Histogram,
    q: &Histogram,
    s: f64,
    seed: u64,
    lloyd_iters: usize,
) -> Result<TransportPlan> {
    if s >= p.total() - 1e-12 {
        return init_outer_product(p, q, s);
    }
    let prior = s / p.total();
    let bary = barycenter2(source, p, prior, seed, lloyd_iters)?;
    let frac = bary.prior_fraction(&p.scaled(1.0 / p.total()).weights());
    let rows: Vec<f64> = frac.iter().zip(p.weights()).map(|(f, w)| f * w).collect();
    let total: f64 = rows.iter().sum();
    let fix = if total > 0.0 { s / total } else { 0.0 };
    let qt = q.total();
    let t = Array2::from_shape_fn((p.len(), q.len()), |(i, j)| {
        (rows[i] * fix).min(p.weights()[i]) * q.weights()[j] / qt
    });
    TransportPlan::new(t, 0.0)
}

/// Clouds behind a [`GwProblem`], needed by the geometric strategies.
#[derive(Debug, Clone, Copy)]
pub struct InitClouds<'a> {
    pub source: &'a PointCloud,
    pub target: &'a PointCloud,
    /// Exponent of the Euclidean cost used by the partial-W start.
    pub exponent: f64,
}

/// Builds the starting plan for one strategy.
pub fn build_init(strategy: &InitStrategy, prob: &GwProblem, clouds: Option<InitClouds<'_>>) -> Result<TransportPlan> {
    match strategy.kind {
        InitKind::OuterProduct => init_outer_product(prob.p(), prob.q(), prob.mass()),
        InitKind::Barycenter2 => {
            let c = clouds.ok_or_else(|| Error::InvalidInput("barycenter2 start needs the source cloud".into()))?;
            init_barycenter2(
                c.source,
                prob.p(),
                prob.q(),
                prob.mass(),
                strategy.seed,
                strategy.lloyd_iters,
            )
        }
        InitKind::PartialW => {
            let c = clouds.ok_or_else(|| Error::InvalidInput("partial-w start needs both clouds".into()))?;
            if c.source.dim() != c.target.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "partial-w start needs a shared feature space, got dimensions {} and {}",
                    c.source.dim(),
                    c.target.dim()
                )));
            }
            let cost = crate::cost::euclidean_cost(c.source, c.target, c.exponent)?;
            let pw = PartialProblem::new(prob.p().clone(), prob.q().clone(), cost, prob.mass())?;
            Ok(solve_partial_w(&pw)?.plan)
        }
    }
}

/// Outcome of [`multi_start`].
#[derive(Debug, Clone)]
pub struct MultiStart<T> {
    pub best: T,
    pub best_index: usize,
    /// Final loss per strategy, `None` where the strategy failed.
    pub losses: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

/// Runs `run` for every strategy in parallel and keeps the lowest loss.
/// Ties go to the earlier strategy. Fails only if every strategy fails.
pub fn select_best<T, F>(strategies: &[InitStrategy], run: F) -> Result<MultiStart<T>>
where
    T: Send,
    F: Fn(&InitStrategy) -> Result<(f64, T)> + Sync,
{
    if strategies.is_empty() {
        return Err(Error::InvalidInput("no init strategies given".into()));
    }
    let outcomes: Vec<Result<(f64, T)>> = strategies.par_iter().map(&run).collect();
    let mut losses = Vec::with_capacity(outcomes.len());
    let mut errors = Vec::with_capacity(outcomes.len());
    let mut best: Option<(usize, f64, T)> = None;
    let mut last_err = None;
    for (k, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok((loss, value)) => {
                losses.push(Some(loss));
                errors.push(None);
                if best.as_ref().is_none_or(|(_, b, _)| loss < *b) {
                    best = Some((k, loss, value));
                }
            }
            Err(e) => {
                losses.push(None);
                errors.push(Some(e.to_string()));
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((best_index, _, best)) => Ok(MultiStart {
            best,
            best_index,
            losses,
            errors,
        }),
        None => Err(last_err.expect("a failure was recorded")),
    }
}

/// Solves partial GW from every strategy and keeps the lowest final loss.
pub fn multi_start(
    prob: &GwProblem,
    strategies: &[InitStrategy],
    clouds: Option<InitClouds<'_>>,
    opts: FwOptions,
) -> Result<MultiStart<FwState>> {
    select_best(strategies, |st| {
        let init = build_init(st, prob, clouds)?;
        let state = solve_partial_gw(prob, &init, opts)?;
        Ok((state.loss(), state))
    })
}
