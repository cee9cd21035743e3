//! Positive-unlabeled classification as partial transport.
//!
//! The unlabeled cloud is the source with `p_i = (1−α)/n`, the positive
//! cloud the target with `q_j = (π+α)/m`, and exactly `s = π` units move.
//! Admissible plans ship every unlabeled row either entirely or not at all,
//! so `k = πn/(1−α)` rows are transported; those are labelled positive.
//!
//! The all-or-nothing constraint is enforced on the dummy-point extension
//! by a group penalty over each row's two column groups (positives, dummy),
//! minimized by majorization-minimization over exact LPs.

use ndarray::{s, Array2};

use crate::cost::{euclidean_cost, CostMatrix};
use crate::emd;
use crate::error::{Error, Result};
use crate::gw::{self, FwOptions, FwState, GwProblem, LinearMinimizer};
use crate::init::{build_init, select_best, InitClouds, InitKind, InitStrategy};
use crate::measure::{Histogram, PointCloud};
use crate::plan::{frobenius, TransportPlan};

pub const DEFAULT_ETA: f64 = 1e6;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_MM_ITER: usize = 20;
/// Guards the square root of empty groups.
const GROUP_EPS: f64 = 1e-12;
/// Default neighbourhood size for the one-row swap refinement.
pub const DEFAULT_SWAP_LIMIT: usize = 2500;
/// Default cap on branch-and-bound nodes in the Wasserstein solver.
pub const DEFAULT_NODE_LIMIT: usize = 2000;
/// Group mass treated as empty when linearizing the penalty.
const EMPTY_GROUP: f64 = 1e-15;
/// Slack on the row-count integrality condition.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PuMode {
    Wasserstein,
    Gromov,
}

impl std::str::FromStr for PuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" | "wasserstein" => Ok(PuMode::Wasserstein),
            "gw" | "gromov" => Ok(PuMode::Gromov),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}`, expected w or gw"))),
        }
    }
}

impl PuMode {
    pub fn name(self) -> &'static str {
        match self {
            PuMode::Wasserstein => "w",
            PuMode::Gromov => "gw",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PuProblem {
    unl: PointCloud,
    pos: PointCloud,
    prior: f64,
    noise: f64,
    mode: PuMode,
    eta: f64,
    xi: f64,
    exponent: f64,
}

impl PuProblem {
    /// Problem with `α = 0`, `η = 1e6`, `ξ = 0` and squared Euclidean costs.
    pub fn new(unl: PointCloud, pos: PointCloud, prior: f64, mode: PuMode) -> Result<Self> {
        if unl.is_empty() || pos.is_empty() {
            return Err(Error::InvalidInput("both point clouds must be nonempty".into()));
        }
        if !(prior > 0.0 && prior < 1.0) {
            return Err(Error::InvalidInput(format!(
                "class prior must lie in (0, 1), got {prior}"
            )));
        }
        Ok(Self {
            unl,
            pos,
            prior,
            noise: 0.0,
            mode,
            eta: DEFAULT_ETA,
            xi: 0.0,
            exponent: 2.0,
        })
    }

    pub fn with_noise(mut self, noise: f64) -> Result<Self> {
        if !(0.0..=1.0 - self.prior).contains(&noise) {
            return Err(Error::InvalidInput(format!(
                "noise must lie in [0, 1 − prior] = [0, {}], got {noise}",
                1.0 - self.prior
            )));
        }
        self.noise = noise;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "eta must be finite and nonnegative, got {eta}"
            )));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::InvalidInput(format!("xi must be finite, got {xi}")));
        }
        self.xi = xi;
        Ok(self)
    }

    pub fn with_exponent(mut self, exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "exponent must be positive, got {exponent}"
            )));
        }
        self.exponent = exponent;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: PuMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn unl(&self) -> &PointCloud {
        &self.unl
    }

    pub fn pos(&self) -> &PointCloud {
        &self.pos
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn mode(&self) -> PuMode {
        self.mode
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Common unlabeled weight `(1−α)/n`.
    pub fn row_weight(&self) -> f64 {
        (1.0 - self.noise) / self.unl.len() as f64
    }

    pub fn p(&self) -> Histogram {
        Histogram::uniform(self.unl.len(), 1.0 - self.noise)
    }

    pub fn q(&self) -> Histogram {
        Histogram::uniform(self.pos.len(), self.prior + self.noise)
    }

    /// `πn/(1−α)` before rounding.
    pub fn row_count_exact(&self) -> f64 {
        self.prior / self.row_weight()
    }

    /// Number of transported rows; fails unless `πn/(1−α)` is an integer.
    pub fn transported_rows(&self) -> Result<usize> {
        let k = self.row_count_exact();
        if (k - k.round()).abs() > GRID_TOL {
            return Err(Error::InfeasibleMassGrid {
                rows: k,
                prior: self.prior,
                noise: self.noise,
                n: self.unl.len(),
            });
        }
        Ok(k.round() as usize)
    }

    /// Rounds the transported-row count to the nearest admissible integer and
    /// moves the prior onto the grid. Returns the problem and the old prior.
    pub fn snapped_to_grid(mut self) -> Result<(Self, f64)> {
        let old = self.prior;
        let n = self.unl.len();
        let k = self.row_count_exact().round().clamp(1.0, (n - 1) as f64);
        self.prior = k * self.row_weight();
        if !(self.prior > 0.0 && self.prior < 1.0 && self.noise <= 1.0 - self.prior) {
            return Err(Error::InfeasibleMassGrid {
                rows: k,
                prior: old,
                noise: self.noise,
                n,
            });
        }
        Ok((self, old))
    }

    fn oracle(&self, tol: f64, max_mm_iter: usize) -> Result<PuOracle> {
        Ok(PuOracle {
            n: self.unl.len(),
            m: self.pos.len(),
            k: self.transported_rows()?,
            row_weight: self.row_weight(),
            q: self.q().weights().to_vec(),
            noise: self.noise,
            prior: self.prior,
            xi: self.xi,
            eta: self.eta,
            tol,
            max_mm_iter,
        })
    }
}

/// A plan with per-row transport decisions.
#[derive(Debug, Clone)]
pub struct PuPlan {
    /// Restricted `n × m` plan; its objective is `⟨C, T⟩` in Wasserstein mode
    /// and the GW loss in Gromov mode.
    pub plan: TransportPlan,
    pub row_transported: Vec<bool>,
    /// `+1` for transported rows, `−1` otherwise.
    pub labels: Vec<i64>,
    /// `max_i min(rowmass_i, p_i − rowmass_i)`: zero for all-or-nothing rows.
    pub group_residual: f64,
    /// Linear objective of the balanced extension, Wasserstein mode only.
    pub extended_objective: Option<f64>,
    /// The `(n+1) × (m+1)` extended plan, Wasserstein mode only.
    pub extended_plan: Option<Array2<f64>>,
    pub mm_iterations: usize,
    /// Branch and bound finished, so no other row set has a lower objective.
    /// Always false in Gromov mode.
    pub proven_optimal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuOptions {
    pub tol: f64,
    pub max_mm_iter: usize,
    /// Largest `k (n − k)` for which the Wasserstein solver refines the
    /// rounded row set by exhaustive one-row swaps; zero disables it.
    pub swap_limit: usize,
    /// Branch-and-bound nodes the Wasserstein solver may spend proving or
    /// improving the rounded row set; zero disables the search.
    pub node_limit: usize,
}

impl Default for PuOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_mm_iter: DEFAULT_MAX_MM_ITER,
            swap_limit: DEFAULT_SWAP_LIMIT,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

/// Group-penalized extended solver on an arbitrary `n × m` cost.
#[derive(Debug, Clone)]
struct PuOracle {
    n: usize,
    m: usize,
    k: usize,
    row_weight: f64,
    q: Vec<f64>,
    noise: f64,
    prior: f64,
    xi: f64,
    eta: f64,
    tol: f64,
    max_mm_iter: usize,
}

struct PuSolve {
    /// Transported rows after rounding, `None` without the penalty.
    rows: Option<Vec<bool>>,
    restricted: Array2<f64>,
    extended: Array2<f64>,
    residual: f64,
    mm_iterations: usize,
}

impl PuOracle {
    fn p_bar(&self) -> Vec<f64> {
        let mut p = vec![self.row_weight; self.n];
        p.push(self.noise);
        p
    }

    fn q_bar(&self) -> Vec<f64> {
        let mut q = self.q.clone();
        q.push((1.0 - self.noise - self.prior).max(0.0));
        q
    }

    fn extended_cost(&self, g: &Array2<f64>) -> Array2<f64> {
        let (n, m) = (self.n, self.m);
        let mut c = Array2::from_elem((n + 1, m + 1), self.xi);
        c.slice_mut(s![..n, ..m]).assign(g);
        c[[n, m]] = 2.0 * self.xi + gw::oracle_penalty(g);
        c
    }

    /// Linearized group weights `η / (2√(ε + mass_ig))` per row, as
    /// (positives, dummy), shifted so each row's smaller weight is zero; the
    /// shift leaves the LP argmin unchanged. Empty groups, whose raw weight
    /// is `η / (2√ε)`, get a lock value above every other weight and above
    /// any saving a cycle of real costs can offer, which keeps the LP well
    /// scaled.
    fn mm_weights(&self, t: &Array2<f64>, locked: &[bool], cycle_cap: f64) -> Vec<(f64, f64)> {
        let (n, m) = (self.n, self.m);
        let raw = |mass: f64| 0.5 * self.eta / (GROUP_EPS + mass).sqrt();
        let mut weights = Vec::with_capacity(n + 1);
        let mut empty = Vec::with_capacity(n + 1);
        let mut finite_max = 0.0f64;
        for i in 0..=n {
            let pos: f64 = t.slice(s![i, ..m]).sum();
            let dummy = t[[i, m]];
            let (wp, wd) = (raw(pos), raw(dummy));
            let base = wp.min(wd);
            let (wp, wd) = (wp - base, wd - base);
            let (ep, ed) = (
                pos <= EMPTY_GROUP && dummy > EMPTY_GROUP,
                dummy <= EMPTY_GROUP && pos > EMPTY_GROUP,
            );
            if !ep {
                finite_max = finite_max.max(wp);
            }
            if !ed {
                finite_max = finite_max.max(wd);
            }
            weights.push((wp, wd));
            empty.push((ep, ed));
        }
        let lock = cycle_cap.max(4.0 * finite_max);
        for (i, ((wp, wd), (ep, ed))) in weights.iter_mut().zip(empty).enumerate() {
            if ep {
                *wp = lock;
            }
            if ed || (i < n && locked[i]) {
                *wd = lock;
            }
        }
        weights
    }

    fn most_transported_split_row(&self, t: &Array2<f64>, locked: &[bool]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..self.n).filter(|&i| !locked[i]) {
            let mass: f64 = t.slice(s![i, ..self.m]).sum();
            if mass.min(self.row_weight - mass) > self.tol && best.is_none_or(|(_, b)| mass > b) {
                best = Some((i, mass));
            }
        }
        best.map(|(i, _)| i)
    }

    fn residual(&self, t: &Array2<f64>) -> f64 {
        (0..self.n)
            .map(|i| {
                let mass: f64 = t.slice(s![i, ..self.m]).sum();
                mass.min(self.row_weight - mass).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Majorization-minimization of `⟨C̄, T̄⟩ + η Σ_i Σ_g √(ε + mass_ig)`.
    ///
    /// Each step linearizes the concave penalty at the current plan, which
    /// adds `η / (2√(ε + mass_ig))` to every entry of group `g` in row `i`.
    /// See [`PuOracle::mm_weights`] for the scaling. The MM fixed point is
    /// rounded to the `k` most transported rows and re-solved exactly.
    fn solve(&self, g: &Array2<f64>) -> Result<PuSolve> {
        let (n, m) = (self.n, self.m);
        let (p_bar, q_bar) = (self.p_bar(), self.q_bar());
        let c_bar = self.extended_cost(g);
        let mut t = emd::solve_signed(&p_bar, &q_bar, &c_bar)?;
        let mut mm_iterations = 0;

        if self.eta > 0.0 {
            let c_max = c_bar.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let cycle_cap = 4.0 * (n + m + 2) as f64 * (c_max + 1.0);
            let mut locked = vec![false; n];
            let mut steps = 0;
            while steps < self.max_mm_iter {
                steps += 1;
                mm_iterations += 1;
                let weights = self.mm_weights(&t, &locked, cycle_cap);
                let mut c = c_bar.clone();
                for (i, (wp, wd)) in weights.into_iter().enumerate() {
                    c.slice_mut(s![i, ..m]).mapv_inplace(|v| v + wp);
                    c[[i, m]] += wd;
                }
                let next = emd::solve_signed(&p_bar, &q_bar, &c)?;
                let change = (&next - &t).iter().map(|v| v * v).sum::<f64>().sqrt();
                t = next;
                if change <= self.tol {
                    // A split row whose two groups carry equal mass gets equal
                    // weights and never moves; lock the most transported one.
                    match self.most_transported_split_row(&t, &locked) {
                        Some(i) => {
                            locked[i] = true;
                            steps -= 1;
                        }
                        None => break,
                    }
                }
            }
        }

        let residual = self.residual(&t);
        if self.eta > 0.0 {
            if residual > self.tol {
                return Err(Error::NonConvergence {
                    iterations: mm_iterations,
                    residual,
                });
            }
            let rows = top_rows(&t.slice(s![..n, ..m]).to_owned(), self.k);
            let extended = self.fixed_rows(g, &rows)?;
            return Ok(PuSolve {
                rows: Some(rows),
                restricted: extended.slice(s![..n, ..m]).to_owned(),
                residual: self.residual(&extended),
                extended,
                mm_iterations,
            });
        }
        Ok(PuSolve {
            rows: None,
            restricted: t.slice(s![..n, ..m]).to_owned(),
            extended: t,
            residual,
            mm_iterations,
        })
    }

    /// First-improvement search over swaps of one transported row for one
    /// untransported row, each scored by an exact [`PuOracle::fixed_rows`]
    /// solve. Stops at a swap-local optimum.
    fn swap_search(&self, g: &Array2<f64>, mut rows: Vec<bool>, mut best: Array2<f64>) -> Result<Array2<f64>> {
        let c_bar = self.extended_cost(g);
        let mut best_obj = frobenius(&best, &c_bar);
        let tie = 1e-12 * (1.0 + best_obj.abs());
        'outer: loop {
            let (inside, outside): (Vec<usize>, Vec<usize>) = (0..self.n).partition(|&i| rows[i]);
            for &a in &inside {
                for &b in &outside {
                    rows[a] = false;
                    rows[b] = true;
                    let t = self.fixed_rows(g, &rows)?;
                    let obj = frobenius(&t, &c_bar);
                    if obj < best_obj - tie {
                        best = t;
                        best_obj = obj;
                        continue 'outer;
                    }
                    rows[a] = true;
                    rows[b] = false;
                }
            }
            return Ok(best);
        }
    }

    /// Transport LP over the rows not ruled out: `In` rows ship their full
    /// weight to the positives, `Free` rows may split, and the dummy row
    /// ships `α` to the positives. Its value bounds every completion of
    /// `state` from below. Returns the value and the positive mass per row.
    fn relaxation(&self, g: &Array2<f64>, state: &[RowState]) -> Result<(f64, Vec<f64>)> {
        let (n, m) = (self.n, self.m);
        let live: Vec<usize> = (0..n).filter(|&i| state[i] != RowState::Out).collect();
        let r = live.len();
        let mut supply = vec![self.row_weight; r];
        supply.push(self.noise);
        let mut demand = self.q.clone();
        demand.push((r as f64 * self.row_weight - self.prior).max(0.0));
        let forbidden: Vec<bool> = live
            .iter()
            .map(|&i| state[i] == RowState::In)
            .chain(std::iter::once(true))
            .collect();
        let g_max = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // A large enough penalty keeps forbidden arcs empty whenever a plan
        // without them exists; an empty forbidden set certifies the value.
        let mut big = 4.0 * (r + m + 2) as f64 * (g_max + 1.0);
        for _ in 0..8 {
            let mut cost = Array2::zeros((r + 1, m + 1));
            for (a, &i) in live.iter().enumerate() {
                cost.slice_mut(s![a, ..m]).assign(&g.row(i));
            }
            for (a, &f) in forbidden.iter().enumerate() {
                if f {
                    cost[[a, m]] = big;
                }
            }
            let t = emd::solve_signed(&supply, &demand, &cost)?;
            let leak = forbidden
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(a, _)| t[[a, m]])
                .sum::<f64>();
            if leak <= 1e-12 {
                let mut mass = vec![0.0; n];
                for (a, &i) in live.iter().enumerate() {
                    mass[i] = t.slice(s![a, ..m]).sum();
                }
                let value = frobenius(&t.slice(s![..r, ..m]).to_owned(), &cost.slice(s![..r, ..m]).to_owned());
                return Ok((value, mass));
            }
            big *= 16.0;
        }
        Err(Error::InfeasibleProblem("row bounds leave no feasible plan".into()))
    }

    /// Depth-first branch and bound on which rows ship their full weight,
    /// started from the incumbent `rows`. Returns the best row set found
    /// and whether the search finished within `node_limit`, which proves it
    /// optimal.
    fn branch_and_bound(&self, g: &Array2<f64>, rows: Vec<bool>, node_limit: usize) -> Result<(Vec<bool>, bool)> {
        let (n, w) = (self.n, self.row_weight);
        let restricted = |rows: &[bool]| -> Result<f64> {
            let t = self.fixed_rows(g, rows)?;
            Ok(frobenius(&t.slice(s![..n, ..self.m]).to_owned(), g))
        };
        let mut best_obj = restricted(&rows)?;
        let mut best = rows;
        let frac_tol = 1e-9 * w;
        let mut stack = vec![vec![RowState::Free; n]];
        let mut nodes = 0;
        while let Some(mut state) = stack.pop() {
            if nodes == node_limit {
                return Ok((best, false));
            }
            nodes += 1;
            let fixed_in = state.iter().filter(|&&s| s == RowState::In).count();
            let free = state.iter().filter(|&&s| s == RowState::Free).count();
            if fixed_in > self.k || fixed_in + free < self.k {
                continue;
            }
            if free > 0 && (fixed_in == self.k || fixed_in + free == self.k) {
                let fill = if fixed_in == self.k {
                    RowState::Out
                } else {
                    RowState::In
                };
                state
                    .iter_mut()
                    .filter(|s| **s == RowState::Free)
                    .for_each(|s| *s = fill);
            }
            let (bound, mass) = self.relaxation(g, &state)?;
            let prune = 1e-10 * (1.0 + best_obj.abs());
            if bound >= best_obj - prune {
                continue;
            }
            let split = (0..n)
                .filter(|&i| state[i] == RowState::Free)
                .map(|i| (i, mass[i].min(w - mass[i])))
                .filter(|&(_, d)| d > frac_tol)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match split {
                None => {
                    let rows: Vec<bool> = (0..n)
                        .map(|i| state[i] == RowState::In || (state[i] == RowState::Free && mass[i] > 0.5 * w))
                        .collect();
                    if rows.iter().filter(|&&r| r).count() == self.k {
                        let obj = restricted(&rows)?;
                        if obj < best_obj - prune {
                            best_obj = obj;
                            best = rows;
                        }
                    }
                }
                Some((i, _)) => {
                    let mut take = state.clone();
                    take[i] = RowState::In;
                    state[i] = RowState::Out;
                    // The child nearer the relaxation goes on top.
                    if mass[i] > 0.5 * w {
                        stack.push(state);
                        stack.push(take);
                    } else {
                        stack.push(take);
                        stack.push(state);
                    }
                }
            }
        }
        Ok((best, true))
    }

    /// Exact optimum with the transported rows fixed: the chosen rows ship
    /// their full weight to the positives, the dummy row ships `α`, and all
    /// other rows go to the dummy column. Returns the lifted extended plan.
    fn fixed_rows(&self, g: &Array2<f64>, rows: &[bool]) -> Result<Array2<f64>> {
        let (n, m) = (self.n, self.m);
        let active: Vec<usize> = (0..n).filter(|&i| rows[i]).collect();
        let mut cost = Array2::from_elem((active.len() + 1, m), self.xi);
        for (r, &i) in active.iter().enumerate() {
            cost.row_mut(r).assign(&g.row(i));
        }
        let mut supply = vec![self.row_weight; active.len()];
        supply.push(self.noise);
        let sub = emd::solve_signed(&supply, &self.q, &cost)?;

        let mut t = Array2::zeros((n + 1, m + 1));
        for i in 0..n {
            if !rows[i] {
                t[[i, m]] = self.row_weight;
            }
        }
        for (r, &i) in active.iter().enumerate() {
            t.slice_mut(s![i, ..m]).assign(&sub.row(r));
        }
        t.slice_mut(s![n, ..m]).assign(&sub.row(active.len()));
        let dummy_col: f64 = t.slice(s![..n, m]).sum();
        t[[n, m]] = (self.q_bar()[m] - dummy_col).max(0.0);
        Ok(t)
    }
}

impl LinearMinimizer for PuOracle {
    fn minimize(&mut self, grad_half: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.solve(grad_half)?.restricted)
    }
}

/// Linear oracle over plans whose transported rows are fixed.
struct FixedRowsOracle<'a> {
    inner: &'a PuOracle,
    rows: Vec<bool>,
}

impl LinearMinimizer for FixedRowsOracle<'_> {
    fn minimize(&mut self, grad_half: &Array2<f64>) -> Result<Array2<f64>> {
        let (n, m) = (self.inner.n, self.inner.m);
        Ok(self
            .inner
            .fixed_rows(grad_half, &self.rows)?
            .slice(s![..n, ..m])
            .to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowState {
    Free,
    In,
    Out,
}

/// The `k` rows with the largest mass; ties go to the lower index.
fn top_rows(t: &Array2<f64>, k: usize) -> Vec<bool> {
    let mass: Vec<f64> = t.rows().into_iter().map(|r| r.sum()).collect();
    let mut order: Vec<usize> = (0..mass.len()).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    let mut rows = vec![false; mass.len()];
    for &i in order.iter().take(k) {
        rows[i] = true;
    }
    rows
}

/// PU learning with the Wasserstein cost `‖x_i − y_j‖^exponent`.
pub fn solve_pu_w(prob: &PuProblem, opts: PuOptions) -> Result<PuPlan> {
    if prob.unl.dim() != prob.pos.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Wasserstein mode needs a shared feature space, got dimensions {} and {}",
            prob.unl.dim(),
            prob.pos.dim()
        )));
    }
    let cost = euclidean_cost(&prob.unl, &prob.pos, prob.exponent)?;
    solve_pu_cost(prob, &cost, opts)
}

/// PU learning on a precomputed `n × m` cost.
pub fn solve_pu_cost(prob: &PuProblem, cost: &CostMatrix, opts: PuOptions) -> Result<PuPlan> {
    let oracle = prob.oracle(opts.tol, opts.max_mm_iter)?;
    if cost.shape() != (oracle.n, oracle.m) {
        return Err(Error::DimensionMismatch(format!(
            "cost is {:?}, expected {}x{}",
            cost.shape(),
            oracle.n,
            oracle.m
        )));
    }
    let mut sol = oracle.solve(cost.entries())?;
    let mut proven_optimal = false;
    if let Some(mut rows) = sol.rows.take() {
        let (n, m) = (oracle.n, oracle.m);
        if oracle.k * (n - oracle.k) <= opts.swap_limit {
            sol.extended = oracle.swap_search(cost.entries(), rows, sol.extended)?;
            rows = (0..n)
                .map(|i| sol.extended.slice(s![i, ..m]).sum() > 0.5 * oracle.row_weight)
                .collect();
        }
        if opts.node_limit > 0 {
            let (best, done) = oracle.branch_and_bound(cost.entries(), rows, opts.node_limit)?;
            proven_optimal = done;
            sol.extended = oracle.fixed_rows(cost.entries(), &best)?;
        }
        sol.restricted = sol.extended.slice(s![..n, ..m]).to_owned();
        sol.residual = oracle.residual(&sol.extended);
    }
    let extended_objective = frobenius(&sol.extended, &oracle.extended_cost(cost.entries()));
    let plan = TransportPlan::with_linear_cost(sol.restricted, cost.entries())?;
    let cls = classify(&plan, prob.row_weight());
    Ok(PuPlan {
        row_transported: cls.labels.iter().map(|&l| l == 1).collect(),
        labels: cls.labels,
        group_residual: sol.residual,
        extended_objective: Some(extended_objective),
        extended_plan: Some(sol.extended),
        mm_iterations: sol.mm_iterations,
        proven_optimal,
        plan,
    })
}

/// Options for [`solve_pu_gw`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PuGwOptions {
    pub pu: PuOptions,
    pub fw: FwOptions,
}

/// Result of [`solve_pu_gw`]: the best start and what every start reached.
#[derive(Debug, Clone)]
pub struct PuGwResult {
    pub plan: PuPlan,
    pub state: FwState,
    pub best_index: usize,
    pub losses: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
}

/// PU learning with the Gromov-Wasserstein loss between intra-domain
/// distance matrices `‖x_i − x_k‖^exponent` and `‖y_j − y_l‖^exponent`.
///
/// Each start runs Frank-Wolfe with the group-penalized oracle, which picks
/// the transported rows; a second Frank-Wolfe pass with those rows fixed
/// restores exact all-or-nothing rows, since the first pass averages oracle
/// outputs with different row sets. The lowest final loss wins.
pub fn solve_pu_gw(prob: &PuProblem, strategies: &[InitStrategy], opts: PuGwOptions) -> Result<PuGwResult> {
    let oracle = prob.oracle(opts.pu.tol, opts.pu.max_mm_iter)?;
    let gw_prob = gw_problem(prob)?;
    let clouds = InitClouds {
        source: &prob.unl,
        target: &prob.pos,
        exponent: prob.exponent,
    };
    let runs = select_best(strategies, |st| {
        let init = if st.kind == InitKind::PartialW {
            let w = prob.clone().with_mode(PuMode::Wasserstein);
            solve_pu_w(&w, opts.pu)?.plan
        } else {
            build_init(st, &gw_prob, Some(clouds))?
        };
        let mut first = oracle.clone();
        let phase1 = gw::solve_partial_gw_with(&gw_prob, &init, opts.fw, &mut first)?;
        let rows = top_rows(phase1.plan.entries(), oracle.k);
        let g = gw::gw_gradient_half(&gw_prob, &phase1.plan)?;
        let mut fixed = FixedRowsOracle { inner: &oracle, rows };
        let start = TransportPlan::new(fixed.minimize(&g)?, 0.0)?;
        let phase2 = gw::solve_partial_gw_with(&gw_prob, &start, opts.fw, &mut fixed)?;
        Ok((phase2.loss(), phase2))
    })?;
    let state = runs.best;
    let cls = classify(&state.plan, prob.row_weight());
    let plan = PuPlan {
        row_transported: cls.labels.iter().map(|&l| l == 1).collect(),
        labels: cls.labels,
        group_residual: oracle.residual_restricted(state.plan.entries()),
        extended_objective: None,
        extended_plan: None,
        mm_iterations: 0,
        proven_optimal: false,
        plan: state.plan.clone(),
    };
    Ok(PuGwResult {
        plan,
        state,
        best_index: runs.best_index,
        losses: runs.losses,
        errors: runs.errors,
    })
}

impl PuOracle {
    fn residual_restricted(&self, t: &Array2<f64>) -> f64 {
        t.rows()
            .into_iter()
            .map(|r| {
                let mass = r.sum();
                mass.min(self.row_weight - mass).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// The GW problem behind a PU instance.
pub fn gw_problem(prob: &PuProblem) -> Result<GwProblem> {
    let cs = euclidean_cost(&prob.unl, &prob.unl, prob.exponent)?;
    let ct = euclidean_cost(&prob.pos, &prob.pos, prob.exponent)?;
    GwProblem::new(cs, ct, prob.p(), prob.q(), prob.prior)?.with_xi(prob.xi)
}

/// Half-mass labels and whether any row is split.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub labels: Vec<i64>,
    /// Set when some row carries strictly between 1e-9 and `p_i − 1e-9`.
    pub group_violation: bool,
}

/// `+1` where the row ships at least half its weight `row_weight`, else `−1`.
pub fn classify(plan: &TransportPlan, row_weight: f64) -> Classification {
    let tol = 1e-9;
    let mut group_violation = false;
    let labels = plan
        .row_marginals()
        .iter()
        .map(|&mass| {
            if mass > tol && mass < row_weight - tol {
                group_violation = true;
            }
            if mass >= 0.5 * row_weight {
                1
            } else {
                -1
            }
        })
        .collect();
    Classification {
        labels,
        group_violation,
    }
}

/// Fraction of rows where the prediction and the truth agree on being
/// positive (label `1`).
pub fn evaluate(labels: &[i64], truth: &[i64]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: truth.len(),
        });
    }
    if labels.is_empty() {
        return Ok(1.0);
    }
    let hits = labels
        .iter()
        .zip(truth)
        .filter(|(a, b)| (**a == 1) == (**b == 1))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
