//! Partial Gromov-Wasserstein by Frank-Wolfe.
//!
//! The loss is `J(T) = ⟨M∘T, T⟩` with the four-index tensor
//! `M_ijkl = ½(Cs_ik − Ct_jl)²`, which is never materialized. Its contraction
//! with any `n × m` matrix `T` factorizes as
//!
//! ```text
//! (M∘T)_ij = ½ Σ_k Cs_ik² p'_k + ½ Σ_l Ct_jl² q'_l − (Cs T Ctᵀ)_ij
//! ```
//!
//! where `p'`, `q'` are the row and column sums of `T` itself, not the
//! problem marginals: partial plans leave some mass behind.

use ndarray::{Array1, Array2, Axis};

use crate::cost::CostMatrix;
use crate::error::{Error, Result};
use crate::measure::Histogram;
use crate::partial;
use crate::plan::{frobenius, TransportPlan};

/// Feasibility slack for initial plans.
const FEAS_TOL: f64 = 1e-9;
/// Symmetry and zero-diagonal slack for intra-domain distances.
const METRIC_TOL: f64 = 1e-9;
/// Gaps below this multiple of the gradient scale count as stationary.
const STATIONARY_REL: f64 = 1e-12;

/// Partial GW problem between two metric-measure spaces.
#[derive(Debug, Clone)]
pub struct GwProblem {
    cs: CostMatrix,
    ct: CostMatrix,
    cs_sq: Array2<f64>,
    ct_sq: Array2<f64>,
    p: Histogram,
    q: Histogram,
    mass: f64,
    xi: f64,
}

impl GwProblem {
    pub fn new(cs: CostMatrix, ct: CostMatrix, p: Histogram, q: Histogram, mass: f64) -> Result<Self> {
        for (name, c, w) in [("source", &cs, &p), ("target", &ct, &q)] {
            if c.rows() != c.cols() || c.rows() != w.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{name} distances are {}x{} for {} weights",
                    c.rows(),
                    c.cols(),
                    w.len()
                )));
            }
            if !c.is_distance_like(METRIC_TOL) {
                return Err(Error::InvalidInput(format!(
                    "{name} distance matrix must be symmetric with zero diagonal"
                )));
            }
        }
        let max = p.total().min(q.total());
        if !mass.is_finite() || mass < -1e-12 || mass > max + 1e-12 {
            return Err(Error::InvalidMass { mass, max });
        }
        let cs_sq = cs.entries().mapv(|v| v * v);
        let ct_sq = ct.entries().mapv(|v| v * v);
        Ok(Self {
            cs,
            ct,
            cs_sq,
            ct_sq,
            p,
            q,
            mass,
            xi: 0.0,
        })
    }

    /// Dummy cost used by the default linear oracle. Does not change its argmin.
    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::InvalidInput(format!("xi must be finite, got {xi}")));
        }
        self.xi = xi;
        Ok(self)
    }

    pub fn cs(&self) -> &CostMatrix {
        &self.cs
    }

    pub fn ct(&self) -> &CostMatrix {
        &self.ct
    }

    pub fn p(&self) -> &Histogram {
        &self.p
    }

    pub fn q(&self) -> &Histogram {
        &self.q
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.p.len(), self.q.len())
    }

    /// Checks `T ≥ 0`, `T1 ≤ p`, `Tᵀ1 ≤ q` and total mass `s`, all within 1e-9.
    pub fn check_feasible(&self, t: &TransportPlan) -> Result<()> {
        self.check_shape(t.entries())?;
        let r = t.partial_residual(self.p.weights(), self.q.weights(), self.mass);
        if r > FEAS_TOL {
            return Err(Error::InfeasibleInit(format!(
                "plan violates the partial marginal constraints by {r:e}"
            )));
        }
        Ok(())
    }

    fn check_shape(&self, t: &Array2<f64>) -> Result<()> {
        if t.dim() != self.shape() {
            return Err(Error::DimensionMismatch(format!(
                "plan is {:?}, problem is {:?}",
                t.dim(),
                self.shape()
            )));
        }
        Ok(())
    }
}

/// `M∘X` for an arbitrary (possibly signed) `n × m` matrix.
pub fn gw_contraction(prob: &GwProblem, x: &Array2<f64>) -> Result<Array2<f64>> {
    prob.check_shape(x)?;
    Ok(contract(prob, x))
}

fn contract(prob: &GwProblem, x: &Array2<f64>) -> Array2<f64> {
    let rows: Array1<f64> = x.sum_axis(Axis(1));
    let cols: Array1<f64> = x.sum_axis(Axis(0));
    let a = prob.cs_sq.dot(&rows) * 0.5;
    let b = prob.ct_sq.dot(&cols) * 0.5;
    let mut g = prob.cs.entries().dot(x).dot(&prob.ct.entries().t());
    g.mapv_inplace(|v| -v);
    for ((i, j), v) in g.indexed_iter_mut() {
        *v += a[i] + b[j];
    }
    g
}

/// `M∘T`, half of the gradient of `J` at `T`.
pub fn gw_gradient_half(prob: &GwProblem, t: &TransportPlan) -> Result<Array2<f64>> {
    gw_contraction(prob, t.entries())
}

/// `J(T) = ⟨M∘T, T⟩`. Rounding below zero is clamped since `J ≥ 0`.
pub fn gw_loss(prob: &GwProblem, t: &TransportPlan) -> Result<f64> {
    let g = gw_gradient_half(prob, t)?;
    Ok(frobenius(&g, t.entries()).max(0.0))
}

/// A linear minimization oracle over some feasible set of plans.
pub trait LinearMinimizer {
    /// Returns a feasible plan minimizing `⟨grad_half, T⟩`.
    fn minimize(&mut self, grad_half: &Array2<f64>) -> Result<Array2<f64>>;
}

/// Minimizes over `Π^u(p, q)` with mass `s` through the dummy-point reduction.
#[derive(Debug, Clone)]
pub struct PartialOracle {
    p: Vec<f64>,
    q: Vec<f64>,
    mass: f64,
    xi: f64,
}

impl PartialOracle {
    pub fn new(prob: &GwProblem) -> Self {
        Self {
            p: prob.p.weights().to_vec(),
            q: prob.q.weights().to_vec(),
            mass: prob.mass,
            xi: prob.xi,
        }
    }
}

impl LinearMinimizer for PartialOracle {
    fn minimize(&mut self, grad_half: &Array2<f64>) -> Result<Array2<f64>> {
        let penalty = oracle_penalty(grad_half);
        let sol = partial::solve_partial_raw(&self.p, &self.q, grad_half, self.mass, self.xi, penalty)?;
        Ok(sol.plan.into_entries())
    }
}

/// `A = 2·max|G| + 1`, which exceeds every entry of `G` and its negation.
pub(crate) fn oracle_penalty(g: &Array2<f64>) -> f64 {
    2.0 * g.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0
}

/// Frank-Wolfe direction: the partial plan minimizing `⟨G, T⟩`.
pub fn fw_direction(prob: &GwProblem, grad_half: &Array2<f64>) -> Result<TransportPlan> {
    prob.check_shape(grad_half)?;
    if grad_half.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("gradient must be finite".into()));
    }
    let t = PartialOracle::new(prob).minimize(grad_half)?;
    TransportPlan::with_linear_cost(t, grad_half)
}

/// Exact minimizer of `aγ² + bγ` over `[0, 1]`.
pub fn step_size(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a < 0.0 {
        if a + b > 0.0 {
            0.0
        } else {
            1.0
        }
    } else if b >= 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Coefficients and minimizer of `φ(γ) = J(T + γE)` along `E = T̃ − T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

pub fn line_search(prob: &GwProblem, t: &TransportPlan, t_tilde: &TransportPlan) -> Result<LineSearch> {
    prob.check_shape(t.entries())?;
    prob.check_shape(t_tilde.entries())?;
    let e = t_tilde.entries() - t.entries();
    Ok(line_search_raw(prob, t.entries(), &e))
}

fn line_search_raw(prob: &GwProblem, t: &Array2<f64>, e: &Array2<f64>) -> LineSearch {
    let me = contract(prob, e);
    let a = frobenius(&me, e);
    let b = 2.0 * frobenius(&me, t);
    LineSearch {
        gamma: step_size(a, b),
        a,
        b,
    }
}

/// `g = ⟨2(M∘T), T − T̃⟩`.
pub fn fw_gap(prob: &GwProblem, t: &TransportPlan, t_tilde: &TransportPlan) -> Result<f64> {
    let g = gw_gradient_half(prob, t)?;
    prob.check_shape(t_tilde.entries())?;
    Ok(2.0 * (frobenius(&g, t.entries()) - frobenius(&g, t_tilde.entries())))
}

/// Lipschitz constant bound `√2 (max Cs + max Ct)` of the gradient.
pub fn lipschitz_bound(prob: &GwProblem) -> f64 {
    2f64.sqrt() * (prob.cs.max_entry() + prob.ct.max_entry())
}

/// Diameter bound `2√s` of the feasible set.
pub fn diameter_bound(prob: &GwProblem) -> f64 {
    2.0 * prob.mass.sqrt()
}

/// Worst-case gap after `k` iterations: `2 max(J0, √2 s (max Cs + max Ct)) / √(k+1)`.
pub fn fw_gap_bound(prob: &GwProblem, j0: f64, k: usize) -> f64 {
    let curvature = prob.mass * lipschitz_bound(prob);
    2.0 * j0.max(curvature) / ((k + 1) as f64).sqrt()
}

/// Stopping rule for [`solve_partial_gw`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    pub max_iter: usize,
    /// Absolute gap tolerance; `None` means `1e-9 ×` the first gap.
    pub gap_tol: Option<f64>,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            gap_tol: None,
        }
    }
}

/// Iterate and traces of a Frank-Wolfe run.
///
/// `loss_trace[k]` is the loss of the `k`-th iterate, so it has one more
/// entry than `step_trace`. `gap_trace[k]` is the gap measured at iterate `k`.
#[derive(Debug, Clone)]
pub struct FwState {
    pub plan: TransportPlan,
    pub iteration: usize,
    pub loss_trace: Vec<f64>,
    pub gap_trace: Vec<f64>,
    pub step_trace: Vec<f64>,
}

impl FwState {
    pub fn loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace holds the initial loss")
    }

    pub fn initial_loss(&self) -> f64 {
        self.loss_trace[0]
    }

    pub fn final_gap(&self) -> f64 {
        self.gap_trace.last().copied().unwrap_or(0.0)
    }

    pub fn min_gap(&self) -> f64 {
        self.gap_trace.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Frank-Wolfe over `Π^u(p, q)` from a feasible `init`.
pub fn solve_partial_gw(prob: &GwProblem, init: &TransportPlan, opts: FwOptions) -> Result<FwState> {
    let mut oracle = PartialOracle::new(prob);
    solve_partial_gw_with(prob, init, opts, &mut oracle)
}

/// Frank-Wolfe with a caller-supplied linear oracle. The oracle's feasible
/// set must be convex and contain `init`.
pub fn solve_partial_gw_with(
    prob: &GwProblem,
    init: &TransportPlan,
    opts: FwOptions,
    oracle: &mut dyn LinearMinimizer,
) -> Result<FwState> {
    prob.check_feasible(init)?;
    let mut t = init.entries().clone();
    let mut g = contract(prob, &t);
    let mut loss = frobenius(&g, &t).max(0.0);
    let mut loss_trace = vec![loss];
    let mut gap_trace = Vec::new();
    let mut step_trace = Vec::new();
    let mut tol = opts.gap_tol;
    let mut iteration = 0;

    while iteration < opts.max_iter {
        let t_tilde = oracle.minimize(&g)?;
        let gap = 2.0 * (frobenius(&g, &t) - frobenius(&g, &t_tilde));
        gap_trace.push(gap);
        let tol = *tol.get_or_insert(1e-9 * gap.max(0.0));
        let floor = STATIONARY_REL * (1.0 + prob.mass * g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if gap <= tol || gap <= floor {
            break;
        }
        let e = &t_tilde - &t;
        let ls = line_search_raw(prob, &t, &e);
        if ls.gamma == 0.0 {
            break;
        }
        t.scaled_add(ls.gamma, &e);
        t.mapv_inplace(|v| v.max(0.0));
        g = contract(prob, &t);
        loss = frobenius(&g, &t).max(0.0);
        loss_trace.push(loss);
        step_trace.push(ls.gamma);
        iteration += 1;
    }

    Ok(FwState {
        plan: TransportPlan::new(t, loss)?,
        iteration,
        loss_trace,
        gap_trace,
        step_trace,
    })
}
