//! Partial Wasserstein through one dummy point per side.
//!
//! Transporting only `s` units between `p` and `q` is equivalent to a
//! balanced problem on `p̄ = [p, ‖q‖₁ − s]`, `q̄ = [q, ‖p‖₁ − s]` with cost
//!
//! ```text
//!       ⎡ C    ξ 1 ⎤
//!  C̄ =  ⎣ ξ 1ᵀ 2ξ+A ⎦
//! ```
//!
//! Whenever `A` exceeds every entry of `C`, an optimal balanced plan leaves
//! the corner empty, its `n × m` block is an optimal partial plan, and the
//! two objectives differ by exactly `ξ(‖p‖₁ + ‖q‖₁ − 2s)`.

use ndarray::{s, Array2};

use crate::cost::CostMatrix;
use crate::emd;
use crate::error::{Error, Result};
use crate::measure::Histogram;
use crate::plan::{frobenius, TransportPlan};

/// Slack allowed on `0 ≤ s ≤ min(‖p‖₁, ‖q‖₁)` for rounding in the masses.
const MASS_TOL: f64 = 1e-12;
/// Largest corner entry still treated as empty.
pub const CORNER_TOL: f64 = 1e-10;

/// Partial transport of `mass` units between `p` and `q`.
#[derive(Debug, Clone)]
pub struct PartialProblem {
    p: Histogram,
    q: Histogram,
    cost: CostMatrix,
    mass: f64,
    xi: f64,
    penalty: f64,
}

impl PartialProblem {
    /// Validated problem with `ξ = 0` and `A = 2·max(C) + 1`.
    pub fn new(p: Histogram, q: Histogram, cost: CostMatrix, mass: f64) -> Result<Self> {
        if p.len() != cost.rows() || q.len() != cost.cols() {
            return Err(Error::DimensionMismatch(format!(
                "cost is {}x{} but marginals have lengths {} and {}",
                cost.rows(),
                cost.cols(),
                p.len(),
                q.len()
            )));
        }
        check_mass(mass, p.total(), q.total())?;
        let penalty = default_penalty(cost.max_entry());
        Ok(Self {
            p,
            q,
            cost,
            mass,
            xi: 0.0,
            penalty,
        })
    }

    /// Sets the dummy transport cost. Any finite value is accepted.
    pub fn with_xi(mut self, xi: f64) -> Result<Self> {
        if !xi.is_finite() {
            return Err(Error::InvalidInput(format!("xi must be finite, got {xi}")));
        }
        self.xi = xi;
        Ok(self)
    }

    /// Sets the corner penalty, which must exceed `max(C)`.
    pub fn with_penalty(mut self, penalty: f64) -> Result<Self> {
        check_penalty(penalty, self.cost.max_entry())?;
        self.penalty = penalty;
        Ok(self)
    }

    pub fn p(&self) -> &Histogram {
        &self.p
    }

    pub fn q(&self) -> &Histogram {
        &self.q
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// `ξ(‖p‖₁ + ‖q‖₁ − 2s)`, the gap between extended and partial objectives.
    pub fn xi_offset(&self) -> f64 {
        self.xi * (self.p.total() + self.q.total() - 2.0 * self.mass)
    }
}

/// The balanced problem obtained by appending the dummy points.
///
/// `c_bar` may hold negative entries when `ξ < 0`, so it is kept as a plain
/// matrix rather than a [`CostMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedProblem {
    pub p_bar: Histogram,
    pub q_bar: Histogram,
    pub c_bar: Array2<f64>,
}

/// Output of [`solve_partial_w`].
#[derive(Debug, Clone)]
pub struct PartialSolution {
    /// The `n × m` restricted plan; its objective is `⟨C, T⟩`.
    pub plan: TransportPlan,
    pub partial_cost: f64,
    pub extended_objective: f64,
    /// Mass the extended plan puts on the dummy-to-dummy cell.
    pub corner: f64,
    /// The full `(n+1) × (m+1)` balanced plan.
    pub extended_plan: Array2<f64>,
}

impl PartialSolution {
    pub fn mass_transported(&self) -> f64 {
        self.plan.total_mass()
    }
}

pub fn default_penalty(max_cost: f64) -> f64 {
    2.0 * max_cost + 1.0
}

pub fn extend(prob: &PartialProblem) -> Result<ExtendedProblem> {
    check_mass(prob.mass, prob.p.total(), prob.q.total())?;
    check_penalty(prob.penalty, prob.cost.max_entry())?;
    extend_raw(
        prob.p.weights(),
        prob.q.weights(),
        prob.cost.entries(),
        prob.mass,
        prob.xi,
        prob.penalty,
    )
}

/// Solves the partial problem through its balanced extension.
///
/// Fails with [`Error::InfeasiblePlan`] if the extended optimum puts more
/// than [`CORNER_TOL`] on the corner, which cannot happen for `A > max(C)`.
pub fn solve_partial_w(prob: &PartialProblem) -> Result<PartialSolution> {
    let ext = extend(prob)?;
    solve_extended(&ext, prob.cost.entries())
}

/// Partial solve on a raw, possibly signed cost with explicit `ξ` and `A`.
pub(crate) fn solve_partial_raw(
    p: &[f64],
    q: &[f64],
    cost: &Array2<f64>,
    mass: f64,
    xi: f64,
    penalty: f64,
) -> Result<PartialSolution> {
    let ext = extend_raw(p, q, cost, mass, xi, penalty)?;
    solve_extended(&ext, cost)
}

fn solve_extended(ext: &ExtendedProblem, cost: &Array2<f64>) -> Result<PartialSolution> {
    let (n, m) = cost.dim();
    let extended_plan = emd::solve_signed(ext.p_bar.weights(), ext.q_bar.weights(), &ext.c_bar)?;
    let corner = extended_plan[[n, m]];
    if corner > CORNER_TOL {
        return Err(Error::InfeasiblePlan(format!(
            "extended optimum puts {corner:e} on the dummy corner"
        )));
    }
    let extended_objective = frobenius(&extended_plan, &ext.c_bar);
    let block = extended_plan.slice(s![..n, ..m]).to_owned();
    let partial_cost = frobenius(&block, cost);
    let plan = TransportPlan::new(block, partial_cost)?;
    Ok(PartialSolution {
        plan,
        partial_cost,
        extended_objective,
        corner,
        extended_plan,
    })
}

fn extend_raw(p: &[f64], q: &[f64], cost: &Array2<f64>, mass: f64, xi: f64, penalty: f64) -> Result<ExtendedProblem> {
    let (n, m) = cost.dim();
    if p.len() != n || q.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "cost is {n}x{m} but marginals have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let (tp, tq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    check_mass(mass, tp, tq)?;

    let mut p_bar = p.to_vec();
    p_bar.push((tq - mass).max(0.0));
    let mut q_bar = q.to_vec();
    q_bar.push((tp - mass).max(0.0));

    let mut c_bar = Array2::from_elem((n + 1, m + 1), xi);
    c_bar.slice_mut(s![..n, ..m]).assign(cost);
    c_bar[[n, m]] = 2.0 * xi + penalty;
    Ok(ExtendedProblem {
        p_bar: Histogram::new(p_bar)?,
        q_bar: Histogram::new(q_bar)?,
        c_bar,
    })
}

/// Rebuilds the balanced extended plan from a feasible partial plan.
///
/// The dummy column takes `p_i − Σ_j T_ij`, the dummy row `q_j − Σ_i T_ij`,
/// and the corner stays empty. The returned plan's objective is `⟨C̄, T̄⟩`.
pub fn lift_plan(plan: &TransportPlan, prob: &PartialProblem) -> Result<TransportPlan> {
    let (n, m) = prob.cost.shape();
    if plan.shape() != (n, m) {
        return Err(Error::DimensionMismatch(format!(
            "plan is {:?}, problem is {n}x{m}",
            plan.shape()
        )));
    }
    if (plan.total_mass() - prob.mass).abs() > 1e-9 {
        return Err(Error::InfeasiblePlan(format!(
            "plan moves {} units, expected {}",
            plan.total_mass(),
            prob.mass
        )));
    }
    let mut lifted = Array2::zeros((n + 1, m + 1));
    lifted.slice_mut(s![..n, ..m]).assign(plan.entries());
    for (i, (&pi, &row)) in prob.p.weights().iter().zip(plan.row_marginals()).enumerate() {
        lifted[[i, m]] = dummy_entry(pi - row, "row", i)?;
    }
    for (j, (&qj, &col)) in prob.q.weights().iter().zip(plan.col_marginals()).enumerate() {
        lifted[[n, j]] = dummy_entry(qj - col, "column", j)?;
    }
    let ext = extend(prob)?;
    let objective = frobenius(&lifted, &ext.c_bar);
    TransportPlan::new(lifted, objective)
}

fn dummy_entry(slack: f64, what: &str, index: usize) -> Result<f64> {
    if slack < -CORNER_TOL {
        return Err(Error::InfeasiblePlan(format!(
            "{what} {index} exceeds its marginal by {:e}",
            -slack
        )));
    }
    Ok(slack.max(0.0))
}

fn check_mass(mass: f64, tp: f64, tq: f64) -> Result<()> {
    let max = tp.min(tq);
    if !mass.is_finite() || mass < -MASS_TOL || mass > max + MASS_TOL {
        return Err(Error::InvalidMass { mass, max });
    }
    Ok(())
}

fn check_penalty(penalty: f64, max_cost: f64) -> Result<()> {
    if !penalty.is_finite() || penalty <= max_cost {
        return Err(Error::InvalidPenalty { penalty, max_cost });
    }
    Ok(())
}
