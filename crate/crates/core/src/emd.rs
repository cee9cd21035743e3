//! Balanced exact optimal transport.

use crate::cost::CostMatrix;
use crate::error::{Error, Result};
use crate::measure::Histogram;
use crate::network_simplex;
use crate::plan::TransportPlan;

/// Largest absolute mass gap tolerated before marginals are rescaled.
pub const BALANCE_TOL: f64 = 1e-9;

/// Solves `min ⟨C, T⟩` over couplings with marginals `p` and `q`.
///
/// Marginals whose masses differ by at most [`BALANCE_TOL`] are both rescaled
/// to their mean mass. The returned plan is a vertex of the transportation
/// polytope.
pub fn solve_exact_ot(p: &Histogram, q: &Histogram, c: &CostMatrix) -> Result<TransportPlan> {
    if p.len() != c.rows() || q.len() != c.cols() {
        return Err(Error::DimensionMismatch(format!(
            "cost is {}x{} but marginals have lengths {} and {}",
            c.rows(),
            c.cols(),
            p.len(),
            q.len()
        )));
    }
    let (supply, demand) = balanced(p, q)?;
    let flow = network_simplex::solve(&supply, &demand, c.entries())?;
    TransportPlan::with_linear_cost(flow, c.entries())
}

/// Same as [`solve_exact_ot`] on raw slices, with costs of any sign.
pub(crate) fn solve_signed(p: &[f64], q: &[f64], c: &ndarray::Array2<f64>) -> Result<ndarray::Array2<f64>> {
    let p = Histogram::new(p.to_vec())?;
    let q = Histogram::new(q.to_vec())?;
    let (supply, demand) = balanced(&p, &q)?;
    network_simplex::solve(&supply, &demand, c)
}

fn balanced(p: &Histogram, q: &Histogram) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = (p.total(), q.total());
    if (a - b).abs() > BALANCE_TOL {
        return Err(Error::UnbalancedMarginals {
            source_mass: a,
            target_mass: b,
        });
    }
    if a == b {
        return Ok((p.weights().to_vec(), q.weights().to_vec()));
    }
    let mean = 0.5 * (a + b);
    Ok((
        p.scaled(mean / a).weights().to_vec(),
        q.scaled(mean / b).weights().to_vec(),
    ))
}
