use ndarray::{Array2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};

/// A nonnegative coupling matrix together with its marginals.
///
/// `objective` holds the value of whichever objective produced the plan: the
/// linear cost `⟨C, T⟩` for Wasserstein-type solves, the quadratic loss for
/// Gromov-Wasserstein solves.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Array2<f64>,
    row_marginals: Vec<f64>,
    col_marginals: Vec<f64>,
    total_mass: f64,
    objective: f64,
}

/// One nonzero cell of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triplet {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

impl TransportPlan {
    pub fn new(entries: Array2<f64>, objective: f64) -> Result<Self> {
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InfeasiblePlan(format!(
                "entry ({i}, {j}) is {v}, expected a finite nonnegative mass"
            )));
        }
        let row_marginals = entries.sum_axis(Axis(1)).to_vec();
        let col_marginals = entries.sum_axis(Axis(0)).to_vec();
        let total_mass = row_marginals.iter().sum();
        Ok(Self {
            entries,
            row_marginals,
            col_marginals,
            total_mass,
            objective,
        })
    }

    /// Plan whose objective is `⟨cost, entries⟩`.
    pub fn with_linear_cost(entries: Array2<f64>, cost: &Array2<f64>) -> Result<Self> {
        if entries.dim() != cost.dim() {
            return Err(Error::DimensionMismatch(format!(
                "plan {:?} vs cost {:?}",
                entries.dim(),
                cost.dim()
            )));
        }
        let objective = frobenius(&entries, cost);
        Self::new(entries, objective)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Array2::zeros((rows, cols)), 0.0).expect("zero plan is valid")
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn row_marginals(&self) -> &[f64] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[f64] {
        &self.col_marginals
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().filter(|v| **v > 0.0).count()
    }

    /// Sparse export, row-major order, zero cells skipped.
    pub fn triplets(&self) -> Vec<Triplet> {
        self.entries
            .indexed_iter()
            .filter(|(_, v)| **v > 0.0)
            .map(|((i, j), v)| Triplet { i, j, mass: *v })
            .collect()
    }

    /// Largest violation of `row ≤ p`, `col ≤ q` and `total = s`.
    pub fn partial_residual(&self, p: &[f64], q: &[f64], s: f64) -> f64 {
        let rows = self
            .row_marginals
            .iter()
            .zip(p)
            .map(|(r, p)| (r - p).max(0.0))
            .fold(0.0, f64::max);
        let cols = self
            .col_marginals
            .iter()
            .zip(q)
            .map(|(c, q)| (c - q).max(0.0))
            .fold(0.0, f64::max);
        rows.max(cols).max((self.total_mass - s).abs())
    }

    /// Largest violation of the balanced marginal constraints.
    pub fn marginal_residual(&self, p: &[f64], q: &[f64]) -> f64 {
        let rows = self
            .row_marginals
            .iter()
            .zip(p)
            .map(|(r, p)| (r - p).abs())
            .fold(0.0, f64::max);
        let cols = self
            .col_marginals
            .iter()
            .zip(q)
            .map(|(c, q)| (c - q).abs())
            .fold(0.0, f64::max);
        rows.max(cols)
    }
}

/// Frobenius inner product of two equally shaped matrices.
pub fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn marginals_and_triplets() {
        let t = TransportPlan::new(array![[0.4, 0.0], [0.1, 0.5]], 2.5).unwrap();
        assert_eq!(t.row_marginals(), &[0.4, 0.6]);
        assert_eq!(t.col_marginals(), &[0.5, 0.5]);
        assert!((t.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(t.nonzero_count(), 3);
        let trip = t.triplets();
        assert_eq!(trip[0], Triplet { i: 0, j: 0, mass: 0.4 });
        assert_eq!(trip.len(), 3);
    }

    #[test]
    fn negative_mass_is_rejected() {
        assert!(TransportPlan::new(array![[-1e-3]], 0.0).is_err());
    }

    #[test]
    fn partial_residual_flags_row_excess() {
        let t = TransportPlan::new(array![[0.6, 0.0], [0.0, 0.0]], 0.0).unwrap();
        assert!((t.partial_residual(&[0.5, 0.5], &[1.0, 1.0], 0.6) - 0.1).abs() < 1e-12);
    }
}
