//! Ground-cost matrices.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measure::PointCloud;

/// Dense nonnegative cost matrix with its maximum entry cached.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
    max_entry: f64,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = entries.indexed_iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "cost entry ({i}, {j}) is {v}, expected a finite nonnegative value"
            )));
        }
        let max_entry = entries.iter().copied().fold(0.0, f64::max);
        Ok(Self { entries, max_entry })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged cost rows".into()));
        }
        let flat = rows.iter().flatten().copied().collect();
        let entries =
            Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.max_entry
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }

    /// Checks symmetry and a zero diagonal, both within `tol`.
    pub fn is_distance_like(&self, tol: f64) -> bool {
        let (n, m) = self.shape();
        if n != m {
            return false;
        }
        (0..n).all(|i| {
            self.entries[[i, i]].abs() <= tol
                && (0..i).all(|k| (self.entries[[i, k]] - self.entries[[k, i]]).abs() <= tol)
        })
    }
}

/// Pairwise `‖x_i − y_j‖₂^exponent`.
pub fn euclidean_cost(x: &PointCloud, y: &PointCloud, exponent: f64) -> Result<CostMatrix> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source points have dimension {}, target points {}",
            x.dim(),
            y.dim()
        )));
    }
    if !(exponent > 0.0 && exponent.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cost exponent must be positive, got {exponent}"
        )));
    }
    let (xp, yp) = (x.points(), y.points());
    let entries = Array2::from_shape_fn((x.len(), y.len()), |(i, j)| {
        let sq: f64 = xp.row(i).iter().zip(yp.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        if exponent == 2.0 {
            sq
        } else {
            sq.sqrt().powf(exponent)
        }
    });
    CostMatrix::new(entries)
}

/// Divides by the maximum entry so the result has maximum 1.
///
/// A zero matrix cannot be normalized; the caller keeps its input untouched.
pub fn normalize_cost(c: &CostMatrix) -> Result<CostMatrix> {
    if c.max_entry <= 0.0 {
        return Err(Error::DegenerateCost);
    }
    let entries = &c.entries / c.max_entry;
    Ok(CostMatrix {
        max_entry: 1.0,
        entries,
    })
}
