//! Discrete measures: weight histograms and the point clouds they live on.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Nonnegative weights over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    weights: Vec<f64>,
    total: f64,
}

impl Histogram {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidInput(format!(
                "histogram weight {i} is {w}, expected a finite nonnegative value"
            )));
        }
        let total = weights.iter().sum();
        Ok(Self { weights, total })
    }

    /// `len` equal bins summing to `total`.
    pub fn uniform(len: usize, total: f64) -> Self {
        let w = if len == 0 { 0.0 } else { total / len as f64 };
        Self::new(vec![w; len]).expect("uniform weights are valid")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cached l1 norm.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Self::new(self.weights.iter().map(|w| w * factor).collect())
            .expect("scaling by a nonnegative factor keeps weights valid")
    }
}

/// Points in R^d, one per row, with optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    labels: Option<Vec<i64>>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(Error::LengthMismatch {
                    left: points.nrows(),
                    right: l.len(),
                });
            }
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point coordinates must be finite".into()));
        }
        Ok(Self { points, labels })
    }

    /// Builds a cloud from row vectors, all of which must share one dimension.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} coordinates, expected {d}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(points, None)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.index_axis(Axis(0), i)
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Applies `x -> R x + t` to every point. `rotation` is d x d.
    pub fn transformed(&self, rotation: &Array2<f64>, translation: &[f64]) -> Result<Self> {
        let d = self.dim();
        if rotation.dim() != (d, d) || translation.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "transform of shape {:?} with offset length {} applied to {d}-dimensional points",
                rotation.dim(),
                translation.len()
            )));
        }
        let mut points = self.points.dot(&rotation.t());
        for mut row in points.rows_mut() {
            for (x, t) in row.iter_mut().zip(translation) {
                *x += t;
            }
        }
        Self::new(points, self.labels.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_rejects_negative_weights() {
        assert!(Histogram::new(vec![0.5, -0.1]).is_err());
        assert!(Histogram::new(vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn histogram_total_is_l1_norm() {
        let h = Histogram::new(vec![0.25, 0.5, 0.0]).unwrap();
        assert!((h.total() - 0.75).abs() < 1e-12);
        assert_eq!(Histogram::uniform(4, 1.0).weights(), &[0.25; 4]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = PointCloud::from_rows(&[vec![0.0, 1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn rotation_by_quarter_turn() {
        let cloud = PointCloud::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let r = ndarray::array![[0.0, -1.0], [1.0, 0.0]];
        let moved = cloud.transformed(&r, &[1.0, 1.0]).unwrap();
        assert_eq!(moved.point(0).to_vec(), vec![1.0, 2.0]);
    }
}
