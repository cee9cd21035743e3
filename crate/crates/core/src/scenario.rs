//! Synthetic PU scenarios with ground truth.
//!
//! Positives are drawn from `N(μ₊, σ²I)` and negatives from
//! `N(μ₋, (spread·σ)²I)` with `μ± = (∓separation·σ/2, 0, …)`. The labeled
//! set samples the positive component independently of the unlabeled set.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::PointCloud;

/// Identifier of the generator behind every seeded draw.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Extra dimensions of the positive cloud in [`ScenarioKind::FeatureSplit`].
pub const FEATURE_SPLIT_EXTRA: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Shared feature space, labeled positives selected completely at random.
    TwoGaussians,
    /// As `TwoGaussians`, then the unlabeled cloud is turned by
    /// `rotation_angle` about a pivot chosen so that a quarter turn carries
    /// the negative mean onto the positive mean.
    RotatedDomain,
    /// The positives live in `dim + 3` dimensions, embedded by a random
    /// linear map with orthonormal columns.
    FeatureSplit,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TwoGaussians => "two_gaussians",
            ScenarioKind::RotatedDomain => "rotated_domain",
            ScenarioKind::FeatureSplit => "feature_split",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "two_gaussians" => Ok(ScenarioKind::TwoGaussians),
            "rotated_domain" => Ok(ScenarioKind::RotatedDomain),
            "feature_split" => Ok(ScenarioKind::FeatureSplit),
            other => Err(Error::InvalidSpec(format!("unknown scenario kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n_unl: usize,
    pub n_pos: usize,
    /// Fraction of positives in the unlabeled set; `n_unl · true_prior`
    /// must be an integer.
    pub true_prior: f64,
    /// Radians, used by `RotatedDomain` only.
    pub rotation_angle: f64,
    pub seed: u64,
    /// Feature dimension of the unlabeled cloud, at least 2.
    pub dim: usize,
    pub sigma: f64,
    /// Distance between the class means in units of `sigma`.
    pub separation: f64,
    /// Standard deviation of the negatives relative to `sigma`.
    pub neg_spread: f64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, n_unl: usize, n_pos: usize, true_prior: f64, seed: u64) -> Self {
        Self {
            kind,
            n_unl,
            n_pos,
            true_prior,
            rotation_angle: 0.0,
            seed,
            dim: 2,
            sigma: 1.0,
            separation: 6.0,
            neg_spread: 1.0,
        }
    }

    /// Number of positives among the unlabeled points.
    pub fn positive_count(&self) -> Result<usize> {
        let k = self.true_prior * self.n_unl as f64;
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "n_unl · true_prior = {k} is not an integer"
            )));
        }
        Ok(k.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_unl < 2 || self.n_pos < 1 {
            return bad(format!(
                "need n_unl ≥ 2 and n_pos ≥ 1, got {} and {}",
                self.n_unl, self.n_pos
            ));
        }
        if !(self.true_prior > 0.0 && self.true_prior < 1.0) {
            return bad(format!("true_prior must lie in (0, 1), got {}", self.true_prior));
        }
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("separation", self.separation),
            ("neg_spread", self.neg_spread),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !self.rotation_angle.is_finite() {
            return bad(format!("rotation_angle must be finite, got {}", self.rotation_angle));
        }
        self.positive_count().map(|_| ())
    }
}

/// A generated instance. `unl` carries the ground truth as labels.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub unl: PointCloud,
    pub pos: PointCloud,
    /// `1` for positive, `−1` for negative, one per unlabeled point.
    pub truth: Vec<i64>,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, mean: &Array1<f64>, sd: f64) -> Array2<f64> {
    let d = mean.len();
    Array2::from_shape_fn((n, d), |(_, k)| {
        let z: f64 = StandardNormal.sample(rng);
        mean[k] + sd * z
    })
}

/// `(dim + extra) × dim` matrix with orthonormal columns from Gram-Schmidt
/// on a Gaussian draw.
fn orthonormal_embedding(rng: &mut ChaCha8Rng, dim: usize, extra: usize) -> Array2<f64> {
    let rows = dim + extra;
    loop {
        let mut q: Array2<f64> = Array2::from_shape_fn((rows, dim), |_| StandardNormal.sample(rng));
        let mut ok = true;
        for c in 0..dim {
            for prev in 0..c {
                let proj: f64 = q.column(c).dot(&q.column(prev));
                let base = q.column(prev).to_owned();
                q.column_mut(c).scaled_add(-proj, &base);
            }
            let norm = q.column(c).dot(&q.column(c)).sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            q.column_mut(c).mapv_inplace(|v| v / norm);
        }
        if ok {
            return q;
        }
    }
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let half = 0.5 * spec.separation * spec.sigma;
    let mut mu_pos = Array1::zeros(d);
    let mut mu_neg = Array1::zeros(d);
    mu_pos[0] = -half;
    mu_neg[0] = half;

    let k = spec.positive_count()?;
    let positives = gaussian(&mut rng, k, &mu_pos, spec.sigma);
    let negatives = gaussian(&mut rng, spec.n_unl - k, &mu_neg, spec.neg_spread * spec.sigma);
    let mut order: Vec<usize> = (0..spec.n_unl).collect();
    order.shuffle(&mut rng);
    let mut unl = Array2::zeros((spec.n_unl, d));
    let mut truth = Vec::with_capacity(spec.n_unl);
    for (row, &src) in order.iter().enumerate() {
        if src < k {
            unl.row_mut(row).assign(&positives.row(src));
            truth.push(1);
        } else {
            unl.row_mut(row).assign(&negatives.row(src - k));
            truth.push(-1);
        }
    }
    let mut pos = gaussian(&mut rng, spec.n_pos, &mu_pos, spec.sigma);

    match spec.kind {
        ScenarioKind::TwoGaussians => {}
        ScenarioKind::RotatedDomain => {
            // x ↦ R(x − c) + c in the first two coordinates, with c = (0, −half),
            // applied as Rx + (c − Rc) so a zero angle is exact.
            let (sin, cos) = spec.rotation_angle.sin_cos();
            let c = [0.0, -half];
            let shift = [c[0] - (cos * c[0] - sin * c[1]), c[1] - (sin * c[0] + cos * c[1])];
            for mut row in unl.rows_mut() {
                let (x, y) = (row[0], row[1]);
                row[0] = cos * x - sin * y + shift[0];
                row[1] = sin * x + cos * y + shift[1];
            }
        }
        ScenarioKind::FeatureSplit => {
            let embed = orthonormal_embedding(&mut rng, d, FEATURE_SPLIT_EXTRA);
            pos = pos.dot(&embed.t());
        }
    }
    Ok(Scenario {
        unl: PointCloud::new(unl, Some(truth.clone()))?,
        pos: PointCloud::new(pos, None)?,
        truth,
    })
}
