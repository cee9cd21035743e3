//! Exact partial optimal transport.
//!
//! Balanced transport is solved by a network simplex. Partial Wasserstein
//! problems are reduced to balanced ones by appending a dummy point to each
//! side. Partial Gromov-Wasserstein problems are solved by Frank-Wolfe with
//! the partial Wasserstein solver as linear minimization oracle. Both are
//! applied to positive-unlabeled classification.
//!
//! ```
//! use partial_ot::{euclidean_cost, solve_partial_w, Histogram, PartialProblem, PointCloud};
//!
//! # fn main() -> partial_ot::Result<()> {
//! let x = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]])?;
//! let y = PointCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]])?;
//! let cost = euclidean_cost(&x, &y, 2.0)?;
//! let prob = PartialProblem::new(Histogram::uniform(3, 1.0), Histogram::uniform(2, 1.0), cost, 0.5)?;
//! let sol = solve_partial_w(&prob)?;
//! // Half the mass fits between coincident points, at zero cost.
//! assert!(sol.partial_cost.abs() < 1e-12);
//! # Ok(())
//! # }
//! ```

pub mod cost;
pub mod emd;
pub mod error;
pub mod experiment;
pub mod gw;
pub mod init;
pub mod io;
pub mod measure;
mod network_simplex;
pub mod partial;
pub mod plan;
pub mod pu;
pub mod scenario;

/// Library version, reported by the command-line tool.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use cost::{euclidean_cost, normalize_cost, CostMatrix};
pub use emd::solve_exact_ot;
pub use error::{Error, Result};
pub use gw::{
    fw_direction, fw_gap, fw_gap_bound, gw_contraction, gw_gradient_half, gw_loss, line_search, solve_partial_gw,
    solve_partial_gw_with, FwOptions, FwState, GwProblem, LinearMinimizer,
};
pub use init::{
    barycenter2, build_init, init_barycenter2, init_outer_product, multi_start, Barycenter, InitClouds, InitKind,
    InitStrategy, MultiStart,
};
pub use measure::{Histogram, PointCloud};
pub use partial::{extend, lift_plan, solve_partial_w, ExtendedProblem, PartialProblem, PartialSolution};
pub use plan::{frobenius, TransportPlan, Triplet};
pub use pu::{classify, evaluate, solve_pu_gw, solve_pu_w, PuMode, PuOptions, PuPlan, PuProblem};
