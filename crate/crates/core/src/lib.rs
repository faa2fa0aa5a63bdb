//! Certification and computation of saddle points for convex-concave
//! minimax problems.
//!
//! * [`domain`]: compact strategy sets and their quadrature grids.
//! * [`objective`]: payoffs `f(x, y)` and partial gradients.
//! * [`minimax`]: grid values of `sup inf` and `inf sup`, saddle checks.
//! * [`phi`]: the merit functional vanishing exactly at saddle points, and
//!   a projected-gradient minimizer for it.
//! * [`quadratic`]: games `½yᵀSy − yᵀAx − g(x)` with `y` unbounded, reduced
//!   to a compact problem on an explicit ball.
//!
//! Grid kernels run on `rayon` under the default `parallel` feature.
//! Reductions run in fixed node order, so both modes give identical bits.

pub mod domain;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod minimax;
pub mod objective;
pub mod phi;
pub mod quadratic;

pub use domain::{Domain, QuadratureGrid};
pub use error::{Error, Result};
pub use exec::Execution;
pub use minimax::{MinimaxEstimate, SaddleCandidate};
pub use objective::{Bilinear, BlackBox, GradientPair, Objective};
pub use phi::{PhiContext, PhiSolveResult, SolverParams};
pub use quadratic::{ConvexTerm, QuadraticGame, QuadraticGameSpec, QuadraticSolveReport, SpectralData};

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default absolute tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Per-axis resolution for a domain of dimension `dim` given a nominal
/// resolution `nominal`.
///
/// Dimensions up to two use `nominal` directly; above that the per-axis count
/// is `⌈nominal^(2/dim)⌉` so the total node count stays near `nominal²`.
pub fn scaled_resolution(nominal: usize, dim: usize) -> usize {
    if dim <= 2 {
        nominal
    } else {
        ((nominal as f64).powf(2.0 / dim as f64).ceil() as usize).max(1)
    }
}

/// Default grid resolution for sup/inf evaluation in dimension `dim`.
pub fn default_resolution(dim: usize) -> usize {
    scaled_resolution(101, dim)
}
