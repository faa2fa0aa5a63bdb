//! The merit functional
//!
//! ```text
//! Φ(x, y) = Σ_u Σ_v w_u w_v · (f(u, y) − f(x, v))₊²
//! ```
//!
//! summed over quadrature nodes `u` of `X` and `v` of `Y`. `Φ ≥ 0`
//! everywhere, and `Φ(x, y) = 0` exactly when no node pair beats `(x, y)`:
//! `f(u, y) ≤ f(x, v)` for all `u, v`, the discrete saddle condition. For a
//! convex-concave `f` on convex domains its minimum value is zero, so
//! minimizing `Φ` finds saddle points.
//!
//! All double sums run `u`-major, `v`-minor. Rows may be computed on
//! several threads but are added in index order, so results are
//! bit-identical across [`Execution`] modes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Domain, QuadratureGrid};
use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::linalg::{dist, dot};
use crate::objective::{GradientPair, Objective};

/// Default nodes per axis for the Φ quadrature.
pub const DEFAULT_PHI_RESOLUTION: usize = 32;

/// Sufficient-decrease factor of the backtracking line search.
pub const ARMIJO: f64 = 0.5;

/// Limit of `((a + t·b)₊² − a₊²)/t` as `t → 0⁺`, namely `2·a₊·b`.
pub fn plus_square_dderiv(a: f64, b: f64) -> f64 {
    2.0 * a.max(0.0) * b
}

fn plus(a: f64) -> f64 {
    a.max(0.0)
}

/// Integration data for Φ.
#[derive(Debug, Clone)]
pub struct PhiContext {
    objective: Objective,
    x_domain: Domain,
    y_domain: Domain,
    x_grid: QuadratureGrid,
    y_grid: QuadratureGrid,
    exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub step0: f64,
    pub shrink: f64,
    pub max_iters: usize,
    /// Stop once `Φ ≤ tol`.
    pub tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        // Φ is quadratic in the distance to the saddle while the saddle and
        // variation checks are linear in it, so Φ ≤ 1e−8 leaves those
        // residuals near 1e−4.
        SolverParams { step0: 1.0, shrink: 0.5, max_iters: 5000, tol: 1e-14 }
    }
}

/// Why [`PhiContext::minimize`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `Φ ≤ tol`.
    Converged,
    /// Backtracking shrank the step to nothing, or the projected gradient
    /// step vanished, with `Φ` still above `tol`.
    StepCollapse,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSolveResult {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub phi_value: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    /// Starting point followed by every accepted iterate.
    pub trajectory: Vec<TrajectoryPoint>,
    pub converged: bool,
    pub termination: Termination,
}

impl PhiSolveResult {
    /// For a convex-concave objective the minimum of Φ is zero, so a run
    /// that did not converge failed numerically rather than mathematically.
    pub fn numerical_failure(&self) -> bool {
        !self.converged
    }
}

/// Both sides of the variation inequality `Φ(x*, y*) ≤ ΣΣ w w g₊ h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl PhiContext {
    /// Builds the context with `resolution` quadrature nodes per axis on
    /// both domains. Both domains must be convex.
    pub fn new(objective: Objective, x_domain: Domain, y_domain: Domain, resolution: usize) -> Result<Self> {
        x_domain.require_convex()?;
        y_domain.require_convex()?;
        check_dim(objective.dim_x(), x_domain.dim())?;
        check_dim(objective.dim_y(), y_domain.dim())?;
        let x_grid = x_domain.quadrature(resolution)?;
        let y_grid = y_domain.quadrature(resolution)?;
        Ok(PhiContext { objective, x_domain, y_domain, x_grid, y_grid, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn x_domain(&self) -> &Domain {
        &self.x_domain
    }

    pub fn y_domain(&self) -> &Domain {
        &self.y_domain
    }

    pub fn x_grid(&self) -> &QuadratureGrid {
        &self.x_grid
    }

    pub fn y_grid(&self) -> &QuadratureGrid {
        &self.y_grid
    }

    /// `g(u, v) = f(u, y*) − f(x*, v)`.
    pub fn g_val(&self, x_star: &[f64], y_star: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.objective.evaluate(u, y_star)? - self.objective.evaluate(x_star, v)?)
    }

    /// `h(u, v; x, y) = f(u, y) − f(x, v)`.
    pub fn h_val(&self, x: &[f64], y: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.objective.evaluate(u, y)? - self.objective.evaluate(x, v)?)
    }

    // f(u, y) for every u-node and f(x, v) for every v-node
    fn sections(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.x_domain.dim(), x.len())?;
        check_dim(self.y_domain.dim(), y.len())?;
        let f = &self.objective;
        let xs = &self.x_grid.nodes;
        let ys = &self.y_grid.nodes;
        let a = self.exec.try_map(xs.len(), |i| f.evaluate(&xs[i], y))?;
        let b = self.exec.try_map(ys.len(), |j| f.evaluate(x, &ys[j]))?;
        Ok((a, b))
    }

    /// `Σ_u w_u Σ_v w_v kernel(u, v)`, rows in parallel, added in order.
    fn double_sum<K>(&self, kernel: K) -> f64
    where
        K: Fn(usize, usize) -> f64 + Send + Sync,
    {
        let wu = &self.x_grid.weights;
        let wv = &self.y_grid.weights;
        let rows = self.exec.map(wu.len(), |i| {
            let mut row = 0.0;
            for (j, w) in wv.iter().enumerate() {
                row += w * kernel(i, j);
            }
            wu[i] * row
        });
        rows.into_iter().sum()
    }

    /// The merit functional at `(x, y)`. Membership is the caller's
    /// concern; the sum is well defined wherever `f` is.
    pub fn phi(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (a, b) = self.sections(x, y)?;
        Ok(self.double_sum(|i, j| {
            let d = plus(a[i] - b[j]);
            d * d
        }))
    }

    /// Gradient of Φ, differentiating under the sum with the one-sided
    /// identity `d/dt (a + t·b)₊² = 2·a₊·b`.
    pub fn phi_gradient(&self, x: &[f64], y: &[f64]) -> Result<GradientPair> {
        let (a, b) = self.sections(x, y)?;
        let f = &self.objective;
        let xs = &self.x_grid.nodes;
        let ys = &self.y_grid.nodes;
        let wu = &self.x_grid.weights;
        let wv = &self.y_grid.weights;

        // per-node factors 2·Σ w (a_u − b_v)₊, the inner sum in fixed order
        let row_factor = self.exec.map(xs.len(), |i| {
            let mut s = 0.0;
            for (j, w) in wv.iter().enumerate() {
                s += w * plus_square_dderiv(a[i] - b[j], 1.0);
            }
            s
        });
        let col_factor = self.exec.map(ys.len(), |j| {
            let mut s = 0.0;
            for (i, w) in wu.iter().enumerate() {
                s += w * plus_square_dderiv(a[i] - b[j], 1.0);
            }
            s
        });

        let gy_terms = self.exec.try_map(xs.len(), |i| {
            if row_factor[i] == 0.0 {
                return Ok(None);
            }
            Ok::<_, Error>(Some(f.gradients(&xs[i], y)?.grad_y))
        })?;
        let gx_terms = self.exec.try_map(ys.len(), |j| {
            if col_factor[j] == 0.0 {
                return Ok(None);
            }
            Ok::<_, Error>(Some(f.gradients(x, &ys[j])?.grad_x))
        })?;

        let mut grad_y = vec![0.0; y.len()];
        for (i, g) in gy_terms.iter().enumerate() {
            if let Some(g) = g {
                crate::linalg::axpy(wu[i] * row_factor[i], g, &mut grad_y);
            }
        }
        let mut grad_x = vec![0.0; x.len()];
        for (j, g) in gx_terms.iter().enumerate() {
            if let Some(g) = g {
                crate::linalg::axpy(-wv[j] * col_factor[j], g, &mut grad_x);
            }
        }
        Ok(GradientPair { grad_x, grad_y })
    }

    /// Compares `Φ(x*, y*)` with `ΣΣ w_u w_v g₊(u, v)·h(u, v; x, y)`.
    /// At a minimizer of Φ and for convex-concave `f` the inequality holds
    /// for every member pair `(x, y)`.
    pub fn variation_inequality_check(
        &self,
        x_star: &[f64],
        y_star: &[f64],
        x: &[f64],
        y: &[f64],
        tol: f64,
    ) -> Result<VariationCheck> {
        let (a_star, b_star) = self.sections(x_star, y_star)?;
        let (a, b) = self.sections(x, y)?;
        let lhs = self.double_sum(|i, j| {
            let d = plus(a_star[i] - b_star[j]);
            d * d
        });
        let rhs = self.double_sum(|i, j| plus(a_star[i] - b_star[j]) * (a[i] - b[j]));
        Ok(VariationCheck { lhs, rhs, holds: lhs <= rhs + tol })
    }

    /// Largest `|h(u, v; x, y) + h(x, y; u, v)|` over `probes` random
    /// quadruples `u, x ∈ X`, `v, y ∈ Y`. Zero for any deterministic `f`.
    pub fn skew_symmetry_check(&self, probes: usize, seed: u64) -> Result<f64> {
        if probes == 0 {
            return Err(Error::InvalidInput("skew-symmetry check needs at least one probe".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for _ in 0..probes {
            let u = self.x_domain.sample(&mut rng);
            let v = self.y_domain.sample(&mut rng);
            let x = self.x_domain.sample(&mut rng);
            let y = self.y_domain.sample(&mut rng);
            let forward = self.h_val(&x, &y, &u, &v)?;
            let backward = self.h_val(&u, &v, &x, &y)?;
            worst = worst.max((forward + backward).abs());
        }
        Ok(worst)
    }

    /// Projected gradient descent on Φ over `X × Y` with Armijo
    /// backtracking, starting from the projection of `(x0, y0)`.
    pub fn minimize(&self, x0: &[f64], y0: &[f64], params: SolverParams) -> Result<PhiSolveResult> {
        // written so that NaN fails every comparison
        let valid = params.step0 > 0.0 && params.shrink > 0.0 && params.shrink < 1.0 && params.tol >= 0.0;
        if !valid {
            return Err(Error::InvalidInput(format!("invalid solver parameters {params:?}")));
        }
        let mut x = self.x_domain.project(x0)?;
        let mut y = self.y_domain.project(y0)?;
        let mut phi = self.phi(&x, &y)?;
        let mut trajectory = vec![TrajectoryPoint { iter: 0, x: x.clone(), y: y.clone(), phi }];
        let mut iterations = 0;

        let termination = loop {
            if phi <= params.tol {
                break Termination::Converged;
            }
            if iterations >= params.max_iters {
                break Termination::MaxIterations;
            }
            let g = self.phi_gradient(&x, &y)?;
            let mut step = params.step0;
            let accepted = loop {
                let xn = self.x_domain.project(&shifted(&x, -step, &g.grad_x))?;
                let yn = self.y_domain.project(&shifted(&y, -step, &g.grad_y))?;
                let moved = dist(&xn, &x).hypot(dist(&yn, &y));
                if moved == 0.0 {
                    break None;
                }
                let slope = dot(&g.grad_x, &diff(&xn, &x)) + dot(&g.grad_y, &diff(&yn, &y));
                let phi_new = self.phi(&xn, &yn)?;
                if phi_new <= phi + ARMIJO * slope && phi_new <= phi {
                    break Some((xn, yn, phi_new));
                }
                step *= params.shrink;
                if step < 1e-20 {
                    break None;
                }
            };
            let Some((xn, yn, phi_new)) = accepted else {
                break Termination::StepCollapse;
            };
            x = xn;
            y = yn;
            phi = phi_new;
            iterations += 1;
            trajectory.push(TrajectoryPoint { iter: iterations, x: x.clone(), y: y.clone(), phi });
        };

        Ok(PhiSolveResult {
            x_star: x,
            y_star: y,
            phi_value: phi,
            iterations,
            trajectory,
            converged: termination == Termination::Converged,
            termination,
        })
    }
}

fn shifted(p: &[f64], alpha: f64, dir: &[f64]) -> Vec<f64> {
    p.iter().zip(dir).map(|(a, d)| a + alpha * d).collect()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Bilinear;
    use nalgebra::DMatrix;

    fn xy_ctx(resolution: usize) -> PhiContext {
        let f: Objective = Bilinear::product(DMatrix::from_element(1, 1, 1.0)).unwrap().into();
        let sq = Domain::cube(1, -1.0, 1.0).unwrap();
        PhiContext::new(f, sq.clone(), sq, resolution).unwrap()
    }

    #[test]
    fn plus_square_examples() {
        assert_eq!(plus_square_dderiv(1.0, 3.0), 6.0);
        assert_eq!(plus_square_dderiv(-1.0, 5.0), 0.0);
        assert_eq!(plus_square_dderiv(0.0, -2.0), 0.0);
    }

    #[test]
    fn g_and_h_examples() {
        let ctx = xy_ctx(8);
        assert_eq!(ctx.g_val(&[0.0], &[0.0], &[0.4], &[-0.9]).unwrap(), 0.0);
        // (x*, y*) = (1, 1): g(u, v) = u − v
        assert_eq!(ctx.g_val(&[1.0], &[1.0], &[0.5], &[-0.25]).unwrap(), 0.75);
        assert_eq!(ctx.g_val(&[1.0], &[1.0], &[0.3], &[0.3]).unwrap(), 0.0);
        assert_eq!(ctx.h_val(&[0.2], &[0.7], &[0.2], &[0.7]).unwrap(), 0.0);
        // h(u, v; x, y) = u·y − x·v
        assert_eq!(ctx.h_val(&[0.5], &[0.25], &[2.0], &[4.0]).unwrap(), 2.0 * 0.25 - 0.5 * 4.0);
    }

    #[test]
    fn phi_closed_form() {
        let ctx = xy_ctx(64);
        assert_eq!(ctx.phi(&[0.0], &[0.0]).unwrap(), 0.0);
        let v = ctx.phi(&[1.0], &[1.0]).unwrap();
        assert!((v - 4.0 / 3.0).abs() <= 1e-3, "{v}");
    }

    #[test]
    fn gradient_vanishes_at_zero_phi() {
        let ctx = xy_ctx(16);
        let g = ctx.phi_gradient(&[0.0], &[0.0]).unwrap();
        assert_eq!(g, GradientPair { grad_x: vec![0.0], grad_y: vec![0.0] });
    }

    #[test]
    fn gradient_points_toward_saddle() {
        let ctx = xy_ctx(64);
        let g = ctx.phi_gradient(&[1.0], &[1.0]).unwrap();
        assert!(g.grad_x[0] > 0.0 && g.grad_y[0] > 0.0);
        let step = ctx.phi(&[1.0 - 0.1 * g.grad_x[0]], &[1.0 - 0.1 * g.grad_y[0]]).unwrap();
        assert!(step < ctx.phi(&[1.0], &[1.0]).unwrap());
    }

    #[test]
    fn minimize_from_saddle_takes_no_steps() {
        let ctx = xy_ctx(16);
        let r = ctx.minimize(&[0.0], &[0.0], SolverParams::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.phi_value, 0.0);
        assert_eq!(r.trajectory.len(), 1);
    }

    #[test]
    fn point_sets_are_rejected() {
        let f: Objective = Bilinear::product(DMatrix::from_element(1, 1, 1.0)).unwrap().into();
        let x = Domain::points(vec![vec![-1.0], vec![1.0]]).unwrap();
        let y = Domain::cube(1, -1.0, 1.0).unwrap();
        assert!(matches!(PhiContext::new(f, x, y, 8), Err(Error::UnsupportedDomain("points"))));
    }

    #[test]
    fn bad_params_rejected() {
        let ctx = xy_ctx(8);
        let p = SolverParams { shrink: 1.0, ..SolverParams::default() };
        assert!(ctx.minimize(&[1.0], &[1.0], p).is_err());
    }
}
