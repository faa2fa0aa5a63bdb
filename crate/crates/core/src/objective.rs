//! Payoff functions `f: X × Y → ℝ`, where the `x` player maximizes and the
//! `y` player minimizes.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};
use crate::quadratic::QuadraticGame;

/// Central finite-difference step used when analytic gradients are missing.
pub const FD_STEP: f64 = 1e-5;

pub type ValueFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// `f(x, y) = xᵀMy + aᵀx + bᵀy + c` with `M` of shape `d × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bilinear {
    m: DMatrix<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl Bilinear {
    pub fn new(m: DMatrix<f64>, a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidInput("bilinear matrix must be nonempty".into()));
        }
        check_dim(m.nrows(), a.len())?;
        check_dim(m.ncols(), b.len())?;
        if m.iter().chain(&a).chain(&b).chain(std::iter::once(&c)).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("bilinear coefficients must be finite".into()));
        }
        Ok(Bilinear { m, a, b, c })
    }

    /// Pure form `xᵀMy`.
    pub fn product(m: DMatrix<f64>) -> Result<Self> {
        let (d, k) = m.shape();
        Self::new(m, vec![0.0; d], vec![0.0; k], 0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn linear_x(&self) -> &[f64] {
        &self.a
    }

    pub fn linear_y(&self) -> &[f64] {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut v = self.c;
        for (i, xi) in x.iter().enumerate() {
            let mut row = self.a[i];
            for (j, yj) in y.iter().enumerate() {
                row += self.m[(i, j)] * yj;
            }
            v += xi * row;
        }
        v + crate::linalg::dot(&self.b, y)
    }

    fn gradients(&self, x: &[f64], y: &[f64]) -> GradientPair {
        let mut grad_x = crate::linalg::mat_vec(&self.m, y);
        for (g, a) in grad_x.iter_mut().zip(&self.a) {
            *g += a;
        }
        let mut grad_y = crate::linalg::mat_t_vec(&self.m, x);
        for (g, b) in grad_y.iter_mut().zip(&self.b) {
            *g += b;
        }
        GradientPair { grad_x, grad_y }
    }
}

/// A user-supplied payoff. The value handle (and gradient handles, if
/// given) must be deterministic and safe to call from several threads.
#[derive(Clone)]
pub struct BlackBox {
    dim_x: usize,
    dim_y: usize,
    value: ValueFn,
    grad_x: Option<GradFn>,
    grad_y: Option<GradFn>,
    smooth: bool,
}

impl BlackBox {
    pub fn new<F>(dim_x: usize, dim_y: usize, value: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        BlackBox { dim_x, dim_y, value: Arc::new(value), grad_x: None, grad_y: None, smooth: true }
    }

    pub fn with_gradients<GX, GY>(mut self, grad_x: GX, grad_y: GY) -> Self
    where
        GX: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        GY: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.grad_x = Some(Arc::new(grad_x));
        self.grad_y = Some(Arc::new(grad_y));
        self
    }

    /// Declares whether the function is smooth. Informational only;
    /// nonsmooth functions still get finite-difference subgradients.
    pub fn with_smooth(mut self, smooth: bool) -> Self {
        self.smooth = smooth;
        self
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth
    }
}

impl fmt::Debug for BlackBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBox")
            .field("dim_x", &self.dim_x)
            .field("dim_y", &self.dim_y)
            .field("analytic_gradients", &self.grad_x.is_some())
            .field("smooth", &self.smooth)
            .finish()
    }
}

/// Partial gradients `(∇ₓf, ∇ᵧf)` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Objective {
    Bilinear(Bilinear),
    Quadratic(QuadraticGame),
    BlackBox(BlackBox),
}

impl From<Bilinear> for Objective {
    fn from(b: Bilinear) -> Self {
        Objective::Bilinear(b)
    }
}

impl From<QuadraticGame> for Objective {
    fn from(q: QuadraticGame) -> Self {
        Objective::Quadratic(q)
    }
}

impl From<BlackBox> for Objective {
    fn from(b: BlackBox) -> Self {
        Objective::BlackBox(b)
    }
}

impl Objective {
    pub fn dim_x(&self) -> usize {
        match self {
            Objective::Bilinear(b) => b.m.nrows(),
            Objective::Quadratic(q) => q.dim_x(),
            Objective::BlackBox(b) => b.dim_x,
        }
    }

    pub fn dim_y(&self) -> usize {
        match self {
            Objective::Bilinear(b) => b.m.ncols(),
            Objective::Quadratic(q) => q.dim_y(),
            Objective::BlackBox(b) => b.dim_y,
        }
    }

    /// Whether gradients come in closed form rather than from finite
    /// differences.
    pub fn has_analytic_gradients(&self) -> bool {
        match self {
            Objective::Bilinear(_) => true,
            Objective::Quadratic(q) => q.g().has_analytic_gradient(),
            Objective::BlackBox(b) => b.grad_x.is_some() && b.grad_y.is_some(),
        }
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        check_dim(self.dim_x(), x.len())?;
        check_dim(self.dim_y(), y.len())
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dims(x, y)?;
        let v = self.raw_value(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x: x.to_vec(), y: y.to_vec() })
        }
    }

    fn raw_value(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Objective::Bilinear(b) => b.value(x, y),
            Objective::Quadratic(q) => q.value(x, y),
            Objective::BlackBox(b) => (b.value)(x, y),
        }
    }

    pub fn gradients(&self, x: &[f64], y: &[f64]) -> Result<GradientPair> {
        // evaluation also surfaces non-finite values with their location
        self.evaluate(x, y)?;
        let pair = match self {
            Objective::Bilinear(b) => b.gradients(x, y),
            Objective::Quadratic(q) => q.gradients(x, y),
            Objective::BlackBox(b) => match (&b.grad_x, &b.grad_y) {
                (Some(gx), Some(gy)) => GradientPair { grad_x: gx(x, y), grad_y: gy(x, y) },
                _ => self.finite_difference_gradients(x, y, FD_STEP),
            },
        };
        check_dim(self.dim_x(), pair.grad_x.len())?;
        check_dim(self.dim_y(), pair.grad_y.len())?;
        if pair.grad_x.iter().chain(&pair.grad_y).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { x: x.to_vec(), y: y.to_vec() });
        }
        Ok(pair)
    }

    /// Central finite differences with step `h` in every coordinate.
    pub fn finite_difference_gradients(&self, x: &[f64], y: &[f64], h: f64) -> GradientPair {
        let mut xs = x.to_vec();
        let grad_x = (0..x.len())
            .map(|i| {
                xs[i] = x[i] + h;
                let fp = self.raw_value(&xs, y);
                xs[i] = x[i] - h;
                let fm = self.raw_value(&xs, y);
                xs[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect();
        let mut ys = y.to_vec();
        let grad_y = (0..y.len())
            .map(|j| {
                ys[j] = y[j] + h;
                let fp = self.raw_value(x, &ys);
                ys[j] = y[j] - h;
                let fm = self.raw_value(x, &ys);
                ys[j] = y[j];
                (fp - fm) / (2.0 * h)
            })
            .collect();
        GradientPair { grad_x, grad_y }
    }
}

/// The worst midpoint violation found for one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Largest amount by which the midpoint inequality failed (≥ 0).
    pub worst: f64,
    /// `(first, second, fixed)` arguments of the worst violation.
    pub witness: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl Violation {
    fn none() -> Self {
        Violation { worst: 0.0, witness: None }
    }

    fn record(&mut self, amount: f64, first: &[f64], second: &[f64], fixed: &[f64]) {
        if amount > self.worst {
            self.worst = amount;
            self.witness = Some((first.to_vec(), second.to_vec(), fixed.to_vec()));
        }
    }
}

/// Outcome of [`check_convex_concave`]. Sampling can only find violations;
/// a clean report means none were found, not that the function is
/// convex-concave.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub samples: usize,
    /// Violations of `f((x₁+x₂)/2, y) ≥ (f(x₁,y)+f(x₂,y))/2`.
    pub concavity_in_x: Violation,
    /// Violations of `f(x, (y₁+y₂)/2) ≤ (f(x,y₁)+f(x,y₂))/2`.
    pub convexity_in_y: Violation,
}

impl ConvexityReport {
    pub fn no_violation_found(&self, tol: f64) -> bool {
        self.concavity_in_x.worst <= tol && self.convexity_in_y.worst <= tol
    }
}

/// Midpoint defects at or below this are round-off.
pub const VIOLATION_TOL: f64 = 1e-12;

impl fmt::Display for ConvexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.no_violation_found(VIOLATION_TOL) {
            write!(f, "no violation found in {} samples", self.samples)
        } else {
            write!(
                f,
                "violations in {} samples: concavity in x {:e}, convexity in y {:e}",
                self.samples, self.concavity_in_x.worst, self.convexity_in_y.worst
            )
        }
    }
}

/// Seeded midpoint test of concavity in `x` and convexity in `y`.
pub fn check_convex_concave(
    f: &Objective,
    x_domain: &Domain,
    y_domain: &Domain,
    samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    x_domain.require_convex()?;
    y_domain.require_convex()?;
    check_dim(f.dim_x(), x_domain.dim())?;
    check_dim(f.dim_y(), y_domain.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut concavity_in_x = Violation::none();
    let mut convexity_in_y = Violation::none();
    for _ in 0..samples {
        let x1 = x_domain.sample(&mut rng);
        let x2 = x_domain.sample(&mut rng);
        let y = y_domain.sample(&mut rng);
        let xm = midpoint(&x1, &x2);
        let gap = 0.5 * (f.evaluate(&x1, &y)? + f.evaluate(&x2, &y)?) - f.evaluate(&xm, &y)?;
        concavity_in_x.record(gap, &x1, &x2, &y);

        let y1 = y_domain.sample(&mut rng);
        let y2 = y_domain.sample(&mut rng);
        let x = x_domain.sample(&mut rng);
        let ym = midpoint(&y1, &y2);
        let gap = f.evaluate(&x, &ym)? - 0.5 * (f.evaluate(&x, &y1)? + f.evaluate(&x, &y2)?);
        convexity_in_y.record(gap, &y1, &y2, &x);
    }
    Ok(ConvexityReport { samples, concavity_in_x, convexity_in_y })
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect()
}
