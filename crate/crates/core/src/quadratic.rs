//! Quadratic games `f(x, y) = ½yᵀSy − yᵀAx − g(x)` with `S` symmetric
//! positive semidefinite, `g` convex, `x` in a compact convex `X ∋ 0` and
//! `y` ranging over all of ℝᵏ.
//!
//! For fixed `x` the inner problem is bounded below iff `Ax ∈ img S`, in
//! which case its unique minimizer inside `img S` is `y = S⁺Ax` and
//!
//! ```text
//! ‖y‖ ≤ ‖Ax‖/σ_min(S) ≤ C‖A‖/σ_min(S) = R,     C = max_{x∈X} ‖x‖.
//! ```
//!
//! So restricting `y` to the ball `B_R` loses nothing and the compact
//! theory applies. [`solve_quadratic_game`] maximizes the concave value
//! function `v(x) = −½(Ax)ᵀS⁺(Ax) − g(x)` and cross-checks the result
//! against a grid game on `X × B_R`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, dot, jacobi_eigen, mat_t_vec, mat_vec, norm};
use crate::minimax::solve_grid_game;
use crate::objective::{Objective, FD_STEP};
use crate::{scaled_resolution, MEMBERSHIP_TOL};

/// Relative cutoff separating positive eigenvalues from numerical zero.
pub const RANK_TOL: f64 = 1e-10;

/// Default relative tolerance for `w ∈ img S`.
pub const IMAGE_TOL: f64 = 1e-8;

pub type TermFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type TermGradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The convex penalty `g(x)`.
#[derive(Clone)]
pub enum ConvexTerm {
    Zero,
    /// `‖x‖²`
    SumSquares,
    /// `cᵀx`
    Linear(Vec<f64>),
    /// A user handle, with finite-difference gradients when none is given.
    Custom {
        value: TermFn,
        gradient: Option<TermGradFn>,
    },
}

impl fmt::Debug for ConvexTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexTerm::Zero => write!(f, "Zero"),
            ConvexTerm::SumSquares => write!(f, "SumSquares"),
            ConvexTerm::Linear(c) => f.debug_tuple("Linear").field(c).finish(),
            ConvexTerm::Custom { gradient, .. } => {
                f.debug_struct("Custom").field("analytic_gradient", &gradient.is_some()).finish()
            }
        }
    }
}

impl ConvexTerm {
    pub fn custom<F>(value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ConvexTerm::Custom { value: Arc::new(value), gradient: None }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConvexTerm::Zero => 0.0,
            ConvexTerm::SumSquares => dot(x, x),
            ConvexTerm::Linear(c) => dot(c, x),
            ConvexTerm::Custom { value, .. } => value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexTerm::Zero => vec![0.0; x.len()],
            ConvexTerm::SumSquares => x.iter().map(|v| 2.0 * v).collect(),
            ConvexTerm::Linear(c) => c.clone(),
            ConvexTerm::Custom { gradient: Some(g), .. } => g(x),
            ConvexTerm::Custom { value, gradient: None } => {
                let mut xs = x.to_vec();
                (0..x.len())
                    .map(|i| {
                        xs[i] = x[i] + FD_STEP;
                        let fp = value(&xs);
                        xs[i] = x[i] - FD_STEP;
                        let fm = value(&xs);
                        xs[i] = x[i];
                        (fp - fm) / (2.0 * FD_STEP)
                    })
                    .collect()
            }
        }
    }

    pub fn has_analytic_gradient(&self) -> bool {
        !matches!(self, ConvexTerm::Custom { gradient: None, .. })
    }
}

/// The payoff `½yᵀSy − yᵀAx − g(x)`, with `S` of size `k × k` and `A` of
/// size `k × d`.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    s: DMatrix<f64>,
    a: DMatrix<f64>,
    g: ConvexTerm,
}

impl QuadraticGame {
    pub fn new(s: DMatrix<f64>, a: DMatrix<f64>, g: ConvexTerm) -> Result<Self> {
        let k = s.nrows();
        if k == 0 || s.ncols() != k {
            return Err(Error::InvalidInput(format!("S must be square and nonempty, got {}x{}", k, s.ncols())));
        }
        check_dim(k, a.nrows())?;
        if a.ncols() == 0 {
            return Err(Error::InvalidInput("A must have at least one column".into()));
        }
        if s.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("S and A must be finite".into()));
        }
        let skew = linalg::asymmetry(&s);
        if skew > linalg::SYMMETRY_TOL {
            return Err(Error::Asymmetric(skew));
        }
        if let ConvexTerm::Linear(c) = &g {
            check_dim(a.ncols(), c.len())?;
        }
        Ok(QuadraticGame { s, a, g })
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn g(&self) -> &ConvexTerm {
        &self.g
    }

    pub fn dim_x(&self) -> usize {
        self.a.ncols()
    }

    pub fn dim_y(&self) -> usize {
        self.a.nrows()
    }

    pub(crate) fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut cross = 0.0;
        for (i, yi) in y.iter().enumerate() {
            let sy: f64 = y.iter().enumerate().map(|(j, yj)| self.s[(i, j)] * yj).sum();
            let ax: f64 = x.iter().enumerate().map(|(j, xj)| self.a[(i, j)] * xj).sum();
            quad += yi * sy;
            cross += yi * ax;
        }
        0.5 * quad - cross - self.g.value(x)
    }

    pub(crate) fn gradients(&self, x: &[f64], y: &[f64]) -> crate::objective::GradientPair {
        let ax = mat_vec(&self.a, x);
        let sy = mat_vec(&self.s, y);
        let grad_y = sy.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let aty = mat_t_vec(&self.a, y);
        let dg = self.g.gradient(x);
        let grad_x = aty.iter().zip(&dg).map(|(p, q)| -p - q).collect();
        crate::objective::GradientPair { grad_x, grad_y }
    }
}

/// Spectral data of a symmetric PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub rank: usize,
    /// Smallest eigenvalue above `rank_tol`; `None` for the zero matrix.
    pub sigma_min_pos: Option<f64>,
    pub rank_tol: f64,
}

/// Cyclic Jacobi eigendecomposition plus rank information.
pub fn spectral_decompose(s: &DMatrix<f64>) -> Result<SpectralData> {
    let eig = jacobi_eigen(s)?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    let rank_tol = RANK_TOL * lambda_max.max(1.0);
    let rank = eig.values.iter().filter(|&&l| l > rank_tol).count();
    let sigma_min_pos = (rank > 0).then(|| eig.values[rank - 1]);
    Ok(SpectralData { eigenvalues: eig.values, eigenvectors: eig.vectors, rank, sigma_min_pos, rank_tol })
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn column(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i).iter().copied().collect()
    }

    /// Component of `w` in `img S`.
    pub fn range_projection(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for i in 0..self.rank {
            let q = self.column(i);
            linalg::axpy(dot(&q, w), &q, &mut out);
        }
        out
    }

    /// Norm of the component of `w` in `ker S`.
    pub fn kernel_component_norm(&self, w: &[f64]) -> f64 {
        (self.rank..self.dim()).map(|i| dot(&self.column(i), w).powi(2)).sum::<f64>().sqrt()
    }

    /// `S⁺w`.
    pub fn pseudo_inverse_apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for i in 0..self.rank {
            let q = self.column(i);
            linalg::axpy(dot(&q, w) / self.eigenvalues[i], &q, &mut out);
        }
        out
    }

    /// `w ∈ img S` up to a residual of `tol·max(1, ‖w‖)`.
    pub fn in_image(&self, w: &[f64], tol: f64) -> bool {
        self.kernel_component_norm(w) <= tol * norm(w).max(1.0)
    }
}

/// A quadratic game together with its strategy set `X` and the spectral
/// data of `S`.
#[derive(Debug, Clone)]
pub struct QuadraticGameSpec {
    game: QuadraticGame,
    x_domain: Domain,
    spectral: SpectralData,
    a_norm: f64,
}

impl QuadraticGameSpec {
    /// Checks that `S` is PSD and that `X` is convex, has the right
    /// dimension and contains the origin.
    pub fn new(game: QuadraticGame, x_domain: Domain) -> Result<Self> {
        x_domain.require_convex()?;
        check_dim(game.dim_x(), x_domain.dim())?;
        if !x_domain.contains(&vec![0.0; x_domain.dim()], MEMBERSHIP_TOL)? {
            return Err(Error::InvalidDomain("the strategy set X must contain the origin".into()));
        }
        let spectral = spectral_decompose(&game.s)?;
        let lambda_max = spectral.eigenvalues.first().copied().unwrap_or(0.0);
        let lambda_min = spectral.eigenvalues.last().copied().unwrap_or(0.0);
        if lambda_min < -RANK_TOL * lambda_max.max(1.0) {
            return Err(Error::NotPsd(lambda_min));
        }
        let a_norm = linalg::spectral_norm(&game.a)?;
        Ok(QuadraticGameSpec { game, x_domain, spectral, a_norm })
    }

    pub fn game(&self) -> &QuadraticGame {
        &self.game
    }

    pub fn x_domain(&self) -> &Domain {
        &self.x_domain
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    /// `‖A‖₂`.
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn objective(&self) -> Objective {
        Objective::Quadratic(self.game.clone())
    }

    /// Rank-zero `S` with nonzero `A`: the inner infimum is `−∞` for every
    /// `x` with `Ax ≠ 0` and no compactification radius exists.
    pub fn is_degenerate(&self) -> bool {
        self.spectral.rank == 0 && self.a_norm > 0.0
    }

    fn value_at(&self, x: &[f64], image_tol: f64) -> InnerMin {
        let ax = mat_vec(&self.game.a, x);
        if !self.spectral.in_image(&ax, image_tol) {
            return InnerMin { value: f64::NEG_INFINITY, y_min: None, bound_ok: None };
        }
        let y = self.spectral.pseudo_inverse_apply(&ax);
        // `+ 0.0` turns the −0 of v(0) into 0
        let value = -0.5 * dot(&ax, &y) - self.game.g.value(x) + 0.0;
        let bound = match self.spectral.sigma_min_pos {
            Some(sigma) => self.x_domain.bounding_norm() * self.a_norm / sigma,
            None => 0.0,
        };
        let bound_ok = norm(&y) <= bound + 1e-8;
        InnerMin { value, y_min: Some(y), bound_ok: Some(bound_ok) }
    }

    fn value_gradient(&self, x: &[f64]) -> Vec<f64> {
        let ax = mat_vec(&self.game.a, x);
        let y = self.spectral.pseudo_inverse_apply(&ax);
        let aty = mat_t_vec(&self.game.a, &y);
        let dg = self.game.g.gradient(x);
        aty.iter().zip(&dg).map(|(p, q)| -p - q).collect()
    }

    /// Orthogonal projector onto `{x : Ax ∈ img S}`.
    fn feasible_subspace_projector(&self) -> Result<DMatrix<f64>> {
        let d = self.game.dim_x();
        let k = self.game.dim_y();
        if self.spectral.rank == k {
            return Ok(DMatrix::identity(d, d));
        }
        // B = Q_kerᵀ A; the subspace is ker B
        let q_ker = self.spectral.eigenvectors.columns(self.spectral.rank, k - self.spectral.rank);
        let b = q_ker.transpose() * &self.game.a;
        let eig = jacobi_eigen(&linalg::gram(&b))?;
        let cutoff = (IMAGE_TOL * self.a_norm.max(1.0)).powi(2);
        let mut p = DMatrix::zeros(d, d);
        for (i, &l) in eig.values.iter().enumerate() {
            if l <= cutoff {
                let n = eig.vectors.column(i);
                p += n * n.transpose();
            }
        }
        Ok(p)
    }
}

/// Closed-form inner minimization over `y ∈ ℝᵏ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerMin {
    /// `inf_y f(x, y)`; `NEG_INFINITY` when `Ax ∉ img S`.
    pub value: f64,
    /// `S⁺Ax`, the minimizer inside `img S`.
    pub y_min: Option<Vec<f64>>,
    /// Whether `‖y_min‖ ≤ C‖A‖/σ_min` held.
    pub bound_ok: Option<bool>,
}

pub fn in_image(spectral: &SpectralData, w: &[f64], tol: f64) -> bool {
    spectral.in_image(w, tol)
}

/// `inf_y f(x, y)` and its minimizer for `x ∈ X`.
pub fn inner_min(spec: &QuadraticGameSpec, x: &[f64]) -> Result<InnerMin> {
    check_dim(spec.game.dim_x(), x.len())?;
    if !spec.x_domain.contains(x, MEMBERSHIP_TOL)? {
        return Err(Error::NotAMember { domain: spec.x_domain.name(), point: x.to_vec() });
    }
    Ok(spec.value_at(x, IMAGE_TOL))
}

/// Compactification radius `R = C‖A‖/σ_min(S)`; zero when `A = 0`.
pub fn ball_radius(spec: &QuadraticGameSpec) -> Result<f64> {
    if spec.a_norm == 0.0 {
        return Ok(0.0);
    }
    match spec.spectral.sigma_min_pos {
        Some(sigma) => Ok(spec.x_domain.bounding_norm() * spec.a_norm / sigma),
        None => Err(Error::Degenerate(
            "S = 0 with A ≠ 0: the inner infimum is −∞ wherever Ax ≠ 0, so no radius exists".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticParams {
    /// Nominal resolution of the seeding sweep over `X`.
    pub sweep_resolution: usize,
    /// Nominal resolution of the cross-check grid game on `X × B_R`.
    pub cross_check_resolution: usize,
    pub max_iters: usize,
    pub step0: f64,
    pub shrink: f64,
    pub image_tol: f64,
    /// Allowed `|value_sup_inf − value_inf_sup|`.
    pub tol: f64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        QuadraticParams {
            sweep_resolution: 41,
            cross_check_resolution: 41,
            max_iters: 2000,
            step0: 1.0,
            shrink: 0.5,
            image_tol: IMAGE_TOL,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSolveReport {
    /// Outer max of the value function.
    pub x_star: Vec<f64>,
    /// `S⁺Ax*`
    pub y_star: Vec<f64>,
    /// `v(x*) = max_x inf_y f`.
    pub value_sup_inf: f64,
    /// `min_y max_x f` on the grid game over `X × B_R`.
    pub value_inf_sup: f64,
    /// Compactification radius `R`.
    pub radius: f64,
    /// Points tested for `Ax ∈ img S` that passed.
    pub x0_members_checked: usize,
    pub chain_ok: bool,
    /// Accepted ascent steps after the sweep.
    pub ascent_iterations: usize,
    /// Whether `‖y*‖ ≤ R` held.
    pub bound_ok: bool,
}

/// Ball of radius `radius` around the origin, or the origin alone when the
/// radius is zero.
fn y_nodes(k: usize, radius: f64, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if radius > 0.0 {
        Domain::ball(vec![0.0; k], radius)?.evaluation_nodes(scaled_resolution(resolution, k))
    } else {
        Ok(vec![vec![0.0; k]])
    }
}

/// Maximizes the value function over `X₀ = {x ∈ X : Ax ∈ img S}` and
/// cross-checks the maximum against the grid game on `X × B_R`.
pub fn solve_quadratic_game(spec: &QuadraticGameSpec, params: QuadraticParams) -> Result<QuadraticSolveReport> {
    if spec.is_degenerate() {
        return Err(Error::Degenerate("S = 0 while A ≠ 0; the inner problem is unbounded off ker A".into()));
    }
    let exec = Execution::default();
    let d = spec.game.dim_x();
    let k = spec.game.dim_y();

    // sweep: the origin is always in X₀, then the evaluation grid
    let mut nodes = vec![vec![0.0; d]];
    nodes.extend(spec.x_domain.evaluation_nodes(scaled_resolution(params.sweep_resolution, d))?);
    let values = exec.map(nodes.len(), |i| spec.value_at(&nodes[i], params.image_tol).value);
    let mut x0_members_checked = values.iter().filter(|v| v.is_finite()).count();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let mut x = nodes[best].clone();
    let mut v = values[best];

    // projected supergradient ascent restricted to X₀
    let projector = spec.feasible_subspace_projector()?;
    let mut ascent_iterations = 0;
    for _ in 0..params.max_iters {
        let grad = spec.value_gradient(&x);
        let dir: Vec<f64> = (&projector * nalgebra::DVector::from_column_slice(&grad)).iter().copied().collect();
        let mut step = params.step0;
        let mut accepted = None;
        while step >= 1e-20 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(p, g)| p + step * g).collect();
            let xn = spec.x_domain.project(&trial)?;
            if xn == x {
                break;
            }
            let inner = spec.value_at(&xn, params.image_tol);
            if inner.value.is_finite() {
                x0_members_checked += 1;
                let rise: f64 = grad.iter().zip(xn.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
                if inner.value >= v + 0.5 * rise && inner.value >= v {
                    accepted = Some((xn, inner.value));
                    break;
                }
            }
            step *= params.shrink;
        }
        let Some((xn, vn)) = accepted else { break };
        let moved = linalg::dist(&xn, &x);
        x = xn;
        v = vn;
        ascent_iterations += 1;
        if moved <= 1e-14 * x.iter().fold(1.0_f64, |m, c| m.max(c.abs())) {
            break;
        }
    }

    let inner = spec.value_at(&x, params.image_tol);
    let y_star = inner.y_min.unwrap_or_else(|| vec![0.0; k]);
    let radius = ball_radius(spec)?;

    let mut xg = spec.x_domain.evaluation_nodes(scaled_resolution(params.cross_check_resolution, d))?;
    xg.push(x.clone());
    let mut yg = y_nodes(k, radius, params.cross_check_resolution)?;
    yg.push(y_star.clone());
    let objective = spec.objective();
    let grid = solve_grid_game(&objective, &xg, &yg, false, exec)?;

    Ok(QuadraticSolveReport {
        value_sup_inf: v,
        value_inf_sup: grid.inf_sup,
        chain_ok: (v - grid.inf_sup).abs() <= params.tol,
        bound_ok: linalg::norm(&y_star) <= radius + 1e-8,
        x_star: x,
        y_star,
        radius,
        x0_members_checked,
        ascent_iterations,
    })
}

/// The members of the saddle chain
///
/// ```text
/// min_y max_x f = max_x f(x, y*) = f(x*, y*) = min_y f(x*, y) = max_x inf_y f
/// ```
///
/// evaluated on grids over `X` and `B_R` (with `x*`, `y*` added as nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCheck {
    pub min_max: f64,
    pub max_at_y_star: f64,
    pub value: f64,
    pub min_at_x_star: f64,
    /// `max_x inf_y f` over the X grid, `inf_y` in closed form over ℝᵏ.
    pub max_inf: f64,
    /// The same maximum restricted to nodes in `X₀`.
    pub max_min_x0: f64,
    pub x0_nodes: usize,
    pub holds: bool,
}

impl ChainCheck {
    pub fn members(&self) -> [f64; 6] {
        [self.min_max, self.max_at_y_star, self.value, self.min_at_x_star, self.max_inf, self.max_min_x0]
    }

    /// Largest pairwise difference between members.
    pub fn spread(&self) -> f64 {
        let m = self.members();
        let hi = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

pub fn verify_saddle_chain(
    spec: &QuadraticGameSpec,
    report: &QuadraticSolveReport,
    resolution: usize,
    tol: f64,
) -> Result<ChainCheck> {
    if !report.chain_ok {
        return Err(Error::InvalidInput("saddle chain needs a report with chain_ok = true".into()));
    }
    let exec = Execution::default();
    let d = spec.game.dim_x();
    let k = spec.game.dim_y();
    let f = spec.objective();
    let (x_star, y_star) = (&report.x_star, &report.y_star);

    let mut xg = spec.x_domain.evaluation_nodes(scaled_resolution(resolution, d))?;
    xg.push(x_star.clone());
    let mut yg = y_nodes(k, report.radius, resolution)?;
    yg.push(y_star.clone());

    let min_max = solve_grid_game(&f, &xg, &yg, false, exec)?.inf_sup;
    let max_at_y_star =
        exec.try_map(xg.len(), |i| f.evaluate(&xg[i], y_star))?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let value = f.evaluate(x_star, y_star)?;
    let min_at_x_star =
        exec.try_map(yg.len(), |j| f.evaluate(x_star, &yg[j]))?.into_iter().fold(f64::INFINITY, f64::min);
    let inner = exec.map(xg.len(), |i| spec.value_at(&xg[i], IMAGE_TOL).value);
    let max_inf = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x0: Vec<f64> = inner.iter().copied().filter(|v| v.is_finite()).collect();
    let max_min_x0 = x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut check = ChainCheck {
        min_max,
        max_at_y_star,
        value,
        min_at_x_star,
        max_inf,
        max_min_x0,
        x0_nodes: x0.len(),
        holds: false,
    };
    check.holds = check.spread() <= tol;
    Ok(check)
}
