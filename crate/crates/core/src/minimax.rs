//! Grid evaluation of `sup inf f` and `inf sup f`, weak duality and saddle
//! verification.
//!
//! Suprema and infima over a continuum are replaced by maxima and minima over
//! evaluation nodes: the quadrature midpoints of each domain followed by its
//! extreme points. Every estimate records the resolution that produced it.
//! Ties go to the lowest node index.

use crate::domain::Domain;
use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::linalg::norm;
use crate::objective::Objective;
use crate::MEMBERSHIP_TOL;

/// Slack allowed in the grid weak-duality inequality.
pub const DUALITY_SLACK: f64 = 1e-9;

/// Default absolute tolerance for saddle verification.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Rows per work item in the grid kernel.
const ROW_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct MinimaxEstimate {
    /// `max_x min_y f` over the evaluation nodes.
    pub sup_inf: f64,
    /// `min_y max_x f` over the evaluation nodes.
    pub inf_sup: f64,
    /// Node attaining `sup_inf` (the outer max).
    pub outer_max_arg: Vec<f64>,
    /// Node attaining `inf_sup` (the outer min).
    pub outer_min_arg: Vec<f64>,
    pub resolution: usize,
    /// Estimated bound on `|grid value − continuum value|` for either side,
    /// `Lₓ·hₓ + Lᵧ·hᵧ` with Lipschitz constants taken as the largest gradient
    /// norms over the node pairs and `h` the covering radii of the grids.
    /// Present only with analytic gradients and known covering radii.
    pub error_bound: Option<f64>,
}

impl MinimaxEstimate {
    pub fn gap(&self) -> f64 {
        self.inf_sup - self.sup_inf
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleCandidate {
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    /// `f(x*, y*)`
    pub value: f64,
    /// `max_x (f(x, y*) − f(x*, y*))₊` over the verification grid.
    pub max_violation: f64,
    /// `max_y (f(x*, y*) − f(x*, y))₊` over the verification grid.
    pub min_violation: f64,
    pub verified: bool,
}

/// Raw result of a finite grid game.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGameValues {
    pub sup_inf: f64,
    pub inf_sup: f64,
    pub argmax_x: usize,
    pub argmin_y: usize,
    /// Largest `‖∇ₓf‖` and `‖∇ᵧf‖` over the node pairs, when requested.
    pub lipschitz: Option<(f64, f64)>,
}

/// Solves the finite game on explicit node lists.
///
/// Row chunks are evaluated independently; row minima are stitched in index
/// order and column maxima combined with `max`, which is exact, so the
/// outcome does not depend on `exec`.
pub fn solve_grid_game(
    f: &Objective,
    x_nodes: &[Vec<f64>],
    y_nodes: &[Vec<f64>],
    with_lipschitz: bool,
    exec: Execution,
) -> Result<GridGameValues> {
    if x_nodes.is_empty() || y_nodes.is_empty() {
        return Err(Error::InvalidInput("grid game needs at least one node per player".into()));
    }
    let chunks = x_nodes.len().div_ceil(ROW_CHUNK);
    let partial = exec.try_map(chunks, |c| {
        let rows = &x_nodes[c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(x_nodes.len())];
        let mut row_min = Vec::with_capacity(rows.len());
        let mut col_max = vec![f64::NEG_INFINITY; y_nodes.len()];
        let mut lip = (0.0_f64, 0.0_f64);
        for x in rows {
            let mut best = f64::INFINITY;
            for (j, y) in y_nodes.iter().enumerate() {
                let v = f.evaluate(x, y)?;
                if v < best {
                    best = v;
                }
                if v > col_max[j] {
                    col_max[j] = v;
                }
                if with_lipschitz {
                    let g = f.gradients(x, y)?;
                    lip.0 = lip.0.max(norm(&g.grad_x));
                    lip.1 = lip.1.max(norm(&g.grad_y));
                }
            }
            row_min.push(best);
        }
        Ok::<_, Error>((row_min, col_max, lip))
    })?;

    let mut sup_inf = f64::NEG_INFINITY;
    let mut argmax_x = 0;
    let mut col_max = vec![f64::NEG_INFINITY; y_nodes.len()];
    let mut lip = (0.0_f64, 0.0_f64);
    let mut i = 0;
    for (rows, cols, l) in partial {
        for v in rows {
            if v > sup_inf {
                sup_inf = v;
                argmax_x = i;
            }
            i += 1;
        }
        for (acc, v) in col_max.iter_mut().zip(cols) {
            *acc = acc.max(v);
        }
        lip = (lip.0.max(l.0), lip.1.max(l.1));
    }
    let mut inf_sup = f64::INFINITY;
    let mut argmin_y = 0;
    for (j, v) in col_max.into_iter().enumerate() {
        if v < inf_sup {
            inf_sup = v;
            argmin_y = j;
        }
    }
    Ok(GridGameValues { sup_inf, inf_sup, argmax_x, argmin_y, lipschitz: with_lipschitz.then_some(lip) })
}

fn check_problem(f: &Objective, x_domain: &Domain, y_domain: &Domain) -> Result<()> {
    check_dim(f.dim_x(), x_domain.dim())?;
    check_dim(f.dim_y(), y_domain.dim())
}

/// Both sides of the minimax equality on the evaluation grids of `X × Y`.
pub fn grid_minimax(f: &Objective, x_domain: &Domain, y_domain: &Domain, resolution: usize) -> Result<MinimaxEstimate> {
    grid_minimax_with(f, x_domain, y_domain, resolution, Execution::default())
}

pub fn grid_minimax_with(
    f: &Objective,
    x_domain: &Domain,
    y_domain: &Domain,
    resolution: usize,
    exec: Execution,
) -> Result<MinimaxEstimate> {
    check_problem(f, x_domain, y_domain)?;
    let x_nodes = x_domain.evaluation_nodes(resolution)?;
    let y_nodes = y_domain.evaluation_nodes(resolution)?;
    let hx = x_domain.quadrature(resolution)?.covering_radius;
    let hy = y_domain.quadrature(resolution)?.covering_radius;
    let want_bound = f.has_analytic_gradients() && hx.is_some() && hy.is_some();
    let values = solve_grid_game(f, &x_nodes, &y_nodes, want_bound, exec)?;
    let error_bound = match (values.lipschitz, hx, hy) {
        (Some((lx, ly)), Some(hx), Some(hy)) => Some(lx * hx + ly * hy),
        _ => None,
    };
    Ok(MinimaxEstimate {
        sup_inf: values.sup_inf,
        inf_sup: values.inf_sup,
        outer_max_arg: x_nodes[values.argmax_x].clone(),
        outer_min_arg: y_nodes[values.argmin_y].clone(),
        resolution,
        error_bound,
    })
}

/// Weak duality on the grid: `sup_inf ≤ inf_sup + 1e-9`.
pub fn weak_duality_check(estimate: &MinimaxEstimate) -> bool {
    estimate.sup_inf <= estimate.inf_sup + DUALITY_SLACK
}

fn require_member(domain: &Domain, point: &[f64]) -> Result<()> {
    if domain.contains(point, MEMBERSHIP_TOL)? {
        Ok(())
    } else {
        Err(Error::NotAMember { domain: domain.name(), point: point.to_vec() })
    }
}

fn with_node(mut nodes: Vec<Vec<f64>>, extra: &[f64]) -> Vec<Vec<f64>> {
    nodes.push(extra.to_vec());
    nodes
}

/// Checks `max_x f(x, y*) = f(x*, y*) = min_y f(x*, y)` over the evaluation
/// grids, with `x*` and `y*` added as nodes.
pub fn verify_saddle(
    f: &Objective,
    x_star: &[f64],
    y_star: &[f64],
    x_domain: &Domain,
    y_domain: &Domain,
    resolution: usize,
    tol: f64,
) -> Result<SaddleCandidate> {
    check_problem(f, x_domain, y_domain)?;
    require_member(x_domain, x_star)?;
    require_member(y_domain, y_star)?;
    let x_nodes = with_node(x_domain.evaluation_nodes(resolution)?, x_star);
    let y_nodes = with_node(y_domain.evaluation_nodes(resolution)?, y_star);
    verify_saddle_on_nodes(f, x_star, y_star, &x_nodes, &y_nodes, tol, Execution::default())
}

pub(crate) fn verify_saddle_on_nodes(
    f: &Objective,
    x_star: &[f64],
    y_star: &[f64],
    x_nodes: &[Vec<f64>],
    y_nodes: &[Vec<f64>],
    tol: f64,
    exec: Execution,
) -> Result<SaddleCandidate> {
    let value = f.evaluate(x_star, y_star)?;
    let max_violation = exec
        .try_map(x_nodes.len(), |i| f.evaluate(&x_nodes[i], y_star))?
        .into_iter()
        .fold(0.0_f64, |acc, v| acc.max(v - value));
    let min_violation = exec
        .try_map(y_nodes.len(), |j| f.evaluate(x_star, &y_nodes[j]))?
        .into_iter()
        .fold(0.0_f64, |acc, v| acc.max(value - v));
    Ok(SaddleCandidate {
        x_star: x_star.to_vec(),
        y_star: y_star.to_vec(),
        value,
        max_violation,
        min_violation,
        verified: max_violation <= tol && min_violation <= tol,
    })
}

/// Largest violation of `f(x, y*) ≤ f(x*, y*) ≤ f(x*, y)` over all node
/// pairs `(x, y)`, the pairwise form of the saddle condition. Agrees with
/// `max(max_violation, min_violation)` from [`verify_saddle`].
pub fn pairwise_saddle_violation(
    f: &Objective,
    x_star: &[f64],
    y_star: &[f64],
    x_domain: &Domain,
    y_domain: &Domain,
    resolution: usize,
) -> Result<f64> {
    check_problem(f, x_domain, y_domain)?;
    let x_nodes = with_node(x_domain.evaluation_nodes(resolution)?, x_star);
    let y_nodes = with_node(y_domain.evaluation_nodes(resolution)?, y_star);
    let value = f.evaluate(x_star, y_star)?;
    let rows = Execution::default().try_map(x_nodes.len(), |i| {
        let left = f.evaluate(&x_nodes[i], y_star)?;
        let mut worst = 0.0_f64;
        for y in &y_nodes {
            let right = f.evaluate(x_star, y)?;
            worst = worst.max(left - value).max(value - right);
        }
        Ok::<_, Error>(worst)
    })?;
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// One failed assertion in [`saddle_forward_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub check: &'static str,
    pub expected: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardReport {
    pub estimate: MinimaxEstimate,
    pub value: f64,
    pub mismatches: Vec<Mismatch>,
}

impl ForwardReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// From a verified saddle: both grid values equal `f(x*, y*)`, `x*` is an
/// outer max and `y*` an outer min, all within `tol`.
pub fn saddle_forward_check(
    f: &Objective,
    candidate: &SaddleCandidate,
    x_domain: &Domain,
    y_domain: &Domain,
    resolution: usize,
    tol: f64,
) -> Result<ForwardReport> {
    if !candidate.verified {
        return Err(Error::InvalidInput("forward check needs a verified saddle candidate".into()));
    }
    check_problem(f, x_domain, y_domain)?;
    let exec = Execution::default();
    let x_nodes = with_node(x_domain.evaluation_nodes(resolution)?, &candidate.x_star);
    let y_nodes = with_node(y_domain.evaluation_nodes(resolution)?, &candidate.y_star);
    let values = solve_grid_game(f, &x_nodes, &y_nodes, false, exec)?;
    let estimate = MinimaxEstimate {
        sup_inf: values.sup_inf,
        inf_sup: values.inf_sup,
        outer_max_arg: x_nodes[values.argmax_x].clone(),
        outer_min_arg: y_nodes[values.argmin_y].clone(),
        resolution,
        error_bound: None,
    };

    let inner_at_x_star = exec
        .try_map(y_nodes.len(), |j| f.evaluate(&candidate.x_star, &y_nodes[j]))?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let outer_at_y_star = exec
        .try_map(x_nodes.len(), |i| f.evaluate(&x_nodes[i], &candidate.y_star))?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let value = candidate.value;
    let mut mismatches = Vec::new();
    let mut expect_close = |check, expected: f64, actual: f64| {
        if (expected - actual).abs() > tol {
            mismatches.push(Mismatch { check, expected, actual });
        }
    };
    expect_close("sup_inf equals saddle value", value, estimate.sup_inf);
    expect_close("inf_sup equals saddle value", value, estimate.inf_sup);
    expect_close("x_star is an outer max", estimate.sup_inf, inner_at_x_star);
    expect_close("y_star is an outer min", estimate.inf_sup, outer_at_y_star);
    Ok(ForwardReport { estimate, value, mismatches })
}

/// When the grid values agree within `tol`, the outer max and outer min
/// recorded in `estimate` form a saddle; this assembles and verifies it.
pub fn saddle_converse_check(
    f: &Objective,
    estimate: &MinimaxEstimate,
    x_domain: &Domain,
    y_domain: &Domain,
    tol: f64,
) -> Result<SaddleCandidate> {
    let gap = (estimate.sup_inf - estimate.inf_sup).abs();
    if gap > tol {
        return Err(Error::GapTooLarge { gap, tol });
    }
    verify_saddle(f, &estimate.outer_max_arg, &estimate.outer_min_arg, x_domain, y_domain, estimate.resolution, tol)
}
