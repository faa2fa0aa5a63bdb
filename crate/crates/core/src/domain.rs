//! Compact strategy sets in ℝ^d.
//!
//! A [`Domain`] is one of four shapes: an axis-aligned box, a Euclidean
//! ball, the standard probability simplex, or a finite point set. The first
//! three are convex; the point set exists for small counterexamples where
//! convexity fails, and every operation that needs convexity rejects it.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist, norm};

/// Shape and parameters of a [`Domain`].
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x ∈ ℝ^dim : x ≥ 0, Σx = 1}`
    Simplex {
        dim: usize,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

/// A validated compact set. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
}

/// Deterministic quadrature rule on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub resolution: usize,
    /// Upper bound on the distance from any domain point to its nearest
    /// node, when one is known in closed form.
    pub covering_radius: Option<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Compensated sum of the weights.
    pub fn total_weight(&self) -> f64 {
        let mut sum = 0.0_f64;
        let mut comp = 0.0_f64;
        for &w in &self.weights {
            let t = sum + w;
            if sum.abs() >= w.abs() {
                comp += (sum - t) + w;
            } else {
                comp += (w - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

impl Domain {
    /// Axis-aligned box `[lower, upper]`. Requires `lower[i] < upper[i]`.
    pub fn cuboid(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("box must have dimension ≥ 1".into()));
        }
        check_dim(lower.len(), upper.len())?;
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidDomain(format!("box axis {i} needs finite lower < upper, got [{lo}, {hi}]")));
            }
        }
        Ok(Domain { kind: DomainKind::Box { lower, upper } })
    }

    /// Box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::cuboid(vec![lo; dim], vec![hi; dim])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidDomain("ball must have dimension ≥ 1".into()));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("ball center must be finite".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Domain { kind: DomainKind::Ball { center, radius } })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDomain("simplex must have dimension ≥ 1".into()));
        }
        Ok(Domain { kind: DomainKind::Simplex { dim } })
    }

    pub fn points(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidDomain("point set must be nonempty".into()));
        };
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidDomain("points must have dimension ≥ 1".into()));
        }
        for p in &points {
            check_dim(d, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDomain("points must be finite".into()));
            }
        }
        Ok(Domain { kind: DomainKind::Points { points } })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            DomainKind::Box { .. } => "box",
            DomainKind::Ball { .. } => "ball",
            DomainKind::Simplex { .. } => "simplex",
            DomainKind::Points { .. } => "points",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::Box { lower, .. } => lower.len(),
            DomainKind::Ball { center, .. } => center.len(),
            DomainKind::Simplex { dim } => *dim,
            DomainKind::Points { points } => points[0].len(),
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, DomainKind::Points { .. })
    }

    pub(crate) fn require_convex(&self) -> Result<()> {
        if self.is_convex() {
            Ok(())
        } else {
            Err(Error::UnsupportedDomain(self.name()))
        }
    }

    /// Membership up to `tol` in each defining inequality.
    pub fn contains(&self, point: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), point.len())?;
        if tol.is_nan() || tol < 0.0 {
            return Err(Error::InvalidInput(format!("membership tolerance must be ≥ 0, got {tol}")));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Ok(false);
        }
        Ok(match &self.kind {
            DomainKind::Box { lower, upper } => {
                point.iter().zip(lower.iter().zip(upper)).all(|(p, (lo, hi))| *p >= lo - tol && *p <= hi + tol)
            }
            DomainKind::Ball { center, radius } => dist(point, center) <= radius + tol,
            DomainKind::Simplex { .. } => {
                point.iter().all(|&p| p >= -tol) && (point.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            DomainKind::Points { points } => {
                points.iter().any(|q| q.iter().zip(point).all(|(a, b)| (a - b).abs() <= tol))
            }
        })
    }

    /// Euclidean projection onto a convex domain. Members come back unchanged
    /// and the map is idempotent bit-for-bit.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), point.len())?;
        match &self.kind {
            DomainKind::Box { lower, upper } => {
                Ok(point.iter().zip(lower.iter().zip(upper)).map(|(p, (lo, hi))| p.clamp(*lo, *hi)).collect())
            }
            DomainKind::Ball { center, radius } => Ok(project_ball(point, center, *radius)),
            DomainKind::Simplex { .. } => Ok(project_simplex(point)),
            DomainKind::Points { .. } => Err(Error::UnsupportedDomain(self.name())),
        }
    }

    /// Tensor-product midpoint rule.
    ///
    /// Boxes get the plain rule. Balls use the rule on the bounding box and
    /// drop nodes outside the ball; weights are the full cell volume and are
    /// not renormalized. The simplex rule lives in the affine hull, using the
    /// first `dim − 1` coordinates as chart, and drops cells whose midpoint
    /// leaves the simplex. Point sets weight every point by one.
    pub fn quadrature(&self, resolution: usize) -> Result<QuadratureGrid> {
        if resolution < 1 {
            return Err(Error::InvalidInput("quadrature resolution must be ≥ 1".into()));
        }
        let grid = match &self.kind {
            DomainKind::Box { lower, upper } => {
                let nodes = midpoint_nodes(lower, upper, resolution);
                let cell: f64 = lower.iter().zip(upper).map(|(lo, hi)| (hi - lo) / resolution as f64).product();
                let half_diag = 0.5
                    * lower
                        .iter()
                        .zip(upper)
                        .map(|(lo, hi)| ((hi - lo) / resolution as f64).powi(2))
                        .sum::<f64>()
                        .sqrt();
                QuadratureGrid { weights: vec![cell; nodes.len()], nodes, resolution, covering_radius: Some(half_diag) }
            }
            DomainKind::Ball { center, radius } => {
                let d = center.len();
                let lower: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let upper: Vec<f64> = center.iter().map(|c| c + radius).collect();
                let side = 2.0 * radius / resolution as f64;
                let nodes: Vec<Vec<f64>> = midpoint_nodes(&lower, &upper, resolution)
                    .into_iter()
                    .filter(|n| dist(n, center) <= *radius)
                    .collect();
                if nodes.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "resolution {resolution} leaves no quadrature node inside the ball"
                    )));
                }
                let diag = side * (d as f64).sqrt();
                // shift a point inward by one cell diagonal; its cell midpoint
                // is then inside the ball and within 1.5 diagonals of the point
                let covering = (diag <= 2.0 * radius).then_some(1.5 * diag);
                QuadratureGrid {
                    weights: vec![side.powi(d as i32); nodes.len()],
                    nodes,
                    resolution,
                    covering_radius: covering,
                }
            }
            DomainKind::Simplex { dim } => simplex_quadrature(*dim, resolution),
            DomainKind::Points { points } => QuadratureGrid {
                nodes: points.clone(),
                weights: vec![1.0; points.len()],
                resolution,
                covering_radius: Some(0.0),
            },
        };
        Ok(grid)
    }

    /// `max ‖x‖` over the domain, exactly.
    pub fn bounding_norm(&self) -> f64 {
        match &self.kind {
            DomainKind::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(lo, hi)| (lo * lo).max(hi * hi)).sum::<f64>().sqrt()
            }
            DomainKind::Ball { center, radius } => norm(center) + radius,
            DomainKind::Simplex { .. } => 1.0,
            DomainKind::Points { points } => points.iter().map(|p| norm(p)).fold(0.0, f64::max),
        }
    }

    /// Extreme points that a linear function can attain its optimum at.
    ///
    /// Box vertices (up to 12 dimensions), simplex vertices and the
    /// `center ± r·eᵢ` poles of a ball. Empty for point sets, whose members
    /// already make up their quadrature grid.
    pub fn extreme_points(&self) -> Vec<Vec<f64>> {
        match &self.kind {
            DomainKind::Box { lower, upper } => {
                let d = lower.len();
                if d > 12 {
                    return Vec::new();
                }
                (0..(1usize << d))
                    .map(|mask| {
                        (0..d).map(|i| if mask >> (d - 1 - i) & 1 == 1 { upper[i] } else { lower[i] }).collect()
                    })
                    .collect()
            }
            DomainKind::Ball { center, radius } => {
                let mut out = Vec::with_capacity(2 * center.len());
                for i in 0..center.len() {
                    for sign in [-1.0, 1.0] {
                        let mut p = center.clone();
                        p[i] += sign * radius;
                        out.push(p);
                    }
                }
                out
            }
            DomainKind::Simplex { dim } => (0..*dim)
                .map(|i| {
                    let mut e = vec![0.0; *dim];
                    e[i] = 1.0;
                    e
                })
                .collect(),
            DomainKind::Points { .. } => Vec::new(),
        }
    }

    /// Nodes used for sup/inf evaluation: the quadrature nodes followed by
    /// the extreme points.
    pub fn evaluation_nodes(&self, resolution: usize) -> Result<Vec<Vec<f64>>> {
        let mut nodes = self.quadrature(resolution)?.nodes;
        nodes.extend(self.extreme_points());
        Ok(nodes)
    }

    /// Draws a point uniformly from the domain (uniformly over members for
    /// point sets).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            DomainKind::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
            }
            DomainKind::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = loop {
                    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                    let n = norm(&g);
                    if n > 1e-12 {
                        break g.into_iter().map(|v| v / n).collect();
                    }
                };
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                center.iter().zip(&dir).map(|(c, u)| c + r * u).collect()
            }
            DomainKind::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
            DomainKind::Points { points } => points[rng.random_range(0..points.len())].clone(),
        }
    }
}

/// Row-major midpoint nodes (first axis slowest). Coordinates are computed
/// as `lo + (2i+1)·(hi−lo)/(2r)` so symmetric boxes with odd `r` hit the
/// center exactly.
fn midpoint_nodes(lower: &[f64], upper: &[f64], resolution: usize) -> Vec<Vec<f64>> {
    let d = lower.len();
    let axes: Vec<Vec<f64>> = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| {
            (0..resolution).map(|i| lo + ((2 * i + 1) as f64 * (hi - lo)) / (2 * resolution) as f64).collect()
        })
        .collect();
    let total = resolution.pow(d as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        nodes.push(idx.iter().enumerate().map(|(a, &i)| axes[a][i]).collect());
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < resolution {
                break;
            }
            idx[a] = 0;
        }
    }
    nodes
}

fn simplex_quadrature(dim: usize, resolution: usize) -> QuadratureGrid {
    if dim == 1 {
        return QuadratureGrid { nodes: vec![vec![1.0]], weights: vec![1.0], resolution, covering_radius: Some(0.0) };
    }
    let m = dim - 1;
    let chart = midpoint_nodes(&vec![0.0; m], &vec![1.0; m], resolution);
    let weight = (1.0 / resolution as f64).powi(m as i32);
    let nodes: Vec<Vec<f64>> = chart
        .into_iter()
        .filter_map(|z| {
            let s: f64 = z.iter().sum();
            (s <= 1.0 + 1e-12).then(|| {
                let mut x = z;
                x.push((1.0 - s).max(0.0));
                x
            })
        })
        .collect();
    QuadratureGrid { weights: vec![weight; nodes.len()], nodes, resolution, covering_radius: None }
}

fn project_ball(point: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let r = dist(point, center);
    if r <= radius {
        return point.to_vec();
    }
    let scale = radius / r;
    let mut q: Vec<f64> = point.iter().zip(center).map(|(p, c)| c + (p - c) * scale).collect();
    // rounding can leave q a hair outside; pull it in so projection is idempotent
    let mut shrink = f64::EPSILON;
    while dist(&q, center) > radius {
        for (qi, c) in q.iter_mut().zip(center) {
            *qi = c + (*qi - c) * (1.0 - shrink);
        }
        shrink *= 2.0;
    }
    q
}

fn project_simplex(point: &[f64]) -> Vec<f64> {
    let n = point.len();
    let member_tol = 4.0 * n as f64 * f64::EPSILON;
    if point.iter().all(|&p| p >= 0.0) && (point.iter().sum::<f64>() - 1.0).abs() <= member_tol {
        return point.to_vec();
    }
    let mut sorted = point.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    point.iter().map(|&p| (p - theta).max(0.0)).collect()
}
