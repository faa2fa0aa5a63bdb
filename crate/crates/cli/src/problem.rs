//! Problem files: JSON with strict field checking.

use nalgebra::DMatrix;
use saddlecert::{Bilinear, ConvexTerm, Domain, Objective, QuadraticGame, QuadraticGameSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub objective: ObjectiveSpec,
    pub domain_x: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_y: Option<DomainSpec>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `xᵀMy + aᵀx + bᵀy + c`; missing `a`, `b`, `c` are zero.
    Bilinear {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
    /// `½yᵀSy − yᵀAx − g(x)`.
    Quadratic {
        #[serde(rename = "S")]
        s: Vec<Vec<f64>>,
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        g: PenaltyKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_coef: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Zero,
    Sumsq,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { dim: usize },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Grid resolution per axis for gap and verify.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Saddle verification tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<QuadraticOptions>,
    /// Midpoint samples for the convexity diagnostic; requires `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convexity_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    /// Allowed gap between the two sides of the equality and across the
    /// saddle chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_tol: Option<f64>,
}

impl ProblemFile {
    /// Parses and checks the cross-field rules serde cannot express.
    pub fn parse(text: &str) -> Result<Self, String> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.options.convexity_samples.is_some() && file.options.seed.is_none() {
            return Err("options.seed is required when options.convexity_samples is set".into());
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    pub fn objective(&self) -> Result<Objective, String> {
        match &self.objective {
            ObjectiveSpec::Bilinear { m, a, b, c } => {
                let m = matrix(m, "objective.M")?;
                let a = a.clone().unwrap_or_else(|| vec![0.0; m.nrows()]);
                let b = b.clone().unwrap_or_else(|| vec![0.0; m.ncols()]);
                Bilinear::new(m, a, b, *c).map(Objective::from).map_err(|e| format!("objective: {e}"))
            }
            ObjectiveSpec::Quadratic { .. } => self.quadratic_game().map(Objective::from),
        }
    }

    fn quadratic_game(&self) -> Result<QuadraticGame, String> {
        let ObjectiveSpec::Quadratic { s, a, g, g_coef } = &self.objective else {
            return Err("objective is not quadratic".into());
        };
        let s = matrix(s, "objective.S")?;
        let a = matrix(a, "objective.A")?;
        let term = match (g, g_coef) {
            (PenaltyKind::Zero, None) => ConvexTerm::Zero,
            (PenaltyKind::Sumsq, None) => ConvexTerm::SumSquares,
            (PenaltyKind::Linear, Some(c)) => ConvexTerm::Linear(c.clone()),
            (PenaltyKind::Linear, None) => return Err("objective.g_coef is required for g = \"linear\"".into()),
            (_, Some(_)) => return Err("objective.g_coef is only allowed for g = \"linear\"".into()),
        };
        QuadraticGame::new(s, a, term).map_err(|e| format!("objective: {e}"))
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.objective, ObjectiveSpec::Quadratic { .. })
    }

    pub fn domain_x(&self) -> Result<Domain, String> {
        self.domain_x.build().map_err(|e| format!("domain_x: {e}"))
    }

    pub fn domain_y(&self) -> Result<Domain, String> {
        match &self.domain_y {
            Some(d) => d.build().map_err(|e| format!("domain_y: {e}")),
            None => Err("domain_y is required for this command".into()),
        }
    }

    pub fn quadratic_spec(&self) -> Result<QuadraticGameSpec, String> {
        if self.domain_y.is_some() {
            return Err("domain_y must be omitted for quadratic games; y ranges over all of R^k".into());
        }
        QuadraticGameSpec::new(self.quadratic_game()?, self.domain_x()?).map_err(|e| format!("quadratic game: {e}"))
    }
}

impl DomainSpec {
    pub fn build(&self) -> saddlecert::Result<Domain> {
        match self {
            DomainSpec::Box { lower, upper } => Domain::cuboid(lower.clone(), upper.clone()),
            DomainSpec::Ball { center, radius } => Domain::ball(center.clone(), *radius),
            DomainSpec::Simplex { dim } => Domain::simplex(*dim),
            DomainSpec::Points { points } => Domain::points(points.clone()),
        }
    }
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(format!("{field}: matrix must be nonempty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!("{field}: row {i} has {} entries, expected {ncols}", rows[i].len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}
