//! Problem data model: piecewise SOS-convex objectives `min_k max_l g_l^k`,
//! generalized moment problems over a support set, and discrete measures.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::poly::Polynomial;
use crate::sos::{check_sos_convex, SosOutcome};
use crate::support::{ProjectedSpectrahedron, SupportError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("piece grid must be non-empty and rectangular")]
    BadGrid,
    #[error("all pieces must share the same number of variables")]
    MixedDimensions,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("piece g[k={k}][l={l}] is not certified SOS-convex")]
    NotSosConvex { k: usize, l: usize },
    #[error("support error: {0}")]
    Support(#[from] SupportError),
    #[error("unknown builder '{0}'")]
    UnknownBuilder(String),
}

/// Value of a piecewise function at a point, with active indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiecewiseValue {
    pub value: f64,
    /// Active outer (min) index k, 0-based, smallest on ties.
    pub argmin_k: usize,
    /// Active inner (max) index l within the active k, 0-based, smallest on ties.
    pub argmax_l: usize,
}

/// `f(v) = min_{k=1..r} max_{l=1..L} g_l^k(v)` with SOS-convex pieces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewiseSosConvex {
    #[serde(skip)]
    num_vars: usize,
    pieces: Vec<Vec<Polynomial>>,
}

impl PiecewiseSosConvex {
    /// `pieces[k][l] = g_l^k`; the grid must be rectangular and non-empty.
    pub fn new(pieces: Vec<Vec<Polynomial>>) -> Result<Self, ModelError> {
        if pieces.is_empty() || pieces[0].is_empty() {
            return Err(ModelError::BadGrid);
        }
        let l = pieces[0].len();
        if pieces.iter().any(|row| row.len() != l) {
            return Err(ModelError::BadGrid);
        }
        let m = pieces[0][0].num_vars();
        if pieces.iter().flatten().any(|g| g.num_vars() != m) {
            return Err(ModelError::MixedDimensions);
        }
        Ok(PiecewiseSosConvex {
            num_vars: m,
            pieces,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Number of outer (min) branches r.
    pub fn num_min(&self) -> usize {
        self.pieces.len()
    }

    /// Number of inner (max) branches L.
    pub fn num_max(&self) -> usize {
        self.pieces[0].len()
    }

    pub fn pieces(&self) -> &[Vec<Polynomial>] {
        &self.pieces
    }

    pub fn piece(&self, k: usize, l: usize) -> &Polynomial {
        &self.pieces[k][l]
    }

    pub fn degree(&self) -> u32 {
        self.pieces
            .iter()
            .flatten()
            .map(|g| g.degree())
            .max()
            .unwrap_or(0)
    }

    /// Exact min-max value with active indices; ties resolve to the smallest
    /// index.
    pub fn evaluate(&self, v: &[f64]) -> PiecewiseValue {
        assert_eq!(v.len(), self.num_vars, "point dimension mismatch");
        let mut best: Option<PiecewiseValue> = None;
        for (k, row) in self.pieces.iter().enumerate() {
            let mut row_val = f64::NEG_INFINITY;
            let mut row_l = 0;
            for (l, g) in row.iter().enumerate() {
                let val = g.eval(v);
                if val > row_val {
                    row_val = val;
                    row_l = l;
                }
            }
            if best.is_none_or(|b| row_val < b.value) {
                best = Some(PiecewiseValue {
                    value: row_val,
                    argmin_k: k,
                    argmax_l: row_l,
                });
            }
        }
        best.unwrap()
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        self.evaluate(v).value
    }

    /// Adds a constant to every piece (shifts the function by c).
    pub fn shift(&self, c: f64) -> PiecewiseSosConvex {
        let shifted = self
            .pieces
            .iter()
            .map(|row| {
                row.iter()
                    .map(|g| g.add(&Polynomial::constant(self.num_vars, c)))
                    .collect()
            })
            .collect();
        PiecewiseSosConvex::new(shifted).expect("shape preserved")
    }

    /// Certifies SOS-convexity of every piece; the first failing piece is
    /// reported by its grid position.
    pub fn validate_sos_convex(&self) -> Result<(), ModelError> {
        for (k, row) in self.pieces.iter().enumerate() {
            for (l, g) in row.iter().enumerate() {
                match check_sos_convex(g, 1e-8) {
                    SosOutcome::Certified(_) => {}
                    _ => return Err(ModelError::NotSosConvex { k, l }),
                }
            }
        }
        Ok(())
    }

    // --- catalog of standard representations ---

    /// `min(1, eps*|v|)` as a 2x2 grid.
    pub fn truncated_l1(eps: f64) -> Result<Self, ModelError> {
        if eps <= 0.0 {
            return Err(ModelError::BadParameter(format!("eps = {eps} must be > 0")));
        }
        let one = Polynomial::constant(1, 1.0);
        let v = Polynomial::var(1, 0);
        Self::new(vec![
            vec![one.clone(), one],
            vec![v.scale(eps), v.scale(-eps)],
        ])
    }

    /// `min_k (p_k . v + q_k)` as an r x 1 grid.
    pub fn piecewise_linear(p: &[Vec<f64>], q: &[f64]) -> Result<Self, ModelError> {
        if p.is_empty() || p.len() != q.len() {
            return Err(ModelError::BadParameter(
                "piecewise_linear needs matching non-empty p, q".into(),
            ));
        }
        let m = p[0].len();
        if m == 0 || p.iter().any(|pk| pk.len() != m) {
            return Err(ModelError::BadParameter("inconsistent p dimensions".into()));
        }
        let rows = p
            .iter()
            .zip(q)
            .map(|(pk, &qk)| vec![affine(pk, qk)])
            .collect();
        Self::new(rows)
    }

    /// `max_l g_l(v)` as a 1 x L grid.
    pub fn max_sos_convex(gs: Vec<Polynomial>) -> Result<Self, ModelError> {
        if gs.is_empty() {
            return Err(ModelError::BadParameter("max_sos_convex needs pieces".into()));
        }
        Self::new(vec![gs])
    }

    /// `max_l f_l(v) - max_k (p_k . v + q_k)` via `g_l^k = f_l - p_k.v - q_k`.
    pub fn dc_minmax(fs: Vec<Polynomial>, p: &[Vec<f64>], q: &[f64]) -> Result<Self, ModelError> {
        if fs.is_empty() || p.is_empty() || p.len() != q.len() {
            return Err(ModelError::BadParameter(
                "dc_minmax needs non-empty f and matching p, q".into(),
            ));
        }
        let m = fs[0].num_vars();
        if p.iter().any(|pk| pk.len() != m) {
            return Err(ModelError::BadParameter("p dimension != num_vars".into()));
        }
        let rows = p
            .iter()
            .zip(q)
            .map(|(pk, &qk)| {
                let aff = affine(pk, qk);
                fs.iter().map(|f| f.sub(&aff)).collect()
            })
            .collect();
        Self::new(rows)
    }

    /// `a(v-b)^2 + c` on `[0, b]`, constant `c` beyond, as a 2x2 grid.
    pub fn piecewise_quadratic(a: f64, b: f64, c: f64) -> Result<Self, ModelError> {
        if a < 0.0 || b < 0.0 {
            return Err(ModelError::BadParameter(format!(
                "piecewise_quadratic needs a, b >= 0, got a={a}, b={b}"
            )));
        }
        let v = Polynomial::var(1, 0);
        let vmb = v.sub(&Polynomial::constant(1, b));
        let quad = vmb.pow(2).scale(a).add(&Polynomial::constant(1, c));
        let tangent = affine(&[-a * b], a * b * b + c);
        let cc = Polynomial::constant(1, c);
        Self::new(vec![vec![quad.clone(), quad], vec![tangent, cc]])
    }

    /// `alpha(v-b)^2 + beta(v-b)^4 + c` on `[0, b]`, constant `c` beyond.
    pub fn quad_quartic(alpha: f64, beta: f64, b: f64, c: f64) -> Result<Self, ModelError> {
        if alpha < 0.0 || beta < 0.0 || b < 0.0 {
            return Err(ModelError::BadParameter(format!(
                "quad_quartic needs alpha, beta, b >= 0, got {alpha}, {beta}, {b}"
            )));
        }
        let v = Polynomial::var(1, 0);
        let vmb = v.sub(&Polynomial::constant(1, b));
        let poly = vmb
            .pow(2)
            .scale(alpha)
            .add(&vmb.pow(4).scale(beta))
            .add(&Polynomial::constant(1, c));
        let tangent = affine(
            &[-(alpha * b + beta * b.powi(3))],
            alpha * b * b + beta * b.powi(4) + c,
        );
        let cc = Polynomial::constant(1, c);
        Self::new(vec![vec![poly.clone(), poly], vec![tangent, cc]])
    }

    /// Huber loss with parameter eps, as a 2x4 grid.
    pub fn huber(eps: f64) -> Result<Self, ModelError> {
        if eps <= 0.0 {
            return Err(ModelError::BadParameter(format!("eps = {eps} must be > 0")));
        }
        let half_sq = Polynomial::var(1, 0).pow(2).scale(0.5);
        let row1 = vec![half_sq.clone(), half_sq.clone(), half_sq.clone(), half_sq];
        let row2 = vec![
            affine(&[eps], -0.5 * eps * eps),
            affine(&[-eps], -0.5 * eps * eps),
            affine(&[0.5 * eps], 0.0),
            affine(&[-0.5 * eps], 0.0),
        ];
        Self::new(vec![row1, row2])
    }
}

fn affine(p: &[f64], q: f64) -> Polynomial {
    let m = p.len();
    let mut f = Polynomial::constant(m, q);
    for (i, &pi) in p.iter().enumerate() {
        f = f.add(&Polynomial::var(m, i).scale(pi));
    }
    f
}

#[derive(Deserialize)]
struct BuilderJson {
    builder: String,
    params: serde_json::Value,
}

#[derive(Deserialize)]
struct PiecesJson {
    pieces: Vec<Vec<Polynomial>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PiecewiseJson {
    Builder(BuilderJson),
    Pieces(PiecesJson),
}

fn build_named(name: &str, params: serde_json::Value) -> Result<PiecewiseSosConvex, ModelError> {
    fn get<T: for<'a> Deserialize<'a>>(
        params: &serde_json::Value,
        key: &str,
    ) -> Result<T, ModelError> {
        params
            .get(key)
            .cloned()
            .ok_or_else(|| ModelError::BadParameter(format!("missing '{key}'")))
            .and_then(|v| {
                serde_json::from_value(v)
                    .map_err(|e| ModelError::BadParameter(format!("'{key}': {e}")))
            })
    }
    match name {
        "truncated_l1" => PiecewiseSosConvex::truncated_l1(get(&params, "epsilon")?),
        "huber" => PiecewiseSosConvex::huber(get(&params, "epsilon")?),
        "piecewise_quadratic" => PiecewiseSosConvex::piecewise_quadratic(
            get(&params, "a")?,
            get(&params, "b")?,
            get(&params, "c")?,
        ),
        "quad_quartic" => PiecewiseSosConvex::quad_quartic(
            get(&params, "alpha")?,
            get(&params, "beta")?,
            get(&params, "b")?,
            get(&params, "c")?,
        ),
        "piecewise_linear" => {
            let p: Vec<Vec<f64>> = get(&params, "p")?;
            let q: Vec<f64> = get(&params, "q")?;
            PiecewiseSosConvex::piecewise_linear(&p, &q)
        }
        "max_sos_convex" => PiecewiseSosConvex::max_sos_convex(get(&params, "pieces")?),
        "dc_minmax" => {
            let f: Vec<Polynomial> = get(&params, "f")?;
            let p: Vec<Vec<f64>> = get(&params, "p")?;
            let q: Vec<f64> = get(&params, "q")?;
            PiecewiseSosConvex::dc_minmax(f, &p, &q)
        }
        other => Err(ModelError::UnknownBuilder(other.to_string())),
    }
}

impl<'de> Deserialize<'de> for PiecewiseSosConvex {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        match PiecewiseJson::deserialize(de)? {
            PiecewiseJson::Builder(b) => build_named(&b.builder, b.params).map_err(D::Error::custom),
            PiecewiseJson::Pieces(p) => PiecewiseSosConvex::new(p.pieces).map_err(D::Error::custom),
        }
    }
}

/// One moment bound `E_mu[h] <= gamma`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub h: Polynomial,
    pub gamma: f64,
}

/// How much structural checking to run on problem ingestion.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Validation {
    None,
    /// Slater check on the support and an SOS-convexity certificate per piece.
    #[default]
    Strict,
}

/// The generalized moment problem: minimize the expectation of a piecewise
/// SOS-convex objective over probability measures on the support, subject to
/// moment bounds `E[h_j] <= gamma_j`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentProblem {
    pub objective: PiecewiseSosConvex,
    #[serde(default)]
    pub constraints: Vec<MomentConstraint>,
    pub support: ProjectedSpectrahedron,
}

impl MomentProblem {
    pub fn new(
        objective: PiecewiseSosConvex,
        constraints: Vec<MomentConstraint>,
        support: ProjectedSpectrahedron,
    ) -> Result<Self, ModelError> {
        let p = MomentProblem {
            objective,
            constraints,
            support,
        };
        p.validate(Validation::None)?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.support.dim()
    }

    pub fn validate(&self, level: Validation) -> Result<(), ModelError> {
        let m = self.support.dim();
        if self.objective.num_vars() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "objective has {} variables, support has {}",
                self.objective.num_vars(),
                m
            )));
        }
        for (j, c) in self.constraints.iter().enumerate() {
            if c.h.num_vars() != m {
                return Err(ModelError::DimensionMismatch(format!(
                    "constraint {j} has {} variables, support has {}",
                    c.h.num_vars(),
                    m
                )));
            }
        }
        if level == Validation::Strict {
            self.support.slater_point()?;
            self.objective.validate_sos_convex()?;
        }
        Ok(())
    }

    /// Max polynomial degree appearing in the problem data.
    pub fn degree(&self) -> u32 {
        self.objective
            .degree()
            .max(self.constraints.iter().map(|c| c.h.degree()).max().unwrap_or(0))
    }
}

/// Weighted Dirac atom.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub point: Vec<f64>,
}

/// Finite discrete measure `sum_k w_k * delta_{u_k}`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn dirac(point: Vec<f64>) -> Self {
        DiscreteMeasure {
            atoms: vec![Atom {
                weight: 1.0,
                point,
            }],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        self.atoms.iter().all(|a| a.weight > 0.0) && (self.total_mass() - 1.0).abs() <= tol
    }

    pub fn expectation(&self, f: &Polynomial) -> Result<f64, ModelError> {
        for a in &self.atoms {
            if a.point.len() != f.num_vars() {
                return Err(ModelError::DimensionMismatch(format!(
                    "atom dimension {} vs polynomial in {} variables",
                    a.point.len(),
                    f.num_vars()
                )));
            }
        }
        Ok(self.atoms.iter().map(|a| a.weight * f.eval(&a.point)).sum())
    }

    /// Expectation of a piecewise function (evaluated exactly per atom).
    pub fn expectation_piecewise(&self, g: &PiecewiseSosConvex) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * g.value(&a.point))
            .sum()
    }

    /// True iff every atom lies in the support within tolerance.
    pub fn supported_on(
        &self,
        omega: &ProjectedSpectrahedron,
        tol: f64,
    ) -> Result<bool, ModelError> {
        for a in &self.atoms {
            if !omega.membership(&a.point, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
