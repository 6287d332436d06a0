//! Projected-spectrahedron support sets.
//!
//! The support of the unknown measure is
//! `Omega = { v : exists xi, F_0 + sum_i v_i F_i + sum_t xi_t M_t >= 0 }`,
//! which covers intervals, boxes, ellipsoids, and lifted (shadow) sets.

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::conic::{svec, Cone, ConicProgram, SolveStatus};
use crate::solver::{solve, SolveOptions, SolverError};

const SLATER_MIN_MARGIN: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum SupportError {
    #[error("interval requires lo < hi, got [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no Slater point: the set has empty interior or is empty")]
    NoSlaterPoint,
    #[error("interior margin is unbounded; the set data is degenerate")]
    UnboundedMargin,
    #[error("support not compact in coordinate {0}")]
    NotCompact(usize),
    #[error("solver failed: {0}")]
    Solver(#[from] SolverError),
    #[error("solver reached its numerical limit while probing the support")]
    NumericalLimit,
}

/// Interior point of the lifted LMI set, with its PSD margin.
#[derive(Clone, Debug)]
pub struct SlaterPoint {
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub margin: f64,
}

/// Support set `{ v : exists xi, F_0 + sum v_i F_i + sum xi_t M_t >= 0 }`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedSpectrahedron {
    dim: usize,
    nu: usize,
    /// `F[0] = F_0`, `F[i] = F_i` for the i-th coordinate of v.
    f: Vec<DMatrix<f64>>,
    /// Lifting matrices M_t; empty for a plain spectrahedron.
    m: Vec<DMatrix<f64>>,
}

impl ProjectedSpectrahedron {
    pub fn new(
        dim: usize,
        f: Vec<DMatrix<f64>>,
        m: Vec<DMatrix<f64>>,
    ) -> Result<Self, SupportError> {
        if f.len() != dim + 1 {
            return Err(SupportError::DimensionMismatch(format!(
                "expected {} F matrices, got {}",
                dim + 1,
                f.len()
            )));
        }
        let nu = f[0].nrows();
        for mat in f.iter().chain(m.iter()) {
            if mat.nrows() != nu || mat.ncols() != nu {
                return Err(SupportError::DimensionMismatch(format!(
                    "all matrices must be {nu}x{nu}"
                )));
            }
            if (mat - mat.transpose()).amax() > 1e-12 {
                return Err(SupportError::DimensionMismatch(
                    "matrices must be symmetric".into(),
                ));
            }
        }
        Ok(ProjectedSpectrahedron { dim, nu, f, m })
    }

    /// `[lo, hi]` on the line, via `diag(v - lo, hi - v) >= 0`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, SupportError> {
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(SupportError::BadInterval(lo, hi));
        }
        let f0 = DMatrix::from_diagonal(&DVector::from_vec(vec![-lo, hi]));
        let f1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        Self::new(1, vec![f0, f1], vec![])
    }

    /// Axis-aligned box, block-diagonal assembly of interval blocks.
    pub fn cuboid(los: &[f64], his: &[f64]) -> Result<Self, SupportError> {
        if los.len() != his.len() || los.is_empty() {
            return Err(SupportError::DimensionMismatch(
                "box bounds must have equal positive length".into(),
            ));
        }
        let m = los.len();
        for (&lo, &hi) in los.iter().zip(his) {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(SupportError::BadInterval(lo, hi));
            }
        }
        let nu = 2 * m;
        let mut f = vec![DMatrix::zeros(nu, nu); m + 1];
        for i in 0..m {
            f[0][(2 * i, 2 * i)] = -los[i];
            f[0][(2 * i + 1, 2 * i + 1)] = his[i];
            f[i + 1][(2 * i, 2 * i)] = 1.0;
            f[i + 1][(2 * i + 1, 2 * i + 1)] = -1.0;
        }
        Self::new(m, f, vec![])
    }

    /// Ellipsoid `{ v : |A v + b| <= 1 }` via the Schur-complement LMI
    /// `[[I, Av + b], [(Av + b)', 1]] >= 0`.
    pub fn ellipsoid(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self, SupportError> {
        if a.nrows() != b.len() || a.ncols() == 0 {
            return Err(SupportError::DimensionMismatch(
                "ellipsoid needs A with rows matching b".into(),
            ));
        }
        let k = a.nrows();
        let m = a.ncols();
        let nu = k + 1;
        let mut f0 = DMatrix::zeros(nu, nu);
        for i in 0..k {
            f0[(i, i)] = 1.0;
            f0[(i, k)] = b[i];
            f0[(k, i)] = b[i];
        }
        f0[(k, k)] = 1.0;
        let mut f = vec![f0];
        for j in 0..m {
            let mut fi = DMatrix::zeros(nu, nu);
            for i in 0..k {
                fi[(i, k)] = a[(i, j)];
                fi[(k, i)] = a[(i, j)];
            }
            f.push(fi);
        }
        Self::new(m, f, vec![])
    }

    /// Euclidean ball of the given center and radius.
    pub fn ball(center: &[f64], radius: f64) -> Result<Self, SupportError> {
        if radius <= 0.0 {
            return Err(SupportError::BadInterval(0.0, radius));
        }
        let m = center.len();
        let a = DMatrix::identity(m, m) / radius;
        let b = -DVector::from_column_slice(center) / radius;
        Self::ellipsoid(&a, &b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lifted_dim(&self) -> usize {
        self.m.len()
    }

    pub fn side(&self) -> usize {
        self.nu
    }

    pub fn f_matrices(&self) -> &[DMatrix<f64>] {
        &self.f
    }

    pub fn m_matrices(&self) -> &[DMatrix<f64>] {
        &self.m
    }

    /// `F_0 + sum v_i F_i` (no lifting part).
    pub fn pencil_at(&self, v: &[f64]) -> DMatrix<f64> {
        let mut acc = self.f[0].clone();
        for (i, &vi) in v.iter().enumerate() {
            acc += &self.f[i + 1] * vi;
        }
        acc
    }

    /// True iff some lifting xi makes the pencil `>= -tol * I`.
    pub fn membership(&self, v: &[f64], tol: f64) -> Result<bool, SupportError> {
        if v.len() != self.dim {
            return Err(SupportError::DimensionMismatch(format!(
                "point has dimension {}, support has {}",
                v.len(),
                self.dim
            )));
        }
        let pencil = self.pencil_at(v);
        if self.m.is_empty() {
            let eig = pencil.symmetric_eigen();
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            return Ok(min >= -tol);
        }
        // max t s.t. pencil + sum xi_t M_t - t I >= 0, capped at t <= 1
        let mut cp = ConicProgram::new();
        let t = cp.add_block("t", Cone::Free(1));
        let xi = cp.add_block("xi", Cone::Free(self.m.len()));
        let s = cp.add_block("S", Cone::Psd(self.nu));
        let cap = cp.add_block("cap", Cone::NonNeg(1));
        cp.set_obj(t, -1.0);
        let rhs = svec(&pencil);
        let id = svec(&DMatrix::identity(self.nu, self.nu));
        let msv: Vec<Vec<f64>> = self.m.iter().map(svec).collect();
        for k in 0..rhs.len() {
            let mut row = vec![(s + k, 1.0), (t, id[k])];
            for (tt, mv) in msv.iter().enumerate() {
                row.push((xi + tt, -mv[k]));
            }
            cp.add_row(row, rhs[k]);
        }
        cp.add_row(vec![(t, 1.0), (cap, 1.0)], 1.0);
        let sol = solve(&cp, &SolveOptions::default())?;
        match sol.status {
            SolveStatus::Optimal => Ok(sol.x[t] >= -tol),
            SolveStatus::Infeasible => Ok(false),
            _ => Err(SupportError::NumericalLimit),
        }
    }

    /// Searches for a strictly interior point of the lifted LMI.
    pub fn slater_point(&self) -> Result<SlaterPoint, SupportError> {
        // max t s.t. F_0 + sum v_i F_i + sum xi_t M_t - t I >= 0
        let mut cp = ConicProgram::new();
        let t = cp.add_block("t", Cone::Free(1));
        let v = cp.add_block("v", Cone::Free(self.dim));
        let xi = cp.add_block("xi", Cone::Free(self.m.len()));
        let s = cp.add_block("S", Cone::Psd(self.nu));
        cp.set_obj(t, -1.0);
        let rhs = svec(&self.f[0]);
        let id = svec(&DMatrix::identity(self.nu, self.nu));
        let fsv: Vec<Vec<f64>> = self.f[1..].iter().map(svec).collect();
        let msv: Vec<Vec<f64>> = self.m.iter().map(svec).collect();
        for k in 0..rhs.len() {
            let mut row = vec![(s + k, 1.0), (t, id[k])];
            for (i, fv) in fsv.iter().enumerate() {
                row.push((v + i, -fv[k]));
            }
            for (tt, mv) in msv.iter().enumerate() {
                row.push((xi + tt, -mv[k]));
            }
            cp.add_row(row, rhs[k]);
        }
        let sol = solve(&cp, &SolveOptions::default())?;
        match sol.status {
            SolveStatus::Optimal => {
                let margin = sol.x[t];
                if margin > SLATER_MIN_MARGIN {
                    Ok(SlaterPoint {
                        v: sol.x[v..v + self.dim].to_vec(),
                        xi: sol.x[xi..xi + self.m.len()].to_vec(),
                        margin,
                    })
                } else {
                    Err(SupportError::NoSlaterPoint)
                }
            }
            SolveStatus::DualInfeasible => Err(SupportError::UnboundedMargin),
            SolveStatus::Infeasible => Err(SupportError::NoSlaterPoint),
            SolveStatus::NumericalLimit => Err(SupportError::NumericalLimit),
        }
    }

    /// Componentwise extent of the set, widened by `margin` on each side.
    pub fn bounding_box(&self, margin: f64) -> Result<(Vec<f64>, Vec<f64>), SupportError> {
        let mut lo = Vec::with_capacity(self.dim);
        let mut hi = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            lo.push(self.extreme_coordinate(i, 1.0)? - margin);
            hi.push(self.extreme_coordinate(i, -1.0)? + margin);
        }
        Ok((lo, hi))
    }

    /// Optimizes `sign * v_i` over the lifted LMI (sign=1: min, sign=-1: max,
    /// returning the coordinate value either way).
    fn extreme_coordinate(&self, i: usize, sign: f64) -> Result<f64, SupportError> {
        let mut cp = ConicProgram::new();
        let v = cp.add_block("v", Cone::Free(self.dim));
        let xi = cp.add_block("xi", Cone::Free(self.m.len()));
        let s = cp.add_block("S", Cone::Psd(self.nu));
        cp.set_obj(v + i, sign);
        let rhs = svec(&self.f[0]);
        let fsv: Vec<Vec<f64>> = self.f[1..].iter().map(svec).collect();
        let msv: Vec<Vec<f64>> = self.m.iter().map(svec).collect();
        for k in 0..rhs.len() {
            let mut row = vec![(s + k, 1.0)];
            for (j, fv) in fsv.iter().enumerate() {
                row.push((v + j, -fv[k]));
            }
            for (tt, mv) in msv.iter().enumerate() {
                row.push((xi + tt, -mv[k]));
            }
            cp.add_row(row, rhs[k]);
        }
        let sol = solve(&cp, &SolveOptions::default())?;
        match sol.status {
            SolveStatus::Optimal => Ok(sol.x[v + i]),
            SolveStatus::DualInfeasible => Err(SupportError::NotCompact(i)),
            SolveStatus::Infeasible => Err(SupportError::NoSlaterPoint),
            SolveStatus::NumericalLimit => Err(SupportError::NumericalLimit),
        }
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn matrix_from_rows(data: &[f64], nu: usize) -> Result<DMatrix<f64>, String> {
    if data.len() != nu * nu {
        return Err(format!("matrix needs {} entries, got {}", nu * nu, data.len()));
    }
    Ok(DMatrix::from_row_slice(nu, nu, data))
}

#[derive(Serialize, Deserialize)]
struct RawOmega {
    m: usize,
    nu: usize,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "M", default)]
    lift: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
enum NamedOmega {
    #[serde(rename = "interval")]
    Interval([f64; 2]),
    #[serde(rename = "box")]
    Box { lo: Vec<f64>, hi: Vec<f64> },
    #[serde(rename = "ball")]
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OmegaJson {
    Named(NamedOmega),
    Raw(RawOmega),
}

impl Serialize for ProjectedSpectrahedron {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        RawOmega {
            m: self.dim,
            nu: self.nu,
            f: self.f.iter().map(matrix_rows).collect(),
            lift: self.m.iter().map(matrix_rows).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ProjectedSpectrahedron {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let parsed = OmegaJson::deserialize(de)?;
        let built = match parsed {
            OmegaJson::Named(NamedOmega::Interval([lo, hi])) => Self::interval(lo, hi),
            OmegaJson::Named(NamedOmega::Box { lo, hi }) => Self::cuboid(&lo, &hi),
            OmegaJson::Named(NamedOmega::Ball { center, radius }) => Self::ball(&center, radius),
            OmegaJson::Raw(raw) => {
                let f = raw
                    .f
                    .iter()
                    .map(|d| matrix_from_rows(d, raw.nu))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(D::Error::custom)?;
                let lift = raw
                    .lift
                    .iter()
                    .map(|d| matrix_from_rows(d, raw.nu))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(D::Error::custom)?;
                Self::new(raw.m, f, lift)
            }
        };
        built.map_err(D::Error::custom)
    }
}
