//! Block-structured conic programs in the standard form
//! `min c'x  s.t.  Ax = b,  x in K`, where `K` is a product of free,
//! zero, non-negative, and PSD cone blocks.
//!
//! Symmetric matrix variables are stored in scaled upper-triangle
//! vectorization (`svec`, off-diagonals scaled by sqrt(2)) so that the dot
//! product of two stored vectors equals the trace inner product.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// One cone block of the variable vector.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Cone {
    /// Unconstrained block of the given length.
    Free(usize),
    /// Block pinned to zero.
    Zero(usize),
    /// Componentwise non-negative block.
    NonNeg(usize),
    /// Symmetric PSD matrix of the given side length, stored as svec.
    Psd(usize),
}

impl Cone {
    /// Number of scalar variables the block occupies.
    pub fn len(&self) -> usize {
        match *self {
            Cone::Free(n) | Cone::Zero(n) | Cone::NonNeg(n) => n,
            Cone::Psd(n) => svec_len(n),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Scaled vectorization of a symmetric matrix, upper triangle by columns.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut v = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                v.push(m[(i, j)]);
            } else {
                v.push(SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, j)] = v[k];
            } else {
                let x = v[k] / SQRT2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// Named range of variables, usually one cone block.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub cone: Cone,
    pub offset: usize,
}

impl VarBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.cone.len()
    }
}

/// Standard-form conic program `min c'x : Ax = b, x in K`.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    obj: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    blocks: Vec<VarBlock>,
    num_vars: usize,
}

impl ConicProgram {
    pub fn new() -> Self {
        ConicProgram {
            obj: Vec::new(),
            rows: Vec::new(),
            rhs: Vec::new(),
            blocks: Vec::new(),
            num_vars: 0,
        }
    }

    /// Appends a variable block and returns its offset.
    pub fn add_block(&mut self, name: impl Into<String>, cone: Cone) -> usize {
        let offset = self.num_vars;
        self.num_vars += cone.len();
        self.obj.resize(self.num_vars, 0.0);
        self.blocks.push(VarBlock {
            name: name.into(),
            cone,
            offset,
        });
        offset
    }

    pub fn set_obj(&mut self, var: usize, c: f64) {
        self.obj[var] = c;
    }

    /// Adds the equality row `sum coeffs = rhs`; returns the row index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars));
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn obj(&self) -> &[f64] {
        &self.obj
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Extracts a named block from a full variable vector.
    pub fn block_values<'a>(&self, name: &str, x: &'a [f64]) -> Option<&'a [f64]> {
        self.block(name).map(|b| &x[b.range()])
    }

    /// Extracts a named PSD block as a symmetric matrix.
    pub fn block_matrix(&self, name: &str, x: &[f64]) -> Option<DMatrix<f64>> {
        let b = self.block(name)?;
        match b.cone {
            Cone::Psd(n) => Some(smat(&x[b.range()], n)),
            _ => None,
        }
    }

    /// Objective value c'x.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Max violation of the equality rows at x.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| {
                (row.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

/// Solver outcome taxonomy.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// The equality-and-cone system has no solution (certified).
    Infeasible,
    /// The dual is infeasible, i.e. the primal objective is unbounded below.
    DualInfeasible,
    /// No conclusion within the iteration budget.
    NumericalLimit,
}

/// Result of a conic solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolveStatus,
    /// Primal variables (length = num_vars). For infeasible statuses this
    /// holds the relevant certificate direction.
    pub x: Vec<f64>,
    /// Dual multipliers of the equality rows.
    pub y: Vec<f64>,
    /// Dual slacks c - A'y.
    pub s: Vec<f64>,
    pub obj_primal: f64,
    pub obj_dual: f64,
    pub res_primal: f64,
    pub res_dual: f64,
    pub res_gap: f64,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_trace_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[2., 1., 0., 1., 3., -1., 0., -1., 1.]);
        let b = DMatrix::from_row_slice(3, 3, &[1., 0.5, 2., 0.5, 0., 1., 2., 1., 4.]);
        let dot: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((dot - (&a * &b).trace()).abs() < 1e-12);
    }

    #[test]
    fn svec_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[1., -2., -2., 5.]);
        assert_eq!(smat(&svec(&a), 2), a);
    }
}
