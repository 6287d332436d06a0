//! Brute-force verification oracle: discretize the support on a box grid,
//! filter by membership, and solve the resulting finite LP over discrete
//! measures. Independent of the SDP pipeline except for the conic solver.

use std::fmt::Write as _;

use crate::conic::{Cone, ConicProgram, SolveStatus};
use crate::model::{Atom, DiscreteMeasure, MomentProblem};
use crate::solver::{solve, SolveOptions, SolverError};
use crate::support::SupportError;

/// Hard cap on the number of grid points.
pub const MAX_GRID_POINTS: usize = 100_000;
/// Grid masses above this survive into the reported measure.
const MASS_FLOOR: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("grid needs at least 2 points per dimension, got {0}")]
    BadGrid(usize),
    #[error("grid of {0} points exceeds the cap of {MAX_GRID_POINTS}")]
    TooManyPoints(usize),
    #[error("support error: {0}")]
    Support(#[from] SupportError),
    #[error("solver error: {0}")]
    Solver(#[from] SolverError),
    #[error(
        "grid LP is infeasible: no discrete measure on the grid meets the \
         moment bounds; refine the grid or loosen the bounds"
    )]
    Infeasible,
    #[error("solver reached its numerical limit on the grid LP")]
    NumericalLimit,
}

/// Membership-filtered box grid over the support with cached evaluations.
#[derive(Clone, Debug)]
pub struct GridDiscretization {
    pub points: Vec<Vec<f64>>,
    /// Grid spacing per dimension.
    pub spacing: Vec<f64>,
    /// Piecewise objective value per point.
    pub objective_values: Vec<f64>,
    /// Bound polynomial values per point (outer index: point).
    pub constraint_values: Vec<Vec<f64>>,
}

/// Builds the grid: `n_grid` points per dimension across the bounding box,
/// keeping only points that pass the support membership test.
pub fn discretize(problem: &MomentProblem, n_grid: usize) -> Result<GridDiscretization, OracleError> {
    if n_grid < 2 {
        return Err(OracleError::BadGrid(n_grid));
    }
    let m = problem.num_vars();
    let total = n_grid.checked_pow(m as u32).unwrap_or(usize::MAX);
    if total > MAX_GRID_POINTS {
        return Err(OracleError::TooManyPoints(total));
    }
    let (lo, hi) = problem.support.bounding_box(0.0)?;
    let spacing: Vec<f64> = (0..m)
        .map(|i| (hi[i] - lo[i]) / (n_grid - 1) as f64)
        .collect();
    let mut points = Vec::new();
    let mut idx = vec![0usize; m];
    loop {
        let p: Vec<f64> = (0..m).map(|i| lo[i] + spacing[i] * idx[i] as f64).collect();
        if problem.support.membership(&p, 1e-9)? {
            points.push(p);
        }
        // odometer increment
        let mut dim = 0;
        loop {
            if dim == m {
                break;
            }
            idx[dim] += 1;
            if idx[dim] < n_grid {
                break;
            }
            idx[dim] = 0;
            dim += 1;
        }
        if dim == m {
            break;
        }
    }
    let objective_values = points.iter().map(|p| problem.objective.value(p)).collect();
    let constraint_values = points
        .iter()
        .map(|p| problem.constraints.iter().map(|c| c.h.eval(p)).collect())
        .collect();
    Ok(GridDiscretization {
        points,
        spacing,
        objective_values,
        constraint_values,
    })
}

/// Solves the grid LP `min sum_u p_u g(u)` subject to the moment bounds and
/// `sum p_u = 1`, returning the optimal value and the supporting measure.
pub fn oracle_value(
    problem: &MomentProblem,
    n_grid: usize,
) -> Result<(f64, DiscreteMeasure), OracleError> {
    let grid = discretize(problem, n_grid)?;
    oracle_value_on(problem, &grid)
}

/// Same as [`oracle_value`] on a prebuilt grid.
pub fn oracle_value_on(
    problem: &MomentProblem,
    grid: &GridDiscretization,
) -> Result<(f64, DiscreteMeasure), OracleError> {
    let n = grid.points.len();
    if n == 0 {
        return Err(OracleError::Infeasible);
    }
    let j = problem.constraints.len();
    let mut cp = ConicProgram::new();
    let p = cp.add_block("p", Cone::NonNeg(n));
    let slack = cp.add_block("slack", Cone::NonNeg(j));
    for (u, &g) in grid.objective_values.iter().enumerate() {
        cp.set_obj(p + u, g);
    }
    for (jj, c) in problem.constraints.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = grid
            .constraint_values
            .iter()
            .enumerate()
            .filter(|(_, hv)| hv[jj] != 0.0)
            .map(|(u, hv)| (p + u, hv[jj]))
            .collect();
        row.push((slack + jj, 1.0));
        cp.add_row(row, c.gamma);
    }
    cp.add_row((0..n).map(|u| (p + u, 1.0)).collect(), 1.0);
    let sol = solve(&cp, &SolveOptions::default())?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(OracleError::Infeasible),
        _ => return Err(OracleError::NumericalLimit),
    }
    let mut atoms: Vec<Atom> = (0..n)
        .filter(|&u| sol.x[p + u] > MASS_FLOOR)
        .map(|u| Atom {
            weight: sol.x[p + u],
            point: grid.points[u].clone(),
        })
        .collect();
    let mass: f64 = atoms.iter().map(|a| a.weight).sum();
    for a in &mut atoms {
        a.weight /= mass;
    }
    Ok((sol.obj_primal, DiscreteMeasure { atoms }))
}

/// One row of a grid refinement study.
#[derive(Clone, Copy, Debug)]
pub struct StudyRow {
    pub n_grid: usize,
    pub value: f64,
    /// `|value - reference|` against the supplied SDP value.
    pub abs_gap: f64,
}

/// Runs the oracle across a list of grid resolutions against a reference
/// value.
pub fn oracle_refinement_study(
    problem: &MomentProblem,
    grids: &[usize],
    reference: f64,
) -> Result<Vec<StudyRow>, OracleError> {
    grids
        .iter()
        .map(|&n_grid| {
            let (value, _) = oracle_value(problem, n_grid)?;
            Ok(StudyRow {
                n_grid,
                value,
                abs_gap: (value - reference).abs(),
            })
        })
        .collect()
}

/// Renders a refinement study as CSV.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut s = String::from("n_grid,value,abs_gap\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.12e},{:.12e}", r.n_grid, r.value, r.abs_gap);
    }
    s
}
