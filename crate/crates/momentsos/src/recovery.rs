//! Extraction of an optimal discrete measure from a solved moment-side
//! program: active branches become weighted Dirac atoms at the normalized
//! first-order moments, and the result is re-validated against the original
//! problem rather than assumed correct.

use serde::{Deserialize, Serialize};

use crate::compile::CompiledPair;
use crate::conic::{Solution, SolveStatus};
use crate::model::{Atom, DiscreteMeasure, ModelError};
use crate::poly::{GramBasis, MonomialBasis, MultiIndex, Polynomial};
use crate::support::SupportError;

/// Default threshold on the zeroth moment for a branch to yield an atom.
pub const DEFAULT_ATOM_THRESHOLD: f64 = 1e-6;
/// Branch masses above this but below the atom threshold are logged.
const NEAR_ATOM_FLOOR: f64 = 1e-9;
/// Slack tolerance for the dropped-branch sign conditions.
const SIGN_TOL: f64 = 1e-7;
/// Tolerance for feasibility slacks and the objective match.
const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RecoveryError {
    #[error("moment program was not solved to optimality (status {0:?})")]
    NotOptimal(SolveStatus),
    #[error("no branch carries mass above the threshold {0}")]
    NoAtoms(f64),
    #[error("polynomial degree {0} exceeds the moment vector degree {1}")]
    DegreeTooHigh(u32, u32),
    #[error("moment matrix is not PSD (min eigenvalue {0})")]
    MomentMatrixNotPsd(f64),
    #[error("moment vector must be normalized (y_0 = {0})")]
    NotNormalized(f64),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("support error: {0}")]
    Support(#[from] SupportError),
}

/// Sign-condition outcome for one branch dropped from the measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignCondition {
    pub k: usize,
    /// Epigraph value of the branch.
    pub z_value: f64,
    /// Smallest moment-row value over the bound polynomials.
    pub min_moment_row: f64,
    pub holds: bool,
}

/// Everything recovered from a moment-side solution, with every certificate
/// condition checked explicitly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub measure: DiscreteMeasure,
    /// Branch indices contributing atoms.
    pub active: Vec<usize>,
    /// Branch indices with mass above the logging floor but below the
    /// atom threshold.
    pub near_atoms: Vec<usize>,
    /// Sign conditions for the dropped branches.
    pub sign_conditions: Vec<SignCondition>,
    /// Per-bound slack `E[h_j] - gamma_j` of the recovered measure.
    pub feasibility_slacks: Vec<f64>,
    /// Expectation of the piecewise objective under the recovered measure.
    pub objective: f64,
    /// Optimal value of the moment program.
    pub sdp_value: f64,
    /// `|sum of active masses - 1|` before renormalization.
    pub mass_deviation: f64,
    /// True atom-by-atom support membership.
    pub atoms_in_support: bool,
    pub certified: bool,
}

/// Recovers a discrete measure from a solved moment-side program.
///
/// Branches with zeroth moment above `eps0` contribute an atom at their
/// normalized first-order moments; the masses are renormalized to sum to one.
/// The report is certified only when the dropped-branch sign conditions hold,
/// every atom lies in the support, the moment bounds are met, and the measure
/// reproduces the SDP value.
pub fn recover(
    pair: &CompiledPair,
    sol: &Solution,
    eps0: f64,
) -> Result<RecoveryReport, RecoveryError> {
    if sol.status != SolveStatus::Optimal {
        return Err(RecoveryError::NotOptimal(sol.status));
    }
    let problem = pair.problem();
    let m = problem.num_vars();
    let basis = pair.basis();
    let zero_pos = basis.position(&MultiIndex::zero(m)).expect("constant");
    let unit_pos: Vec<usize> = (0..m)
        .map(|i| basis.position(&MultiIndex::unit(m, i)).expect("linear"))
        .collect();
    let r = problem.objective.num_min();

    let mut active = Vec::new();
    let mut near_atoms = Vec::new();
    let mut atoms = Vec::new();
    let mut mass = 0.0;
    for k in 0..r {
        let y = pair.y_block(k, &sol.x);
        let y0 = y[zero_pos];
        if y0 > eps0 {
            active.push(k);
            mass += y0;
            atoms.push(Atom {
                weight: y0,
                point: unit_pos.iter().map(|&p| y[p] / y0).collect(),
            });
        } else if y0 > NEAR_ATOM_FLOOR {
            near_atoms.push(k);
        }
    }
    if atoms.is_empty() {
        return Err(RecoveryError::NoAtoms(eps0));
    }
    let mass_deviation = (mass - 1.0).abs();
    for a in &mut atoms {
        a.weight /= mass;
    }
    let measure = DiscreteMeasure { atoms };

    let mut sign_conditions = Vec::new();
    let mut signs_hold = true;
    // solver noise grows with the objective magnitude
    let sign_tol = SIGN_TOL * (1.0 + sol.obj_primal.abs());
    for k in 0..r {
        if active.contains(&k) {
            continue;
        }
        let y = pair.y_block(k, &sol.x);
        let z_value = pair.z_value(k, &sol.x);
        let min_moment_row = problem
            .constraints
            .iter()
            .map(|c| moment_functional(basis, y, &c.h).expect("degree fits"))
            .fold(f64::INFINITY, f64::min);
        let holds = z_value >= -sign_tol
            && (problem.constraints.is_empty() || min_moment_row >= -sign_tol);
        signs_hold &= holds;
        sign_conditions.push(SignCondition {
            k,
            z_value,
            min_moment_row: if problem.constraints.is_empty() {
                0.0
            } else {
                min_moment_row
            },
            holds,
        });
    }

    let feasibility_slacks: Vec<f64> = problem
        .constraints
        .iter()
        .map(|c| measure.expectation(&c.h).map(|e| e - c.gamma))
        .collect::<Result<_, _>>()?;
    let objective = measure.expectation_piecewise(&problem.objective);
    let sdp_value = pair.value_dual(sol);
    let atoms_in_support = measure.supported_on(&problem.support, FEAS_TOL)?;

    let certified = signs_hold
        && atoms_in_support
        && feasibility_slacks.iter().all(|&s| s <= FEAS_TOL)
        && (objective - sdp_value).abs() <= FEAS_TOL * (1.0 + sdp_value.abs());

    Ok(RecoveryReport {
        measure,
        active,
        near_atoms,
        sign_conditions,
        feasibility_slacks,
        objective,
        sdp_value,
        mass_deviation,
        atoms_in_support,
        certified,
    })
}

/// Pseudo-expectation `L_y(f) = sum_alpha f_alpha y_alpha`.
fn moment_functional(
    basis: &MonomialBasis,
    y: &[f64],
    f: &Polynomial,
) -> Result<f64, RecoveryError> {
    let mut acc = 0.0;
    for (alpha, c) in f.terms() {
        let pos = basis
            .position(alpha)
            .ok_or_else(|| RecoveryError::DegreeTooHigh(f.degree(), basis.half_degree()))?;
        acc += c * y[pos];
    }
    Ok(acc)
}

/// Result of a generalized Jensen inequality check.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JensenCheck {
    /// Pseudo-expectation `L_y(f)`.
    pub lhs: f64,
    /// `f` at the first-order moments `f(L_y(v))`.
    pub rhs: f64,
    /// `lhs - rhs`; non-negative for SOS-convex `f` and PSD moment vectors.
    pub gap: f64,
}

/// Checks `L_y(f) >= f(L_y(v))` for a normalized pseudo-moment vector `y`
/// indexed by the degree-`degree` monomial basis in `m` variables.
///
/// Inputs are rejected unless `y_0 = 1` (within `tol`) and the moment matrix
/// `sum_alpha y_alpha B_alpha` is PSD down to `-tol`.
pub fn jensen_check(
    y: &[f64],
    m: usize,
    degree: u32,
    f: &Polynomial,
    tol: f64,
) -> Result<JensenCheck, RecoveryError> {
    let basis = MonomialBasis::new(m, degree);
    assert_eq!(y.len(), basis.len(), "moment vector length mismatch");
    let zero_pos = basis.position(&MultiIndex::zero(m)).expect("constant");
    if (y[zero_pos] - 1.0).abs() > tol {
        return Err(RecoveryError::NotNormalized(y[zero_pos]));
    }
    let gram = GramBasis::new(m, degree + degree % 2).expect("even degree");
    let s = gram.basis().len();
    let mut moment = nalgebra::DMatrix::zeros(s, s);
    for (pos, alpha) in basis.entries().iter().enumerate() {
        if let Some(b) = gram.matrix(alpha) {
            moment += b * y[pos];
        }
    }
    // entries of the moment matrix beyond the vector's degree are unknown;
    // restrict to the principal block indexed by monomials of half degree
    let half = MonomialBasis::new(m, degree / 2);
    let keep = half.len();
    let principal = moment.view((0, 0), (keep, keep)).into_owned();
    let min_eig = principal
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -tol {
        return Err(RecoveryError::MomentMatrixNotPsd(min_eig));
    }
    let lhs = moment_functional(&basis, y, f)?;
    let mean: Vec<f64> = (0..m)
        .map(|i| y[basis.position(&MultiIndex::unit(m, i)).expect("linear")])
        .collect();
    let rhs = f.eval(&mean);
    Ok(JensenCheck {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}

/// True iff the recovered objective matches the SOS-side optimal value,
/// realizing strong duality numerically.
pub fn validate_against_primal(report: &RecoveryReport, primal_value: f64, tol: f64) -> bool {
    (report.objective - primal_value).abs() <= tol * (1.0 + primal_value.abs())
}
