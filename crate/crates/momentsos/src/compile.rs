//! Compilation of generalized moment problems into an exact SDP pair: the
//! sum-of-squares program (over multipliers and Gram matrices) and the moment
//! program (over truncated moment vectors) that share the same optimal value.

use std::collections::BTreeMap;

use crate::conic::{svec, svec_len, Cone, ConicProgram, Solution};
use crate::model::{ModelError, MomentProblem, PiecewiseSosConvex};
use crate::poly::{GramBasis, MonomialBasis, MultiIndex, Polynomial};
use crate::sos::{check_sos_convex, SosOutcome};
use crate::support::ProjectedSpectrahedron;

/// Largest compiled relaxation degree; beyond this the dense Gram blocks are
/// no longer desk-scale.
pub const MAX_COMPILE_DEGREE: u32 = 16;

#[derive(Debug, thiserror::Error)]
pub enum CompileError {
    #[error("problem degree {0} exceeds the compile cap {MAX_COMPILE_DEGREE}")]
    DegreeOverflow(u32),
    #[error("objective is not certified SOS-convex")]
    NotSosConvex,
    #[error("model error: {0}")]
    Model(#[from] ModelError),
}

/// The compiled SDP pair.
///
/// `primal` is the SOS-side program: variables are the moment multipliers
/// `lambda` (non-negative, one per moment bound), a free constant multiplier,
/// and per outer branch `k` a simplex weight vector `delta{k}`, an LMI
/// multiplier `Z{k}`, and a Gram matrix `Q{k}`. It is posed as
/// `min sum_j lambda_j gamma_j + lambda_const`, so the optimal value of the
/// underlying maximization is the negated objective.
///
/// `dual` is the moment-side program: per branch a truncated moment vector
/// `y{k}`, lifting coefficients `xi{k}`, and an epigraph scalar `z{k}`, posed
/// as `min sum_k z{k}` directly.
#[derive(Clone, Debug)]
pub struct CompiledPair {
    problem: MomentProblem,
    degree: u32,
    basis: MonomialBasis,
    gram: GramBasis,
    primal: ConicProgram,
    dual: ConicProgram,
    alpha_rows: BTreeMap<(usize, MultiIndex), usize>,
}

/// Compiles a validated moment problem into its SDP pair.
///
/// The relaxation degree is the smallest even integer that is at least the
/// max degree over all pieces and moment polynomials (and at least 2, so the
/// moment vectors always carry first-order moments).
pub fn compile(problem: &MomentProblem) -> Result<CompiledPair, CompileError> {
    let m = problem.num_vars();
    let raw = problem.degree().max(1);
    let degree = raw + raw % 2;
    if degree > MAX_COMPILE_DEGREE {
        return Err(CompileError::DegreeOverflow(degree));
    }
    let basis = MonomialBasis::new(m, degree);
    let gram = GramBasis::new(m, degree).expect("degree is even");
    let omega = &problem.support;
    let nu = omega.side();
    let n_lift = omega.lifted_dim();
    let r = problem.objective.num_min();
    let l = problem.objective.num_max();
    let num_h = problem.constraints.len();
    let s_half = gram.basis().len();
    let s_full = basis.len();

    let f_svec: Vec<Vec<f64>> = omega.f_matrices().iter().map(svec).collect();
    let m_svec: Vec<Vec<f64>> = omega.m_matrices().iter().map(svec).collect();
    let b_svec: Vec<Vec<f64>> = basis
        .entries()
        .iter()
        .map(|a| svec(gram.matrix(a).expect("alpha within degree")))
        .collect();

    // SOS side: min sum_j lambda_j gamma_j + lambda_const.
    let mut primal = ConicProgram::new();
    let lam = primal.add_block("lambda", Cone::NonNeg(num_h));
    let lam_const = primal.add_block("lambda_const", Cone::Free(1));
    for (j, c) in problem.constraints.iter().enumerate() {
        primal.set_obj(lam + j, c.gamma);
    }
    primal.set_obj(lam_const, 1.0);

    let mut alpha_rows = BTreeMap::new();
    for k in 0..r {
        let delta = primal.add_block(format!("delta{k}"), Cone::NonNeg(l));
        let z = primal.add_block(format!("Z{k}"), Cone::Psd(nu));
        let q = primal.add_block(format!("Q{k}"), Cone::Psd(s_half));
        for (pos, alpha) in basis.entries().iter().enumerate() {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for ll in 0..l {
                let c = problem.objective.piece(k, ll).coeff(alpha);
                if c != 0.0 {
                    row.push((delta + ll, c));
                }
            }
            for (j, mc) in problem.constraints.iter().enumerate() {
                let c = mc.h.coeff(alpha);
                if c != 0.0 {
                    row.push((lam + j, c));
                }
            }
            if alpha.is_zero() {
                row.push((lam_const, 1.0));
            }
            if let Some(fa) = pencil_svec(&f_svec, alpha) {
                for (c, &val) in fa.iter().enumerate() {
                    if val != 0.0 {
                        row.push((z + c, -val));
                    }
                }
            }
            for (c, &val) in b_svec[pos].iter().enumerate() {
                if val != 0.0 {
                    row.push((q + c, -val));
                }
            }
            let idx = primal.add_row(row, 0.0);
            alpha_rows.insert((k, alpha.clone()), idx);
        }
        primal.add_row((0..l).map(|ll| (delta + ll, 1.0)).collect(), 1.0);
        for mv in &m_svec {
            let row = mv
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(c, &v)| (z + c, v))
                .collect();
            primal.add_row(row, 0.0);
        }
    }

    // Moment side: min sum_k z{k}.
    let mut dual = ConicProgram::new();
    let mut y_off = Vec::with_capacity(r);
    let mut xi_off = Vec::with_capacity(r);
    let mut z_off = Vec::with_capacity(r);
    for k in 0..r {
        y_off.push(dual.add_block(format!("y{k}"), Cone::Free(s_full)));
        xi_off.push(dual.add_block(format!("xi{k}"), Cone::Free(n_lift)));
        let zk = dual.add_block(format!("z{k}"), Cone::Free(1));
        dual.set_obj(zk, 1.0);
        z_off.push(zk);
    }
    let slack_h = dual.add_block("slack_h", Cone::NonNeg(num_h));
    let slack_z = dual.add_block("slack_z", Cone::NonNeg(r * l));

    for (j, mc) in problem.constraints.iter().enumerate() {
        let mut row = vec![(slack_h + j, 1.0)];
        for &yk in &y_off {
            for (pos, alpha) in basis.entries().iter().enumerate() {
                let c = mc.h.coeff(alpha);
                if c != 0.0 {
                    row.push((yk + pos, c));
                }
            }
        }
        dual.add_row(row, mc.gamma);
    }
    for k in 0..r {
        for ll in 0..l {
            let mut row = vec![(slack_z + k * l + ll, 1.0), (z_off[k], -1.0)];
            for (pos, alpha) in basis.entries().iter().enumerate() {
                let c = problem.objective.piece(k, ll).coeff(alpha);
                if c != 0.0 {
                    row.push((y_off[k] + pos, c));
                }
            }
            dual.add_row(row, 0.0);
        }
    }
    let zero_pos = basis
        .position(&MultiIndex::zero(m))
        .expect("constant monomial");
    dual.add_row((0..r).map(|k| (y_off[k] + zero_pos, 1.0)).collect(), 1.0);
    let unit_pos: Vec<usize> = (0..m)
        .map(|i| basis.position(&MultiIndex::unit(m, i)).expect("linear monomial"))
        .collect();
    for k in 0..r {
        let p = dual.add_block(format!("pencil{k}"), Cone::Psd(nu));
        for c in 0..svec_len(nu) {
            let mut row = vec![(p + c, 1.0)];
            if f_svec[0][c] != 0.0 {
                row.push((y_off[k] + zero_pos, -f_svec[0][c]));
            }
            for i in 0..m {
                if f_svec[i + 1][c] != 0.0 {
                    row.push((y_off[k] + unit_pos[i], -f_svec[i + 1][c]));
                }
            }
            for (t, mv) in m_svec.iter().enumerate() {
                if mv[c] != 0.0 {
                    row.push((xi_off[k] + t, -mv[c]));
                }
            }
            dual.add_row(row, 0.0);
        }
        let mm = dual.add_block(format!("moment{k}"), Cone::Psd(s_half));
        for c in 0..svec_len(s_half) {
            let mut row = vec![(mm + c, 1.0)];
            for (pos, bv) in b_svec.iter().enumerate() {
                if bv[c] != 0.0 {
                    row.push((y_off[k] + pos, -bv[c]));
                }
            }
            dual.add_row(row, 0.0);
        }
    }

    Ok(CompiledPair {
        problem: problem.clone(),
        degree,
        basis,
        gram,
        primal,
        dual,
        alpha_rows,
    })
}

/// The pencil coefficient matrix for a monomial: `F_0` for the constant,
/// `F_i` for `v_i`, and zero for every higher monomial.
fn pencil_svec<'a>(f_svec: &'a [Vec<f64>], alpha: &MultiIndex) -> Option<&'a Vec<f64>> {
    if alpha.is_zero() {
        Some(&f_svec[0])
    } else if alpha.degree() == 1 {
        let i = alpha
            .exponents()
            .iter()
            .position(|&e| e == 1)
            .expect("degree-one index");
        Some(&f_svec[i + 1])
    } else {
        None
    }
}

/// Compiles the polynomial optimization problem `min g(v) over Omega` as the
/// one-piece special case of the moment problem.
pub fn compile_poly_opt(
    g: &Polynomial,
    omega: &ProjectedSpectrahedron,
) -> Result<CompiledPair, CompileError> {
    match check_sos_convex(g, 1e-8) {
        SosOutcome::Certified(_) => {}
        _ => return Err(CompileError::NotSosConvex),
    }
    let objective = PiecewiseSosConvex::new(vec![vec![g.clone()]])?;
    let problem = MomentProblem::new(objective, vec![], omega.clone())?;
    compile(&problem)
}

impl CompiledPair {
    pub fn problem(&self) -> &MomentProblem {
        &self.problem
    }

    /// Relaxation degree d (even).
    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Monomial basis of degree d indexing the moment vectors `y{k}`.
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn gram(&self) -> &GramBasis {
        &self.gram
    }

    /// The SOS-side program.
    pub fn primal(&self) -> &ConicProgram {
        &self.primal
    }

    /// The moment-side program.
    pub fn dual(&self) -> &ConicProgram {
        &self.dual
    }

    /// Row index of the coefficient-matching constraint for branch `k` and
    /// monomial `alpha` in the SOS-side program.
    pub fn alpha_row(&self, k: usize, alpha: &MultiIndex) -> Option<usize> {
        self.alpha_rows.get(&(k, alpha.clone())).copied()
    }

    /// Shared optimal value read off a solved SOS-side program.
    pub fn value_primal(&self, sol: &Solution) -> f64 {
        -sol.obj_primal
    }

    /// Shared optimal value read off a solved moment-side program.
    pub fn value_dual(&self, sol: &Solution) -> f64 {
        sol.obj_primal
    }

    /// Moment vector of branch `k` from a moment-side variable vector.
    pub fn y_block<'a>(&self, k: usize, x: &'a [f64]) -> &'a [f64] {
        self.dual
            .block_values(&format!("y{k}"), x)
            .expect("y block exists")
    }

    /// Epigraph value of branch `k` from a moment-side variable vector.
    pub fn z_value(&self, k: usize, x: &[f64]) -> f64 {
        self.dual
            .block_values(&format!("z{k}"), x)
            .expect("z block exists")[0]
    }

    /// Multiplier vector lambda (without the free constant multiplier).
    pub fn lambda<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        self.primal
            .block_values("lambda", x)
            .expect("lambda block exists")
    }

    pub fn lambda_const(&self, x: &[f64]) -> f64 {
        self.primal
            .block_values("lambda_const", x)
            .expect("lambda_const block exists")[0]
    }

    /// The scalarized branch polynomial and its Gram representation at a
    /// SOS-side variable vector: `sum_l delta_l g_l^k + sum_j lambda_j h_j +
    /// lambda_const - tr(Z_k F_0) - sum_i v_i tr(Z_k F_i)` versus
    /// `y(v)' Q_k y(v)`. Feasible points make the two coincide.
    pub fn scalarization(&self, k: usize, x: &[f64]) -> (Polynomial, Polynomial) {
        let m = self.problem.num_vars();
        let delta = self
            .primal
            .block_values(&format!("delta{k}"), x)
            .expect("delta block exists");
        let lambda = self.lambda(x);
        let zk = self
            .primal
            .block_matrix(&format!("Z{k}"), x)
            .expect("Z block exists");
        let qk = self
            .primal
            .block_matrix(&format!("Q{k}"), x)
            .expect("Q block exists");
        let mut sigma = Polynomial::constant(m, self.lambda_const(x));
        for (ll, &dl) in delta.iter().enumerate() {
            sigma = sigma.add(&self.problem.objective.piece(k, ll).scale(dl));
        }
        for (j, &lj) in lambda.iter().enumerate() {
            sigma = sigma.add(&self.problem.constraints[j].h.scale(lj));
        }
        let f = self.problem.support.f_matrices();
        sigma = sigma.add(&Polynomial::constant(m, -(&zk * &f[0]).trace()));
        for i in 0..m {
            sigma = sigma.add(&Polynomial::var(m, i).scale(-(&zk * &f[i + 1]).trace()));
        }
        (sigma, self.gram.polynomial_of(&qk))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::SolveStatus;
    use crate::model::MomentConstraint;
    use crate::solver::{solve, SolveOptions};
    use proptest::prelude::*;

    fn newsvendor(x: f64, fourth_moment: bool) -> MomentProblem {
        let v = Polynomial::var(1, 0);
        let g = Polynomial::constant(1, x).sub(&v);
        let obj = PiecewiseSosConvex::new(vec![vec![g], vec![Polynomial::zero(1)]]).unwrap();
        let mut cons = vec![
            MomentConstraint { h: v.clone(), gamma: 1.0 },
            MomentConstraint { h: v.pow(2), gamma: 1.0 },
        ];
        if fourth_moment {
            cons.push(MomentConstraint { h: v.pow(4), gamma: 1.0 });
        }
        let omega = ProjectedSpectrahedron::interval(0.0, 100.0).unwrap();
        MomentProblem::new(obj, cons, omega).unwrap()
    }

    fn revenue() -> MomentProblem {
        let alpha = [1.0, 1.0, 0.1];
        let beta = [1.0, 1.0 / 16.0, 0.01];
        let b = [1.0, 2.0, 4.0];
        let c = [-5.0, -7.0, -7.5];
        let v = Polynomial::var(1, 0);
        let mut rows = Vec::new();
        for k in 0..3 {
            let vmb = v.sub(&Polynomial::constant(1, b[k]));
            let poly = vmb
                .pow(2)
                .scale(alpha[k])
                .add(&vmb.pow(4).scale(beta[k]))
                .add(&Polynomial::constant(1, c[k]));
            rows.push(vec![poly.clone(), poly]);
        }
        for k in 0..3 {
            let slope = -(alpha[k] * b[k] + beta[k] * b[k].powi(3));
            let inter = alpha[k] * b[k] * b[k] + beta[k] * b[k].powi(4) + c[k];
            let tangent = v.scale(slope).add(&Polynomial::constant(1, inter));
            rows.push(vec![tangent, Polynomial::constant(1, c[k])]);
        }
        let obj = PiecewiseSosConvex::new(rows).unwrap();
        let v = Polynomial::var(1, 0);
        let cons = vec![
            MomentConstraint { h: v.clone(), gamma: 2.0 },
            MomentConstraint { h: v.pow(2), gamma: 2.0 },
        ];
        let omega = ProjectedSpectrahedron::interval(0.0, 4.0).unwrap();
        MomentProblem::new(obj, cons, omega).unwrap()
    }

    fn solve_both(pair: &CompiledPair) -> (f64, f64) {
        let opts = SolveOptions::default();
        let sp = solve(pair.primal(), &opts).unwrap();
        let sd = solve(pair.dual(), &opts).unwrap();
        assert_eq!(sp.status, SolveStatus::Optimal, "sos side: {sp:?}");
        assert_eq!(sd.status, SolveStatus::Optimal, "moment side: {sd:?}");
        (pair.value_primal(&sp), pair.value_dual(&sd))
    }

    #[test]
    fn newsvendor_first_two_moments_structure_and_value() {
        let x = 1.5811;
        let pair = compile(&newsvendor(x, false)).unwrap();
        assert_eq!(pair.degree(), 2);
        let p = pair.primal();
        assert_eq!(p.block("lambda").unwrap().cone, Cone::NonNeg(2));
        assert_eq!(p.block("lambda_const").unwrap().cone, Cone::Free(1));
        for k in 0..2 {
            assert_eq!(p.block(&format!("delta{k}")).unwrap().cone, Cone::NonNeg(1));
            assert_eq!(p.block(&format!("Z{k}")).unwrap().cone, Cone::Psd(2));
            assert_eq!(p.block(&format!("Q{k}")).unwrap().cone, Cone::Psd(2));
        }
        // per branch: one coefficient row per monomial of degree <= 2 plus the
        // simplex row; no lifting rows for an interval
        assert_eq!(p.num_rows(), 2 * (3 + 1));

        let (vp, vd) = solve_both(&pair);
        assert!((vp - vd).abs() <= 1e-6, "{vp} vs {vd}");
        let cost = 0.1 * x - vp;
        assert!((cost - 0.3162).abs() <= 1e-3, "cost {cost}");
    }

    #[test]
    fn newsvendor_fourth_moment_trace_rows_and_value() {
        let x = 1.3337;
        let pair = compile(&newsvendor(x, true)).unwrap();
        assert_eq!(pair.degree(), 4);
        let p = pair.primal();
        // five coefficient rows per branch (monomials 1, v, v^2, v^3, v^4)
        for k in 0..2 {
            for e in 0..=4u32 {
                assert!(pair.alpha_row(k, &MultiIndex::new(vec![e])).is_some());
            }
        }
        assert_eq!(p.num_rows(), 2 * (5 + 1));
        assert_eq!(p.block("Q0").unwrap().cone, Cone::Psd(3));

        // row for alpha = v^2 in branch 0 carries only lambda_2 and the two
        // Gram blocks (F_alpha vanishes above degree one)
        let row = &p.rows()[pair.alpha_row(0, &MultiIndex::new(vec![2])).unwrap()];
        let lam = p.block("lambda").unwrap().offset;
        assert!(row.iter().any(|&(j, c)| j == lam + 1 && c == 1.0));
        let z0 = p.block("Z0").unwrap().range();
        assert!(row.iter().all(|&(j, _)| !z0.contains(&j)));

        let (vp, vd) = solve_both(&pair);
        assert!((vp - vd).abs() <= 1e-6, "{vp} vs {vd}");
        let cost = 0.1 * x - vp;
        assert!((cost - 0.1778).abs() <= 1e-3, "cost {cost}");
    }

    #[test]
    fn revenue_structure_and_value() {
        let pair = compile(&revenue()).unwrap();
        assert_eq!(pair.degree(), 4);
        let p = pair.primal();
        // six branches, each with five coefficient rows and a simplex row
        assert_eq!(p.num_rows(), 6 * (5 + 1));
        for k in 0..6 {
            assert_eq!(p.block(&format!("delta{k}")).unwrap().cone, Cone::NonNeg(2));
        }
        let (vp, vd) = solve_both(&pair);
        assert!((vp - vd).abs() <= 1e-6, "{vp} vs {vd}");
        // maximum expected revenue is the negated minimum
        assert!((-vd - 6.6495).abs() <= 2e-3, "revenue {}", -vd);
    }

    #[test]
    fn scalarization_identity_on_solutions() {
        for problem in [newsvendor(1.5811, false), newsvendor(1.3337, true), revenue()] {
            let pair = compile(&problem).unwrap();
            let sol = solve(pair.primal(), &SolveOptions::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            for k in 0..problem.objective.num_min() {
                let (sigma, gram_poly) = pair.scalarization(k, &sol.x);
                let resid = sigma.sub(&gram_poly).max_abs_coeff();
                let scale = 1.0 + sigma.max_abs_coeff();
                assert!(resid <= 1e-7 * scale, "k={k}: residual {resid}");
            }
        }
    }

    #[test]
    fn weak_duality_across_the_pair() {
        for problem in [newsvendor(2.5, false), revenue()] {
            let pair = compile(&problem).unwrap();
            let (vp, vd) = solve_both(&pair);
            assert!(vp <= vd + 1e-6, "{vp} > {vd}");
        }
    }

    #[test]
    fn poly_opt_examples() {
        let opts = SolveOptions::default();

        let v = Polynomial::var(1, 0);
        let omega = ProjectedSpectrahedron::interval(-1.0, 2.0).unwrap();
        let pair = compile_poly_opt(&v.pow(2), &omega).unwrap();
        let sol = solve(pair.dual(), &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(pair.value_dual(&sol).abs() <= 1e-6);
        let y = pair.y_block(0, &sol.x);
        assert!((y[1] / y[0]).abs() <= 1e-5, "minimizer {}", y[1] / y[0]);

        let g = v.sub(&Polynomial::constant(1, 3.0)).pow(2);
        let omega = ProjectedSpectrahedron::interval(0.0, 1.0).unwrap();
        let pair = compile_poly_opt(&g, &omega).unwrap();
        let sol = solve(pair.dual(), &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((pair.value_dual(&sol) - 4.0).abs() <= 1e-6);
        let y = pair.y_block(0, &sol.x);
        assert!((y[1] / y[0] - 1.0).abs() <= 1e-5);

        let g = Polynomial::var(2, 0)
            .pow(2)
            .add(&Polynomial::var(2, 1).pow(2))
            .sub(&Polynomial::var(2, 0));
        let omega = ProjectedSpectrahedron::ball(&[0.0, 0.0], 1.0).unwrap();
        let pair = compile_poly_opt(&g, &omega).unwrap();
        let sol = solve(pair.dual(), &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((pair.value_dual(&sol) + 0.25).abs() <= 1e-6);
        let y = pair.y_block(0, &sol.x);
        let u: Vec<f64> = vec![y[1] / y[0], y[2] / y[0]];
        assert!((u[0] - 0.5).abs() <= 1e-5 && u[1].abs() <= 1e-5, "{u:?}");
    }

    #[test]
    fn poly_opt_matches_general_compile() {
        let v = Polynomial::var(1, 0);
        let g = v.sub(&Polynomial::constant(1, 3.0)).pow(2);
        let omega = ProjectedSpectrahedron::interval(0.0, 1.0).unwrap();
        let special = compile_poly_opt(&g, &omega).unwrap();
        let obj = PiecewiseSosConvex::new(vec![vec![g]]).unwrap();
        let general = compile(&MomentProblem::new(obj, vec![], omega).unwrap()).unwrap();
        let opts = SolveOptions::default();
        let vs = special.value_dual(&solve(special.dual(), &opts).unwrap());
        let vg = general.value_dual(&solve(general.dual(), &opts).unwrap());
        assert!((vs - vg).abs() <= 1e-8, "{vs} vs {vg}");
    }

    #[test]
    fn rejects_non_sos_convex_poly_opt() {
        // -v^2 is concave
        let g = Polynomial::var(1, 0).pow(2).scale(-1.0);
        let omega = ProjectedSpectrahedron::interval(0.0, 1.0).unwrap();
        assert!(matches!(
            compile_poly_opt(&g, &omega),
            Err(CompileError::NotSosConvex)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn alpha_rows_encode_scalarization_coefficients(
            vals in proptest::collection::vec(-2.0f64..2.0, 40)
        ) {
            // arbitrary (not feasible) variable assignments must still make
            // each coefficient row evaluate to the matching coefficient of
            // sigma_k - y'Q_k y
            let pair = compile(&newsvendor(1.3337, true)).unwrap();
            let p = pair.primal();
            let n = p.num_vars();
            prop_assume!(vals.len() >= n);
            let x: Vec<f64> = vals[..n].to_vec();
            for k in 0..2 {
                let (sigma, gram_poly) = pair.scalarization(k, &x);
                let diff = sigma.sub(&gram_poly);
                for alpha in pair.basis().entries() {
                    let row = &p.rows()[pair.alpha_row(k, alpha).unwrap()];
                    let lhs: f64 = row.iter().map(|&(j, c)| c * x[j]).sum();
                    let rhs = diff.coeff(alpha);
                    prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()),
                        "k={k} alpha={alpha}: {lhs} vs {rhs}");
                }
            }
        }
    }
}
