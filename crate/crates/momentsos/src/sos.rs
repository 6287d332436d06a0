//! SOS membership, SOS-convexity, and non-negativity certificates for
//! piecewise SOS-convex functions over a projected spectrahedron.
//!
//! The non-negativity certificate for `min_k max_l g_l^k >= 0` on Omega asks,
//! for each k, for a PSD multiplier Z_k annihilating the lifting matrices,
//! simplex weights delta^k, and an SOS residual
//! `sigma_k = sum_l delta_l^k g_l^k - tr(Z_k F_0) - sum_i v_i tr(Z_k F_i)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{svec, Cone, ConicProgram, SolveStatus};
use crate::model::PiecewiseSosConvex;
use crate::poly::{GramBasis, MonomialBasis, Polynomial};
use crate::solver::{solve, SolveOptions};
use crate::support::ProjectedSpectrahedron;

/// Default tolerance on the minimum eigenvalue of certificate matrices.
pub const TOL_PSD: f64 = 1e-8;
/// Default tolerance on certificate residual coefficients.
pub const TOL_RES: f64 = 1e-7;

/// Why a certificate was not produced.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum NotCertifiedReason {
    /// Odd total degree can never be SOS.
    OddDegree,
    /// The certificate SDP is infeasible (certified by the solver).
    Infeasible,
    /// The solver stopped without a conclusion.
    NumericalFailure,
}

/// Gram-matrix witness that a polynomial equals y(v)' Q y(v) with Q PSD.
#[derive(Clone, Debug)]
pub struct SosCertificate {
    num_vars: usize,
    half_degree: u32,
    gram: DMatrix<f64>,
}

impl SosCertificate {
    pub fn new(num_vars: usize, half_degree: u32, gram: DMatrix<f64>) -> Self {
        let s = MonomialBasis::new(num_vars, half_degree).len();
        assert_eq!(gram.nrows(), s);
        assert_eq!(gram.ncols(), s);
        SosCertificate {
            num_vars,
            half_degree,
            gram,
        }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn basis(&self) -> MonomialBasis {
        MonomialBasis::new(self.num_vars, self.half_degree)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.gram.nrows() == 0 {
            return 0.0;
        }
        self.gram
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// The polynomial y(v)' Q y(v) this certificate represents.
    pub fn represented_polynomial(&self) -> Polynomial {
        let gb = GramBasis::new(self.num_vars, 2 * self.half_degree)
            .expect("even degree by construction");
        gb.polynomial_of(&self.gram)
    }

    /// Independent re-check: Q is PSD up to `tol_psd` and represents `f` up
    /// to coefficient residual `tol_res` (relative to the coefficient scale).
    pub fn verify(&self, f: &Polynomial, tol_psd: f64, tol_res: f64) -> bool {
        if f.num_vars() != self.num_vars {
            return false;
        }
        if self.min_eigenvalue() < -tol_psd {
            return false;
        }
        let residual = f.sub(&self.represented_polynomial());
        residual.max_abs_coeff() <= tol_res * (1.0 + f.max_abs_coeff())
    }
}

#[derive(Serialize, Deserialize)]
struct SosCertificateJson {
    m: usize,
    half_degree: u32,
    gram: Vec<f64>,
}

impl Serialize for SosCertificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let n = self.gram.nrows();
        let mut gram = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                gram.push(self.gram[(i, j)]);
            }
        }
        SosCertificateJson {
            m: self.num_vars,
            half_degree: self.half_degree,
            gram,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SosCertificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = SosCertificateJson::deserialize(d)?;
        let s = MonomialBasis::new(raw.m, raw.half_degree).len();
        if raw.gram.len() != s * s {
            return Err(serde::de::Error::custom(format!(
                "gram needs {} entries, got {}",
                s * s,
                raw.gram.len()
            )));
        }
        Ok(SosCertificate {
            num_vars: raw.m,
            half_degree: raw.half_degree,
            gram: DMatrix::from_row_slice(s, s, &raw.gram),
        })
    }
}

/// Result of an SOS certification attempt.
#[derive(Clone, Debug)]
pub enum SosOutcome {
    Certified(SosCertificate),
    NotCertified(NotCertifiedReason),
}

impl SosOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, SosOutcome::Certified(_))
    }

    pub fn certificate(&self) -> Option<&SosCertificate> {
        match self {
            SosOutcome::Certified(c) => Some(c),
            SosOutcome::NotCertified(_) => None,
        }
    }
}

/// Decides SOS membership of `f` by a feasibility SDP over the Gram matrix.
pub fn check_sos(f: &Polynomial, tol: f64) -> SosOutcome {
    let m = f.num_vars();
    if f.is_zero() {
        return SosOutcome::Certified(SosCertificate::new(m, 0, DMatrix::zeros(1, 1)));
    }
    let deg = f.degree();
    if !deg.is_multiple_of(2) {
        return SosOutcome::NotCertified(NotCertifiedReason::OddDegree);
    }
    let gb = match GramBasis::new(m, deg) {
        Ok(gb) => gb,
        Err(_) => return SosOutcome::NotCertified(NotCertifiedReason::OddDegree),
    };
    let s = gb.basis().len();
    let mut cp = ConicProgram::new();
    let q = cp.add_block("Q", Cone::Psd(s));
    // min tr(Q) picks a well-posed representative among feasible Grams
    let id = svec(&DMatrix::identity(s, s));
    for (k, v) in id.iter().enumerate() {
        cp.set_obj(q + k, *v);
    }
    for (alpha, b) in gb.matrices() {
        let bsv = svec(b);
        let row = bsv
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 0.0)
            .map(|(k, &v)| (q + k, v))
            .collect();
        cp.add_row(row, f.coeff(alpha));
    }
    let sol = match solve(&cp, &SolveOptions { tol: tol.min(1e-8), ..Default::default() }) {
        Ok(sol) => sol,
        Err(_) => return SosOutcome::NotCertified(NotCertifiedReason::NumericalFailure),
    };
    match sol.status {
        // a NumericalLimit iterate may still carry a valid Gram (these
        // feasibility SDPs often lack a primal interior, which stalls the
        // embedding); acceptance rests on the independent verify
        SolveStatus::Optimal | SolveStatus::NumericalLimit => {
            let gram = cp.block_matrix("Q", &sol.x).expect("Q block");
            let cert = SosCertificate::new(m, deg / 2, gram);
            if cert.verify(f, TOL_PSD.max(tol), TOL_RES.max(tol)) {
                SosOutcome::Certified(cert)
            } else {
                SosOutcome::NotCertified(NotCertifiedReason::NumericalFailure)
            }
        }
        SolveStatus::Infeasible => SosOutcome::NotCertified(NotCertifiedReason::Infeasible),
        _ => SosOutcome::NotCertified(NotCertifiedReason::NumericalFailure),
    }
}

/// The convexity gap `g(v1, v2) = f(v1) - f(v2) - grad f(v2) . (v1 - v2)`
/// over 2m variables; f is SOS-convex iff g is SOS.
pub fn convexity_gap(f: &Polynomial) -> Polynomial {
    let m = f.num_vars();
    let map1: Vec<usize> = (0..m).collect();
    let map2: Vec<usize> = (m..2 * m).collect();
    let f1 = f.embed(2 * m, &map1);
    let f2 = f.embed(2 * m, &map2);
    let mut g = f1.sub(&f2);
    for (i, fi) in f.gradient().iter().enumerate() {
        let grad2 = fi.embed(2 * m, &map2);
        let diff = Polynomial::var(2 * m, i).sub(&Polynomial::var(2 * m, m + i));
        g = g.sub(&grad2.mul(&diff));
    }
    g
}

/// Certifies SOS-convexity of `f` via SOS membership of its convexity gap.
pub fn check_sos_convex(f: &Polynomial, tol: f64) -> SosOutcome {
    check_sos(&convexity_gap(f), tol)
}

/// One per-k block of a piecewise non-negativity certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceCertificate {
    /// PSD multiplier against the support pencil, row-major.
    pub z: Vec<f64>,
    /// Simplex weights over the inner max branches.
    pub delta: Vec<f64>,
    pub sigma: SosCertificate,
}

impl PieceCertificate {
    pub fn z_matrix(&self, nu: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(nu, nu, &self.z)
    }
}

/// Certificate that `min_k max_l g_l^k >= 0` on the support.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiecewiseNonnegCertificate {
    pub per_k: Vec<PieceCertificate>,
    /// Even certificate degree used for the SOS residuals.
    pub degree: u32,
}

/// Outcome of [`certify_piecewise_nonneg`].
#[derive(Clone, Debug)]
pub enum CertifyOutcome {
    Certified(PiecewiseNonnegCertificate),
    NotCertified {
        /// First outer branch whose certificate SDP failed (0-based).
        k: usize,
        reason: NotCertifiedReason,
        /// Point in Omega with a negative min-max value, when one was found.
        witness: Option<Witness>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
}

impl CertifyOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertifyOutcome::Certified(_))
    }
}

/// Smallest even integer >= max(function degree, 1).
pub fn certificate_degree(g: &PiecewiseSosConvex) -> u32 {
    let d = g.degree().max(1);
    if d.is_multiple_of(2) {
        d
    } else {
        d + 1
    }
}

/// Certifies non-negativity of the piecewise function on Omega at the
/// default certificate degree.
pub fn certify_piecewise_nonneg(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    tol: f64,
) -> CertifyOutcome {
    certify_piecewise_nonneg_with_degree(g, omega, tol, certificate_degree(g))
}

/// As [`certify_piecewise_nonneg`] with an explicit even certificate degree
/// (callers may bump the default by 2 to search a larger Gram basis).
pub fn certify_piecewise_nonneg_with_degree(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    tol: f64,
    degree: u32,
) -> CertifyOutcome {
    assert_eq!(g.num_vars(), omega.dim(), "dimension mismatch");
    assert_eq!(degree % 2, 0, "certificate degree must be even");
    assert!(degree >= certificate_degree(g), "degree too small for the pieces");
    let mut per_k = Vec::with_capacity(g.num_min());
    for k in 0..g.num_min() {
        match certify_branch(g, omega, tol, degree, k) {
            Ok(cert) => per_k.push(cert),
            Err(reason) => {
                let witness = if reason == NotCertifiedReason::Infeasible {
                    search_witness(g, omega)
                } else {
                    None
                };
                return CertifyOutcome::NotCertified { k, reason, witness };
            }
        }
    }
    CertifyOutcome::Certified(PiecewiseNonnegCertificate { per_k, degree })
}

fn certify_branch(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    tol: f64,
    degree: u32,
    k: usize,
) -> Result<PieceCertificate, NotCertifiedReason> {
    let m = g.num_vars();
    let big_l = g.num_max();
    let nu = omega.side();
    let gb = GramBasis::new(m, degree).expect("even degree");
    let s = gb.basis().len();

    let mut cp = ConicProgram::new();
    let z = cp.add_block("Z", Cone::Psd(nu));
    let delta = cp.add_block("delta", Cone::NonNeg(big_l));
    let q = cp.add_block("Q", Cone::Psd(s));

    // min tr(Z) + tr(Q) keeps the feasibility problem well posed
    let id_nu = svec(&DMatrix::identity(nu, nu));
    for (i, v) in id_nu.iter().enumerate() {
        cp.set_obj(z + i, *v);
    }
    let id_s = svec(&DMatrix::identity(s, s));
    for (i, v) in id_s.iter().enumerate() {
        cp.set_obj(q + i, *v);
    }

    let fsv: Vec<Vec<f64>> = omega.f_matrices().iter().map(svec).collect();
    for (alpha, b) in gb.matrices() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for l in 0..big_l {
            let c = g.piece(k, l).coeff(alpha);
            if c != 0.0 {
                row.push((delta + l, c));
            }
        }
        // -tr(Z F_0) at alpha = 0 and -tr(Z F_i) at alpha = e_i
        let f_idx = if alpha.is_zero() {
            Some(0)
        } else if alpha.degree() == 1 {
            alpha.exponents().iter().position(|&e| e == 1).map(|i| i + 1)
        } else {
            None
        };
        if let Some(fi) = f_idx {
            for (i, v) in fsv[fi].iter().enumerate() {
                if *v != 0.0 {
                    row.push((z + i, -v));
                }
            }
        }
        let bsv = svec(b);
        for (i, v) in bsv.iter().enumerate() {
            if *v != 0.0 {
                row.push((q + i, -v));
            }
        }
        cp.add_row(row, 0.0);
    }
    cp.add_row((0..big_l).map(|l| (delta + l, 1.0)).collect(), 1.0);
    for mt in omega.m_matrices() {
        let msv = svec(mt);
        let row = msv
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 0.0)
            .map(|(i, &v)| (z + i, v))
            .collect();
        cp.add_row(row, 0.0);
    }

    let sol = solve(&cp, &SolveOptions { tol: tol.min(1e-8), ..Default::default() })
        .map_err(|_| NotCertifiedReason::NumericalFailure)?;
    match sol.status {
        // acceptance rests on the independent residual check below, so a
        // stalled-but-feasible iterate is as good as an Optimal one
        SolveStatus::Optimal | SolveStatus::NumericalLimit => {
            let zm = cp.block_matrix("Z", &sol.x).expect("Z block");
            let gram = cp.block_matrix("Q", &sol.x).expect("Q block");
            let delta_vals = cp.block_values("delta", &sol.x).expect("delta block").to_vec();
            let mut zflat = Vec::with_capacity(nu * nu);
            for i in 0..nu {
                for j in 0..nu {
                    zflat.push(zm[(i, j)]);
                }
            }
            let cert = PieceCertificate {
                z: zflat,
                delta: delta_vals,
                sigma: SosCertificate::new(m, degree / 2, gram),
            };
            match verify_branch(g, omega, k, &cert, TOL_PSD.max(tol), TOL_RES.max(tol)) {
                Ok(()) => Ok(cert),
                Err(_) => Err(NotCertifiedReason::NumericalFailure),
            }
        }
        SolveStatus::Infeasible => Err(NotCertifiedReason::Infeasible),
        _ => Err(NotCertifiedReason::NumericalFailure),
    }
}

/// The residual polynomial a piece certificate must represent:
/// `sum_l delta_l g_l^k - tr(Z F_0) - sum_i v_i tr(Z F_i)`.
pub fn branch_residual(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    k: usize,
    cert: &PieceCertificate,
) -> Polynomial {
    let m = g.num_vars();
    let nu = omega.side();
    let zm = cert.z_matrix(nu);
    let mut sigma = Polynomial::zero(m);
    for (l, &dl) in cert.delta.iter().enumerate() {
        sigma = sigma.add(&g.piece(k, l).scale(dl));
    }
    let f = omega.f_matrices();
    sigma = sigma.sub(&Polynomial::constant(m, (&zm * &f[0]).trace()));
    for i in 0..m {
        sigma = sigma.sub(&Polynomial::var(m, i).scale((&zm * &f[i + 1]).trace()));
    }
    sigma
}

/// Independent verification of a serialized certificate, without re-solving.
pub fn verify_piecewise_certificate(
    cert: &PiecewiseNonnegCertificate,
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    tol_psd: f64,
    tol_res: f64,
) -> Result<(), String> {
    if cert.per_k.len() != g.num_min() {
        return Err(format!(
            "certificate covers {} branches, function has {}",
            cert.per_k.len(),
            g.num_min()
        ));
    }
    for (k, pc) in cert.per_k.iter().enumerate() {
        verify_branch(g, omega, k, pc, tol_psd, tol_res)?;
    }
    Ok(())
}

fn verify_branch(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    k: usize,
    pc: &PieceCertificate,
    tol_psd: f64,
    tol_res: f64,
) -> Result<(), String> {
    let nu = omega.side();
    if pc.delta.len() != g.num_max() {
        return Err(format!("branch {k}: delta has wrong length"));
    }
    let sum: f64 = pc.delta.iter().sum();
    if (sum - 1.0).abs() > tol_res || pc.delta.iter().any(|&d| d < -tol_psd) {
        return Err(format!("branch {k}: delta is not in the simplex"));
    }
    if pc.z.len() != nu * nu {
        return Err(format!("branch {k}: Z has wrong size"));
    }
    let zm = pc.z_matrix(nu);
    let min_eig = zm
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -tol_psd {
        return Err(format!("branch {k}: Z has eigenvalue {min_eig}"));
    }
    for (t, mt) in omega.m_matrices().iter().enumerate() {
        let tr = (&zm * mt).trace();
        if tr.abs() > tol_res * (1.0 + zm.amax()) {
            return Err(format!("branch {k}: tr(Z M_{t}) = {tr}"));
        }
    }
    let sigma = branch_residual(g, omega, k, pc);
    if !pc.sigma.verify(&sigma, tol_psd, tol_res) {
        return Err(format!("branch {k}: SOS residual check failed"));
    }
    Ok(())
}

const WITNESS_STARTS: usize = 64;
const WITNESS_ITERS: usize = 200;

/// Default RNG seed for [`search_witness`].
pub const WITNESS_SEED: u64 = 0x5eed_c0de;

/// Seeded multi-start projected descent of `min_k max_l g_l^k` over Omega;
/// returns the best negative point found, if any. A falsification aid only.
pub fn search_witness(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
) -> Option<Witness> {
    search_witness_with_seed(g, omega, WITNESS_SEED)
}

/// As [`search_witness`] with an explicit RNG seed.
pub fn search_witness_with_seed(
    g: &PiecewiseSosConvex,
    omega: &ProjectedSpectrahedron,
    seed: u64,
) -> Option<Witness> {
    let (lo, hi) = omega.bounding_box(0.0).ok()?;
    let m = g.num_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Witness> = None;
    let mut consider = |point: &[f64], value: f64| {
        if value < best.as_ref().map_or(0.0, |w| w.value) {
            best = Some(Witness {
                point: point.to_vec(),
                value,
            });
        }
    };
    for _ in 0..WITNESS_STARTS {
        let mut v: Vec<f64> = (0..m).map(|i| rng.gen_range(lo[i]..=hi[i])).collect();
        if !omega.membership(&v, 1e-9).unwrap_or(false) {
            continue;
        }
        let mut val = g.value(&v);
        consider(&v, val);
        let mut step = 0.25
            * (0..m)
                .map(|i| hi[i] - lo[i])
                .fold(f64::INFINITY, f64::min)
                .max(1e-6);
        for _ in 0..WITNESS_ITERS {
            let active = g.evaluate(&v);
            let grad: Vec<f64> = g
                .piece(active.argmin_k, active.argmax_l)
                .gradient()
                .iter()
                .map(|p| p.eval(&v))
                .collect();
            let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            let mut cand: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(vi, gi)| vi - step * gi / norm)
                .collect();
            for i in 0..m {
                cand[i] = cand[i].clamp(lo[i], hi[i]);
            }
            let inside = omega.membership(&cand, 1e-9).unwrap_or(false);
            let cand_val = if inside { g.value(&cand) } else { f64::INFINITY };
            if inside && cand_val < val {
                v = cand;
                val = cand_val;
                consider(&v, val);
            } else {
                step *= 0.5;
                if step < 1e-10 {
                    break;
                }
            }
        }
    }
    best.filter(|w| w.value < 0.0)
}
