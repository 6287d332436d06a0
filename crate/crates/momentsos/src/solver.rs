//! Dense primal-dual interior-point solver for the standard-form conic
//! programs of [`crate::conic`].
//!
//! The method is path-following on the homogeneous self-dual embedding with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector step. Free
//! variables are kept in the KKT system (no splitting); infeasibility is
//! certified from the embedding variables. Everything is deterministic:
//! fixed iteration order, no randomized pivoting.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::conic::{smat, svec, Cone, ConicProgram, Solution, SolveStatus};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("malformed conic program: {0}")]
    BadProblem(String),
}

#[derive(Clone, Copy)]
struct Range {
    start: usize,
    len: usize,
}

impl Range {
    fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Cone layout of the reduced (zero-blocks-eliminated) variable vector.
struct Layout {
    free: Vec<Range>,
    nonneg: Vec<Range>,
    psd: Vec<(Range, usize)>,
    nvars: usize,
    /// Barrier degree of the cone part.
    nu: f64,
}

struct PsdScaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    /// Scaled point eigenvalues (sigma), so that lambda = diag(sigma).
    sigma: DVector<f64>,
    /// W^{-1} = R^{-T} R^{-1} of the NT point W = R R^T.
    winv: DMatrix<f64>,
    w: DMatrix<f64>,
}

struct Scaling {
    /// Per non-negative variable: w_i = sqrt(x_i / s_i).
    nn_w: Vec<f64>,
    /// Per non-negative variable: lambda_i = sqrt(x_i s_i).
    nn_lambda: Vec<f64>,
    psd: Vec<PsdScaling>,
}

impl Layout {
    fn from_cones(cones: &[(Cone, usize)]) -> Self {
        let mut free = Vec::new();
        let mut nonneg = Vec::new();
        let mut psd = Vec::new();
        let mut nvars = 0usize;
        let mut nu = 0.0;
        for &(cone, offset) in cones {
            let len = cone.len();
            let r = Range { start: offset, len };
            match cone {
                Cone::Free(_) => free.push(r),
                Cone::NonNeg(n) => {
                    nonneg.push(r);
                    nu += n as f64;
                }
                Cone::Psd(n) => {
                    psd.push((r, n));
                    nu += n as f64;
                }
                Cone::Zero(_) => unreachable!("zero blocks eliminated before layout"),
            }
            nvars = nvars.max(offset + len);
        }
        Layout {
            free,
            nonneg,
            psd,
            nvars,
            nu,
        }
    }

    fn has_free(&self) -> bool {
        self.free.iter().any(|r| r.len > 0)
    }

    /// Unit element of the cone part (identity matrices, ones), zero on free.
    fn unit(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.nvars];
        for r in &self.nonneg {
            for i in r.iter() {
                e[i] = 1.0;
            }
        }
        for (r, n) in &self.psd {
            let id = svec(&DMatrix::identity(*n, *n));
            e[r.iter()].copy_from_slice(&id);
        }
        e
    }
}

impl Scaling {
    fn compute(layout: &Layout, x: &[f64], s: &[f64]) -> Option<Scaling> {
        let mut nn_w = Vec::new();
        let mut nn_lambda = Vec::new();
        for r in &layout.nonneg {
            for i in r.iter() {
                if x[i] <= 0.0 || s[i] <= 0.0 {
                    return None;
                }
                nn_w.push((x[i] / s[i]).sqrt());
                nn_lambda.push((x[i] * s[i]).sqrt());
            }
        }
        let mut psd = Vec::new();
        for (r, n) in &layout.psd {
            let xm = smat(&x[r.iter()], *n);
            let sm = smat(&s[r.iter()], *n);
            let lx = Cholesky::new(xm)?.l();
            let ls = Cholesky::new(sm)?.l();
            let svd = (ls.transpose() * &lx).svd(true, true);
            let u = svd.u.as_ref()?;
            let vt = svd.v_t.as_ref()?;
            let sigma = svd.singular_values.clone();
            if sigma.iter().any(|&v| v <= 0.0) {
                return None;
            }
            let sighalf_inv = DMatrix::from_diagonal(&sigma.map(|v| 1.0 / v.sqrt()));
            let r_mat = &lx * vt.transpose() * &sighalf_inv;
            let rinv = &sighalf_inv * u.transpose() * ls.transpose();
            let w = &r_mat * r_mat.transpose();
            let winv = rinv.transpose() * &rinv;
            psd.push(PsdScaling {
                r: r_mat,
                rinv,
                sigma,
                winv,
                w,
            });
        }
        Some(Scaling {
            nn_w,
            nn_lambda,
            psd,
        })
    }

    /// Scaled cone point lambda (zero on free parts).
    fn lambda(&self, layout: &Layout) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = self.nn_lambda[k];
                k += 1;
            }
        }
        for ((r, _n), sc) in layout.psd.iter().zip(&self.psd) {
            let lam = svec(&DMatrix::from_diagonal(&sc.sigma));
            out[r.iter()].copy_from_slice(&lam);
        }
        out
    }

    /// W^{-1} dx (scales a primal-side direction; zero on free parts).
    fn scale_primal(&self, layout: &Layout, dx: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = dx[i] / self.nn_w[k];
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let d = smat(&dx[r.iter()], *n);
            let scaled = &sc.rinv * d * sc.rinv.transpose();
            out[r.iter()].copy_from_slice(&svec(&scaled));
        }
        out
    }

    /// W^T ds (scales a dual-side direction; zero on free parts).
    fn scale_dual(&self, layout: &Layout, ds: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = ds[i] * self.nn_w[k];
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let d = smat(&ds[r.iter()], *n);
            let scaled = sc.r.transpose() * d * &sc.r;
            out[r.iter()].copy_from_slice(&svec(&scaled));
        }
        out
    }

    /// W^{-T} g, recovering a dual-side direction from scaled space.
    fn unscale_dual(&self, layout: &Layout, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = g[i] / self.nn_w[k];
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let d = smat(&g[r.iter()], *n);
            let back = sc.rinv.transpose() * d * &sc.rinv;
            out[r.iter()].copy_from_slice(&svec(&back));
        }
        out
    }

    /// H dx with H = W^{-T} W^{-1}; zero on free parts.
    fn apply_h(&self, layout: &Layout, dx: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = dx[i] / (self.nn_w[k] * self.nn_w[k]);
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let d = smat(&dx[r.iter()], *n);
            let h = &sc.winv * d * &sc.winv;
            out[r.iter()].copy_from_slice(&svec(&h));
        }
        out
    }

    /// H^{-1} v; requires no free blocks in the cone part touched.
    fn apply_hinv(&self, layout: &Layout, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        for r in &layout.free {
            for i in r.iter() {
                out[i] = v[i];
            }
        }
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = v[i] * self.nn_w[k] * self.nn_w[k];
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let d = smat(&v[r.iter()], *n);
            let h = &sc.w * d * &sc.w;
            out[r.iter()].copy_from_slice(&svec(&h));
        }
        out
    }

    /// Solves lambda o z = d in scaled space (Jordan division).
    fn jordan_div_lambda(&self, layout: &Layout, d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; layout.nvars];
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                out[i] = d[i] / self.nn_lambda[k];
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let dm = smat(&d[r.iter()], *n);
            let mut z = DMatrix::zeros(*n, *n);
            for i in 0..*n {
                for j in 0..*n {
                    z[(i, j)] = 2.0 * dm[(i, j)] / (sc.sigma[i] + sc.sigma[j]);
                }
            }
            out[r.iter()].copy_from_slice(&svec(&z));
        }
        out
    }

    /// Max step alpha so that lambda + alpha*d stays in the cone.
    fn max_step(&self, layout: &Layout, d: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        let mut k = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                if d[i] < 0.0 {
                    alpha = alpha.min(-self.nn_lambda[k] / d[i]);
                }
                k += 1;
            }
        }
        for ((r, n), sc) in layout.psd.iter().zip(&self.psd) {
            let dm = smat(&d[r.iter()], *n);
            let mut m = DMatrix::zeros(*n, *n);
            for i in 0..*n {
                for j in 0..*n {
                    m[(i, j)] = dm[(i, j)] / (sc.sigma[i] * sc.sigma[j]).sqrt();
                }
            }
            let eig = m.symmetric_eigen();
            let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_eig < 0.0 {
                alpha = alpha.min(-1.0 / min_eig);
            }
        }
        alpha
    }
}

/// Jordan product u o v in scaled space, per cone block (zero on free).
fn jordan_product(layout: &Layout, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; layout.nvars];
    for r in &layout.nonneg {
        for i in r.iter() {
            out[i] = u[i] * v[i];
        }
    }
    for (r, n) in &layout.psd {
        let um = smat(&u[r.iter()], *n);
        let vm = smat(&v[r.iter()], *n);
        let prod = (&um * &vm + &vm * &um) * 0.5;
        out[r.iter()].copy_from_slice(&svec(&prod));
    }
    out
}

fn cone_inner(layout: &Layout, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for r in layout.nonneg.iter().chain(layout.psd.iter().map(|(r, _)| r)) {
        for i in r.iter() {
            acc += u[i] * v[i];
        }
    }
    acc
}

/// Factorized KKT system [[-H, A'],[A, 0]].
enum KktFactor {
    Augmented {
        lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        k0: DMatrix<f64>,
        n: usize,
        p: usize,
    },
    /// Normal equations A H^{-1} A' (requires invertible H, i.e. no free vars).
    Normal {
        chol: Cholesky<f64, nalgebra::Dyn>,
    },
}

struct Problem<'a> {
    rows: &'a [Vec<(usize, f64)>],
    b: Vec<f64>,
    c: Vec<f64>,
    n: usize,
    p: usize,
}

impl Problem<'_> {
    fn mul_a(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    fn mul_at(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &yi) in self.rows.iter().zip(y) {
            for &(j, a) in row {
                out[j] += a * yi;
            }
        }
        out
    }
}

const AUG_REG: f64 = 1e-10;

fn factor_kkt(prob: &Problem, layout: &Layout, scal: &Scaling) -> Option<KktFactor> {
    // normal equations only for pure LPs (large, well-conditioned oracle
    // grids); PSD or free blocks get the augmented system with refinement
    if layout.has_free() || !layout.psd.is_empty() {
        let n = prob.n;
        let p = prob.p;
        let mut k0 = DMatrix::zeros(n + p, n + p);
        // -H block via columns of H (H is block diagonal; apply to unit vecs
        // block by block to avoid n full applications)
        let mut hk = 0;
        for r in &layout.nonneg {
            for i in r.iter() {
                k0[(i, i)] = -1.0 / (scal.nn_w[hk] * scal.nn_w[hk]);
                hk += 1;
            }
        }
        for ((r, nn), sc) in layout.psd.iter().zip(&scal.psd) {
            let len = r.len;
            let mut unit = vec![0.0; len];
            for c in 0..len {
                unit[c] = 1.0;
                let d = smat(&unit, *nn);
                let h = &sc.winv * d * &sc.winv;
                let col = svec(&h);
                for (rr, val) in col.iter().enumerate() {
                    k0[(r.start + rr, r.start + c)] = -val;
                }
                unit[c] = 0.0;
            }
        }
        for (ri, row) in prob.rows.iter().enumerate() {
            for &(j, a) in row {
                k0[(n + ri, j)] = a;
                k0[(j, n + ri)] = a;
            }
        }
        let mut kreg = k0.clone();
        for i in 0..n {
            kreg[(i, i)] -= AUG_REG;
        }
        for i in n..n + p {
            kreg[(i, i)] += AUG_REG;
        }
        let lu = kreg.lu();
        Some(KktFactor::Augmented { lu, k0, n, p })
    } else {
        // normal equations: M = A H^{-1} A'
        let p = prob.p;
        let mut hinv_rows: Vec<Vec<f64>> = Vec::with_capacity(p);
        for row in prob.rows {
            let mut dense = vec![0.0; prob.n];
            for &(j, a) in row {
                dense[j] = a;
            }
            hinv_rows.push(scal.apply_hinv(layout, &dense));
        }
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let mut acc = 0.0;
                for &(col, a) in &prob.rows[j] {
                    acc += a * hinv_rows[i][col];
                }
                m[(i, j)] = acc;
                m[(j, i)] = acc;
            }
        }
        // tiny static regularization guards rank-deficient rows
        let reg = 1e-13 * (1.0 + m.trace().abs());
        for i in 0..p {
            m[(i, i)] += reg;
        }
        Cholesky::new(m).map(|chol| KktFactor::Normal { chol })
    }
}

impl KktFactor {
    /// Solves -H dx + A' dy = rx, A dx = ry.
    fn solve(
        &self,
        prob: &Problem,
        layout: &Layout,
        scal: &Scaling,
        rx: &[f64],
        ry: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        match self {
            KktFactor::Augmented { lu, k0, n, p } => {
                let mut rhs = DVector::zeros(n + p);
                for i in 0..*n {
                    rhs[i] = rx[i];
                }
                for i in 0..*p {
                    rhs[n + i] = ry[i];
                }
                let mut sol = lu.solve(&rhs).unwrap_or_else(|| DVector::zeros(n + p));
                // iterative refinement against the unregularized system
                for _ in 0..2 {
                    let resid = &rhs - k0 * &sol;
                    if resid.amax() < 1e-14 * (1.0 + rhs.amax()) {
                        break;
                    }
                    if let Some(corr) = lu.solve(&resid) {
                        sol += corr;
                    } else {
                        break;
                    }
                }
                let dx = sol.as_slice()[..*n].to_vec();
                let dy = sol.as_slice()[*n..].to_vec();
                (dx, dy)
            }
            KktFactor::Normal { chol } => {
                // dx = H^{-1}(A' dy - rx); A H^{-1} A' dy = ry + A H^{-1} rx
                let hinv_rx = scal.apply_hinv(layout, rx);
                let a_hinv_rx = prob.mul_a(&hinv_rx);
                let mut rhs = DVector::from_vec(ry.to_vec());
                for i in 0..prob.p {
                    rhs[i] += a_hinv_rx[i];
                }
                let dy = chol.solve(&rhs);
                let dy_vec = dy.as_slice().to_vec();
                let at_dy = prob.mul_at(&dy_vec);
                let mut tmp = vec![0.0; prob.n];
                for i in 0..prob.n {
                    tmp[i] = at_dy[i] - rx[i];
                }
                let dx = scal.apply_hinv(layout, &tmp);
                (dx, dy_vec)
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves a standard-form conic program.
///
/// `status == Optimal` guarantees the stored residuals and the objective gap
/// are below `opts.tol` (relative). Infeasible / DualInfeasible carry a
/// Farkas-type certificate in `y` / `x` respectively.
pub fn solve(cp: &ConicProgram, opts: &SolveOptions) -> Result<Solution, SolverError> {
    validate(cp)?;

    // Eliminate Zero blocks: their variables are fixed to 0.
    let mut keep = Vec::with_capacity(cp.num_vars());
    let mut reduced_cones = Vec::new();
    let mut offset = 0usize;
    for blk in cp.blocks() {
        match blk.cone {
            Cone::Zero(_) => {
                for _ in blk.range() {
                    keep.push(None);
                }
            }
            cone => {
                reduced_cones.push((cone, offset));
                for _ in blk.range() {
                    keep.push(Some(offset));
                    offset += 1;
                }
            }
        }
    }
    let layout = Layout::from_cones(&reduced_cones);
    let n = layout.nvars;
    let p = cp.num_rows();

    let c: Vec<f64> = {
        let mut c = vec![0.0; n];
        for (full, red) in keep.iter().enumerate() {
            if let Some(j) = red {
                c[*j] = cp.obj()[full];
            }
        }
        c
    };
    let rows: Vec<Vec<(usize, f64)>> = cp
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .filter_map(|&(j, a)| keep[j].map(|r| (r, a)))
                .collect()
        })
        .collect();
    let prob = Problem {
        rows: &rows,
        b: cp.rhs().to_vec(),
        c: c.clone(),
        n,
        p,
    };

    if n == 0 {
        // everything pinned to zero; feasible iff b = 0
        let feasible = prob.b.iter().all(|&v| v.abs() <= opts.tol);
        return Ok(finish(
            cp,
            &keep,
            if feasible {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            },
            &[],
            &vec![0.0; p],
            &[],
            0.0,
            1.0,
            0,
            (0.0, 0.0, 0.0),
        ));
    }

    // HSDE state
    let e = layout.unit();
    let mut x = e.clone();
    let mut s = e.clone();
    let mut y = vec![0.0; p];
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;
    let nu = layout.nu + 1.0;

    let norm_b = norm2(&prob.b);
    let norm_c = norm2(&prob.c);

    let mut best: Option<Solution> = None;

    for iter in 0..opts.max_iter {
        // residuals of the embedding
        let ax = prob.mul_a(&x);
        let aty = prob.mul_at(&y);
        let rd: Vec<f64> = (0..n).map(|i| aty[i] + s[i] - c[i] * tau).collect();
        let rp: Vec<f64> = (0..p).map(|i| ax[i] - prob.b[i] * tau).collect();
        let rg = dot(&c, &x) - dot(&prob.b, &y) + kappa;

        // candidate solution
        let inv_tau = 1.0 / tau;
        let pobj = dot(&c, &x) * inv_tau;
        let dobj = dot(&prob.b, &y) * inv_tau;
        let pres = (0..p)
            .map(|i| ax[i] * inv_tau - prob.b[i])
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            / (1.0 + norm_b);
        let dres = (0..n)
            .map(|i| (aty[i] + s[i]) * inv_tau - c[i])
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            / (1.0 + norm_c);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs().max(dobj.abs()));

        let make_solution = |status: SolveStatus| {
            finish(
                cp,
                &keep,
                status,
                &x.iter().map(|v| v * inv_tau).collect::<Vec<_>>(),
                &y.iter().map(|v| v * inv_tau).collect::<Vec<_>>(),
                &s.iter().map(|v| v * inv_tau).collect::<Vec<_>>(),
                pobj,
                dobj,
                iter,
                (pres, dres, gap),
            )
        };

        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol {
            return Ok(make_solution(SolveStatus::Optimal));
        }
        best = Some(make_solution(SolveStatus::NumericalLimit));

        // infeasibility certificates
        let by = dot(&prob.b, &y);
        if by > 0.0 {
            let cert: f64 = (0..n)
                .map(|i| (aty[i] + s[i]) / by)
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if cert <= opts.tol * (1.0 + norm_c) {
                let scale = 1.0 / by;
                return Ok(finish(
                    cp,
                    &keep,
                    SolveStatus::Infeasible,
                    &x,
                    &y.iter().map(|v| v * scale).collect::<Vec<_>>(),
                    &s.iter().map(|v| v * scale).collect::<Vec<_>>(),
                    f64::INFINITY,
                    f64::INFINITY,
                    iter,
                    (pres, dres, gap),
                ));
            }
        }
        let cx = dot(&c, &x);
        if cx < 0.0 {
            let cert = norm2(&ax) / (-cx);
            if cert <= opts.tol * (1.0 + norm_b) {
                let scale = 1.0 / (-cx);
                return Ok(finish(
                    cp,
                    &keep,
                    SolveStatus::DualInfeasible,
                    &x.iter().map(|v| v * scale).collect::<Vec<_>>(),
                    &y,
                    &s,
                    f64::NEG_INFINITY,
                    f64::NEG_INFINITY,
                    iter,
                    (pres, dres, gap),
                ));
            }
        }

        let mu = (cone_inner(&layout, &x, &s) + tau * kappa) / nu;
        let Some(scal) = Scaling::compute(&layout, &x, &s) else {
            break;
        };
        let lambda = scal.lambda(&layout);
        let Some(factor) = factor_kkt(&prob, &layout, &scal) else {
            break;
        };

        // the (c, b) solve shared by predictor and corrector
        let (u2x, u2y) = factor.solve(&prob, &layout, &scal, &c, &prob.b);
        let denom = dot(&c, &u2x) - dot(&prob.b, &u2y) - kappa / tau;
        if denom.abs() < 1e-300 || !denom.is_finite() {
            break;
        }

        let direction = |eta: f64, dcomp: &[f64], dcomp_tau: f64| {
            let gvec = scal.jordan_div_lambda(&layout, dcomp);
            let wg = scal.unscale_dual(&layout, &gvec);
            let rx1: Vec<f64> = (0..n).map(|i| -eta * rd[i] - wg[i]).collect();
            let ry1: Vec<f64> = (0..p).map(|i| -eta * rp[i]).collect();
            let (u1x, u1y) = factor.solve(&prob, &layout, &scal, &rx1, &ry1);
            let num = -eta * rg - dot(&c, &u1x) + dot(&prob.b, &u1y) - dcomp_tau / tau;
            let dtau = num / denom;
            let dx: Vec<f64> = (0..n).map(|i| u1x[i] + dtau * u2x[i]).collect();
            let dy: Vec<f64> = (0..p).map(|i| u1y[i] + dtau * u2y[i]).collect();
            let hdx = scal.apply_h(&layout, &dx);
            let ds: Vec<f64> = (0..n).map(|i| wg[i] - hdx[i]).collect();
            let dkappa = (dcomp_tau - kappa * dtau) / tau;
            (dx, dy, ds, dtau, dkappa)
        };

        // predictor (affine scaling) direction
        let dcomp_aff: Vec<f64> = jordan_product(&layout, &lambda, &lambda)
            .iter()
            .map(|v| -v)
            .collect();
        let (dx_a, _dy_a, ds_a, dtau_a, dkappa_a) = direction(1.0, &dcomp_aff, -tau * kappa);

        let dx_scaled = scal.scale_primal(&layout, &dx_a);
        let ds_scaled = scal.scale_dual(&layout, &ds_a);
        let mut alpha_aff = scal
            .max_step(&layout, &dx_scaled)
            .min(scal.max_step(&layout, &ds_scaled));
        if dtau_a < 0.0 {
            alpha_aff = alpha_aff.min(-tau / dtau_a);
        }
        if dkappa_a < 0.0 {
            alpha_aff = alpha_aff.min(-kappa / dkappa_a);
        }
        alpha_aff = alpha_aff.min(1.0);

        let mu_aff = {
            let lam_x: Vec<f64> = (0..n).map(|i| lambda[i] + alpha_aff * dx_scaled[i]).collect();
            let lam_s: Vec<f64> = (0..n).map(|i| lambda[i] + alpha_aff * ds_scaled[i]).collect();
            (cone_inner(&layout, &lam_x, &lam_s)
                + (tau + alpha_aff * dtau_a) * (kappa + alpha_aff * dkappa_a))
                / nu
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // combined predictor-corrector direction
        let lam_sq = jordan_product(&layout, &lambda, &lambda);
        let corr = jordan_product(&layout, &dx_scaled, &ds_scaled);
        let mut dcomp = vec![0.0; n];
        for blk in layout.nonneg.iter().chain(layout.psd.iter().map(|(r, _)| r)) {
            for i in blk.iter() {
                dcomp[i] = -lam_sq[i] - corr[i];
            }
        }
        // sigma*mu*e on the cone identity
        for (i, ei) in e.iter().enumerate() {
            dcomp[i] += sigma * mu * ei;
        }
        let dcomp_tau = sigma * mu - tau * kappa - dtau_a * dkappa_a;
        let (dx, dy, ds, dtau, dkappa) = direction(1.0 - sigma, &dcomp, dcomp_tau);

        let dx_scaled = scal.scale_primal(&layout, &dx);
        let ds_scaled = scal.scale_dual(&layout, &ds);
        let mut alpha = scal
            .max_step(&layout, &dx_scaled)
            .min(scal.max_step(&layout, &ds_scaled));
        if dtau < 0.0 {
            alpha = alpha.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            alpha = alpha.min(-kappa / dkappa);
        }
        alpha = (0.99 * alpha).min(1.0);
        if alpha <= 1e-14 {
            break;
        }

        for i in 0..n {
            x[i] += alpha * dx[i];
            s[i] += alpha * ds[i];
        }
        for i in 0..p {
            y[i] += alpha * dy[i];
        }
        tau += alpha * dtau;
        kappa += alpha * dkappa;
    }

    Ok(best.unwrap_or_else(|| {
        finish(
            cp,
            &keep,
            SolveStatus::NumericalLimit,
            &x,
            &y,
            &s,
            f64::NAN,
            f64::NAN,
            opts.max_iter,
            (f64::NAN, f64::NAN, f64::NAN),
        )
    }))
}

fn validate(cp: &ConicProgram) -> Result<(), SolverError> {
    for (i, row) in cp.rows().iter().enumerate() {
        for &(j, a) in row {
            if j >= cp.num_vars() {
                return Err(SolverError::BadProblem(format!(
                    "row {i} references variable {j} out of {}",
                    cp.num_vars()
                )));
            }
            if !a.is_finite() {
                return Err(SolverError::BadProblem(format!("row {i} has non-finite entry")));
            }
        }
    }
    if cp.rhs().iter().any(|v| !v.is_finite()) || cp.obj().iter().any(|v| !v.is_finite()) {
        return Err(SolverError::BadProblem("non-finite data".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cp: &ConicProgram,
    keep: &[Option<usize>],
    status: SolveStatus,
    x_red: &[f64],
    y: &[f64],
    s_red: &[f64],
    pobj: f64,
    dobj: f64,
    iterations: usize,
    residuals: (f64, f64, f64),
) -> Solution {
    let nfull = cp.num_vars();
    let mut x = vec![0.0; nfull];
    let mut s = vec![0.0; nfull];
    // dual slack on zero blocks is c - A'y restricted there
    let mut aty_full = vec![0.0; nfull];
    for (row, &yi) in cp.rows().iter().zip(y) {
        for &(j, a) in row {
            aty_full[j] += a * yi;
        }
    }
    for (full, red) in keep.iter().enumerate() {
        match red {
            Some(r) => {
                if *r < x_red.len() {
                    x[full] = x_red[*r];
                    s[full] = s_red[*r];
                }
            }
            None => {
                x[full] = 0.0;
                s[full] = cp.obj()[full] - aty_full[full];
            }
        }
    }
    Solution {
        status,
        x,
        y: y.to_vec(),
        s,
        obj_primal: pobj,
        obj_dual: dobj,
        res_primal: residuals.0,
        res_dual: residuals.1,
        res_gap: residuals.2,
        iterations,
    }
}
