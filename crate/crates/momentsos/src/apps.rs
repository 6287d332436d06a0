//! Application builders: the distributionally robust Newsvendor model and
//! the revenue maximization model, plus parameter sweeps emitted as CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::compile::{compile, CompileError};
use crate::model::{ModelError, MomentConstraint, MomentProblem, PiecewiseSosConvex};
use crate::poly::Polynomial;
use crate::solver::{solve, SolveOptions, SolverError};
use crate::support::ProjectedSpectrahedron;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("compile error: {0}")]
    Compile(#[from] CompileError),
    #[error("solver error: {0}")]
    Solver(#[from] SolverError),
}

/// Which moment bounds the Newsvendor ambiguity set carries.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewsvendorMoments {
    /// First and second moment bounds.
    First2 { gamma1: f64, gamma2: f64 },
    /// First, second, and fourth moment bounds.
    First2Plus4 { gamma1: f64, gamma2: f64, gamma3: f64 },
}

/// Newsvendor instance data: unit upfront cost, order capacity, demand
/// support, and moment bounds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NewsvendorSpec {
    pub cost: f64,
    pub capacity: f64,
    pub support: (f64, f64),
    pub moments: NewsvendorMoments,
}

impl NewsvendorSpec {
    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.cost > 0.0 && self.cost < 1.0) {
            return Err(AppError::BadParameter(format!(
                "cost {} must lie in (0, 1)",
                self.cost
            )));
        }
        if self.capacity <= 0.0 {
            return Err(AppError::BadParameter(format!(
                "capacity {} must be positive",
                self.capacity
            )));
        }
        if self.support.0.partial_cmp(&self.support.1) != Some(std::cmp::Ordering::Less) {
            return Err(AppError::BadParameter(format!(
                "support [{}, {}] must be a proper interval",
                self.support.0, self.support.1
            )));
        }
        Ok(())
    }

    /// The two-moment instance studied in the applications: cost 0.1,
    /// capacity 10, demand on [0, 100], unit moment bounds.
    pub fn reference_first2() -> Self {
        NewsvendorSpec {
            cost: 0.1,
            capacity: 10.0,
            support: (0.0, 100.0),
            moments: NewsvendorMoments::First2 { gamma1: 1.0, gamma2: 1.0 },
        }
    }

    /// Same instance with the additional fourth-moment bound.
    pub fn reference_first2plus4() -> Self {
        NewsvendorSpec {
            cost: 0.1,
            capacity: 10.0,
            support: (0.0, 100.0),
            moments: NewsvendorMoments::First2Plus4 {
                gamma1: 1.0,
                gamma2: 1.0,
                gamma3: 1.0,
            },
        }
    }
}

/// Builds the inner moment problem `min E[min{x - v, 0}]` for a given order
/// quantity. The worst-case total cost is `cost * x` minus its optimal value.
pub fn newsvendor_problem(spec: &NewsvendorSpec, x: f64) -> Result<MomentProblem, AppError> {
    spec.validate()?;
    if !(0.0..=spec.capacity).contains(&x) {
        return Err(AppError::BadParameter(format!(
            "order quantity {x} outside [0, {}]",
            spec.capacity
        )));
    }
    let v = Polynomial::var(1, 0);
    let g = Polynomial::constant(1, x).sub(&v);
    let objective = PiecewiseSosConvex::new(vec![vec![g], vec![Polynomial::zero(1)]])?;
    let mut constraints = Vec::new();
    let (gamma1, gamma2, gamma3) = match spec.moments {
        NewsvendorMoments::First2 { gamma1, gamma2 } => (gamma1, gamma2, None),
        NewsvendorMoments::First2Plus4 { gamma1, gamma2, gamma3 } => {
            (gamma1, gamma2, Some(gamma3))
        }
    };
    constraints.push(MomentConstraint { h: v.clone(), gamma: gamma1 });
    constraints.push(MomentConstraint { h: v.pow(2), gamma: gamma2 });
    if let Some(g3) = gamma3 {
        constraints.push(MomentConstraint { h: v.pow(4), gamma: g3 });
    }
    let omega = ProjectedSpectrahedron::interval(spec.support.0, spec.support.1)
        .map_err(ModelError::Support)?;
    Ok(MomentProblem::new(objective, constraints, omega)?)
}

/// Worst-case total cost at order quantity `x`.
pub fn newsvendor_cost(spec: &NewsvendorSpec, x: f64, opts: &SolveOptions) -> Result<f64, AppError> {
    let problem = newsvendor_problem(spec, x)?;
    let pair = compile(&problem)?;
    let sol = solve(pair.dual(), opts)?;
    Ok(spec.cost * x - pair.value_dual(&sol))
}

/// One customer of the revenue model; the offer price at consumption `v` is
/// `alpha (v - b)^2 + beta (v - b)^4 + c` below the saturation level `b` and
/// constant beyond it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Customer {
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
    pub c: f64,
}

/// Revenue maximization instance: customers, supply cap (support upper end),
/// and the two moment bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RevenueSpec {
    pub customers: Vec<Customer>,
    pub capacity: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl RevenueSpec {
    pub fn validate(&self) -> Result<(), AppError> {
        if self.customers.is_empty() {
            return Err(AppError::BadParameter("at least one customer".into()));
        }
        if self.capacity <= 0.0 {
            return Err(AppError::BadParameter(format!(
                "capacity {} must be positive",
                self.capacity
            )));
        }
        for (k, cu) in self.customers.iter().enumerate() {
            if cu.alpha < 0.0 || cu.beta < 0.0 || cu.b < 0.0 {
                return Err(AppError::BadParameter(format!(
                    "customer {k} needs alpha, beta, b >= 0"
                )));
            }
            // excludes negative offer prices
            let bound = -cu.alpha * cu.b * cu.b - cu.beta * cu.b.powi(4);
            if cu.c > bound {
                return Err(AppError::BadParameter(format!(
                    "customer {k}: c = {} must be at most {bound}",
                    cu.c
                )));
            }
        }
        Ok(())
    }

    /// The three-customer instance studied in the applications.
    pub fn reference() -> Self {
        RevenueSpec {
            customers: vec![
                Customer { alpha: 1.0, beta: 1.0, b: 1.0, c: -5.0 },
                Customer { alpha: 1.0, beta: 1.0 / 16.0, b: 2.0, c: -7.0 },
                Customer { alpha: 0.1, beta: 0.01, b: 4.0, c: -7.5 },
            ],
            capacity: 4.0,
            gamma1: 2.0,
            gamma2: 2.0,
        }
    }
}

/// Builds the moment problem whose optimal value is the negated maximum
/// expected revenue.
pub fn revenue_problem(spec: &RevenueSpec) -> Result<MomentProblem, AppError> {
    spec.validate()?;
    let v = Polynomial::var(1, 0);
    let mut rows = Vec::new();
    for cu in &spec.customers {
        let vmb = v.sub(&Polynomial::constant(1, cu.b));
        let poly = vmb
            .pow(2)
            .scale(cu.alpha)
            .add(&vmb.pow(4).scale(cu.beta))
            .add(&Polynomial::constant(1, cu.c));
        rows.push(vec![poly.clone(), poly]);
    }
    for cu in &spec.customers {
        let slope = -(cu.alpha * cu.b + cu.beta * cu.b.powi(3));
        let inter = cu.alpha * cu.b * cu.b + cu.beta * cu.b.powi(4) + cu.c;
        rows.push(vec![
            v.scale(slope).add(&Polynomial::constant(1, inter)),
            Polynomial::constant(1, cu.c),
        ]);
    }
    let objective = PiecewiseSosConvex::new(rows)?;
    let constraints = vec![
        MomentConstraint { h: v.clone(), gamma: spec.gamma1 },
        MomentConstraint { h: v.pow(2), gamma: spec.gamma2 },
    ];
    let omega = ProjectedSpectrahedron::interval(0.0, spec.capacity)
        .map_err(ModelError::Support)?;
    Ok(MomentProblem::new(objective, constraints, omega)?)
}

/// Maximum expected revenue of an instance.
pub fn revenue_value(spec: &RevenueSpec, opts: &SolveOptions) -> Result<f64, AppError> {
    let problem = revenue_problem(spec)?;
    let pair = compile(&problem)?;
    let sol = solve(pair.dual(), opts)?;
    Ok(-pair.value_dual(&sol))
}

/// One sweep grid point: parameter, inner SDP value, derived quantity
/// (cost or revenue), and the solve status.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub sdp_value: f64,
    pub derived: f64,
    pub status: String,
}

/// Uniform grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    assert!(steps >= 2 && lo < hi);
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Sweeps the order quantity; failed grid points are recorded by status and
/// the sweep continues.
pub fn newsvendor_sweep(spec: &NewsvendorSpec, xs: &[f64], opts: &SolveOptions) -> Vec<SweepRow> {
    xs.iter()
        .map(|&x| {
            match newsvendor_problem(spec, x)
                .and_then(|p| Ok(compile(&p)?))
                .and_then(|pair| Ok((solve(pair.dual(), opts)?, pair)))
            {
                Ok((sol, pair)) => {
                    let value = pair.value_dual(&sol);
                    SweepRow {
                        param: x,
                        sdp_value: value,
                        derived: spec.cost * x - value,
                        status: format!("{:?}", sol.status),
                    }
                }
                Err(e) => SweepRow {
                    param: x,
                    sdp_value: f64::NAN,
                    derived: f64::NAN,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect()
}

/// Sweeps the revenue instance over `(gamma1, gamma2)` pairs, with the pair's
/// first component as the recorded parameter.
pub fn revenue_sweep(
    base: &RevenueSpec,
    gammas: &[(f64, f64)],
    opts: &SolveOptions,
) -> Vec<SweepRow> {
    gammas
        .iter()
        .map(|&(g1, g2)| {
            let spec = RevenueSpec {
                gamma1: g1,
                gamma2: g2,
                ..base.clone()
            };
            match revenue_problem(&spec)
                .and_then(|p| Ok(compile(&p)?))
                .and_then(|pair| Ok((solve(pair.dual(), opts)?, pair)))
            {
                Ok((sol, pair)) => {
                    let value = pair.value_dual(&sol);
                    SweepRow {
                        param: g1,
                        sdp_value: value,
                        derived: -value,
                        status: format!("{:?}", sol.status),
                    }
                }
                Err(e) => SweepRow {
                    param: g1,
                    sdp_value: f64::NAN,
                    derived: f64::NAN,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect()
}

/// Renders sweep rows as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("param,sdp_value,derived,status\n");
    for r in rows {
        let _ = writeln!(s, "{:.12},{:.12e},{:.12e},{}", r.param, r.sdp_value, r.derived, r.status);
    }
    s
}
