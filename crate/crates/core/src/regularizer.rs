//! Tikhonov functional, its (approximate) minimization and the parameter choice rules.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ForwardProblem;
use crate::scale::{StabilityParams, Violation};

pub const MAX_GN_ITERATIONS: usize = 100;
pub const MAX_HALVINGS: usize = 30;
pub const GRADIENT_TOLERANCE: f64 = 1e-12;
/// A Gauss–Newton step whose model decrease is below this fraction of the
/// functional value cannot be resolved in floating point; the iteration stops.
pub const MODEL_DECREASE_RTOL: f64 = 1e-13;

pub const DISCREPANCY_TAU: f64 = 4.0;
pub const DISCREPANCY_MAX_N: usize = 60;

/// `T(x; α, y^δ) = ‖F(x) − y^δ‖²_Y + α ‖x‖²_{X_s}` with everything it depends on.
#[derive(Clone, Copy)]
pub struct TikhonovSetup<'a> {
    pub problem: &'a dyn ForwardProblem,
    pub alpha: f64,
    pub s: f64,
    pub data: &'a DVector<f64>,
    pub delta: f64,
}

impl<'a> TikhonovSetup<'a> {
    pub fn new(
        problem: &'a dyn ForwardProblem,
        alpha: f64,
        s: f64,
        data: &'a DVector<f64>,
        delta: f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be finite and >= 0, got {delta}")));
        }
        if data.len() != problem.obs_dim() {
            return Err(Error::Dimension {
                expected: problem.obs_dim(),
                got: data.len(),
            });
        }
        Ok(Self {
            problem,
            alpha,
            s,
            data,
            delta,
        })
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(self.problem, alpha, self.s, self.data, self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeReport {
    pub functional_value: f64,
    pub residual_norm: f64,
    pub penalty_norm: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Upper bound used to certify `T(x) ≤ inf T + δ²`.
    pub slack_certificate: f64,
    pub warnings: Vec<String>,
    /// Functional value at the start and after every accepted step.
    pub history: Vec<f64>,
}

/// Residual norm, penalty norm and functional value at `x`.
#[derive(Debug, Clone, Copy)]
struct Evaluation {
    residual_norm: f64,
    penalty_norm: f64,
    value: f64,
}

fn evaluate(x: &DVector<f64>, setup: &TikhonovSetup<'_>) -> Result<(Evaluation, DVector<f64>)> {
    let fx = setup.problem.evaluate(x)?;
    let residual = fx - setup.data;
    let residual_norm = setup.problem.data_norm(&residual);
    let penalty_norm = setup.problem.penalty_norm(x, setup.s)?;
    let value = residual_norm * residual_norm + setup.alpha * penalty_norm * penalty_norm;
    Ok((
        Evaluation {
            residual_norm,
            penalty_norm,
            value,
        },
        residual,
    ))
}

pub fn functional_value(x: &DVector<f64>, setup: &TikhonovSetup<'_>) -> Result<f64> {
    Ok(evaluate(x, setup)?.0.value)
}

/// `F(x) − y^δ` measured in `Y`.
pub fn residual_norm(x: &DVector<f64>, setup: &TikhonovSetup<'_>) -> Result<f64> {
    Ok(evaluate(x, setup)?.0.residual_norm)
}

/// Minimizer of the Tikhonov functional: exact when the problem has a closed
/// form, damped Gauss–Newton otherwise.
pub fn minimize(setup: &TikhonovSetup<'_>, x0: &DVector<f64>) -> Result<(DVector<f64>, MinimizeReport)> {
    match setup.problem.closed_form(setup.data, setup.alpha, setup.s) {
        Some(x) => {
            let x = x?;
            let (ev, residual) = evaluate(&x, setup)?;
            let gradient_norm = gradient(&x, &residual, setup)?.norm();
            let warnings = setup.problem.domain_warnings(&x);
            Ok((
                x,
                MinimizeReport {
                    functional_value: ev.value,
                    residual_norm: ev.residual_norm,
                    penalty_norm: ev.penalty_norm,
                    iterations: 0,
                    gradient_norm,
                    slack_certificate: 0.0,
                    warnings,
                    history: vec![ev.value],
                },
            ))
        }
        None => gauss_newton(setup, x0),
    }
}

/// Gradient of the functional at `x` given the residual `F(x) − y^δ`.
fn gradient(x: &DVector<f64>, residual: &DVector<f64>, setup: &TikhonovSetup<'_>) -> Result<DVector<f64>> {
    let data_part = setup.problem.adjoint_apply(x, residual)?;
    let penalty_part = setup.problem.penalty_apply(x, setup.s)?;
    Ok(2.0 * (data_part + setup.alpha * penalty_part))
}

/// Damped Gauss–Newton on the Tikhonov functional, used for every problem
/// without a closed form and available for linear ones as a cross-check.
pub fn gauss_newton(setup: &TikhonovSetup<'_>, x0: &DVector<f64>) -> Result<(DVector<f64>, MinimizeReport)> {
    let problem = setup.problem;
    if x0.len() != problem.param_dim() {
        return Err(Error::Dimension {
            expected: problem.param_dim(),
            got: x0.len(),
        });
    }
    if setup.alpha <= 0.0 && problem.closed_form(setup.data, 0.0, setup.s).is_none() {
        return Err(Error::Parameter("Gauss-Newton needs alpha > 0".into()));
    }
    let penalty = problem.penalty_gram(setup.s)?;
    let stop_decrease = setup.delta * setup.delta / 10.0;

    let mut x = x0.clone();
    let (mut ev, mut residual) = evaluate(&x, setup)?;
    let mut history = vec![ev.value];
    let mut slack: f64 = 0.0;
    let mut gradient_norm;
    let mut iterations = 0;

    loop {
        let jac = problem.jacobian(&x)?;
        let mut weighted = DMatrix::zeros(jac.nrows(), jac.ncols());
        for (j, col) in jac.column_iter().enumerate() {
            weighted.set_column(j, &problem.obs_gram_apply(&col.into_owned()));
        }
        let half_grad = jac.tr_mul(&problem.obs_gram_apply(&residual)) + setup.alpha * (&penalty * &x);
        gradient_norm = 2.0 * half_grad.norm();
        if gradient_norm < GRADIENT_TOLERANCE || iterations >= MAX_GN_ITERATIONS {
            break;
        }

        let mut normal = jac.tr_mul(&weighted) + setup.alpha * &penalty;
        crate::scale::symmetrize(&mut normal);
        let rhs = -&half_grad;
        let step = match normal.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => normal.lu().solve(&rhs).ok_or_else(|| Error::Numeric {
                message: "Gauss-Newton normal equations are singular".into(),
                residual: f64::NAN,
            })?,
        };
        // Decrease predicted by the quadratic model for the full step.
        let model_decrease = -half_grad.dot(&step);
        if !(model_decrease.is_finite()) {
            return Err(Error::Numeric {
                message: "non-finite Gauss-Newton step".into(),
                residual: model_decrease,
            });
        }
        if model_decrease <= MODEL_DECREASE_RTOL * ev.value {
            slack = slack.max(model_decrease.max(0.0));
            break;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &x + t * &step;
            match evaluate(&trial, setup) {
                Ok((tev, tres)) if tev.value < ev.value => {
                    accepted = Some((trial, tev, tres));
                    break;
                }
                Ok(_) | Err(Error::SolverBreakdown { .. }) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        iterations += 1;
        let Some((trial, tev, tres)) = accepted else {
            let report = MinimizeReport {
                functional_value: ev.value,
                residual_norm: ev.residual_norm,
                penalty_norm: ev.penalty_norm,
                iterations,
                gradient_norm,
                slack_certificate: model_decrease,
                warnings: problem.domain_warnings(&x),
                history,
            };
            return Err(Error::Stagnation {
                halvings: MAX_HALVINGS,
                report: Box::new(report),
            });
        };
        let decrease = ev.value - tev.value;
        x = trial;
        ev = tev;
        residual = tres;
        history.push(ev.value);
        slack = decrease;
        if decrease < stop_decrease {
            gradient_norm = gradient(&x, &residual, setup)?.norm();
            break;
        }
    }

    let warnings = problem.domain_warnings(&x);
    Ok((
        x,
        MinimizeReport {
            functional_value: ev.value,
            residual_norm: ev.residual_norm,
            penalty_norm: ev.penalty_norm,
            iterations,
            gradient_norm,
            slack_certificate: slack,
            warnings,
            history,
        },
    ))
}

/// `α = δ²`.
pub fn simple_alpha(delta: f64) -> f64 {
    delta * delta
}

/// A computed exponent together with the theory conditions it violates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentValue {
    pub value: f64,
    pub violations: Vec<Violation>,
}

impl ExponentValue {
    pub fn covered(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `2 − 2γ(u − s)/(u + a)`; conditions `−a ≤ s ≤ u ≤ 2s + a` are reported, not enforced.
pub fn apriori_exponent(sp: &StabilityParams) -> Result<ExponentValue> {
    let denom = sp.u + sp.a;
    if denom == 0.0 {
        return Err(Error::Parameter("degenerate exponent: u + a = 0".into()));
    }
    let mut violations = sp.stability_violations();
    violations.extend(sp.smoothness_violation());
    Ok(ExponentValue {
        value: 2.0 - 2.0 * sp.gamma * (sp.u - sp.s) / denom,
        violations,
    })
}

/// `α = δ^{2 − 2γ(u−s)/(u+a)}`.
pub fn apriori_alpha(delta: f64, sp: &StabilityParams) -> Result<(f64, ExponentValue)> {
    let e = apriori_exponent(sp)?;
    Ok((delta.powf(e.value), e))
}

/// Predicted convergence rate `γ(u − r)/(u + a)` in `X_r`; conditions
/// `−a ≤ r ≤ s ≤ u` are reported, not enforced.
pub fn theoretical_rate(sp: &StabilityParams) -> Result<ExponentValue> {
    let denom = sp.u + sp.a;
    if denom == 0.0 {
        return Err(Error::Parameter("degenerate exponent: u + a = 0".into()));
    }
    let mut violations = sp.stability_violations();
    violations.extend(sp.norm_violation());
    if sp.u < sp.s {
        violations.push(Violation::SmoothnessOutOfRange {
            s: sp.s,
            u: sp.u,
            upper: 2.0 * sp.s + sp.a,
        });
    }
    Ok(ExponentValue {
        value: sp.gamma * (sp.u - sp.r) / denom,
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscrepancyOptions {
    pub tau: f64,
    pub max_n: usize,
}

impl Default for DiscrepancyOptions {
    fn default() -> Self {
        Self {
            tau: DISCREPANCY_TAU,
            max_n: DISCREPANCY_MAX_N,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscrepancyOutcome {
    pub n_star: usize,
    pub alpha: f64,
    pub x: DVector<f64>,
    pub report: MinimizeReport,
    /// `‖F(x_n) − y^δ‖_Y` for every `n = 0..=n_star`.
    pub residuals: Vec<f64>,
}

/// Walks `α_n = 2^{−n}` until the residual drops to `τδ`, warm-starting each
/// minimization from the previous one.
pub fn discrepancy_run(
    problem: &dyn ForwardProblem,
    data: &DVector<f64>,
    delta: f64,
    s: f64,
    options: DiscrepancyOptions,
) -> Result<DiscrepancyOutcome> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!(
            "discrepancy rule needs delta > 0, got {delta}"
        )));
    }
    let target = options.tau * delta;
    let mut x = problem.initial_guess(data);
    let mut residuals = Vec::new();
    for n in 0..=options.max_n {
        let alpha = 0.5f64.powi(n as i32);
        let setup = TikhonovSetup::new(problem, alpha, s, data, delta)?;
        let (xn, report) = minimize(&setup, &x)?;
        residuals.push(report.residual_norm);
        if report.residual_norm <= target {
            return Ok(DiscrepancyOutcome {
                n_star: n,
                alpha,
                x: xn,
                report,
                residuals,
            });
        }
        x = xn;
    }
    Err(Error::NoStop {
        max_n: options.max_n,
        last_residual: *residuals.last().expect("at least one rung"),
        target,
        residuals,
    })
}
