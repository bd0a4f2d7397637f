//! δ-ladder rate studies.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::fit::{fit_rate, RateFit};
use crate::harness::noise::{make_noisy_data, NoiseModel};
use crate::param_id::{ParamIdProblem, ParamIdReference, ParamIdSpec};
use crate::problem::ForwardProblem;
use crate::regularizer::{
    apriori_alpha, apriori_exponent, discrepancy_run, minimize, simple_alpha, theoretical_rate, DiscrepancyOptions,
    TikhonovSetup,
};
use crate::scale::StabilityParams;
use crate::smoothing::{SmoothingProblem, SmoothingReference, SmoothingSpec};

/// Share of failed cells above which a study is reported as failed.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `α = δ²`.
    Simple,
    /// `α = δ^{2 − 2γ(u−s)/(u+a)}`.
    Apriori,
    /// `α_n = 2^{−n}` until the residual is at most `τδ`.
    Discrepancy,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Simple, Rule::Apriori, Rule::Discrepancy];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Simple => "simple",
            Rule::Apriori => "apriori",
            Rule::Discrepancy => "discrepancy",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Rule::Simple),
            "apriori" => Ok(Rule::Apriori),
            "discrepancy" => Ok(Rule::Discrepancy),
            other => Err(Error::Parameter(format!(
                "unknown rule `{other}` (expected simple, apriori or discrepancy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyProblem {
    Smoothing {
        spec: SmoothingSpec,
        reference: SmoothingReference,
    },
    ParamId {
        spec: ParamIdSpec,
        reference: ParamIdReference,
    },
}

impl StudyProblem {
    pub fn name(&self) -> &'static str {
        match self {
            StudyProblem::Smoothing { .. } => "smoothing",
            StudyProblem::ParamId { .. } => "param_id",
        }
    }

    pub fn reference_name(&self) -> String {
        match self {
            StudyProblem::Smoothing { reference, .. } => reference.to_string(),
            StudyProblem::ParamId { reference, .. } => reference.to_string(),
        }
    }

    pub fn s(&self) -> f64 {
        match self {
            StudyProblem::Smoothing { spec, .. } => spec.s,
            StudyProblem::ParamId { spec, .. } => spec.s,
        }
    }

    /// Regularity supremum of the reference solution.
    pub fn u_max(&self) -> f64 {
        match self {
            StudyProblem::Smoothing { reference, .. } => reference.u_max(),
            StudyProblem::ParamId { reference, .. } => reference.u_max(),
        }
    }

    pub fn stability(&self, u: f64, r: f64) -> StabilityParams {
        match self {
            StudyProblem::Smoothing { spec, .. } => spec.stability(u, r),
            StudyProblem::ParamId { spec, .. } => spec.stability(u, r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyConfig {
    pub problem: StudyProblem,
    pub rule: Rule,
    /// Smoothness index used by the a-priori rule and the rate predictions.
    pub u: f64,
    /// `δ_j = delta0 · 2^{−j}` for `j = j_min..=j_max`.
    pub delta0: f64,
    pub j_min: u32,
    pub j_max: u32,
    pub report_norms: Vec<f64>,
    pub repetitions: u32,
    pub seed: u64,
    pub discrepancy: DiscrepancyOptions,
}

impl RateStudyConfig {
    /// Defaults for a problem: `u` at the reference's regularity supremum,
    /// ladders `j = 3..14` (smoothing) and `j = 3..9` (param-id), five repetitions.
    pub fn new(problem: StudyProblem, rule: Rule) -> Self {
        let (j_max, norms) = match problem {
            StudyProblem::Smoothing { .. } => (14, vec![0.0, 1.0]),
            StudyProblem::ParamId { .. } => (9, vec![0.0, 1.0]),
        };
        Self {
            problem,
            rule,
            u: problem.u_max(),
            delta0: 1.0,
            j_min: 3,
            j_max,
            report_norms: norms,
            repetitions: 5,
            seed: 42,
            discrepancy: DiscrepancyOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_max < self.j_min || self.j_max - self.j_min < 4 {
            return Err(Error::Parameter(format!(
                "ladder j = {}..{} needs at least 5 points",
                self.j_min, self.j_max
            )));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::Parameter(format!(
                "delta0 must be positive, got {}",
                self.delta0
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Parameter("repetitions must be >= 1".into()));
        }
        if self.report_norms.is_empty() || self.report_norms.iter().any(|r| !r.is_finite()) {
            return Err(Error::Parameter(
                "report_norms must be a non-empty list of finite indices".into(),
            ));
        }
        if !self.u.is_finite() {
            return Err(Error::Parameter("u must be finite".into()));
        }
        if !(self.discrepancy.tau > 0.0) {
            return Err(Error::Parameter("discrepancy tau must be positive".into()));
        }
        match &self.problem {
            StudyProblem::Smoothing { spec, .. } => spec.validate(),
            StudyProblem::ParamId { spec, .. } => spec.validate(),
        }
    }

    pub fn deltas(&self) -> Vec<f64> {
        (self.j_min..=self.j_max)
            .map(|j| self.delta0 * 0.5f64.powi(j as i32))
            .collect()
    }

    pub fn stability(&self, r: f64) -> StabilityParams {
        self.problem.stability(self.u, r)
    }
}

/// JSON writes non-finite floats as `null`; read them back as NaN.
mod null_as_nan {
    use serde::{Deserialize, Deserializer};

    pub fn scalar<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub fn vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect())
    }
}

/// One noise realization at one ladder point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub j: u32,
    pub rep: u32,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub n_star: Option<usize>,
    /// `‖F(x) − y^δ‖_Y`.
    pub residual_norm: Option<f64>,
    /// `‖x‖_{X_s}`.
    pub penalty_norm: Option<f64>,
    /// Residual at `n* − 1` for the discrepancy rule.
    pub previous_residual: Option<f64>,
    /// `‖x − x†‖_{X_r}` for each reported `r`.
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub r: f64,
    #[serde(deserialize_with = "null_as_nan::vec")]
    pub median_errors: Vec<f64>,
    pub fit: Option<RateFit>,
    /// `γ(u − r)/(u + a)`.
    pub predicted_rate: f64,
    /// Whether `(s, u, r)` lies inside the range covered by the theory.
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    pub problem: String,
    pub reference: String,
    pub rule: Rule,
    pub a: f64,
    pub gamma: f64,
    pub s: f64,
    pub u: f64,
    pub seed: u64,
    pub repetitions: u32,
    pub ladder: Vec<u32>,
    pub deltas: Vec<f64>,
    /// `‖x†‖_{X_s}` of the discretized reference.
    #[serde(deserialize_with = "null_as_nan::scalar")]
    pub reference_norm: f64,
    #[serde(deserialize_with = "null_as_nan::vec")]
    pub median_alphas: Vec<f64>,
    /// Exact exponent for the simple and a-priori rules, fitted for the discrepancy rule.
    #[serde(deserialize_with = "null_as_nan::scalar")]
    pub alpha_exponent: f64,
    pub alpha_fit: Option<RateFit>,
    /// Whether `s ≤ u ≤ 2s + a` holds.
    pub covered: bool,
    pub norms: Vec<NormResult>,
    pub failures: usize,
    pub cells: Vec<CellRecord>,
    pub warnings: Vec<String>,
}

impl RateStudyResult {
    pub fn norm(&self, r: f64) -> Option<&NormResult> {
        self.norms.iter().find(|n| n.r == r)
    }

    pub fn kappa(&self, r: f64) -> Option<f64> {
        self.norm(r).and_then(|n| n.fit).map(|f| f.kappa_hat)
    }
}

struct Instance {
    problem: Box<dyn ForwardProblem + Send>,
    truth: DVector<f64>,
    exact_data: DVector<f64>,
}

fn instantiate(config: &RateStudyConfig, deltas: &[f64]) -> Result<Instance> {
    match config.problem {
        StudyProblem::Smoothing { spec, reference } => {
            let p = SmoothingProblem::new(spec.max_wavenumber)?;
            let truncation = p.truncation_error(reference);
            let smallest = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
            if truncation > 0.1 * smallest {
                return Err(Error::Parameter(format!(
                    "truncation K = {} too coarse: discretization error {truncation:e} is not a decade below the smallest delta {smallest:e}",
                    spec.max_wavenumber
                )));
            }
            let (x, _) = p.reference_solution(reference)?;
            let truth = x.coeffs().clone();
            let exact_data = p.evaluate(&truth)?;
            Ok(Instance {
                problem: Box::new(p),
                truth,
                exact_data,
            })
        }
        StudyProblem::ParamId { spec, reference } => {
            let p = ParamIdProblem::new(spec)?;
            let (c, _) = p.reference_coefficient(reference)?;
            let exact_data = p.evaluate(&c.control)?;
            Ok(Instance {
                problem: Box::new(p),
                truth: c.control,
                exact_data,
            })
        }
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn run_cell(config: &RateStudyConfig, inst: &Instance, j: u32, rep: u32, delta: f64) -> CellRecord {
    let mut record = CellRecord {
        j,
        rep,
        delta,
        alpha: None,
        n_star: None,
        residual_norm: None,
        penalty_norm: None,
        previous_residual: None,
        errors: Vec::new(),
        iterations: 0,
        warnings: Vec::new(),
        failure: None,
    };
    match solve_cell(config, inst, j, rep, delta, &mut record) {
        Ok(()) => record,
        Err(e) => {
            record.failure = Some(e.to_string());
            record
        }
    }
}

fn solve_cell(
    config: &RateStudyConfig,
    inst: &Instance,
    j: u32,
    rep: u32,
    delta: f64,
    record: &mut CellRecord,
) -> Result<()> {
    let problem = inst.problem.as_ref();
    let s = config.problem.s();
    let noise = NoiseModel::new(config.seed).for_cell(j, rep);
    let data = make_noisy_data(problem, &inst.exact_data, delta, noise)?;
    let (x, report) = match config.rule {
        Rule::Simple | Rule::Apriori => {
            let alpha = match config.rule {
                Rule::Simple => simple_alpha(delta),
                _ => apriori_alpha(delta, &config.stability(0.0))?.0,
            };
            record.alpha = Some(alpha);
            let setup = TikhonovSetup::new(problem, alpha, s, &data, delta)?;
            minimize(&setup, &problem.initial_guess(&data))?
        }
        Rule::Discrepancy => {
            let out = discrepancy_run(problem, &data, delta, s, config.discrepancy)?;
            record.alpha = Some(out.alpha);
            record.n_star = Some(out.n_star);
            if out.n_star > 0 {
                record.previous_residual = Some(out.residuals[out.n_star - 1]);
            }
            (out.x, out.report)
        }
    };
    record.residual_norm = Some(report.residual_norm);
    record.penalty_norm = Some(report.penalty_norm);
    record.iterations = report.iterations;
    record.warnings = report.warnings;
    let err = problem.to_element(&(&x - &inst.truth))?;
    record.errors = config.report_norms.iter().map(|&r| err.norm(r)).collect();
    Ok(())
}

/// Runs every `(δ_j, repetition)` cell, aggregates by median and fits rates.
pub fn run_study(config: &RateStudyConfig) -> Result<RateStudyResult> {
    config.validate()?;
    let deltas = config.deltas();
    let ladder: Vec<u32> = (config.j_min..=config.j_max).collect();
    let inst = instantiate(config, &deltas)?;
    let s = config.problem.s();
    let reference_norm = inst.problem.penalty_norm(&inst.truth, s)?;

    let jobs: Vec<(u32, u32, f64)> = ladder
        .iter()
        .zip(&deltas)
        .flat_map(|(&j, &d)| (0..config.repetitions).map(move |rep| (j, rep, d)))
        .collect();
    let cells: Vec<CellRecord> = jobs
        .par_iter()
        .map(|&(j, rep, delta)| run_cell(config, &inst, j, rep, delta))
        .collect();

    let failures = cells.iter().filter(|c| c.failure.is_some()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * cells.len() as f64 {
        let first = cells.iter().find_map(|c| c.failure.clone()).unwrap_or_default();
        return Err(Error::StudyFailed {
            failed: failures,
            total: cells.len(),
            first,
        });
    }

    let per_j = |j: u32| cells.iter().filter(move |c| c.j == j && c.failure.is_none());
    let median_alphas: Vec<f64> = ladder
        .iter()
        .map(|&j| median(&mut per_j(j).filter_map(|c| c.alpha).collect::<Vec<_>>()).unwrap_or(f64::NAN))
        .collect();

    let sp = config.stability(0.0);
    let mut warnings = Vec::new();
    let apriori = apriori_exponent(&sp)?;
    for v in &apriori.violations {
        warnings.push(format!("not covered by the theory: {v}"));
    }

    let mut norms = Vec::new();
    for (k, &r) in config.report_norms.iter().enumerate() {
        let median_errors: Vec<f64> = ladder
            .iter()
            .map(|&j| median(&mut per_j(j).map(|c| c.errors[k]).collect::<Vec<_>>()).unwrap_or(f64::NAN))
            .collect();
        let fit = match fit_rate(&deltas, &median_errors) {
            Ok(f) => Some(f),
            Err(e) => {
                warnings.push(format!("no rate fit for r = {r}: {e}"));
                None
            }
        };
        let rate = theoretical_rate(&config.stability(r))?;
        norms.push(NormResult {
            r,
            median_errors,
            fit,
            predicted_rate: rate.value,
            covered: rate.covered() && apriori.covered(),
        });
    }

    let alpha_fit = fit_rate(&deltas, &median_alphas).ok();
    let alpha_exponent = match config.rule {
        Rule::Simple => 2.0,
        Rule::Apriori => apriori.value,
        Rule::Discrepancy => alpha_fit.map(|f| f.kappa_hat).unwrap_or(f64::NAN),
    };

    let mut seen = std::collections::BTreeSet::new();
    for c in &cells {
        for w in &c.warnings {
            if seen.insert(w.clone()) {
                warnings.push(format!("j = {}: {w}", c.j));
            }
        }
    }

    Ok(RateStudyResult {
        problem: config.problem.name().into(),
        reference: config.problem.reference_name(),
        rule: config.rule,
        a: sp.a,
        gamma: sp.gamma,
        s,
        u: config.u,
        seed: config.seed,
        repetitions: config.repetitions,
        ladder,
        deltas,
        reference_norm,
        median_alphas,
        alpha_exponent,
        alpha_fit,
        covered: apriori.covered(),
        norms,
        failures,
        cells,
        warnings,
    })
}
