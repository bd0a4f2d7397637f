//! Acceptance criteria. Prints one PASS/FAIL line per criterion (with detail
//! lines above it) and exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hscale::harness::verify::{
    adjoint_identity_error, closed_form_vs_iterative, discrepancy_audit, exact_adjoint, interpolation_worst_ratio,
    jacobian_fd_error, state_convergence_slopes,
};
use hscale::harness::{emit_tables, run_study, RateStudyConfig, RateStudyResult, Rule, StudyProblem, TableFormat};
use hscale::smoothing::DEFAULT_MAX_WAVENUMBER;
use hscale::{ParamIdReference, ParamIdSpec, SmoothingReference, SmoothingSpec, StabilityVariant};

const SMOOTHING_REFS: [SmoothingReference; 3] = [
    SmoothingReference::Step,
    SmoothingReference::SqrtBump,
    SmoothingReference::Hat,
];
const PARAM_REFS: [ParamIdReference; 3] = [
    ParamIdReference::Hat,
    ParamIdReference::TSqrtT,
    ParamIdReference::Parabola,
];

struct Criterion {
    id: u32,
    title: &'static str,
    ok: bool,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, ok: true }
    }

    fn check(&mut self, label: &str, ok: bool, detail: String) {
        println!("    [{}] {label}: {detail}", if ok { "ok" } else { "FAIL" });
        self.ok &= ok;
    }

    fn within(&mut self, label: &str, measured: Option<f64>, target: f64, tol: f64) {
        let ok = measured.is_some_and(|m| (m - target).abs() <= tol);
        let shown = measured.map_or("none".to_string(), |m| format!("{m:.4}"));
        self.check(label, ok, format!("{shown} (target {target} ± {tol})"));
    }

    fn runtime(&mut self, elapsed: Duration, limit: Duration) {
        self.check(
            "runtime",
            elapsed <= limit,
            format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()),
        );
    }

    fn finish(self) -> bool {
        println!(
            "{} criterion {}: {}",
            if self.ok { "PASS" } else { "FAIL" },
            self.id,
            self.title
        );
        self.ok
    }
}

fn smoothing(s: f64, reference: SmoothingReference, rule: Rule) -> RateStudyConfig {
    let spec = SmoothingSpec {
        max_wavenumber: DEFAULT_MAX_WAVENUMBER,
        s,
        variant: StabilityVariant::LipschitzA1,
    };
    RateStudyConfig::new(StudyProblem::Smoothing { spec, reference }, rule)
}

fn param_id(s: f64, reference: ParamIdReference) -> RateStudyConfig {
    let spec = ParamIdSpec {
        s,
        grid_n: 200,
        ..ParamIdSpec::default()
    };
    // Default ladder j = 3..9: six halvings, seven points.
    RateStudyConfig::new(StudyProblem::ParamId { spec, reference }, Rule::Discrepancy)
}

fn run_all(configs: &[RateStudyConfig]) -> Vec<Result<RateStudyResult, String>> {
    configs
        .iter()
        .map(|c| run_study(c).map_err(|e| e.to_string()))
        .collect()
}

fn label(r: &RateStudyResult) -> String {
    format!("{} s={} u={}", r.reference, r.s, r.u)
}

/// A-priori rule on the smoothing problem.
fn criterion_1() -> bool {
    let mut c = Criterion::new(1, "a-priori rates on the smoothing problem");
    let targets = [
        (0.0, [0.41, 0.53, 0.67], [4.0 / 3.0, 1.0, 0.8]),
        (1.0, [0.37, 0.49, 0.64], [8.0 / 3.0, 2.0, 1.6]),
    ];
    let start = Instant::now();
    for (s, kappas, alphas) in targets {
        let configs: Vec<_> = SMOOTHING_REFS.iter().map(|&r| smoothing(s, r, Rule::Apriori)).collect();
        for ((res, kappa), alpha) in run_all(&configs).into_iter().zip(kappas).zip(alphas) {
            match res {
                Ok(r) => {
                    c.within(&format!("{} kappa r=0", label(&r)), r.kappa(0.0), kappa, 0.10);
                    c.check(
                        &format!("{} alpha exponent", label(&r)),
                        (r.alpha_exponent - alpha).abs() <= 1e-12,
                        format!("{:.6} (exact {alpha:.6})", r.alpha_exponent),
                    );
                }
                Err(e) => c.check("study", false, e),
            }
        }
    }
    c.runtime(start.elapsed(), Duration::from_secs(60));
    c.finish()
}

/// Discrepancy rule on the smoothing problem; results are kept for criterion 5.
fn criterion_2(audit: &mut Vec<RateStudyResult>) -> bool {
    let mut c = Criterion::new(2, "discrepancy rates on the smoothing problem");
    let targets = [
        (0.0, [1.26, 1.02, 1.00], [0.36, 0.48, 0.56]),
        (1.0, [2.59, 1.95, 1.48], [0.36, 0.48, 0.58]),
    ];
    let start = Instant::now();
    let mut s0 = Vec::new();
    for (s, alphas, kappas) in targets {
        let configs: Vec<_> = SMOOTHING_REFS
            .iter()
            .map(|&r| smoothing(s, r, Rule::Discrepancy))
            .collect();
        for ((res, alpha), kappa) in run_all(&configs).into_iter().zip(alphas).zip(kappas) {
            match res {
                Ok(r) => {
                    c.within(
                        &format!("{} alpha exponent", label(&r)),
                        Some(r.alpha_exponent),
                        alpha,
                        0.15,
                    );
                    c.within(&format!("{} kappa r=0", label(&r)), r.kappa(0.0), kappa, 0.10);
                    if s == 0.0 {
                        s0.push(r.kappa(0.0));
                    }
                    audit.push(r);
                }
                Err(e) => {
                    c.check("study", false, e);
                    if s == 0.0 {
                        s0.push(None);
                    }
                }
            }
        }
    }
    let saturation = match (s0.get(1).copied().flatten(), s0.get(2).copied().flatten()) {
        (Some(k1), Some(k32)) => Some(k32 - k1),
        _ => None,
    };
    c.check(
        "saturation s=0: kappa(u=3/2) - kappa(u=1) <= 0.10",
        saturation.is_some_and(|d| d <= 0.10),
        saturation.map_or("none".into(), |d| format!("{d:.4}")),
    );
    c.runtime(start.elapsed(), Duration::from_secs(120));
    c.finish()
}

/// Discrepancy rule on the parameter identification problem.
fn criterion_3(audit: &mut Vec<RateStudyResult>) -> bool {
    let mut c = Criterion::new(3, "discrepancy rates on the parameter identification problem");
    let targets = [
        (1.0, [0.52, 0.54, 0.57], [0.17, 0.18, 0.19]),
        (2.0, [0.64, 0.72, 0.69], [0.22, 0.37, 0.41]),
    ];
    let start = Instant::now();
    for (s, k0, k1) in targets {
        let configs: Vec<_> = PARAM_REFS.iter().map(|&r| param_id(s, r)).collect();
        for ((res, t0), t1) in run_all(&configs).into_iter().zip(k0).zip(k1) {
            match res {
                Ok(r) => {
                    c.within(&format!("{} kappa r=0", label(&r)), r.kappa(0.0), t0, 0.12);
                    c.within(&format!("{} kappa r=1", label(&r)), r.kappa(1.0), t1, 0.12);
                    audit.push(r);
                }
                Err(e) => c.check("study", false, e),
            }
        }
    }
    c.runtime(start.elapsed(), Duration::from_secs(1200));
    c.finish()
}

/// Simple rule α = δ²: residual ≤ √(2+M²)δ and ‖x‖_s ≤ √(2+M²) at every ladder point.
fn criterion_4() -> bool {
    let mut c = Criterion::new(4, "simple-rule bounds on the smoothing problem");
    for s in [0.0, 1.0] {
        let configs: Vec<_> = SMOOTHING_REFS.iter().map(|&r| smoothing(s, r, Rule::Simple)).collect();
        for res in run_all(&configs) {
            let r = match res {
                Ok(r) => r,
                Err(e) => {
                    c.check("study", false, e);
                    continue;
                }
            };
            let bound = (2.0 + r.reference_norm.powi(2)).sqrt();
            let mut worst_res: f64 = 0.0;
            let mut worst_norm: f64 = 0.0;
            let mut ok = true;
            for cell in &r.cells {
                match (cell.residual_norm, cell.penalty_norm) {
                    (Some(res), Some(pen)) => {
                        ok &= res <= bound * cell.delta && pen <= bound;
                        worst_res = worst_res.max(res / (bound * cell.delta));
                        worst_norm = worst_norm.max(pen / bound);
                    }
                    _ => ok = false,
                }
            }
            c.check(
                &label(&r),
                ok,
                format!("max residual/bound {worst_res:.4}, max norm/bound {worst_norm:.4}"),
            );
        }
    }
    c.finish()
}

/// Discrepancy postconditions on every run of criteria 2 and 3, plus the verify-suite audit.
fn criterion_5(studies: &[RateStudyResult]) -> bool {
    let mut c = Criterion::new(5, "discrepancy postconditions");
    for r in studies {
        let m = r.reference_norm;
        let mut ok = true;
        let mut stop: f64 = 0.0;
        let mut prev = f64::INFINITY;
        let mut alpha_ratio = f64::INFINITY;
        for cell in r.cells.iter().filter(|c| c.failure.is_none()) {
            let limit = 4.0 * cell.delta;
            let res = cell.residual_norm.unwrap_or(f64::INFINITY);
            ok &= res <= limit;
            stop = stop.max(res / limit);
            if cell.n_star.is_some_and(|n| n > 0) {
                let p = cell.previous_residual.unwrap_or(0.0);
                ok &= p > limit;
                prev = prev.min(p / limit);
            }
            let a = cell.alpha.unwrap_or(0.0);
            ok &= a >= 7.0 * cell.delta * cell.delta / (m * m);
            alpha_ratio = alpha_ratio.min(a / (7.0 * cell.delta * cell.delta / (m * m)));
        }
        c.check(
            &format!("{} {}", r.problem, label(r)),
            ok,
            format!("max res/4δ {stop:.4}, min prev/4δ {prev:.4}, min α/(7δ²/M²) {alpha_ratio:.3e}"),
        );
    }
    match discrepancy_audit(7) {
        Ok(a) => c.check(
            "diagonal problem audit",
            a.stop_ratio <= 1.0 && a.previous_ratio > 1.0 && a.alpha_ratio >= 1.0,
            format!(
                "{} runs, max res/4δ {:.4}, min prev/4δ {:.4}, min α ratio {:.3e}",
                a.runs, a.stop_ratio, a.previous_ratio, a.alpha_ratio
            ),
        ),
        Err(e) => c.check("diagonal problem audit", false, e.to_string()),
    }
    c.finish()
}

fn criterion_6() -> bool {
    let mut c = Criterion::new(6, "oracle equivalences");
    let start = Instant::now();
    let adj = adjoint_identity_error(&exact_adjoint, 50, 11);
    c.check(
        "adjoint identity, 50 pairs",
        adj.as_ref().is_ok_and(|&e| e <= 1e-10),
        format!("{adj:?} (limit 1e-10)"),
    );
    let fd = jacobian_fd_error(20, 12);
    c.check(
        "Jacobian vs central differences",
        fd.as_ref().is_ok_and(|&e| e <= 1e-6),
        format!("{fd:?} (limit 1e-6)"),
    );
    let cf = closed_form_vs_iterative(13);
    c.check(
        "closed form vs Gauss-Newton",
        cf.as_ref().is_ok_and(|&e| e <= 1e-12),
        format!("{cf:?} (limit 1e-12)"),
    );
    match discrepancy_audit(14) {
        Ok(a) => c.check(
            "discrepancy n* vs brute-force sweep",
            a.sweep_mismatches == 0,
            format!("{} mismatches in {} runs", a.sweep_mismatches, a.runs),
        ),
        Err(e) => c.check("discrepancy n* vs brute-force sweep", false, e.to_string()),
    }
    c.runtime(start.elapsed(), Duration::from_secs(30));
    c.finish()
}

fn criterion_7() -> bool {
    let mut c = Criterion::new(7, "numerical-analysis checks");
    let ratio = interpolation_worst_ratio(200, 15);
    c.check(
        "interpolation inequality, 200 elements x all triples",
        ratio.as_ref().is_ok_and(|&r| r <= 1.0 + 1e-10),
        format!("{ratio:?} (limit 1 + 1e-10)"),
    );
    match state_convergence_slopes() {
        Ok(slopes) => c.check(
            "state convergence slopes, 4 refinements",
            slopes.len() == 4 && slopes.iter().all(|s| (s - 2.0).abs() <= 0.1),
            format!("{slopes:.4?} (target 2.0 ± 0.1)"),
        ),
        Err(e) => c.check("state convergence", false, e.to_string()),
    }
    c.finish()
}

fn criterion_8() -> bool {
    let mut c = Criterion::new(8, "determinism");
    let mut configs = vec![smoothing(1.0, SmoothingReference::Hat, Rule::Discrepancy)];
    let mut p = param_id(1.0, ParamIdReference::Parabola);
    p.repetitions = 2;
    if let StudyProblem::ParamId { spec, .. } = &mut p.problem {
        spec.grid_n = 60;
    }
    configs.push(p);
    let render = || -> Result<(String, String), String> {
        let results: Result<Vec<_>, _> = configs.iter().map(run_study).collect();
        let results = results.map_err(|e| e.to_string())?;
        let csv = emit_tables(&results, TableFormat::Csv).map_err(|e| e.to_string())?;
        let json = emit_tables(&results, TableFormat::Json).map_err(|e| e.to_string())?;
        Ok((csv, json))
    };
    match (render(), render()) {
        (Ok(a), Ok(b)) => {
            c.check("CSV byte-identical", a.0 == b.0, format!("{} bytes", a.0.len()));
            c.check("JSON byte-identical", a.1 == b.1, format!("{} bytes", a.1.len()));
        }
        (Err(e), _) | (_, Err(e)) => c.check("render", false, e),
    }
    c.finish()
}

fn main() -> ExitCode {
    let mut audit = Vec::new();
    let results = [
        criterion_1(),
        criterion_2(&mut audit),
        criterion_3(&mut audit),
        criterion_4(),
        criterion_5(&audit),
        criterion_6(),
        criterion_7(),
        criterion_8(),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
