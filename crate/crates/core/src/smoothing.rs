//! Periodic data smoothing: the identity `T f = f` from `H^0_per(0, 2π)` into the
//! data space `H^{-1}_per(0, 2π)`.
//!
//! Signals live in the real orthonormal Fourier basis of the scale built by
//! [`build_fourier_scale`]; parameters and observations are both spectral
//! coefficient vectors. The observation inner product is the `X_{-1}` one, so noise
//! is measured in `H^{-1}`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ForwardProblem;
use crate::scale::{build_fourier_scale, cos_index, sin_index, ScaleElement, SpectralScale, StabilityParams};
use crate::special::bessel_j1;

pub const PERIOD: f64 = 2.0 * PI;

/// Truncation used by the rate studies.
pub const DEFAULT_MAX_WAVENUMBER: usize = 2048;

/// Which conditional stability estimate is assumed for the smoothing operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVariant {
    /// `‖f₁−f₂‖_{-1} ≤ ‖Tf₁−Tf₂‖_{-1}`: `a = 1`, `γ = 1`.
    LipschitzA1,
    /// `‖f₁−f₂‖_0 ≤ R(ρ)‖Tf₁−Tf₂‖_{-1}^{1/2}`: `a = 0`, `γ = 1/2`, needs `s ≥ 1`.
    HoelderA0,
}

impl StabilityVariant {
    pub fn a(self) -> f64 {
        match self {
            StabilityVariant::LipschitzA1 => 1.0,
            StabilityVariant::HoelderA0 => 0.0,
        }
    }

    pub fn gamma(self) -> f64 {
        match self {
            StabilityVariant::LipschitzA1 => 1.0,
            StabilityVariant::HoelderA0 => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSpec {
    pub max_wavenumber: usize,
    pub s: f64,
    pub variant: StabilityVariant,
}

impl SmoothingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.max_wavenumber < 1 {
            return Err(Error::Parameter("smoothing truncation K must be >= 1".into()));
        }
        if self.variant == StabilityVariant::HoelderA0 && self.s < 1.0 {
            return Err(Error::Parameter(format!(
                "the Hölder stability variant requires s >= 1, got s = {}",
                self.s
            )));
        }
        Ok(())
    }

    pub fn stability(&self, u: f64, r: f64) -> StabilityParams {
        StabilityParams::new(self.variant.a(), self.variant.gamma(), self.s, u, r)
    }
}

/// Reference solutions of increasing regularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingReference {
    /// 0 on `(0, π)`, 1 on `(π, 2π)`.
    Step,
    /// `√(t(2π − t))`.
    SqrtBump,
    /// `t` on `(0, π)`, `2π − t` on `(π, 2π)`.
    Hat,
}

impl SmoothingReference {
    pub const ALL: [SmoothingReference; 3] = [Self::Step, Self::SqrtBump, Self::Hat];

    /// Supremum of the `u` with `f† ∈ H^u_per` (not attained).
    pub fn u_max(self) -> f64 {
        match self {
            Self::Step => 0.5,
            Self::SqrtBump => 1.0,
            Self::Hat => 1.5,
        }
    }

    pub fn from_u(u: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|r| (r.u_max() - u).abs() < 1e-9)
    }

    pub fn eval(self, t: f64) -> f64 {
        match self {
            Self::Step => {
                if t < PI {
                    0.0
                } else {
                    1.0
                }
            }
            Self::SqrtBump => (t * (PERIOD - t)).max(0.0).sqrt(),
            Self::Hat => {
                if t < PI {
                    t
                } else {
                    PERIOD - t
                }
            }
        }
    }

    /// Orthonormal-basis coefficients `(cos, sin)` at wavenumber `k`, from the
    /// analytic Fourier integrals. For `k = 0` the first entry is the constant mode.
    pub fn coefficient(self, k: usize) -> (f64, f64) {
        let sqrt_pi = PI.sqrt();
        let sqrt_2pi = PERIOD.sqrt();
        if k == 0 {
            let integral = match self {
                Self::Step => PI,
                Self::SqrtBump => PI * PI * PI / 2.0,
                Self::Hat => PI * PI,
            };
            return (integral / sqrt_2pi, 0.0);
        }
        let kf = k as f64;
        let odd = k % 2 == 1;
        match self {
            Self::Step => (0.0, if odd { -2.0 / (kf * sqrt_pi) } else { 0.0 }),
            Self::Hat => (if odd { -4.0 / (kf * kf * sqrt_pi) } else { 0.0 }, 0.0),
            Self::SqrtBump => {
                // ∫ √(t(2π−t)) cos kt dt = π² (−1)^k J₁(kπ) / k.
                let sign = if odd { -1.0 } else { 1.0 };
                (PI * PI * sign * bessel_j1(kf * PI) / kf / sqrt_pi, 0.0)
            }
        }
    }
}

impl fmt::Display for SmoothingReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Step => "step",
            Self::SqrtBump => "sqrt_bump",
            Self::Hat => "hat",
        })
    }
}

impl FromStr for SmoothingReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Self::Step),
            "sqrt_bump" => Ok(Self::SqrtBump),
            "hat" => Ok(Self::Hat),
            other => Err(Error::Parameter(format!(
                "unknown smoothing reference `{other}` (expected step, sqrt_bump or hat)"
            ))),
        }
    }
}

/// A 2π-periodic signal truncated at wavenumber `K`.
#[derive(Debug, Clone)]
pub struct PeriodicSignal {
    pub element: ScaleElement,
}

impl PeriodicSignal {
    pub fn coeffs(&self) -> &DVector<f64> {
        self.element.coeffs()
    }
}

#[derive(Debug, Clone)]
pub struct SmoothingProblem {
    scale: Arc<SpectralScale>,
    max_wavenumber: usize,
}

impl SmoothingProblem {
    pub fn new(max_wavenumber: usize) -> Result<Self> {
        let scale = Arc::new(build_fourier_scale(max_wavenumber as i64, PERIOD)?);
        Ok(Self { scale, max_wavenumber })
    }

    pub fn max_wavenumber(&self) -> usize {
        self.max_wavenumber
    }

    pub fn scale(&self) -> &Arc<SpectralScale> {
        &self.scale
    }

    pub fn signal(&self, coeffs: DVector<f64>) -> Result<PeriodicSignal> {
        Ok(PeriodicSignal {
            element: ScaleElement::new(coeffs, self.scale.clone())?,
        })
    }

    /// `T f = f`.
    pub fn forward(&self, f: &PeriodicSignal) -> PeriodicSignal {
        f.clone()
    }

    /// Data-space norm `‖g‖_{-1}`.
    pub fn y_norm(&self, g: &PeriodicSignal) -> f64 {
        g.element.norm(-1.0)
    }

    /// Exact minimizer of `‖f − d‖²_{-1} + α‖f‖²_s`: `f_k = d_k / (1 + α λ_k^{s+1})`.
    pub fn tikhonov_closed_form(&self, data: &PeriodicSignal, alpha: f64, s: f64) -> Result<PeriodicSignal> {
        let coeffs = closed_form_coeffs(&self.scale, data.coeffs(), alpha, s)?;
        self.signal(coeffs)
    }

    pub fn functional(&self, f: &PeriodicSignal, data: &PeriodicSignal, alpha: f64, s: f64) -> Result<f64> {
        let residual = f.element.sub(&data.element)?;
        Ok(residual.norm(-1.0).powi(2) + alpha * f.element.norm(s).powi(2))
    }

    /// Truncated expansion of a reference solution and its regularity supremum.
    pub fn reference_solution(&self, kind: SmoothingReference) -> Result<(PeriodicSignal, f64)> {
        let mut c = DVector::zeros(self.scale.dim());
        c[0] = kind.coefficient(0).0;
        for k in 1..=self.max_wavenumber {
            let (ck, sk) = kind.coefficient(k);
            c[cos_index(k)] = ck;
            c[sin_index(k)] = sk;
        }
        Ok((self.signal(c)?, kind.u_max()))
    }

    /// `‖f† − P_K f†‖_{-1}`, the truncation error in the data norm, summed over
    /// `K < k ≤ 16K`; the remainder beyond is below 1e-3 of the result for all kinds.
    pub fn truncation_error(&self, kind: SmoothingReference) -> f64 {
        let k0 = self.max_wavenumber;
        (k0 + 1..=16 * k0.max(1))
            .map(|k| {
                let (c, s) = kind.coefficient(k);
                (c * c + s * s) / (1.0 + (k * k) as f64)
            })
            .sum::<f64>()
            .sqrt()
    }
}

fn closed_form_coeffs(scale: &SpectralScale, data: &DVector<f64>, alpha: f64, s: f64) -> Result<DVector<f64>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if data.len() != scale.dim() {
        return Err(Error::Dimension {
            expected: scale.dim(),
            got: data.len(),
        });
    }
    if alpha == 0.0 {
        return Ok(data.clone());
    }
    let w = scale.powers(s + 1.0)?;
    Ok(DVector::from_iterator(
        data.len(),
        data.iter().zip(w.iter()).map(|(d, w)| d / (1.0 + alpha * w)),
    ))
}

impl ForwardProblem for SmoothingProblem {
    fn param_dim(&self) -> usize {
        self.scale.dim()
    }

    fn obs_dim(&self) -> usize {
        self.scale.dim()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.scale.dim() {
            return Err(Error::Dimension {
                expected: self.scale.dim(),
                got: x.len(),
            });
        }
        Ok(x.clone())
    }

    fn jacobian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.scale.dim();
        Ok(DMatrix::identity(n, n))
    }

    fn obs_gram_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().zip(self.scale.eigenvalues()).map(|(x, l)| x / l))
    }

    fn adjoint_apply(&self, _x: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.obs_gram_apply(r))
    }

    fn to_element(&self, x: &DVector<f64>) -> Result<ScaleElement> {
        ScaleElement::new(x.clone(), self.scale.clone())
    }

    fn penalty_apply(&self, x: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        Ok(x.component_mul(&self.scale.powers(s)?))
    }

    fn penalty_gram(&self, s: f64) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&self.scale.powers(s)?))
    }

    fn closed_form(&self, data: &DVector<f64>, alpha: f64, s: f64) -> Option<Result<DVector<f64>>> {
        Some(closed_form_coeffs(&self.scale, data, alpha, s))
    }

    fn initial_guess(&self, data: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(data.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(p: &SmoothingProblem, rng: &mut ChaCha8Rng, decay: f64) -> PeriodicSignal {
        let c = DVector::from_iterator(
            p.scale().dim(),
            p.scale()
                .eigenvalues()
                .iter()
                .map(|l| rng.random_range(-1.0..1.0) * l.powf(-decay)),
        );
        p.signal(c).unwrap()
    }

    #[test]
    fn forward_and_y_norm() {
        let p = SmoothingProblem::new(8).unwrap();
        let zero = p.signal(DVector::zeros(17)).unwrap();
        assert_eq!(p.forward(&zero).coeffs(), zero.coeffs());

        let mut c = DVector::zeros(17);
        c[0] = 1.0;
        assert!((p.y_norm(&p.signal(c).unwrap()) - 1.0).abs() < 1e-15);
        let mut c = DVector::zeros(17);
        c[cos_index(1)] = 1.0;
        assert!((p.y_norm(&p.signal(c).unwrap()) - 0.5f64.sqrt()).abs() < 1e-15);
        for k in 1..=8usize {
            let mut c = DVector::zeros(17);
            c[sin_index(k)] = 1.0;
            let f = p.signal(c).unwrap();
            let y = p.forward(&f);
            assert_eq!(y.coeffs(), f.coeffs());
            assert!((p.y_norm(&y) - (1.0 + (k * k) as f64).powf(-0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_sided_estimate_is_equality() {
        let p = SmoothingProblem::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let f = random_signal(&p, &mut rng, 0.0);
            let tf = p.forward(&f);
            assert_eq!(p.y_norm(&tf), f.element.norm(-1.0));
        }
    }

    #[test]
    fn hoelder_stability_realized() {
        let p = SmoothingProblem::new(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let f1 = random_signal(&p, &mut rng, 0.75);
            let f2 = random_signal(&p, &mut rng, 0.75);
            let diff = f1.element.sub(&f2.element).unwrap();
            let lhs = diff.norm(0.0);
            let rhs = (f1.element.norm(1.0) + f2.element.norm(1.0)).sqrt() * diff.norm(-1.0).sqrt();
            assert!(lhs <= rhs + 1e-10);
        }
    }

    #[test]
    fn closed_form_cases() {
        let p = SmoothingProblem::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_signal(&p, &mut rng, 0.0);
        let f = p.tikhonov_closed_form(&d, 0.0, 1.0).unwrap();
        assert_eq!(f.coeffs(), d.coeffs());
        assert!(matches!(
            p.tikhonov_closed_form(&d, -1.0, 0.0),
            Err(Error::Parameter(_))
        ));

        let mut prev = f64::INFINITY;
        for alpha in [1e-2, 1e-1, 1.0, 1e1, 1e3, 1e6] {
            let n = p.tikhonov_closed_form(&d, alpha, 0.0).unwrap().element.norm(0.0);
            assert!(n < prev);
            prev = n;
        }
        assert!(prev < 1e-5);

        let mut c = DVector::zeros(9);
        c[0] = 1.0;
        let d0 = p.signal(c).unwrap();
        let f0 = p.tikhonov_closed_form(&d0, 1.0, 0.0).unwrap();
        assert!((f0.coeffs()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_beats_perturbations() {
        let p = SmoothingProblem::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random_signal(&p, &mut rng, 0.0);
        for &(alpha, s) in &[(1e-2, 0.0), (0.3, 1.0), (1e-4, 2.0)] {
            let f = p.tikhonov_closed_form(&d, alpha, s).unwrap();
            let best = p.functional(&f, &d, alpha, s).unwrap();
            for _ in 0..50 {
                let dir = random_signal(&p, &mut rng, 0.0);
                let step = dir.coeffs() * (1e-3 / dir.coeffs().norm());
                let probe = p.signal(f.coeffs() + step).unwrap();
                assert!(best <= p.functional(&probe, &d, alpha, s).unwrap());
            }
        }
    }

    #[test]
    fn step_mean_coefficient() {
        let (c0, _) = SmoothingReference::Step.coefficient(0);
        assert!((c0 - 0.5 * PERIOD.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hat_cosines_decay_like_inverse_square() {
        // Even cosine coefficients of the hat vanish; compare odd neighbours.
        let c3 = SmoothingReference::Hat.coefficient(3).0 * 9.0;
        let c7 = SmoothingReference::Hat.coefficient(7).0 * 49.0;
        assert!(((c3 - c7) / c3).abs() < 0.1);
        assert_eq!(SmoothingReference::Hat.coefficient(4).0, 0.0);
    }

    // Trapezoid rule on a fine grid; accurate for the continuous references, and
    // converges at first order for the step (the jump is sampled symmetrically).
    fn quadrature_coefficient(kind: SmoothingReference, k: usize, n: usize) -> (f64, f64) {
        let h = PERIOD / n as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for j in 0..n {
            let t = j as f64 * h;
            let mut v = kind.eval(t);
            if kind == SmoothingReference::Step && (j == 0 || j == n / 2) {
                v = 0.5;
            }
            if k == 0 {
                c += v / PERIOD.sqrt();
            } else {
                c += v * (k as f64 * t).cos() / PI.sqrt();
                s += v * (k as f64 * t).sin() / PI.sqrt();
            }
        }
        (c * h, s * h)
    }

    #[test]
    fn analytic_coefficients_match_quadrature() {
        for kind in SmoothingReference::ALL {
            for k in [0usize, 1, 2, 3, 6, 11] {
                let (c, s) = kind.coefficient(k);
                let (qc, qs) = quadrature_coefficient(kind, k, 1 << 16);
                let tol = if kind == SmoothingReference::SqrtBump {
                    1e-6
                } else {
                    1e-8
                };
                assert!((c - qc).abs() < tol, "{kind} k={k}: {c} vs {qc}");
                assert!((s - qs).abs() < tol, "{kind} k={k}: {s} vs {qs}");
            }
        }
    }

    #[test]
    fn reference_regularity() {
        for kind in SmoothingReference::ALL {
            let u = kind.u_max();
            let norms = |s: f64| -> Vec<f64> {
                [256usize, 512, 1024]
                    .iter()
                    .map(|&k| {
                        let p = SmoothingProblem::new(k).unwrap();
                        p.reference_solution(kind).unwrap().0.element.norm(s)
                    })
                    .collect()
            };
            let below = norms(u - 0.25);
            assert!(((below[2] - below[1]) / below[1]).abs() < 0.01, "{kind}: {below:?}");
            let above = norms(u + 0.25);
            assert!(
                above[1] > above[0] * 1.01 && above[2] > above[1] * 1.01,
                "{kind}: {above:?}"
            );
            // Tail sums of k^{-1/2}: each doubling adds a fixed fraction of √K.
            let g1 = above[1] * above[1] - above[0] * above[0];
            let g2 = above[2] * above[2] - above[1] * above[1];
            assert!(g2 > 1.2 * g1, "{kind}: increments {g1} {g2}");
        }
    }

    #[test]
    fn truncation_error_decreases() {
        let e1 = SmoothingProblem::new(512)
            .unwrap()
            .truncation_error(SmoothingReference::Step);
        let e2 = SmoothingProblem::new(1024)
            .unwrap()
            .truncation_error(SmoothingReference::Step);
        assert!(e2 < e1 / 2.0);
    }

    #[test]
    fn spec_validation() {
        let spec = SmoothingSpec {
            max_wavenumber: 8,
            s: 0.0,
            variant: StabilityVariant::HoelderA0,
        };
        assert!(spec.validate().is_err());
        assert!(SmoothingSpec { s: 1.0, ..spec }.validate().is_ok());
        assert!(SmoothingSpec {
            max_wavenumber: 0,
            s: 1.0,
            ..spec
        }
        .validate()
        .is_err());
        assert!("ramp".parse::<SmoothingReference>().is_err());
    }
}
