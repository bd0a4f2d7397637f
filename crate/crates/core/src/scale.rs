//! Discrete Hilbert scales.
//!
//! A scale is stored by its spectral decomposition: a positive, ascending list of
//! eigenvalues `λ_i` of the generator together with the transform from primal
//! coordinates to coefficients in an `X_0`-orthonormal eigenbasis. Every scale
//! norm is then a weighted euclidean norm,
//!
//! ```text
//! ‖x‖²_{X_s} = Σ_i λ_i^s ĉ_i²
//! ```
//!
//! Two constructions are provided: the periodic Fourier scale with `λ = 1 + k²`
//! and a scale on an interval obtained from a symmetric-definite matrix pencil
//! `(A, M)` of Gram matrices.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported Fourier truncation.
pub const MAX_WAVENUMBER: usize = 4096;
/// Largest supported pencil dimension.
pub const MAX_PENCIL_DIM: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleLabel {
    FourierPeriodic,
    PencilInterval,
}

impl fmt::Display for ScaleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleLabel::FourierPeriodic => f.write_str("fourier-periodic"),
            ScaleLabel::PencilInterval => f.write_str("pencil-interval"),
        }
    }
}

#[derive(Debug, Clone)]
enum Transform {
    /// Primal coordinates are samples on the uniform `2K+1` point grid of `[0, period)`.
    Fourier { max_wavenumber: usize, period: f64 },
    /// `to = Φᵀ M`, `from = Φ`.
    Dense { to: DMatrix<f64>, from: DMatrix<f64> },
}

/// Diagonalized generator of a Hilbert scale.
#[derive(Debug, Clone)]
pub struct SpectralScale {
    eigenvalues: Vec<f64>,
    transform: Transform,
    label: ScaleLabel,
}

impl SpectralScale {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn label(&self) -> ScaleLabel {
        self.label
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    /// `λ_i^{exponent}` for every spectral index, failing on overflow or underflow.
    pub fn powers(&self, exponent: f64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = lambda.powf(exponent);
            if !w.is_finite() || w == 0.0 {
                return Err(Error::Range {
                    index: i,
                    eigenvalue: lambda,
                    exponent,
                });
            }
            out[i] = w;
        }
        Ok(out)
    }

    /// Maps primal coordinates to spectral coefficients.
    pub fn to_spectral(&self, primal: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(primal.len())?;
        match &self.transform {
            Transform::Fourier { max_wavenumber, period } => {
                fourier_analysis(primal.as_slice(), *max_wavenumber, *period)
            }
            Transform::Dense { to, .. } => Ok(to * primal),
        }
    }

    /// Inverse of [`SpectralScale::to_spectral`].
    pub fn from_spectral(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(coeffs.len())?;
        match &self.transform {
            Transform::Fourier { max_wavenumber, period } => {
                fourier_synthesis(coeffs.as_slice(), *max_wavenumber, self.dim(), *period)
            }
            Transform::Dense { from, .. } => Ok(from * coeffs),
        }
    }

    /// Gram matrix of the `X_s` inner product in primal coordinates: `Tᵀ diag(λ^s) T`.
    pub fn primal_gram(&self, s: f64) -> Result<DMatrix<f64>> {
        let w = self.powers(s)?;
        let t = self.to_spectral_matrix()?;
        let mut weighted = t.clone();
        for (mut row, wi) in weighted.row_iter_mut().zip(w.iter()) {
            row *= *wi;
        }
        let mut g = t.transpose() * weighted;
        symmetrize(&mut g);
        Ok(g)
    }

    fn to_spectral_matrix(&self) -> Result<DMatrix<f64>> {
        match &self.transform {
            Transform::Dense { to, .. } => Ok(to.clone()),
            Transform::Fourier { .. } => {
                let n = self.dim();
                let mut t = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = DVector::zeros(n);
                    e[j] = 1.0;
                    t.set_column(j, &self.to_spectral(&e)?);
                }
                Ok(t)
            }
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Real trigonometric basis `{1, cos kt, sin kt : 1 ≤ k ≤ K}`, orthonormal on `(0, period)`.
///
/// Spectral coefficients are ordered `[const, cos 1, sin 1, cos 2, sin 2, ...]` so the
/// eigenvalues `(1, 2, 2, 5, 5, ...)` ascend.
pub fn build_fourier_scale(max_wavenumber: i64, period: f64) -> Result<SpectralScale> {
    if max_wavenumber < 0 {
        return Err(Error::Parameter(format!(
            "max wavenumber must be non-negative, got {max_wavenumber}"
        )));
    }
    let k_max = max_wavenumber as usize;
    if k_max > MAX_WAVENUMBER {
        return Err(Error::Parameter(format!(
            "max wavenumber {k_max} exceeds cap {MAX_WAVENUMBER}"
        )));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Parameter(format!("period must be positive, got {period}")));
    }
    let mut eigenvalues = Vec::with_capacity(2 * k_max + 1);
    eigenvalues.push(1.0);
    for k in 1..=k_max {
        let lambda = 1.0 + (k * k) as f64;
        eigenvalues.push(lambda);
        eigenvalues.push(lambda);
    }
    Ok(SpectralScale {
        eigenvalues,
        transform: Transform::Fourier {
            max_wavenumber: k_max,
            period,
        },
        label: ScaleLabel::FourierPeriodic,
    })
}

/// Spectral index of the cosine mode with wavenumber `k` (`k = 0` is the constant).
pub fn cos_index(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        2 * k - 1
    }
}

/// Spectral index of the sine mode with wavenumber `k ≥ 1`.
pub fn sin_index(k: usize) -> usize {
    2 * k
}

/// Orthonormal-basis coefficients of a periodic function from `N ≥ 2K+1` uniform samples
/// `f(j·period/N)`, `j = 0..N`. Exact for trigonometric polynomials of degree `< N - K`.
pub fn fourier_analysis(samples: &[f64], max_wavenumber: usize, period: f64) -> Result<DVector<f64>> {
    let n = samples.len();
    if n < 2 * max_wavenumber + 1 {
        return Err(Error::Dimension {
            expected: 2 * max_wavenumber + 1,
            got: n,
        });
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidElement(format!("non-finite sample at index {i}")));
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut out = DVector::zeros(2 * max_wavenumber + 1);
    let nf = n as f64;
    out[0] = period.sqrt() / nf * buf[0].re;
    let scale = (2.0 * period).sqrt() / nf;
    for k in 1..=max_wavenumber {
        out[cos_index(k)] = scale * buf[k].re;
        out[sin_index(k)] = -scale * buf[k].im;
    }
    Ok(out)
}

/// Samples of the trigonometric polynomial with the given orthonormal coefficients on
/// `n_points` uniform nodes of `[0, period)`.
pub fn fourier_synthesis(coeffs: &[f64], max_wavenumber: usize, n_points: usize, period: f64) -> Result<DVector<f64>> {
    if coeffs.len() != 2 * max_wavenumber + 1 {
        return Err(Error::Dimension {
            expected: 2 * max_wavenumber + 1,
            got: coeffs.len(),
        });
    }
    if n_points < 2 * max_wavenumber + 1 {
        return Err(Error::Dimension {
            expected: 2 * max_wavenumber + 1,
            got: n_points,
        });
    }
    let mut buf = vec![Complex::new(0.0, 0.0); n_points];
    let amp = (2.0 / period).sqrt();
    for k in 1..=max_wavenumber {
        buf[k] = Complex::new(amp * coeffs[cos_index(k)], -amp * coeffs[sin_index(k)]);
    }
    FftPlanner::new().plan_fft_inverse(n_points).process(&mut buf);
    let mean = coeffs[0] / period.sqrt();
    Ok(DVector::from_iterator(n_points, buf.iter().map(|z| mean + z.re)))
}

/// Scale on an interval from the generalized eigenproblem `A φ = μ M φ` with `λ = μ`.
///
/// `scale_norm(v, 0)² = vᵀ M v` and `scale_norm(v, 1)² = vᵀ A v`.
pub fn build_pencil_scale(mass_gram: &DMatrix<f64>, smooth_gram: &DMatrix<f64>) -> Result<SpectralScale> {
    build_pencil_scale_with_order(mass_gram, smooth_gram, 1.0)
}

/// As [`build_pencil_scale`], but `smooth_gram` is taken to be the Gram matrix of
/// `X_order`: the scale eigenvalues are `λ = μ^{1/order}`, so that
/// `scale_norm(v, order)² = vᵀ A v`.
pub fn build_pencil_scale_with_order(
    mass_gram: &DMatrix<f64>,
    smooth_gram: &DMatrix<f64>,
    order: f64,
) -> Result<SpectralScale> {
    let n = mass_gram.nrows();
    if mass_gram.ncols() != n || smooth_gram.nrows() != n || smooth_gram.ncols() != n {
        return Err(Error::MatrixProperty(format!(
            "pencil matrices must be square of equal size, got {}x{} and {}x{}",
            mass_gram.nrows(),
            mass_gram.ncols(),
            smooth_gram.nrows(),
            smooth_gram.ncols()
        )));
    }
    if n == 0 || n > MAX_PENCIL_DIM {
        return Err(Error::Parameter(format!(
            "pencil dimension {n} outside 1..={MAX_PENCIL_DIM}"
        )));
    }
    if !(order.is_finite() && order > 0.0) {
        return Err(Error::Parameter(format!("pencil order must be positive, got {order}")));
    }
    check_symmetric(mass_gram, "mass")?;
    check_symmetric(smooth_gram, "smooth")?;

    let chol = mass_gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MatrixProperty("mass Gram is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(smooth_gram)
        .ok_or_else(|| Error::MatrixProperty("singular Cholesky factor".into()))?;
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::MatrixProperty("singular Cholesky factor".into()))?;
    symmetrize(&mut c);

    let (mu, psi) = if is_diagonal(&c) {
        (c.diagonal(), DMatrix::identity(n, n))
    } else {
        let eig = c.symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let (mu_sorted, phi) = sorted_modes(&l, mu, psi)?;
    if mu_sorted[0] <= 0.0 {
        return Err(Error::MatrixProperty(format!(
            "smooth Gram is not positive definite (smallest pencil eigenvalue {:e})",
            mu_sorted[0]
        )));
    }
    finish_pencil(mass_gram, smooth_gram, mu_sorted, phi, order)
}

/// Pencil scale for `A = M + GᵀG` given the factor `G` instead of `A`.
///
/// The eigenvalues `μ = 1 + σ²` come from the singular values `σ` of `G L⁻ᵀ`
/// (`M = L Lᵀ`), so modes near `μ = 1` keep relative accuracy even when the
/// spectrum spans many decades, and `μ ≥ 1` holds exactly.
pub fn build_pencil_scale_factored(
    mass_gram: &DMatrix<f64>,
    factor: &DMatrix<f64>,
    order: f64,
) -> Result<SpectralScale> {
    let n = mass_gram.nrows();
    if mass_gram.ncols() != n || factor.ncols() != n {
        return Err(Error::MatrixProperty(format!(
            "mass Gram {}x{} does not match factor {}x{}",
            mass_gram.nrows(),
            mass_gram.ncols(),
            factor.nrows(),
            factor.ncols()
        )));
    }
    if n == 0 || n > MAX_PENCIL_DIM {
        return Err(Error::Parameter(format!(
            "pencil dimension {n} outside 1..={MAX_PENCIL_DIM}"
        )));
    }
    if !(order.is_finite() && order > 0.0) {
        return Err(Error::Parameter(format!("pencil order must be positive, got {order}")));
    }
    check_symmetric(mass_gram, "mass")?;
    if factor.iter().any(|v| !v.is_finite()) {
        return Err(Error::MatrixProperty("factor has non-finite entries".into()));
    }

    let chol = mass_gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MatrixProperty("mass Gram is not positive definite".into()))?;
    let l = chol.l();
    let rows = factor.nrows().max(n);
    let mut g = DMatrix::zeros(rows, n);
    let reduced = l
        .solve_lower_triangular(&factor.transpose())
        .ok_or_else(|| Error::MatrixProperty("singular Cholesky factor".into()))?
        .transpose();
    g.view_mut((0, 0), (factor.nrows(), n)).copy_from(&reduced);
    let svd = g.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numeric {
        message: "singular value decomposition failed".into(),
        residual: f64::NAN,
    })?;
    let mu = svd.singular_values.map(|sv| 1.0 + sv * sv);
    let (mu_sorted, phi) = sorted_modes(&l, mu, v_t.transpose())?;
    let smooth_gram = mass_gram + factor.tr_mul(factor);
    finish_pencil(mass_gram, &smooth_gram, mu_sorted, phi, order)
}

/// Sorts modes by eigenvalue and maps eigenvectors of the reduced problem back: `Φ = L⁻ᵀ Ψ`.
fn sorted_modes(l: &DMatrix<f64>, mu: DVector<f64>, psi: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = mu.len();
    let mut order_idx: Vec<usize> = (0..n).collect();
    order_idx.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));
    let mu_sorted = DVector::from_iterator(n, order_idx.iter().map(|&i| mu[i]));
    let psi_sorted = DMatrix::from_columns(&order_idx.iter().map(|&i| psi.column(i)).collect::<Vec<_>>());
    let phi = l
        .transpose()
        .solve_upper_triangular(&psi_sorted)
        .ok_or_else(|| Error::MatrixProperty("singular Cholesky factor".into()))?;
    Ok((mu_sorted, phi))
}

fn finish_pencil(
    mass_gram: &DMatrix<f64>,
    smooth_gram: &DMatrix<f64>,
    mu_sorted: DVector<f64>,
    phi: DMatrix<f64>,
    order: f64,
) -> Result<SpectralScale> {
    let n = mu_sorted.len();
    // Backward error per mode, so that stiff high modes do not swamp the check.
    let lhs = smooth_gram * &phi;
    let mphi = mass_gram * &phi;
    let (a_norm, m_norm) = (smooth_gram.norm(), mass_gram.norm());
    let mut residual: f64 = 0.0;
    for i in 0..n {
        let r = (lhs.column(i) - mphi.column(i) * mu_sorted[i]).norm();
        let scale = (a_norm + mu_sorted[i] * m_norm) * phi.column(i).norm();
        residual = residual.max(r / scale.max(f64::MIN_POSITIVE));
    }
    if !residual.is_finite() || residual > 1e-8 {
        return Err(Error::Numeric {
            message: "generalized eigen-solver residual too large".into(),
            residual,
        });
    }

    let eigenvalues = mu_sorted.iter().map(|m| m.powf(1.0 / order)).collect();
    let to = phi.transpose() * mass_gram;
    Ok(SpectralScale {
        eigenvalues,
        transform: Transform::Dense { to, from: phi },
        label: ScaleLabel::PencilInterval,
    })
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::MatrixProperty(format!("{name} Gram has non-finite entries")));
            }
            if (a - b).abs() > 1e-12 * scale {
                return Err(Error::MatrixProperty(format!(
                    "{name} Gram is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// An element of the scale, held by its spectral coefficients.
#[derive(Debug, Clone)]
pub struct ScaleElement {
    coeffs: DVector<f64>,
    scale: Arc<SpectralScale>,
}

impl ScaleElement {
    pub fn new(coeffs: DVector<f64>, scale: Arc<SpectralScale>) -> Result<Self> {
        if coeffs.len() != scale.dim() {
            return Err(Error::Dimension {
                expected: scale.dim(),
                got: coeffs.len(),
            });
        }
        check_finite(&coeffs)?;
        Ok(Self { coeffs, scale })
    }

    pub fn zeros(scale: Arc<SpectralScale>) -> Self {
        Self {
            coeffs: DVector::zeros(scale.dim()),
            scale,
        }
    }

    /// Element with primal coordinates `primal`.
    pub fn from_primal(primal: &DVector<f64>, scale: Arc<SpectralScale>) -> Result<Self> {
        let coeffs = scale.to_spectral(primal)?;
        Self::new(coeffs, scale)
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn scale(&self) -> &Arc<SpectralScale> {
        &self.scale
    }

    pub fn to_primal(&self) -> Result<DVector<f64>> {
        self.scale.from_spectral(&self.coeffs)
    }

    /// `‖x‖_{X_s}` without validation; `NaN` propagates.
    pub fn norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.scale.eigenvalues)
            .map(|(c, l)| l.powf(s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Same scale, new coefficients.
    pub fn with_coeffs(&self, coeffs: DVector<f64>) -> Result<Self> {
        Self::new(coeffs, self.scale.clone())
    }

    pub fn sub(&self, other: &ScaleElement) -> Result<Self> {
        if !Arc::ptr_eq(&self.scale, &other.scale) && self.scale.dim() != other.scale.dim() {
            return Err(Error::Dimension {
                expected: self.scale.dim(),
                got: other.scale.dim(),
            });
        }
        Ok(Self {
            coeffs: &self.coeffs - &other.coeffs,
            scale: self.scale.clone(),
        })
    }
}

fn check_finite(v: &DVector<f64>) -> Result<()> {
    match v.iter().position(|c| !c.is_finite()) {
        Some(i) => Err(Error::InvalidElement(format!("non-finite coefficient at index {i}"))),
        None => Ok(()),
    }
}

/// `‖x‖_{X_s} = (Σ λ_i^s ĉ_i²)^{1/2}`.
pub fn scale_norm(x: &ScaleElement, s: f64) -> Result<f64> {
    check_finite(&x.coeffs)?;
    let w = x.scale.powers(s)?;
    let sum: f64 = x.coeffs.iter().zip(w.iter()).map(|(c, w)| w * c * c).sum();
    if !sum.is_finite() {
        return Err(Error::Range {
            index: 0,
            eigenvalue: x.scale.eigenvalues.last().copied().unwrap_or(f64::NAN),
            exponent: s,
        });
    }
    Ok(sum.sqrt())
}

/// Multiplies coefficient `i` by `λ_i^{s/2}`, so `scale_norm(x, s) = ‖apply_power(x, s)‖_{X_0}`.
pub fn apply_power(x: &ScaleElement, s: f64) -> Result<ScaleElement> {
    check_finite(&x.coeffs)?;
    let w = x.scale.powers(0.5 * s)?;
    Ok(ScaleElement {
        coeffs: x.coeffs.component_mul(&w),
        scale: x.scale.clone(),
    })
}

/// `‖x‖_q / (‖x‖_p^{(r−q)/(r−p)} ‖x‖_r^{(q−p)/(r−p)})`, at most one for `p ≤ q ≤ r`.
pub fn interpolation_ratio(x: &ScaleElement, p: f64, q: f64, r: f64) -> Result<f64> {
    if !(p <= q && q <= r) {
        return Err(Error::Parameter(format!(
            "interpolation indices must satisfy p <= q <= r, got ({p}, {q}, {r})"
        )));
    }
    if p == r {
        return Err(Error::DegenerateInterval(p));
    }
    let np = scale_norm(x, p)?;
    let nq = scale_norm(x, q)?;
    let nr = scale_norm(x, r)?;
    if np == 0.0 || nr == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let theta = (q - p) / (r - p);
    // Logs avoid overflow when the norms differ by many orders of magnitude.
    let log_ratio = nq.ln() - (1.0 - theta) * np.ln() - theta * nr.ln();
    Ok(log_ratio.exp())
}

/// Indices of a conditional stability estimate together with the solution
/// smoothness `u` and the reporting norm `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    /// Degree of ill-posedness.
    pub a: f64,
    pub gamma: f64,
    /// Penalty index.
    pub s: f64,
    /// Smoothness index of the true solution.
    pub u: f64,
    /// Index of the error norm.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// `a < 0` or `γ ∉ (0, 1]` or `s < −a`.
    InvalidStability(String),
    /// `u ∉ [s, 2s + a]`.
    SmoothnessOutOfRange { s: f64, u: f64, upper: f64 },
    /// `r ∉ [−a, s]`.
    NormOutOfRange { r: f64, lower: f64, upper: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidStability(m) => write!(f, "invalid stability parameters: {m}"),
            Violation::SmoothnessOutOfRange { s, u, upper } => {
                write!(f, "u = {u} outside [s, 2s+a] = [{s}, {upper}]")
            }
            Violation::NormOutOfRange { r, lower, upper } => {
                write!(f, "r = {r} outside [-a, s] = [{lower}, {upper}]")
            }
        }
    }
}

impl StabilityParams {
    pub fn new(a: f64, gamma: f64, s: f64, u: f64, r: f64) -> Self {
        Self { a, gamma, s, u, r }
    }

    pub fn with_r(self, r: f64) -> Self {
        Self { r, ..self }
    }

    /// Conditions of (A2) itself.
    pub fn stability_violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.a >= 0.0) {
            v.push(Violation::InvalidStability(format!("a = {} < 0", self.a)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            v.push(Violation::InvalidStability(format!(
                "gamma = {} not in (0, 1]",
                self.gamma
            )));
        }
        if !(self.s >= -self.a) {
            v.push(Violation::InvalidStability(format!(
                "s = {} < -a = {}",
                self.s, -self.a
            )));
        }
        v
    }

    /// `s ≤ u ≤ 2s + a`, required by the rate results.
    pub fn smoothness_violation(&self) -> Option<Violation> {
        let upper = 2.0 * self.s + self.a;
        if self.u < self.s || self.u > upper {
            Some(Violation::SmoothnessOutOfRange {
                s: self.s,
                u: self.u,
                upper,
            })
        } else {
            None
        }
    }

    /// `−a ≤ r ≤ s`, the range where rates are asserted.
    pub fn norm_violation(&self) -> Option<Violation> {
        if self.r < -self.a || self.r > self.s {
            Some(Violation::NormOutOfRange {
                r: self.r,
                lower: -self.a,
                upper: self.s,
            })
        } else {
            None
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = self.stability_violations();
        v.extend(self.smoothness_violation());
        v.extend(self.norm_violation());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fourier(k: i64) -> Arc<SpectralScale> {
        Arc::new(build_fourier_scale(k, 2.0 * PI).unwrap())
    }

    #[test]
    fn fourier_eigenvalues() {
        assert_eq!(fourier(0).eigenvalues(), &[1.0]);
        assert_eq!(fourier(1).eigenvalues(), &[1.0, 2.0, 2.0]);
        assert_eq!(fourier(2).eigenvalues(), &[1.0, 2.0, 2.0, 5.0, 5.0]);
        assert!(build_fourier_scale(-1, 2.0 * PI).is_err());
        assert!(build_fourier_scale(MAX_WAVENUMBER as i64 + 1, 2.0 * PI).is_err());
    }

    #[test]
    fn single_mode_norms() {
        let scale = fourier(4);
        for k in 0..=4usize {
            let mut c = DVector::zeros(9);
            c[cos_index(k)] = 1.0;
            let x = ScaleElement::new(c, scale.clone()).unwrap();
            let lambda = 1.0 + (k * k) as f64;
            for s in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
                let n = scale_norm(&x, s).unwrap();
                assert!((n - lambda.powf(s / 2.0)).abs() <= 1e-15 * n.max(1.0));
            }
            assert!((scale_norm(&x, -1.0).unwrap() - (1.0 + (k * k) as f64).powf(-0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_element_rejected() {
        let scale = fourier(1);
        assert!(matches!(
            ScaleElement::new(DVector::from_vec(vec![1.0, f64::NAN, 0.0]), scale.clone()),
            Err(Error::InvalidElement(_))
        ));
        let mut x = ScaleElement::zeros(scale);
        x.coeffs_mut()[1] = f64::INFINITY;
        assert!(matches!(scale_norm(&x, 0.0), Err(Error::InvalidElement(_))));
    }

    #[test]
    fn apply_power_contract() {
        let scale = Arc::new(
            build_pencil_scale(
                &DMatrix::identity(3, 3),
                &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 9.0])),
            )
            .unwrap(),
        );
        let x = ScaleElement::new(DVector::from_vec(vec![0.0, 1.0, 0.0]), scale.clone()).unwrap();
        let y = apply_power(&x, 2.0).unwrap();
        assert!((y.coeffs()[1] - 5.0).abs() < 1e-15);
        let id = apply_power(&x, 0.0).unwrap();
        assert_eq!(id.coeffs(), x.coeffs());

        let z = ScaleElement::new(DVector::from_vec(vec![0.3, -1.2, 2.5]), scale).unwrap();
        for s in [-2.0, -0.5, 1.0, 1.5] {
            let back = apply_power(&apply_power(&z, s).unwrap(), -s).unwrap();
            assert!((back.coeffs() - z.coeffs()).norm() <= 1e-12 * z.coeffs().norm());
            let lhs = scale_norm(&z, s).unwrap();
            let rhs = scale_norm(&apply_power(&z, s).unwrap(), 0.0).unwrap();
            assert!((lhs - rhs).abs() <= 1e-13 * lhs);
        }
    }

    #[test]
    fn apply_power_overflow_names_index() {
        let scale = fourier(MAX_WAVENUMBER as i64);
        let x = ScaleElement::zeros(scale);
        match apply_power(&x, 400.0) {
            Err(Error::Range { index, .. }) => assert!(index > 0),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn interpolation_ratio_cases() {
        let scale = Arc::new(
            build_pencil_scale(
                &DMatrix::identity(2, 2),
                &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
            )
            .unwrap(),
        );
        let x = ScaleElement::new(DVector::from_vec(vec![1.0, 1.0]), scale.clone()).unwrap();
        // ‖x‖_1 = √5, ‖x‖_0 = √2, ‖x‖_2 = √17: √5 / (2^{1/4} 17^{1/4}).
        let expected = 5f64.sqrt() / (2f64.powf(0.25) * 17f64.powf(0.25));
        let got = interpolation_ratio(&x, 0.0, 1.0, 2.0).unwrap();
        assert!((got - expected).abs() < 1e-14);
        assert!(got < 1.0);

        assert!((interpolation_ratio(&x, 0.5, 0.5, 2.0).unwrap() - 1.0).abs() < 1e-14);
        let single = ScaleElement::new(DVector::from_vec(vec![0.0, 3.0]), scale.clone()).unwrap();
        assert!((interpolation_ratio(&single, -1.0, 0.3, 2.0).unwrap() - 1.0).abs() < 1e-14);

        assert!(matches!(
            interpolation_ratio(&x, 1.0, 1.0, 1.0),
            Err(Error::DegenerateInterval(_))
        ));
        assert!(matches!(
            interpolation_ratio(&ScaleElement::zeros(scale), 0.0, 1.0, 2.0),
            Err(Error::UndefinedRatio)
        ));
    }

    #[test]
    fn fourier_round_trip_and_parseval() {
        let scale = fourier(16);
        let v = DVector::from_fn(33, |i, _| ((i * 7919) % 97) as f64 / 97.0 - 0.5);
        let c = scale.to_spectral(&v).unwrap();
        let back = scale.from_spectral(&c).unwrap();
        assert!((&back - &v).norm() <= 1e-12 * v.norm());

        // sin(3t)/√π has unit L² norm on (0, 2π).
        let n = 4096;
        let samples: Vec<f64> = (0..n)
            .map(|j| (3.0 * 2.0 * PI * j as f64 / n as f64).sin() / PI.sqrt())
            .collect();
        let coeffs = fourier_analysis(&samples, 8, 2.0 * PI).unwrap();
        assert!((coeffs.norm() - 1.0).abs() < 1e-10);
        assert!((coeffs[sin_index(3)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pencil_identity_and_diagonal() {
        let s = build_pencil_scale(&DMatrix::identity(4, 4), &DMatrix::identity(4, 4)).unwrap();
        assert!(s.eigenvalues().iter().all(|&l| (l - 1.0).abs() < 1e-15));
        let v = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        assert!((s.to_spectral(&v).unwrap() - &v).norm() < 1e-15);

        let s = build_pencil_scale(
            &DMatrix::identity(2, 2),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        )
        .unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 4.0]);
        let v = DVector::from_vec(vec![0.25, -0.75]);
        assert!((s.to_spectral(&v).unwrap() - &v).norm() < 1e-15);
    }

    #[test]
    fn pencil_rejects_bad_input() {
        let mut ns = DMatrix::identity(3, 3);
        ns[(0, 1)] = 0.5;
        assert!(matches!(
            build_pencil_scale(&ns, &DMatrix::identity(3, 3)),
            Err(Error::MatrixProperty(_))
        ));
        let indefinite = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        assert!(matches!(
            build_pencil_scale(&indefinite, &DMatrix::identity(3, 3)),
            Err(Error::MatrixProperty(_))
        ));
        assert!(matches!(
            build_pencil_scale(&DMatrix::identity(3, 3), &indefinite),
            Err(Error::MatrixProperty(_))
        ));
    }

    #[test]
    fn pencil_order_two() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let a = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 3.0]);
        let s = build_pencil_scale_with_order(&m, &a, 2.0).unwrap();
        let scale = Arc::new(s);
        let v = DVector::from_vec(vec![0.7, -1.3]);
        let x = ScaleElement::from_primal(&v, scale).unwrap();
        let q2 = (v.transpose() * &a * &v)[0];
        let q0 = (v.transpose() * &m * &v)[0];
        assert!((x.norm(2.0).powi(2) - q2).abs() < 1e-12 * q2);
        assert!((x.norm(0.0).powi(2) - q0).abs() < 1e-12 * q0);
    }

    #[test]
    fn stability_violations() {
        let sp = StabilityParams::new(1.0, 1.0, 0.0, 1.5, 0.0);
        assert!(matches!(
            sp.smoothness_violation(),
            Some(Violation::SmoothnessOutOfRange { .. })
        ));
        assert!(sp.norm_violation().is_none());
        let sp = StabilityParams::new(1.0, 1.0, 1.0, 1.5, 1.0);
        assert!(sp.violations().is_empty());
        assert!(sp.with_r(1.5).norm_violation().is_some());
        assert_eq!(
            StabilityParams::new(0.0, 1.5, 1.0, 1.0, 0.0)
                .stability_violations()
                .len(),
            1
        );
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(200))]

        #[test]
        fn interpolation_inequality_holds(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 17),
            p in -2.0f64..3.0,
            a in 0.05f64..2.0,
            b in 0.05f64..2.0,
        ) {
            proptest::prop_assume!(coeffs.iter().any(|c| c.abs() > 1e-6));
            let x = ScaleElement::new(DVector::from_vec(coeffs), fourier(8)).unwrap();
            proptest::prop_assert!(interpolation_ratio(&x, p, p + a, p + a + b).unwrap() <= 1.0 + 1e-10);
        }
    }
}
