//! Identification of a time-dependent reaction coefficient `c` in `U' + cU = 0`.
//!
//! `U` is continuous piecewise linear on a uniform grid of `[0, T]`, `c` a cubic
//! B-spline on the same grid. Testing the equation with the indicator of each
//! interval gives the Petrov–Galerkin recursion
//!
//! ```text
//! U_{i+1} − U_i + ∫_{t_i}^{t_{i+1}} c (U_i φ_L + U_{i+1} φ_R) dt = 0,
//! ```
//!
//! whose integrals are evaluated exactly by Gauss quadrature. Derivative and
//! adjoint below are those of this discrete map, not discretizations of the
//! continuous ones.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bspline::{gauss_legendre, CubicBSpline};
use crate::error::{Error, Result};
use crate::problem::ForwardProblem;
use crate::scale::{build_pencil_scale_factored, ScaleElement, SpectralScale, StabilityParams};

/// Gram matrix defining the smooth end of the coefficient scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyScale {
    /// `‖c‖²_{X_2} = ‖c‖²_0 + ‖c''‖²_0`; `X_s = H^s` up to `s = 2`.
    H2Natural,
    /// `‖c‖²_{X_1} = ‖c‖²_0 + ‖c'‖²_0`; the discrete Neumann scale.
    H1Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamIdSpec {
    pub t_end: f64,
    pub u0: f64,
    pub grid_n: usize,
    /// Penalty index.
    pub s: f64,
    pub gauss_points: usize,
    pub penalty_scale: PenaltyScale,
}

impl Default for ParamIdSpec {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            u0: 1.0,
            grid_n: 200,
            s: 1.0,
            gauss_points: 3,
            penalty_scale: PenaltyScale::H2Natural,
        }
    }
}

impl ParamIdSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Parameter(format!("T must be positive, got {}", self.t_end)));
        }
        if !self.u0.is_finite() || self.u0 == 0.0 {
            return Err(Error::Parameter(format!(
                "U0 must be finite and nonzero, got {}",
                self.u0
            )));
        }
        if self.grid_n == 0 || self.grid_n + 3 > crate::scale::MAX_PENCIL_DIM {
            return Err(Error::Parameter(format!(
                "grid_n must be in 1..={}, got {}",
                crate::scale::MAX_PENCIL_DIM - 3,
                self.grid_n
            )));
        }
        if gauss_legendre(self.gauss_points).is_none() {
            return Err(Error::Parameter(format!(
                "gauss_points must be 3, 4 or 5, got {}",
                self.gauss_points
            )));
        }
        Ok(())
    }

    /// `a = 0`, `γ = s/(s+1)`.
    pub fn stability(&self, u: f64, r: f64) -> StabilityParams {
        StabilityParams::new(0.0, self.s / (self.s + 1.0), self.s, u, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamIdReference {
    /// `t` on `(0, T/2)`, `T − t` on `(T/2, T)`.
    Hat,
    /// `t √t`.
    TSqrtT,
    /// `t (T − t)`.
    Parabola,
}

impl ParamIdReference {
    pub const ALL: [ParamIdReference; 3] = [Self::Hat, Self::TSqrtT, Self::Parabola];

    pub fn u_max(self) -> f64 {
        match self {
            Self::Hat => 1.5,
            Self::TSqrtT => 2.0,
            Self::Parabola => 2.5,
        }
    }

    pub fn from_u(u: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|r| (r.u_max() - u).abs() < 1e-9)
    }

    pub fn eval(self, t: f64, t_end: f64) -> f64 {
        match self {
            Self::Hat => {
                if t < 0.5 * t_end {
                    t
                } else {
                    t_end - t
                }
            }
            Self::TSqrtT => t * t.max(0.0).sqrt(),
            Self::Parabola => t * (t_end - t),
        }
    }

    fn end_slopes(self, t_end: f64) -> (f64, f64) {
        match self {
            Self::Hat => (1.0, -1.0),
            Self::TSqrtT => (0.0, 1.5 * t_end.sqrt()),
            Self::Parabola => (t_end, -t_end),
        }
    }
}

impl fmt::Display for ParamIdReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hat => "hat",
            Self::TSqrtT => "t_sqrt_t",
            Self::Parabola => "parabola",
        })
    }
}

impl FromStr for ParamIdReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hat" => Ok(Self::Hat),
            "t_sqrt_t" => Ok(Self::TSqrtT),
            "parabola" => Ok(Self::Parabola),
            other => Err(Error::Parameter(format!(
                "unknown coefficient reference `{other}` (expected hat, t_sqrt_t or parabola)"
            ))),
        }
    }
}

/// Cubic B-spline coefficient `c` (or direction `h`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSpline {
    pub control: DVector<f64>,
}

/// Nodal values `U_0..U_n` of a continuous piecewise linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub nodal: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct ParamIdProblem {
    spec: ParamIdSpec,
    basis: CubicBSpline,
    /// `∫_{I_i} B_{i+j} φ_L` and `∫_{I_i} B_{i+j} φ_R` for the four splines alive on `I_i`.
    load_left: Vec<[f64; 4]>,
    load_right: Vec<[f64; 4]>,
    scale: Arc<SpectralScale>,
}

impl ParamIdProblem {
    pub fn new(spec: ParamIdSpec) -> Result<Self> {
        spec.validate()?;
        let basis = CubicBSpline::new(spec.grid_n, spec.t_end)?;
        let (xs, ws) = gauss_legendre(spec.gauss_points).expect("validated");
        let h = basis.step();
        let mut load_left = Vec::with_capacity(spec.grid_n);
        let mut load_right = Vec::with_capacity(spec.grid_n);
        for i in 0..spec.grid_n {
            let t0 = basis.node(i);
            let mut l = [0.0; 4];
            let mut r = [0.0; 4];
            for (x, w) in xs.iter().zip(ws) {
                let xi = 0.5 * (x + 1.0);
                let t = t0 + h * xi;
                let b = basis.basis_derivatives(i, t)[0];
                let wt = 0.5 * h * w;
                for j in 0..4 {
                    l[j] += wt * b[j] * (1.0 - xi);
                    r[j] += wt * b[j] * xi;
                }
            }
            load_left.push(l);
            load_right.push(r);
        }

        let mass = basis.gram(0);
        let scale = match spec.penalty_scale {
            PenaltyScale::H2Natural => build_pencil_scale_factored(&mass, &basis.derivative_factor(2), 2.0)?,
            PenaltyScale::H1Neumann => build_pencil_scale_factored(&mass, &basis.derivative_factor(1), 1.0)?,
        };
        Ok(Self {
            spec,
            basis,
            load_left,
            load_right,
            scale: Arc::new(scale),
        })
    }

    pub fn spec(&self) -> &ParamIdSpec {
        &self.spec
    }

    pub fn basis(&self) -> &CubicBSpline {
        &self.basis
    }

    pub fn scale(&self) -> &Arc<SpectralScale> {
        &self.scale
    }

    pub fn coeff_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn state_dim(&self) -> usize {
        self.spec.grid_n + 1
    }

    pub fn spline(&self, control: DVector<f64>) -> Result<CoefficientSpline> {
        self.check_coeff(&control)?;
        Ok(CoefficientSpline { control })
    }

    fn check_coeff(&self, c: &DVector<f64>) -> Result<()> {
        if c.len() != self.coeff_dim() {
            return Err(Error::Dimension {
                expected: self.coeff_dim(),
                got: c.len(),
            });
        }
        Ok(())
    }

    fn loads(&self, c: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let mut al = Vec::with_capacity(self.spec.grid_n);
        let mut ar = Vec::with_capacity(self.spec.grid_n);
        for (i, (l, r)) in self.load_left.iter().zip(&self.load_right).enumerate() {
            al.push((0..4).map(|j| l[j] * c[i + j]).sum());
            ar.push((0..4).map(|j| r[j] * c[i + j]).sum());
        }
        (al, ar)
    }

    /// Petrov–Galerkin state for coefficient `c`.
    pub fn solve_state(&self, c: &CoefficientSpline) -> Result<StateTrajectory> {
        self.check_coeff(&c.control)?;
        Ok(self.linearization(&c.control)?.state)
    }

    /// `F(c)`, the state regarded as an element of `L²(0, T)`.
    pub fn forward(&self, c: &CoefficientSpline) -> Result<StateTrajectory> {
        self.solve_state(c)
    }

    /// `W = F'(c) h`: the scheme applied to `W' + cW = −hU`, `W(0) = 0`.
    pub fn jacobian_apply(&self, c: &CoefficientSpline, h: &CoefficientSpline) -> Result<StateTrajectory> {
        self.check_coeff(&c.control)?;
        self.check_coeff(&h.control)?;
        let lin = self.linearization(&c.control)?;
        let (hl, hr) = self.loads(&h.control);
        let u = &lin.state.nodal;
        let mut w = DVector::zeros(self.state_dim());
        for i in 0..self.spec.grid_n {
            w[i + 1] = (w[i] * (1.0 - lin.left[i]) - u[i] * hl[i] - u[i + 1] * hr[i]) / lin.pivot[i];
        }
        Ok(StateTrajectory { nodal: w })
    }

    /// `F'(c)* r`: the transpose of the discrete Jacobian composed with the `L²`
    /// mass matrix of the state space, by a backward sweep.
    pub fn jacobian_adjoint(&self, c: &CoefficientSpline, r: &StateTrajectory) -> Result<DVector<f64>> {
        self.check_coeff(&c.control)?;
        if r.nodal.len() != self.state_dim() {
            return Err(Error::Dimension {
                expected: self.state_dim(),
                got: r.nodal.len(),
            });
        }
        let lin = self.linearization(&c.control)?;
        let z = self.obs_gram_apply(&r.nodal);
        let u = &lin.state.nodal;
        let n = self.spec.grid_n;
        let mut grad = DVector::zeros(self.coeff_dim());
        // mu holds the multiplier of W_{i+1}.
        let mut mu = z[n];
        for i in (0..n).rev() {
            let scale = -mu / lin.pivot[i];
            for j in 0..4 {
                grad[i + j] += scale * (u[i] * self.load_left[i][j] + u[i + 1] * self.load_right[i][j]);
            }
            if i > 0 {
                mu = z[i] + mu * (1.0 - lin.left[i]) / lin.pivot[i];
            }
        }
        Ok(grad)
    }

    /// Explicit `(n+1) × (n+3)` Jacobian, assembled row by row from the linearized recursion.
    pub fn jacobian_matrix(&self, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_coeff(c)?;
        let lin = self.linearization(c)?;
        let u = &lin.state.nodal;
        let n = self.spec.grid_n;
        let mut jac = DMatrix::zeros(n + 1, self.coeff_dim());
        for i in 0..n {
            let p = (1.0 - lin.left[i]) / lin.pivot[i];
            // Row i is supported on columns 0..i+3.
            for col in 0..(i + 3).min(self.coeff_dim()) {
                jac[(i + 1, col)] = p * jac[(i, col)];
            }
            for j in 0..4 {
                jac[(i + 1, i + j)] -= (u[i] * self.load_left[i][j] + u[i + 1] * self.load_right[i][j]) / lin.pivot[i];
            }
        }
        Ok(jac)
    }

    fn linearization(&self, c: &DVector<f64>) -> Result<Linearization> {
        let (left, right) = self.loads(c);
        let n = self.spec.grid_n;
        let mut u = DVector::zeros(n + 1);
        u[0] = self.spec.u0;
        let mut pivot = Vec::with_capacity(n);
        for i in 0..n {
            let d = 1.0 + right[i];
            if !(d > 0.0) {
                return Err(Error::SolverBreakdown { interval: i, pivot: d });
            }
            u[i + 1] = u[i] * (1.0 - left[i]) / d;
            pivot.push(d);
        }
        Ok(Linearization {
            state: StateTrajectory { nodal: u },
            left,
            pivot,
        })
    }

    /// Residual of each interval equation, `U_{i+1} − U_i + ∫ c U dt`.
    pub fn interval_residuals(&self, c: &CoefficientSpline, state: &StateTrajectory) -> Vec<f64> {
        let (left, right) = self.loads(&c.control);
        let u = &state.nodal;
        (0..self.spec.grid_n)
            .map(|i| u[i + 1] - u[i] + left[i] * u[i] + right[i] * u[i + 1])
            .collect()
    }

    /// Spline interpolant of a reference coefficient, with its regularity supremum.
    pub fn reference_coefficient(&self, kind: ParamIdReference) -> Result<(CoefficientSpline, f64)> {
        let t_end = self.spec.t_end;
        let values: Vec<f64> = (0..=self.spec.grid_n)
            .map(|i| kind.eval(self.basis.node(i), t_end))
            .collect();
        let (d0, d1) = kind.end_slopes(t_end);
        let control = self.basis.interpolate(&values, d0, d1)?;
        Ok((CoefficientSpline { control }, kind.u_max()))
    }

    pub fn eval_coefficient(&self, c: &CoefficientSpline, t: f64) -> f64 {
        self.basis.eval(&c.control, t)
    }

    /// `min c` over four points per interval and the nodes.
    pub fn coefficient_min(&self, c: &DVector<f64>) -> f64 {
        let m = 4 * self.spec.grid_n;
        (0..=m)
            .map(|k| self.basis.eval(c, self.spec.t_end * k as f64 / m as f64))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn obs_norm(&self, v: &StateTrajectory) -> f64 {
        self.data_norm(&v.nodal)
    }
}

struct Linearization {
    state: StateTrajectory,
    left: Vec<f64>,
    pivot: Vec<f64>,
}

impl ForwardProblem for ParamIdProblem {
    fn param_dim(&self) -> usize {
        self.coeff_dim()
    }

    fn obs_dim(&self) -> usize {
        self.state_dim()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_coeff(x)?;
        Ok(self.linearization(x)?.state.nodal)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jacobian_matrix(x)
    }

    /// Piecewise linear mass matrix on the uniform grid.
    fn obs_gram_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = v.len();
        let h = self.basis.step();
        let mut out = DVector::zeros(n);
        for i in 0..n.saturating_sub(1) {
            out[i] += h / 3.0 * v[i] + h / 6.0 * v[i + 1];
            out[i + 1] += h / 6.0 * v[i] + h / 3.0 * v[i + 1];
        }
        out
    }

    fn adjoint_apply(&self, x: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.jacobian_adjoint(
            &CoefficientSpline { control: x.clone() },
            &StateTrajectory { nodal: r.clone() },
        )
    }

    fn to_element(&self, x: &DVector<f64>) -> Result<ScaleElement> {
        ScaleElement::from_primal(x, self.scale.clone())
    }

    fn penalty_gram(&self, s: f64) -> Result<DMatrix<f64>> {
        self.scale.primal_gram(s)
    }

    /// Constant coefficient matching the decay `U(T)/U(0)` of the data.
    fn initial_guess(&self, data: &DVector<f64>) -> DVector<f64> {
        let ratio = data[data.len() - 1] / self.spec.u0;
        let c0 = if ratio > 0.0 && ratio.is_finite() {
            -ratio.ln() / self.spec.t_end
        } else {
            0.0
        };
        DVector::from_element(self.coeff_dim(), c0)
    }

    fn domain_warnings(&self, x: &DVector<f64>) -> Vec<String> {
        let m = self.coefficient_min(x);
        if m < 0.0 {
            vec![format!("coefficient leaves D(F): min c = {m:e} < 0")]
        } else {
            Vec::new()
        }
    }
}
