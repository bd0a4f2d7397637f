use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::scale::ScaleElement;

/// A discretized forward operator `F : X_s → Y` as seen by the regularizer.
///
/// Parameters and observations are coordinate vectors; the problem supplies the
/// inner products that turn them into elements of `X_s` and `Y`.
pub trait ForwardProblem: Sync {
    fn param_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    /// Derivative of [`ForwardProblem::evaluate`] at `x`, `obs_dim × param_dim`.
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Applies the Gram matrix of the `Y` inner product.
    fn obs_gram_apply(&self, v: &DVector<f64>) -> DVector<f64>;

    fn data_norm(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.obs_gram_apply(v)).max(0.0).sqrt()
    }

    /// `F'(x)ᵀ M r` with `M` the `Y` Gram matrix: half the gradient of `‖F(x) − y‖²_Y`
    /// in the direction of `r = F(x) − y`.
    fn adjoint_apply(&self, x: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.jacobian(x)?.tr_mul(&self.obs_gram_apply(r)))
    }

    /// The parameter as an element of the Hilbert scale.
    fn to_element(&self, x: &DVector<f64>) -> Result<ScaleElement>;

    fn penalty_norm(&self, x: &DVector<f64>, s: f64) -> Result<f64> {
        crate::scale::scale_norm(&self.to_element(x)?, s)
    }

    /// Gram matrix of the `X_s` inner product in parameter coordinates.
    fn penalty_gram(&self, s: f64) -> Result<DMatrix<f64>>;

    fn penalty_apply(&self, x: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        Ok(self.penalty_gram(s)? * x)
    }

    /// Exact minimizer of the Tikhonov functional, when one is available in closed form.
    fn closed_form(&self, _data: &DVector<f64>, _alpha: f64, _s: f64) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Starting point for the first minimization on fresh data.
    fn initial_guess(&self, data: &DVector<f64>) -> DVector<f64>;

    /// Warnings attached to a computed minimizer (e.g. leaving the domain of `F`).
    fn domain_warnings(&self, _x: &DVector<f64>) -> Vec<String> {
        Vec::new()
    }
}
