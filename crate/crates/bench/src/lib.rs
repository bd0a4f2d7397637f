//! Shared fixtures for the benchmarks in `benches/`.

use hscale::harness::{make_noisy_data, NoiseModel};
use hscale::{ForwardProblem, ParamIdProblem, ParamIdReference, ParamIdSpec, SmoothingProblem, SmoothingReference};
use nalgebra::DVector;

/// Parameter identification problem on `grid_n` intervals with noisy t√t data.
pub fn param_id_fixture(grid_n: usize, s: f64, delta: f64) -> (ParamIdProblem, DVector<f64>, DVector<f64>) {
    let p = ParamIdProblem::new(ParamIdSpec {
        grid_n,
        s,
        ..ParamIdSpec::default()
    })
    .expect("valid spec");
    let (c, _) = p.reference_coefficient(ParamIdReference::TSqrtT).expect("reference");
    let y = p.evaluate(&c.control).expect("forward solve");
    let yd = make_noisy_data(&p, &y, delta, NoiseModel::new(1)).expect("noise");
    (p, c.control, yd)
}

/// Smoothing problem with noisy hat data.
pub fn smoothing_fixture(max_wavenumber: usize, delta: f64) -> (SmoothingProblem, DVector<f64>) {
    let p = SmoothingProblem::new(max_wavenumber).expect("valid K");
    let (x, _) = p.reference_solution(SmoothingReference::Hat).expect("reference");
    let y = p.evaluate(x.coeffs()).expect("forward");
    let yd = make_noisy_data(&p, &y, delta, NoiseModel::new(1)).expect("noise");
    (p, yd)
}
