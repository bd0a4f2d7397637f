//! Bessel function of the first kind, order one.

use std::f64::consts::PI;

const SERIES_CUTOFF: f64 = 12.0;

/// `J_1(x)`, absolute accuracy about 1e-11 on the whole real line.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x < SERIES_CUTOFF {
        series(x)
    } else {
        hankel(x)
    }
}

fn series(x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half;
    let mut sum = term;
    for m in 1..200 {
        term *= q / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

// Hankel's asymptotic expansion, truncated at its smallest term.
fn hankel(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last {
            break;
        }
        last = term.abs();
        // Terms alternate between Q (odd k) and P (even k) with signs + − − + ...
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    // J_1(x) = (1/π) ∫_0^π cos(τ − x sin τ) dτ; the trapezoid rule is spectrally
    // accurate for this smooth periodic integrand.
    fn integral_oracle(x: f64) -> f64 {
        let n = 4 * (x.abs() as usize) + 400;
        let h = PI / n as f64;
        let f = |t: f64| (t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn matches_integral_representation() {
        for &x in &[
            0.0, 0.1, 1.0, 3.8317, 7.5, 11.9, 12.0, 12.1, 20.0, 31.4159, 100.0, 1000.5,
        ] {
            let want = integral_oracle(x);
            let got = bessel_j1(x);
            assert!((got - want).abs() < 2e-11, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn odd_symmetry_and_small_argument() {
        assert_eq!(bessel_j1(0.0), 0.0);
        assert!((bessel_j1(-2.0) + bessel_j1(2.0)).abs() < 1e-16);
        assert!((bessel_j1(1e-6) - 5e-7).abs() < 1e-18);
    }
}
