//! Cubic B-splines on a uniform grid of `[0, T]` with a clamped knot vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const DEGREE: usize = 3;

/// Gauss–Legendre nodes and weights on `[-1, 1]`; exact for degree `2n − 1`.
pub fn gauss_legendre(points: usize) -> Option<(&'static [f64], &'static [f64])> {
    const X3: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    const X4: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W4: [f64; 4] = [
        0.347_854_845_137_453_85,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_85,
    ];
    const X5: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const W5: [f64; 5] = [
        0.236_926_885_056_189_08,
        0.478_628_670_499_366_47,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
    ];
    match points {
        3 => Some((&X3, &W3)),
        4 => Some((&X4, &W4)),
        5 => Some((&X5, &W5)),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct CubicBSpline {
    intervals: usize,
    t_end: f64,
    knots: Vec<f64>,
}

impl CubicBSpline {
    pub fn new(intervals: usize, t_end: f64) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::Parameter("spline grid needs at least one interval".into()));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::Parameter(format!("horizon T must be positive, got {t_end}")));
        }
        let h = t_end / intervals as f64;
        let mut knots = vec![0.0; DEGREE];
        knots.extend((0..=intervals).map(|i| if i == intervals { t_end } else { i as f64 * h }));
        knots.extend(std::iter::repeat(t_end).take(DEGREE));
        Ok(Self {
            intervals,
            t_end,
            knots,
        })
    }

    /// Number of basis functions, `n + 3`.
    pub fn dim(&self) -> usize {
        self.intervals + DEGREE
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.t_end
        } else {
            i as f64 * self.step()
        }
    }

    /// Grid interval containing `t`, clamped to `[0, n − 1]`.
    pub fn interval_of(&self, t: f64) -> usize {
        let i = (t / self.step()).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.intervals - 1)
        }
    }

    /// Values and first two derivatives of the four basis functions that are
    /// nonzero on `interval`; `out[d][j]` is derivative `d` of `B_{interval + j}`.
    pub fn basis_derivatives(&self, interval: usize, t: f64) -> [[f64; 4]; 3] {
        let span = interval + DEGREE;
        let u = &self.knots;
        let p = DEGREE;
        let mut ndu = [[0.0f64; 4]; 4];
        let mut left = [0.0f64; 4];
        let mut right = [0.0f64; 4];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = [[0.0f64; 4]; 3];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let n_ders = 2usize;
        let mut a = [[0.0f64; 4]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=n_ders {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        ders
    }

    /// Derivative `order ≤ 2` of the spline with the given control coefficients at `t`.
    pub fn eval_derivative(&self, control: &DVector<f64>, t: f64, order: usize) -> f64 {
        let i = self.interval_of(t);
        let d = self.basis_derivatives(i, t);
        (0..4).map(|j| control[i + j] * d[order][j]).sum()
    }

    pub fn eval(&self, control: &DVector<f64>, t: f64) -> f64 {
        self.eval_derivative(control, t, 0)
    }

    /// `∫_0^T B_i^{(d)} B_j^{(d)} dt`, exact by 4-point Gauss per interval.
    pub fn gram(&self, derivative: usize) -> DMatrix<f64> {
        assert!(derivative <= 2, "only derivatives up to order 2 are supported");
        let (xs, ws) = gauss_legendre(4).expect("4-point rule");
        let h = self.step();
        let mut g = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.intervals {
            let t0 = self.node(i);
            for (x, w) in xs.iter().zip(ws) {
                let t = t0 + 0.5 * h * (x + 1.0);
                let d = self.basis_derivatives(i, t);
                let wt = 0.5 * h * w;
                for a in 0..4 {
                    for b in 0..4 {
                        g[(i + a, i + b)] += wt * d[derivative][a] * d[derivative][b];
                    }
                }
            }
        }
        g
    }

    /// Matrix `G` with `GᵀG = gram(derivative)`: one row `√w_q B^{(d)}(t_q)` per
    /// 3-point Gauss node, exact for `derivative ≥ 1`.
    pub fn derivative_factor(&self, derivative: usize) -> DMatrix<f64> {
        assert!(
            (1..=2).contains(&derivative),
            "factor is exact only for derivative orders 1 and 2"
        );
        let (xs, ws) = gauss_legendre(3).expect("3-point rule");
        let h = self.step();
        let mut g = DMatrix::zeros(3 * self.intervals, self.dim());
        for i in 0..self.intervals {
            let t0 = self.node(i);
            for (q, (x, w)) in xs.iter().zip(ws).enumerate() {
                let t = t0 + 0.5 * h * (x + 1.0);
                let d = self.basis_derivatives(i, t);
                let wt = (0.5 * h * w).sqrt();
                for j in 0..4 {
                    g[(3 * i + q, i + j)] = wt * d[derivative][j];
                }
            }
        }
        g
    }

    /// Complete cubic spline interpolant: matches `values` at the `n + 1` nodes and
    /// the end slopes `d0`, `d_end`.
    pub fn interpolate(&self, values: &[f64], d0: f64, d_end: f64) -> Result<DVector<f64>> {
        let n = self.intervals;
        if values.len() != n + 1 {
            return Err(Error::Dimension {
                expected: n + 1,
                got: values.len(),
            });
        }
        let dim = self.dim();
        let mut a = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for (row, &v) in values.iter().enumerate() {
            let t = self.node(row);
            let i = self.interval_of(t);
            let d = self.basis_derivatives(i, t);
            for j in 0..4 {
                a[(row, i + j)] = d[0][j];
            }
            rhs[row] = v;
        }
        for (row, t, slope) in [(n + 1, 0.0, d0), (n + 2, self.t_end, d_end)] {
            let i = self.interval_of(t);
            let d = self.basis_derivatives(i, t);
            for j in 0..4 {
                a[(row, i + j)] = d[1][j];
            }
            rhs[row] = slope;
        }
        a.lu().solve(&rhs).ok_or_else(|| Error::Numeric {
            message: "spline interpolation system is singular".into(),
            residual: f64::NAN,
        })
    }
}
