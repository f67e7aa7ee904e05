//! Adaptive Dormand-Prince 5(4) integrator for complex linear-algebra systems.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

/// Right-hand side `dy/dt = f(t, y)` over complex state vectors.
pub trait ComplexSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Work {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn err_norm(&self, y: &[C64], y_new: &[C64], err: &[C64]) -> f64 {
        let n = y.len().max(1) as f64;
        let s: f64 = y
            .iter()
            .zip(y_new)
            .zip(err)
            .map(|((a, b), e)| {
                let sc = self.atol + self.rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (s / n).sqrt()
    }

    fn initial_step<S: ComplexSystem>(
        &self,
        sys: &S,
        t: f64,
        y: &[C64],
        f0: &[C64],
        dir: f64,
        span: f64,
    ) -> f64 {
        let n = y.len().max(1) as f64;
        let sc: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.norm()).collect();
        let d0 = (y
            .iter()
            .zip(&sc)
            .map(|(v, s)| (v.norm() / s).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let d1 = (f0
            .iter()
            .zip(&sc)
            .map(|(v, s)| (v.norm() / s).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * (dir * h0)).collect();
        let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
        sys.rhs(t + dir * h0, &y1, &mut f1);
        let d2 = (f1
            .iter()
            .zip(f0)
            .zip(&sc)
            .map(|((a, b), s)| ((a - b).norm() / s).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Integrates from `t_out[0]` through every time in `t_out` (monotone in
    /// either direction), calling `observe(index, t, y)` at each of them.
    pub fn integrate<S: ComplexSystem>(
        &self,
        sys: &S,
        t_out: &[f64],
        y0: Vec<C64>,
        mut observe: impl FnMut(usize, f64, &[C64]),
    ) -> Result<(Vec<C64>, StepStats)> {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "initial state has wrong dimension");
        let mut stats = StepStats::default();
        let mut y = y0;
        let Some(&t_start) = t_out.first() else {
            return Ok((y, stats));
        };
        observe(0, t_start, &y);
        if t_out.len() == 1 {
            return Ok((y, stats));
        }
        let t_end = *t_out.last().unwrap();
        let dir = if t_end >= t_start { 1.0 } else { -1.0 };
        let span = (t_end - t_start).abs();
        if span == 0.0 {
            for (i, &t) in t_out.iter().enumerate().skip(1) {
                observe(i, t, &y);
            }
            return Ok((y, stats));
        }

        let zero = C64::new(0.0, 0.0);
        let mut w = Work {
            k: std::array::from_fn(|_| vec![zero; n]),
            tmp: vec![zero; n],
            y_new: vec![zero; n],
        };
        let mut t = t_start;
        sys.rhs(t, &y, &mut w.k[0]);
        stats.evaluations += 1;
        let mut h = self.initial_step(sys, t, &y, &w.k[0], dir, span);
        stats.evaluations += 1;

        for (idx, &target) in t_out.iter().enumerate().skip(1) {
            while dir * (target - t) > 0.0 {
                if stats.accepted + stats.rejected >= self.max_steps {
                    return Err(Error::StepLimit {
                        t,
                        max_steps: self.max_steps,
                    });
                }
                let remaining = (target - t).abs();
                let last = h >= remaining;
                let h_step = if last { remaining } else { h };
                if h_step < 1e-13 * t.abs().max(span) && !last {
                    return Err(Error::StepUnderflow { t, h: h_step });
                }
                let err = self.try_step(sys, t, dir * h_step, &y, &mut w);
                stats.evaluations += 6;
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if err <= 1.0 {
                    stats.accepted += 1;
                    t = if last { target } else { t + dir * h_step };
                    std::mem::swap(&mut y, &mut w.y_new);
                    w.k.swap(0, 6);
                    if !last || factor < 1.0 {
                        h = h_step * factor;
                    }
                } else {
                    stats.rejected += 1;
                    h = h_step * factor.min(1.0);
                }
            }
            observe(idx, target, &y);
        }
        Ok((y, stats))
    }

    fn try_step<S: ComplexSystem>(&self, sys: &S, t: f64, h: f64, y: &[C64], w: &mut Work) -> f64 {
        let n = y.len();
        let Work { k, tmp, y_new } = w;
        let [k1, k2, k3, k4, k5, k6, k7] = k;
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        sys.rhs(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        sys.rhs(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        sys.rhs(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        sys.rhs(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] =
                y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        sys.rhs(t + h, tmp, k6);
        for i in 0..n {
            y_new[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * h;
        }
        sys.rhs(t + h, y_new, k7);
        for i in 0..n {
            tmp[i] =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        self.err_norm(y, y_new, tmp)
    }
}
