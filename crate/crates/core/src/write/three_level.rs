//! Write dynamics with the intermediate state kept explicitly.
//!
//! Spectator atoms follow the laser exactly: each is in the dressed state
//! `phi = alpha|g> + beta e^{i k.r}|i>` of a lone atom, integrated alongside.
//! The basis is `|u> prod phi` (C0), `|u> phi_j^perp prod' phi` (b_j, with
//! `phi^perp = -beta* |g> + alpha* |i>`) and `|d>|s>_j prod' phi` (c_j). It is
//! orthonormal, exact for one atom and for vanishing `D`, and neglects only
//! states with one atom in `phi^perp` and another in `|s>`.

use super::{partition, slaved_terms, PulseSchedule, WriteOptions, WriteResult};
use crate::coupling::CouplingSet;
use crate::error::{require_nonnegative, Error, Result};
use crate::ode::ComplexSystem;
use num_complex::Complex64 as C64;

struct ThreeLevelWrite<'a> {
    set: &'a CouplingSet,
    sched: &'a PulseSchedule,
    gamma: f64,
    explicit: &'a [usize],
    slaved: &'a [usize],
    rot: Vec<C64>,
}

impl ThreeLevelWrite<'_> {
    fn m(&self) -> usize {
        self.explicit.len()
    }
}

fn mul_minus_i(h: C64) -> C64 {
    C64::new(h.im, -h.re)
}

impl ComplexSystem for ThreeLevelWrite<'_> {
    // [C0, b_1..b_M, c_1..c_M, alpha, beta, loss]
    fn dim(&self) -> usize {
        2 * self.m() + 4
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let m = self.m();
        let s = self.sched.envelope(t);
        let omega = s * self.set.omega_max;
        let big_delta = self.set.delta;
        let sweep = self.sched.sweep(t);
        let det = C64::new(sweep + s * s * self.set.partner_shift, -0.5 * self.gamma);
        let c0 = y[0];
        let (alpha, beta) = (y[2 * m + 1], y[2 * m + 2]);
        let (shift, weight) = slaved_terms(self.set, self.slaved, s, sweep, self.gamma);

        let mut acc = shift * c0;
        let mut pop = 0.0;
        for (k, &j) in self.explicit.iter().enumerate() {
            let b = y[1 + k];
            let c = y[1 + m + k];
            let dj = self.set.d[j];
            let bj = beta * self.rot[k];
            acc += bj.conj() * c * dj;
            dy[1 + k] = mul_minus_i(b * big_delta + alpha * c * dj);
            dy[1 + m + k] = mul_minus_i(det * c + (bj * c0 + alpha.conj() * b) * dj);
            pop += c.norm_sqr();
        }
        dy[0] = mul_minus_i(acc);
        dy[2 * m + 1] = mul_minus_i(beta * omega);
        dy[2 * m + 2] = mul_minus_i(beta * big_delta + alpha * omega);
        dy[2 * m + 3] = C64::new(self.gamma * (pop + weight * c0.norm_sqr()), 0.0);
    }
}

/// Three-level counterpart of [`super::simulate_write`]; atoms slaved in the
/// two-level model are treated identically here.
pub fn simulate_write_three_level(
    set: &CouplingSet,
    sched: &PulseSchedule,
    opts: &WriteOptions,
) -> Result<WriteResult> {
    sched.validate()?;
    require_nonnegative("gamma_s", opts.gamma_s)?;
    if set.is_empty() {
        return Err(Error::domain("couplings", "need at least one atom"));
    }
    let part = partition(set, sched, opts.slaving_ratio);
    let rot = part
        .explicit
        .iter()
        .map(|&j| C64::from_polar(1.0, set.phases[j]))
        .collect();
    let sys = ThreeLevelWrite {
        set,
        sched,
        gamma: opts.gamma_s,
        explicit: &part.explicit,
        slaved: &part.slaved,
        rot,
    };
    let m = part.explicit.len();
    let times = sched.output_times(opts.n_output);
    let mut y0 = vec![C64::new(0.0, 0.0); sys.dim()];
    y0[0] = C64::new(1.0, 0.0);
    y0[2 * m + 1] = C64::new(1.0, 0.0);
    let n_out = times.len();
    let mut p0 = vec![0.0; n_out];
    let mut p1 = vec![0.0; n_out];
    let mut pi = vec![0.0; n_out];
    let mut loss = vec![0.0; n_out];
    let (y, stats) = opts.integrator.integrate(&sys, &times, y0, |i, _, y| {
        p0[i] = y[0].norm_sqr();
        pi[i] = y[1..=m].iter().map(|c| c.norm_sqr()).sum();
        p1[i] = y[m + 1..=2 * m].iter().map(|c| c.norm_sqr()).sum();
        loss[i] = y[2 * m + 3].re;
    })?;

    let t_end = sched.t_total;
    let s_end = sched.envelope(t_end);
    let mut amps = vec![C64::new(0.0, 0.0); set.len() + 1];
    amps[0] = y[0];
    for (k, &j) in part.explicit.iter().enumerate() {
        amps[j + 1] = y[m + 1 + k];
    }
    let common = sched.sweep(t_end) + s_end * s_end * (set.light_shift + set.partner_shift);
    for &j in &part.slaved {
        let den = C64::new(common + set.dipole_shift[j], -0.5 * opts.gamma_s);
        amps[j + 1] = -(y[0] * (s_end * set.d_tilde[j])) / den;
    }
    let norm: Vec<f64> = p0.iter().zip(&p1).map(|(a, b)| a + b).collect();
    let eta_w = *p1.last().unwrap();
    let norm_loss = 1.0 - norm.last().unwrap();
    Ok(WriteResult {
        times,
        p0,
        p1,
        norm,
        loss,
        p_intermediate: Some(pi),
        final_amplitudes: amps,
        eta_w,
        norm_loss,
        n_slaved: part.slaved.len(),
        stats,
    })
}
