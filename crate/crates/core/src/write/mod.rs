//! Write step: adiabatic transfer of the communication atom's excitation
//! into a collective spin wave.

mod three_level;

pub use three_level::simulate_write_three_level;

use crate::cloud::AtomCloud;
use crate::coupling::{CouplingSet, TwoLevelEff};
use crate::error::{require_nonnegative, require_positive, Error, Result};
use crate::ode::{ComplexSystem, Dopri5, StepStats};
use crate::retrieval::SpinWaveProfile;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{FRAC_PI_2, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// sin^2 rise over `t_ramp`, hold, sin^2 fall over the last `t_fall`.
    Sin2RampHold,
    Constant,
}

/// Laser envelope and linear detuning sweep. Times in us, detunings in rad/us.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub t_total: f64,
    pub t_ramp: f64,
    pub t_fall: f64,
    pub delta_start: f64,
    pub delta_end: f64,
    pub shape: PulseShape,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        require_positive("t_total", self.t_total)?;
        require_nonnegative("t_ramp", self.t_ramp)?;
        require_nonnegative("t_fall", self.t_fall)?;
        if self.t_ramp > 0.5 * self.t_total {
            return Err(Error::domain("t_ramp", "must not exceed t_total / 2"));
        }
        if self.t_fall > 0.5 * self.t_total {
            return Err(Error::domain("t_fall", "must not exceed t_total / 2"));
        }
        if !self.delta_start.is_finite() || !self.delta_end.is_finite() {
            return Err(Error::domain(
                "delta_start",
                "sweep endpoints must be finite",
            ));
        }
        Ok(())
    }

    /// Envelope `Omega(t) / Omega_max`.
    pub fn envelope(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Constant => 1.0,
            PulseShape::Sin2RampHold => {
                if t < self.t_ramp {
                    (FRAC_PI_2 * t / self.t_ramp).sin().powi(2)
                } else if t > self.t_total - self.t_fall {
                    (FRAC_PI_2 * (self.t_total - t).max(0.0) / self.t_fall)
                        .sin()
                        .powi(2)
                } else {
                    1.0
                }
            }
        }
    }

    /// Sweep detuning `delta(t)`.
    pub fn sweep(&self, t: f64) -> f64 {
        self.delta_start + (self.delta_end - self.delta_start) * t / self.t_total
    }

    /// `d delta / dt`.
    pub fn sweep_rate(&self) -> f64 {
        (self.delta_end - self.delta_start) / self.t_total
    }

    pub fn max_abs_sweep(&self) -> f64 {
        self.delta_start.abs().max(self.delta_end.abs())
    }

    pub fn output_times(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|i| self.t_total * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// How spin-wave decay enters the equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `-i Gamma/2` on every spin-wave amplitude.
    Direct,
    /// Amplitudes rescaled by `exp(Gamma t / 2)`, decay carried by the couplings.
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteOptions {
    pub gamma_s: f64,
    pub decay: DecayModel,
    pub n_output: usize,
    pub integrator: Dopri5,
    /// Atoms whose static shift exceeds this multiple of their coupling plus
    /// the sweep window are eliminated adiabatically; `None` keeps all.
    pub slaving_ratio: Option<f64>,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            gamma_s: 0.0,
            decay: DecayModel::Direct,
            n_output: 500,
            integrator: Dopri5::default(),
            slaving_ratio: Some(25.0),
        }
    }
}

impl WriteOptions {
    pub fn with_gamma(gamma_s: f64) -> Self {
        Self {
            gamma_s,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct WriteResult {
    pub times: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    /// `p0 + p1`.
    pub norm: Vec<f64>,
    /// Accumulated decay `Gamma int p1 dt`.
    pub loss: Vec<f64>,
    /// Intermediate-state weight (three-level model only).
    pub p_intermediate: Option<Vec<f64>>,
    /// `[C0, C1, ..., CN]` at `t_total`.
    pub final_amplitudes: Vec<C64>,
    pub eta_w: f64,
    pub norm_loss: f64,
    pub n_slaved: usize,
    pub stats: StepStats,
}

/// Partition of atoms into explicitly integrated and adiabatically slaved.
pub(crate) struct Partition {
    pub explicit: Vec<usize>,
    pub slaved: Vec<usize>,
}

pub(crate) fn partition(set: &CouplingSet, sched: &PulseSchedule, ratio: Option<f64>) -> Partition {
    let window = sched.max_abs_sweep() + (set.light_shift + set.partner_shift).abs();
    let (mut explicit, mut slaved) = (Vec::new(), Vec::new());
    for j in 0..set.len() {
        let far =
            ratio.is_some_and(|k| set.dipole_shift[j].abs() >= k * (set.d_tilde[j].abs() + window));
        if far {
            slaved.push(j)
        } else {
            explicit.push(j)
        }
    }
    Partition { explicit, slaved }
}

/// Second-order shift of |C0> from slaved atoms and their summed weight
/// `sum |D~_j / (delta~_j - i Gamma/2)|^2`.
pub(crate) fn slaved_terms(
    set: &CouplingSet,
    slaved: &[usize],
    s: f64,
    sweep: f64,
    gamma: f64,
) -> (C64, f64) {
    let mut shift = C64::new(0.0, 0.0);
    let mut weight = 0.0;
    let common = sweep + s * s * (set.light_shift + set.partner_shift);
    for &j in slaved {
        let dt = s * set.d_tilde[j];
        let den = C64::new(common + set.dipole_shift[j], -0.5 * gamma);
        shift -= dt * dt / den;
        weight += dt * dt / den.norm_sqr();
    }
    (shift, weight)
}

struct TwoLevelWrite<'a> {
    set: &'a CouplingSet,
    sched: &'a PulseSchedule,
    gamma: f64,
    decay: DecayModel,
    part: &'a Partition,
}

impl ComplexSystem for TwoLevelWrite<'_> {
    fn dim(&self) -> usize {
        self.part.explicit.len() + 2
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let s = self.sched.envelope(t);
        let common = self.sched.sweep(t) + s * s * (self.set.light_shift + self.set.partner_shift);
        let m = self.part.explicit.len();
        let c0 = y[0];
        let (shift, weight) = slaved_terms(
            self.set,
            &self.part.slaved,
            s,
            self.sched.sweep(t),
            self.gamma,
        );
        let (down, up, damp) = match self.decay {
            DecayModel::Direct => (1.0, 1.0, 0.5 * self.gamma),
            DecayModel::Transformed => {
                let e = (0.5 * self.gamma * t).exp();
                (1.0 / e, e, 0.0)
            }
        };
        let mut acc = shift * c0;
        let mut pop = 0.0;
        for (k, &j) in self.part.explicit.iter().enumerate() {
            let cj = y[k + 1];
            let dt = s * self.set.d_tilde[j];
            acc += cj * (dt * down);
            let det = C64::new(common + self.set.dipole_shift[j], -damp);
            // dC_j/dt = -i (D~ C0 + (delta~ - i Gamma/2) C_j)
            let h = c0 * (dt * up) + det * cj;
            dy[k + 1] = C64::new(h.im, -h.re);
            pop += cj.norm_sqr();
        }
        dy[0] = C64::new(acc.im, -acc.re);
        let pop = match self.decay {
            DecayModel::Direct => pop,
            DecayModel::Transformed => pop * (-self.gamma * t).exp(),
        };
        dy[m + 1] = C64::new(self.gamma * (pop + weight * c0.norm_sqr()), 0.0);
    }
}

/// Integrates the single-excitation write dynamics for one realization,
/// starting from |u, G>.
pub fn simulate_write(
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
    let sys = TwoLevelWrite {
        set,
        sched,
        gamma: opts.gamma_s,
        decay: opts.decay,
        part: &part,
    };
    let m = part.explicit.len();
    let times = sched.output_times(opts.n_output);
    let mut y0 = vec![C64::new(0.0, 0.0); m + 2];
    y0[0] = C64::new(1.0, 0.0);
    let n_out = times.len();
    let (mut p0, mut p1, mut loss) = (vec![0.0; n_out], vec![0.0; n_out], vec![0.0; n_out]);
    let gamma = opts.gamma_s;
    let decay = opts.decay;
    let (y, stats) = opts.integrator.integrate(&sys, &times, y0, |i, t, y| {
        let scale = match decay {
            DecayModel::Direct => 1.0,
            DecayModel::Transformed => (-gamma * t).exp(),
        };
        p0[i] = y[0].norm_sqr();
        p1[i] = y[1..=m].iter().map(|c| c.norm_sqr()).sum::<f64>() * scale;
        loss[i] = y[m + 1].re;
    })?;

    let t_end = sched.t_total;
    let s_end = sched.envelope(t_end);
    let frame = match decay {
        DecayModel::Direct => 1.0,
        DecayModel::Transformed => (-0.5 * gamma * t_end).exp(),
    };
    let mut amps = vec![C64::new(0.0, 0.0); set.len() + 1];
    amps[0] = y[0];
    for (k, &j) in part.explicit.iter().enumerate() {
        amps[j + 1] = y[k + 1] * frame;
    }
    let common = sched.sweep(t_end) + s_end * s_end * (set.light_shift + set.partner_shift);
    for &j in &part.slaved {
        let den = C64::new(common + set.dipole_shift[j], -0.5 * gamma);
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
        p_intermediate: None,
        final_amplitudes: amps,
        eta_w,
        norm_loss,
        n_slaved: part.slaved.len(),
        stats,
    })
}

/// Evolves amplitudes `[C0, C1, ..., CN]` from `t0` to `t1` (either
/// direction) with every atom explicit.
pub fn propagate(
    set: &CouplingSet,
    sched: &PulseSchedule,
    opts: &WriteOptions,
    y0: &[C64],
    t0: f64,
    t1: f64,
) -> Result<Vec<C64>> {
    sched.validate()?;
    require_nonnegative("gamma_s", opts.gamma_s)?;
    if y0.len() != set.len() + 1 {
        return Err(Error::domain(
            "y0",
            "length must be the number of atoms plus one",
        ));
    }
    let part = partition(set, sched, None);
    let sys = TwoLevelWrite {
        set,
        sched,
        gamma: opts.gamma_s,
        decay: DecayModel::Direct,
        part: &part,
    };
    let mut y = y0.to_vec();
    y.push(C64::new(0.0, 0.0));
    let (mut y, _) = opts
        .integrator
        .integrate(&sys, &[t0, t1], y, |_, _, _| {})?;
    y.pop();
    Ok(y)
}

/// Two-state dynamics of the collective model with a static offset
/// `model.delta_tilde` added to the sweep.
pub fn simulate_collective(
    model: &TwoLevelEff,
    sched: &PulseSchedule,
    opts: &WriteOptions,
) -> Result<WriteResult> {
    let set = CouplingSet::synthetic(vec![model.d_bar], vec![model.delta_tilde])?;
    let opts = WriteOptions {
        slaving_ratio: None,
        ..*opts
    };
    simulate_write(&set, sched, &opts)
}

/// Normalized spin-wave profile over `n_bins` equal-population slices along
/// z, from the final amplitudes of `result` on `cloud`.
pub fn spin_wave_profile(
    result: &WriteResult,
    cloud: &AtomCloud,
    n_bins: usize,
) -> Result<SpinWaveProfile> {
    if n_bins == 0 {
        return Err(Error::domain("n_bins", "must be at least 1"));
    }
    if result.final_amplitudes.len() != cloud.len() + 1 {
        return Err(Error::domain(
            "final_amplitudes",
            "do not match the cloud size",
        ));
    }
    let z0 = cloud.geometry.center[2];
    let sz = cloud.geometry.sigma_z;
    let mut weight = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (r, c) in cloud.positions.iter().zip(&result.final_amplitudes[1..]) {
        let zt = 0.5 * (1.0 + erf(SQRT_2 * (r.z - z0) / sz));
        let b = ((zt * n_bins as f64) as usize).min(n_bins - 1);
        weight[b] += c.norm_sqr();
        count[b] += 1;
    }
    if let Some(bin) = count.iter().position(|&c| c == 0) {
        return Err(Error::EmptyBin { bin, n_bins });
    }
    let total: f64 = weight.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Normalization(total));
    }
    let width = 1.0 / n_bins as f64;
    let amplitude = weight
        .iter()
        .map(|w| (w / (total * width)).sqrt())
        .collect();
    SpinWaveProfile::binned(amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::from_2pi_mhz as mhz;

    pub(crate) fn default_schedule() -> PulseSchedule {
        PulseSchedule {
            t_total: 1.0,
            t_ramp: 0.2,
            t_fall: 0.1,
            delta_start: mhz(10.0),
            delta_end: mhz(-10.0),
            shape: PulseShape::Sin2RampHold,
        }
    }

    fn flat(t_total: f64) -> PulseSchedule {
        PulseSchedule {
            t_total,
            t_ramp: 0.0,
            t_fall: 0.0,
            delta_start: 0.0,
            delta_end: 0.0,
            shape: PulseShape::Constant,
        }
    }

    #[test]
    fn envelope_shape() {
        let s = default_schedule();
        assert_eq!(s.envelope(0.0), 0.0);
        assert!((s.envelope(0.1) - 0.5).abs() < 1e-12);
        assert_eq!(s.envelope(0.5), 1.0);
        assert!((s.envelope(0.95) - 0.5).abs() < 1e-12);
        assert!(s.envelope(1.0).abs() < 1e-30);
        assert!((s.sweep(0.5)).abs() < 1e-12);
        let mut bad = s;
        bad.t_ramp = 0.6;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_atom_rabi() {
        let d = 4.0;
        let set = CouplingSet::synthetic(vec![d], vec![0.0]).unwrap();
        let r = simulate_write(&set, &flat(2.0), &WriteOptions::default()).unwrap();
        for (t, p) in r.times.iter().zip(&r.p1) {
            assert!((p - (d * t).sin().powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn uncoupled_stays_put() {
        let set = CouplingSet::synthetic(vec![0.0; 4], vec![0.3; 4]).unwrap();
        let r = simulate_write(&set, &default_schedule(), &WriteOptions::with_gamma(0.1)).unwrap();
        assert!(r.p0.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(r.eta_w.abs() < 1e-15);
    }

    #[test]
    fn decay_frames_agree_and_account_for_loss() {
        let set = CouplingSet::synthetic(vec![9.0, 14.0, 20.0], vec![-1.0, 0.5, -3.0]).unwrap();
        let sched = default_schedule();
        let a = simulate_write(&set, &sched, &WriteOptions::with_gamma(0.3)).unwrap();
        let b = simulate_write(
            &set,
            &sched,
            &WriteOptions {
                decay: DecayModel::Transformed,
                ..WriteOptions::with_gamma(0.3)
            },
        )
        .unwrap();
        for i in 0..a.times.len() {
            assert!((a.p1[i] - b.p1[i]).abs() < 1e-7);
            assert!((a.norm[i] + a.loss[i] - 1.0).abs() < 1e-7);
            assert!((b.norm[i] + b.loss[i] - 1.0).abs() < 1e-7);
        }
        assert!(a.norm_loss > 0.0);
    }
}
