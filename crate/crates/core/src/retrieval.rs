//! Retrieval of the stored spin wave into the forward photonic mode.
//!
//! Positions along the cloud are the cumulative optical depth `z~` in [0, 1].
//! The efficiency is the overlap of the spin wave with the retrieval kernel,
//! `eta_r = int int S*(1-z) S(1-z') K(z, z') dz dz'`. The kernel is written
//! in terms of the depth `d = OD / 2`.

use crate::bessel::i0_scaled;
use crate::error::{require_nonnegative, require_positive, require_probability, Error, Result};
use crate::quadrature::GaussLegendre;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Speed of light in um/us.
pub const SPEED_OF_LIGHT_UM_PER_US: f64 = 2.997_924_58e8;

/// Spin-wave amplitude, piecewise constant over equal bins of `z~`,
/// normalized so that `sum |S_k|^2 / n_bins = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinWaveProfile {
    pub amplitude: Vec<f64>,
}

impl SpinWaveProfile {
    pub fn flat() -> Self {
        Self {
            amplitude: vec![1.0],
        }
    }

    pub fn binned(amplitude: Vec<f64>) -> Result<Self> {
        if amplitude.is_empty() || amplitude.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("amplitude", "needs at least one finite bin"));
        }
        let p = Self { amplitude };
        let norm = p.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Normalization(norm));
        }
        Ok(p)
    }

    pub fn n_bins(&self) -> usize {
        self.amplitude.len()
    }

    /// `int |S|^2 dz~`.
    pub fn norm(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a).sum::<f64>() / self.n_bins() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.n_bins();
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    /// Bin centers.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_bins() as f64;
        (0..self.n_bins()).map(|k| (k as f64 + 0.5) / n).collect()
    }

    pub fn value_at(&self, z: f64) -> f64 {
        let n = self.n_bins();
        let k = ((z * n as f64).floor().max(0.0) as usize).min(n - 1);
        self.amplitude[k]
    }
}

/// Retrieval parameters. `delta_norm` is the signal detuning in units of
/// `gamma_e`; rates are in rad/us.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub od: f64,
    pub delta_norm: f64,
    pub z_s: f64,
    pub omega_c: f64,
    pub gamma_e: f64,
    pub g_root_n: f64,
}

impl RetrievalParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("od", self.od)?;
        require_nonnegative("z_s", self.z_s)?;
        if !self.delta_norm.is_finite() {
            return Err(Error::domain("delta_norm", "must be finite"));
        }
        require_positive("gamma_e", self.gamma_e)?;
        require_nonnegative("omega_c", self.omega_c)?;
        require_nonnegative("g_root_n", self.g_root_n)?;
        Ok(())
    }

    /// Depth entering the kernel.
    pub fn kernel_depth(&self) -> f64 {
        0.5 * self.od
    }
}

/// Ground-coherence loss during retrieval relative to the control-induced
/// rate, `((gamma_s + gamma_sg) / gamma_e) / (Omega_c / gamma_e)^2`.
pub fn z_s_from_rates(gamma_s: f64, gamma_sg: f64, gamma_e: f64, omega_c: f64) -> Result<f64> {
    require_nonnegative("gamma_s", gamma_s)?;
    require_nonnegative("gamma_sg", gamma_sg)?;
    require_positive("gamma_e", gamma_e)?;
    require_positive("omega_c", omega_c)?;
    Ok((gamma_s + gamma_sg) * gamma_e / (omega_c * omega_c))
}

/// `g sqrt(N)` from the depth, using `d = g^2 N L / (gamma c)` with the
/// optical coherence decaying at `gamma_e / 2`.
pub fn collective_coupling_from_depth(od: f64, gamma_e: f64, length_um: f64) -> Result<f64> {
    require_positive("od", od)?;
    require_positive("gamma_e", gamma_e)?;
    require_positive("length_um", length_um)?;
    Ok((0.5 * od * 0.5 * gamma_e * SPEED_OF_LIGHT_UM_PER_US / length_um).sqrt())
}

/// Dark-state mixing angle `atan(g sqrt(N) / Omega_c)`.
pub fn mixing_angle(params: &RetrievalParams) -> f64 {
    params.g_root_n.atan2(params.omega_c)
}

/// Group velocity in units of c, `cos^2 theta`.
pub fn group_velocity_fraction(params: &RetrievalParams) -> f64 {
    mixing_angle(params).cos().powi(2)
}

fn kernel_parts(params: &RetrievalParams) -> (f64, f64, f64) {
    let d = params.kernel_depth();
    let zs = params.z_s;
    let f = 2.0 / (2.0 + zs * (1.0 + params.delta_norm * params.delta_norm));
    (d, zs, f)
}

/// Retrieval kernel `K(z, z')`.
pub fn retrieval_kernel(params: &RetrievalParams, z: f64, zp: f64) -> C64 {
    let (d, zs, f) = kernel_parts(params);
    kernel_eval(d, zs, f, params.delta_norm, z, zp)
}

#[inline]
fn kernel_eval(d: f64, zs: f64, f: f64, delta: f64, z: f64, zp: f64) -> C64 {
    let half = 0.5 * d * f;
    let x = d * f * (z * zp).max(0.0).sqrt();
    let re = -half * (1.0 + zs) * (z + zp) + x;
    let im = -half * zs * delta * (zp - z);
    C64::from_polar(half * i0_scaled(x) * re.exp(), im)
}

/// Overlap of `profile` with the kernel, Gauss-Legendre with about
/// `n_nodes` points per dimension, checked against a rule twice as fine.
pub fn retrieval_efficiency(
    params: &RetrievalParams,
    profile: &SpinWaveProfile,
    n_nodes: usize,
) -> Result<f64> {
    params.validate()?;
    let norm = profile.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(norm));
    }
    let coarse = overlap(params, profile, n_nodes);
    let fine = overlap(params, profile, 2 * n_nodes);
    let change = ((fine - coarse) / fine).abs();
    if change > 1e-6 {
        return Err(Error::Quadrature {
            what: "retrieval overlap",
            change,
            tol: 1e-6,
        });
    }
    Ok(fine)
}

fn overlap(params: &RetrievalParams, profile: &SpinWaveProfile, n_nodes: usize) -> f64 {
    let bins = profile.n_bins();
    let per_bin = (n_nodes / bins).max(8);
    let rule = GaussLegendre::new(per_bin);
    let grid = rule.composite(&profile.edges());
    // S(1 - z) at each node; bins are aligned with the panels.
    let s: Vec<f64> = grid
        .iter()
        .map(|&(z, _)| profile.value_at(1.0 - z))
        .collect();
    let (d, zs, f) = kernel_parts(params);
    let mut total = C64::new(0.0, 0.0);
    for (a, &(z, wz)) in grid.iter().enumerate() {
        let mut row = C64::new(0.0, 0.0);
        for (b, &(zp, wp)) in grid.iter().enumerate() {
            row += kernel_eval(d, zs, f, params.delta_norm, z, zp) * (wp * s[b]);
        }
        total += row * (wz * s[a]);
    }
    total.re
}

/// Kernel sampled on an `n x n` grid of bin centers: `(z, z', K)`.
pub fn kernel_grid(params: &RetrievalParams, n: usize) -> Vec<(f64, f64, C64)> {
    let pts: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    pts.iter()
        .flat_map(|&z| {
            pts.iter()
                .map(move |&zp| (z, zp, retrieval_kernel(params, z, zp)))
        })
        .collect()
}

/// Write and retrieval efficiencies combined.
pub fn total_interface_efficiency(eta_w: f64, eta_r: f64) -> Result<f64> {
    require_probability("eta_w", eta_w)?;
    require_probability("eta_r", eta_r)?;
    Ok(eta_w * eta_r)
}
