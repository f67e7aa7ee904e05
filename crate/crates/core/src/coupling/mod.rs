//! Dipolar exchange between the communication atom and the ensemble, the
//! effective two-level description of the write step, and its validation.

mod five_level;

pub use five_level::{
    eigenvalues2, five_level_hamiltonian, five_level_reduce, slow_eigenvalues, FiveLevelParams,
    ReducedHamiltonian,
};

use crate::cloud::{AtomCloud, CloudGeometry, TweezerSpec, Vec3};
use crate::error::{require_nonnegative, require_positive, Error, Result};
use crate::quadrature::{graded_breaks, refine, tensor3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimum separation (um) below which the pair coupling is rejected.
pub const SINGULARITY_FLOOR_UM: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelLabel {
    Up,
    Down,
}

impl ChannelLabel {
    pub const BOTH: [ChannelLabel; 2] = [ChannelLabel::Up, ChannelLabel::Down];

    pub fn partner(self) -> Self {
        match self {
            ChannelLabel::Up => ChannelLabel::Down,
            ChannelLabel::Down => ChannelLabel::Up,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelLabel::Up => "up",
            ChannelLabel::Down => "down",
        }
    }
}

/// One write channel: the Rydberg pair it uses and its excitation laser.
/// Frequencies in rad/us, `c3` in rad/us um^3, `k0` in rad/um.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RydbergChannel {
    pub label: ChannelLabel,
    pub c3: f64,
    pub omega_max: f64,
    pub delta: f64,
    pub k0: [f64; 3],
    pub gamma_s: f64,
}

impl RydbergChannel {
    pub fn validate(&self) -> Result<()> {
        if !self.c3.is_finite() || self.c3 == 0.0 {
            return Err(Error::domain("c3", "must be finite and non-zero"));
        }
        require_positive("omega_max", self.omega_max)?;
        if !self.delta.is_finite() || self.delta == 0.0 {
            return Err(Error::domain("delta", "must be finite and non-zero"));
        }
        require_nonnegative("gamma_s", self.gamma_s)?;
        if self.k0.iter().any(|k| !k.is_finite()) {
            return Err(Error::domain("k0", "must be finite"));
        }
        Ok(())
    }

    /// Light shift `Omega_max^2 / Delta` of the ground state.
    pub fn light_shift(&self) -> f64 {
        self.omega_max * self.omega_max / self.delta
    }

    pub fn ratio(&self) -> f64 {
        self.omega_max / self.delta
    }
}

/// `D = C3 / (2 r^3) (1 - 3 cos^2 theta)` for the pair (`r_atom`, `r_comm`).
pub fn pair_coupling(c3: f64, r_atom: &Vec3, r_comm: &Vec3, axis: &Vec3) -> Result<f64> {
    let sep = r_atom - r_comm;
    let r = sep.norm();
    if !(r >= SINGULARITY_FLOOR_UM) {
        return Err(Error::Singularity {
            index: None,
            separation: r,
            floor: SINGULARITY_FLOOR_UM,
        });
    }
    let a = axis.norm();
    if a == 0.0 || !a.is_finite() {
        return Err(Error::UndefinedAngle);
    }
    let cos = sep.dot(axis) / (r * a);
    Ok(c3 / (2.0 * r * r * r) * (1.0 - 3.0 * cos * cos))
}

/// Per-atom couplings of one channel for one cloud realization.
///
/// `delta_tilde(j)` is the static part of the effective detuning at full
/// laser power, `light_shift + partner_shift + dipole_shift[j]`; the write
/// dynamics add the sweep and scale the light shifts with the pulse envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub label: ChannelLabel,
    pub d: Vec<f64>,
    pub d_tilde: Vec<f64>,
    pub dipole_shift: Vec<f64>,
    pub phases: Vec<f64>,
    pub light_shift: f64,
    pub partner_shift: f64,
    pub omega_max: f64,
    pub delta: f64,
    pub d_bar: f64,
}

impl CouplingSet {
    /// Set with explicit effective couplings and static shifts, no light
    /// shifts and zero phases.
    pub fn synthetic(d_tilde: Vec<f64>, dipole_shift: Vec<f64>) -> Result<Self> {
        if d_tilde.len() != dipole_shift.len() || d_tilde.is_empty() {
            return Err(Error::domain(
                "d_tilde",
                "needs one shift per coupling and at least one atom",
            ));
        }
        let n = d_tilde.len();
        let d_bar = d_tilde.iter().map(|d| d * d).sum::<f64>().sqrt();
        Ok(Self {
            label: ChannelLabel::Up,
            d: d_tilde.clone(),
            d_tilde,
            dipole_shift,
            phases: vec![0.0; n],
            light_shift: 0.0,
            partner_shift: 0.0,
            omega_max: 1.0,
            delta: 1.0,
            d_bar,
        })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn delta_tilde(&self, j: usize) -> f64 {
        self.light_shift + self.partner_shift + self.dipole_shift[j]
    }

    pub fn delta_tilde_all(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.delta_tilde(j)).collect()
    }

    /// Copy with every static dipole shift replaced by `shift`.
    pub fn with_uniform_shift(&self, shift: f64) -> Self {
        let mut s = self.clone();
        s.dipole_shift.iter_mut().for_each(|x| *x = shift);
        s
    }

    /// Collective two-level model at full power.
    pub fn collective(&self) -> TwoLevelEff {
        TwoLevelEff {
            d_bar: self.d_bar,
            delta_tilde: self.light_shift + self.partner_shift,
        }
    }
}

/// Couplings of every atom in `cloud` to the communication atom.
/// `partner_shift` is the partner laser's `Omega^2 / Delta` at full power.
pub fn build_couplings(
    cloud: &AtomCloud,
    tweezer: &TweezerSpec,
    channel: &RydbergChannel,
    partner_shift: f64,
    axis: &Vec3,
) -> Result<CouplingSet> {
    channel.validate()?;
    if !partner_shift.is_finite() {
        return Err(Error::domain("partner_shift", "must be finite"));
    }
    let rc = tweezer.position();
    let k0 = Vec3::from(channel.k0);
    let n = cloud.len();
    let mut d = Vec::with_capacity(n);
    let mut phases = Vec::with_capacity(n);
    for (j, r) in cloud.positions.iter().enumerate() {
        let dj = pair_coupling(channel.c3, r, &rc, axis).map_err(|e| match e {
            Error::Singularity {
                separation, floor, ..
            } => Error::Singularity {
                index: Some(j),
                separation,
                floor,
            },
            other => other,
        })?;
        d.push(dj);
        phases.push(k0.dot(r));
    }
    let ratio = channel.ratio();
    let d_tilde: Vec<f64> = d.iter().map(|x| ratio * x).collect();
    let dipole_shift = d.iter().map(|x| -x * x / channel.delta).collect();
    let d_bar = d_tilde.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(CouplingSet {
        label: channel.label,
        d,
        d_tilde,
        dipole_shift,
        phases,
        light_shift: channel.light_shift(),
        partner_shift,
        omega_max: channel.omega_max,
        delta: channel.delta,
        d_bar,
    })
}

/// `sum_j |D~_j|^2` restricted to atoms with `|x_j - x_0| <= sigma_perp`,
/// the sampled counterpart of the truncated overlap integral.
pub fn truncated_coupling_sum(set: &CouplingSet, cloud: &AtomCloud) -> f64 {
    let x0 = cloud.geometry.center[0];
    let s = cloud.geometry.sigma_perp;
    set.d_tilde
        .iter()
        .zip(&cloud.positions)
        .filter(|(_, r)| (r.x - x0).abs() <= s)
        .map(|(d, _)| d * d)
        .sum()
}

/// Quadrature estimate of the collective coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveStrength {
    /// Truncated overlap `I = int_{|x-x0|<=s_perp} rho~ D^2`, rad^2/us^2.
    pub i_integral: f64,
    /// `I (2pi)^{3/2} s_perp^5 s_z / (2 C3^2)`, dimensionless.
    pub i_constant: f64,
    /// `|Omega/Delta| sqrt(N I)`, rad/us.
    pub d_bar: f64,
    /// Pair coupling at the cloud center, rad/us.
    pub d_center: f64,
}

/// Collective coupling from the density-weighted overlap integral, with the
/// slab `|x - x0| <= sigma_perp` that keeps the integral finite.
pub fn collective_strength_quadrature(
    geometry: &CloudGeometry,
    tweezer: &TweezerSpec,
    channel: &RydbergChannel,
    axis: &Vec3,
) -> Result<CollectiveStrength> {
    geometry.validate()?;
    channel.validate()?;
    let a = axis.norm();
    if a == 0.0 || !a.is_finite() {
        return Err(Error::UndefinedAngle);
    }
    let axis_hat = axis / a;
    let rc = tweezer.position();
    let c0 = geometry.center();
    let [_, sy, sz] = geometry.coordinate_std();
    let (xlo, xhi) = (c0.x - geometry.sigma_perp, c0.x + geometry.sigma_perp);
    let gap = if rc.x > xhi {
        rc.x - xhi
    } else if rc.x < xlo {
        xlo - rc.x
    } else {
        0.0
    };
    let ell = gap.max(SINGULARITY_FLOOR_UM);
    let bx = graded_breaks(rc.x.clamp(xlo, xhi), ell / 4.0, xlo, xhi);
    let by = graded_breaks(rc.y, ell / 4.0, c0.y - 9.0 * sy, c0.y + 9.0 * sy);
    let bz = graded_breaks(rc.z, ell / 4.0, c0.z - 9.0 * sz, c0.z + 9.0 * sz);
    let c3 = channel.c3;
    let integrand = |x: f64, y: f64, z: f64| {
        let r = Vec3::new(x, y, z);
        let sep = r - rc;
        let r2 = sep.norm_squared();
        let cos2 = sep.dot(&axis_hat).powi(2) / r2;
        let d = c3 / (2.0 * r2 * r2.sqrt()) * (1.0 - 3.0 * cos2);
        geometry.unit_density_at(&r) * d * d
    };
    let i_integral = refine(
        "collective overlap integral",
        &[8, 12, 16, 24, 32],
        1e-6,
        |rule| tensor3(rule, &bx, &by, &bz, integrand),
    )?;
    let i_constant =
        i_integral * (2.0 * PI).powf(1.5) * geometry.sigma_perp.powi(5) * geometry.sigma_z
            / (2.0 * c3 * c3);
    let d_bar = channel.ratio().abs() * (geometry.n_atoms as f64 * i_integral).sqrt();
    let d_center = pair_coupling(c3, &c0, &rc, axis)?;
    Ok(CollectiveStrength {
        i_integral,
        i_constant,
        d_bar,
        d_center,
    })
}

/// Collective two-level model in the basis {|u,G>, |d,S>}:
/// `H = [[0, d_bar], [d_bar, -delta_tilde]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelEff {
    pub d_bar: f64,
    pub delta_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigensystem {
    pub e_plus: f64,
    pub e_minus: f64,
    /// Components on (|u,G>, |d,S>).
    pub v_plus: [f64; 2],
    pub v_minus: [f64; 2],
}

pub fn eigensystem(model: &TwoLevelEff) -> Eigensystem {
    let h = 0.5 * model.delta_tilde;
    let rabi = (model.d_bar * model.d_bar + h * h).sqrt();
    if rabi == 0.0 {
        return Eigensystem {
            e_plus: 0.0,
            e_minus: 0.0,
            v_plus: [1.0, 0.0],
            v_minus: [0.0, 1.0],
        };
    }
    let c = h / rabi;
    let s = if model.d_bar < 0.0 { -1.0 } else { 1.0 };
    Eigensystem {
        e_plus: -h + rabi,
        e_minus: -h - rabi,
        v_plus: [(0.5 * (1.0 + c)).sqrt(), s * (0.5 * (1.0 - c)).sqrt()],
        v_minus: [(0.5 * (1.0 - c)).sqrt(), -s * (0.5 * (1.0 + c)).sqrt()],
    }
}

/// Diabatic transition probability `exp(-2 pi D^2 / alpha)` for a linear
/// sweep of rate `alpha` (rad/us^2).
pub fn landau_zener_probability(d_bar: f64, alpha: f64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    Ok((-2.0 * PI * d_bar * d_bar / alpha).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{from_2pi_mhz, tabulated_coefficient, to_2pi_mhz};

    fn channel(label: ChannelLabel) -> RydbergChannel {
        let (c3, om, de) = match label {
            ChannelLabel::Up => (17.44, 14.7, 147.0),
            ChannelLabel::Down => (21.08, 12.5, 125.0),
        };
        RydbergChannel {
            label,
            c3: tabulated_coefficient(c3),
            omega_max: from_2pi_mhz(om),
            delta: from_2pi_mhz(de),
            k0: [0.0, 0.0, 21.0],
            gamma_s: 0.0,
        }
    }

    fn z() -> Vec3 {
        Vec3::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn center_couplings() {
        let rc = Vec3::new(7.1, 0.0, 0.0);
        let up = pair_coupling(channel(ChannelLabel::Up).c3, &Vec3::zeros(), &rc, &z()).unwrap();
        let dn = pair_coupling(channel(ChannelLabel::Down).c3, &Vec3::zeros(), &rc, &z()).unwrap();
        assert!((to_2pi_mhz(up) - 3.8776).abs() < 1e-3);
        assert!((to_2pi_mhz(dn) - 4.6869).abs() < 1e-3);
    }

    #[test]
    fn angular_factor_and_singularity() {
        let rc = Vec3::zeros();
        let along = pair_coupling(2.0, &Vec3::new(0.0, 0.0, 1.0), &rc, &z()).unwrap();
        assert!((along + 2.0).abs() < 1e-12);
        let magic = (1.0f64 / 3.0).sqrt().acos();
        let r = Vec3::new(magic.sin(), 0.0, magic.cos());
        assert!(pair_coupling(2.0, &r, &rc, &z()).unwrap().abs() < 1e-12);
        let e = pair_coupling(2.0, &Vec3::new(0.01, 0.0, 0.0), &rc, &z());
        assert!(matches!(e, Err(Error::Singularity { .. })));
        let e = pair_coupling(2.0, &Vec3::new(1.0, 0.0, 0.0), &rc, &Vec3::zeros());
        assert!(matches!(e, Err(Error::UndefinedAngle)));
    }

    #[test]
    fn eigensystem_limits() {
        let e = eigensystem(&TwoLevelEff {
            d_bar: 0.0,
            delta_tilde: 3.0,
        });
        assert!(e.e_plus.abs() < 1e-15 && (e.e_minus + 3.0).abs() < 1e-15);
        let e = eigensystem(&TwoLevelEff {
            d_bar: 2.0,
            delta_tilde: 0.0,
        });
        assert!((e.e_plus - 2.0).abs() < 1e-15 && (e.e_minus + 2.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.v_plus[0] - s).abs() < 1e-15 && (e.v_plus[1] - s).abs() < 1e-15);
    }

    #[test]
    fn landau_zener_values() {
        let d = from_2pi_mhz(5.0);
        let alpha = from_2pi_mhz(20.0);
        let p = landau_zener_probability(d, alpha).unwrap();
        assert!(((-p.ln()) - 49.348).abs() < 1e-2);
        assert!(landau_zener_probability(d, 0.0).is_err());
        assert_eq!(landau_zener_probability(0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn scaled_overlap_constant() {
        let g = CloudGeometry::new(1, 1.0, 7.5, [0.0; 3]).unwrap();
        let t = TweezerSpec::new([5.0 / (2.0 * 2.0f64.sqrt()), 0.0, 0.0], 0.25).unwrap();
        let s = collective_strength_quadrature(&g, &t, &channel(ChannelLabel::Up), &z()).unwrap();
        assert!(
            (s.i_constant - 0.135_293).abs() < 2e-5,
            "J = {}",
            s.i_constant
        );
    }

    #[test]
    fn default_collective_strength() {
        let g = CloudGeometry::new(500, 4.0, 30.0, [0.0; 3]).unwrap();
        let t = TweezerSpec::new([7.1, 0.0, 0.0], 1.0).unwrap();
        let up = collective_strength_quadrature(&g, &t, &channel(ChannelLabel::Up), &z()).unwrap();
        let dn =
            collective_strength_quadrature(&g, &t, &channel(ChannelLabel::Down), &z()).unwrap();
        assert!(
            (to_2pi_mhz(up.d_bar) - 4.5734).abs() < 1e-3,
            "{}",
            to_2pi_mhz(up.d_bar)
        );
        assert!(
            (to_2pi_mhz(dn.d_bar) - 5.5279).abs() < 1e-3,
            "{}",
            to_2pi_mhz(dn.d_bar)
        );
    }
}
