//! Ensemble geometry: density profile, sampling, optical depth, overlap with
//! the tweezer and blockade radius.

use crate::error::{require_positive, Error, Result};
use crate::quadrature::refine;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec3 = Vector3<f64>;

/// Gaussian cloud with density
/// `rho(r) = 8N / ((2pi)^{3/2} s_perp^2 s_z) exp(-2(x^2+y^2)/s_perp^2 - 2z^2/s_z^2)`
/// about `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudGeometry {
    pub n_atoms: usize,
    pub sigma_perp: f64,
    pub sigma_z: f64,
    pub center: [f64; 3],
}

/// Position of the communication atom and the radius inside which ensemble
/// atoms would be confused with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweezerSpec {
    pub position: [f64; 3],
    pub exclusion_radius: f64,
}

/// One sampled realization of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    pub geometry: CloudGeometry,
    pub positions: Vec<Vec3>,
    pub seed: u64,
}

impl CloudGeometry {
    pub fn new(n_atoms: usize, sigma_perp: f64, sigma_z: f64, center: [f64; 3]) -> Result<Self> {
        let g = Self {
            n_atoms,
            sigma_perp,
            sigma_z,
            center,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma_perp", self.sigma_perp)?;
        require_positive("sigma_z", self.sigma_z)?;
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("center", "must be finite"));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    /// Standard deviation of the sampled coordinates along (x, y, z).
    pub fn coordinate_std(&self) -> [f64; 3] {
        [
            0.5 * self.sigma_perp,
            0.5 * self.sigma_perp,
            0.5 * self.sigma_z,
        ]
    }

    pub fn peak_density(&self) -> f64 {
        self.n_atoms as f64 * self.unit_peak_density()
    }

    fn unit_peak_density(&self) -> f64 {
        8.0 / ((2.0 * PI).powf(1.5) * self.sigma_perp.powi(2) * self.sigma_z)
    }

    /// Atoms per um^3 at `r`.
    pub fn density_at(&self, r: &Vec3) -> f64 {
        self.n_atoms as f64 * self.unit_density_at(r)
    }

    /// Density normalized to one atom.
    pub fn unit_density_at(&self, r: &Vec3) -> f64 {
        let d = r - self.center();
        let sp2 = self.sigma_perp * self.sigma_perp;
        let sz2 = self.sigma_z * self.sigma_z;
        self.unit_peak_density()
            * (-2.0 * (d.x * d.x + d.y * d.y) / sp2 - 2.0 * d.z * d.z / sz2).exp()
    }

    /// Single-axis marginal of the unit density (axis 0, 1 or 2).
    pub fn marginal(&self, axis: usize, u: f64) -> f64 {
        let s = if axis == 2 {
            self.sigma_z
        } else {
            self.sigma_perp
        };
        let d = u - self.center[axis];
        (2.0 / PI).sqrt() / s * (-2.0 * d * d / (s * s)).exp()
    }
}

impl TweezerSpec {
    pub fn new(position: [f64; 3], exclusion_radius: f64) -> Result<Self> {
        require_positive("exclusion_radius", exclusion_radius)?;
        if position.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("tweezer position", "must be finite"));
        }
        Ok(Self {
            position,
            exclusion_radius,
        })
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

impl AtomCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Positions relative to the cloud center.
    pub fn centered(&self) -> impl Iterator<Item = Vec3> + '_ {
        let c = self.geometry.center();
        self.positions.iter().map(move |p| p - c)
    }
}

/// Draws `n_atoms` independent positions from the density.
pub fn sample(geometry: &CloudGeometry, seed: u64) -> Result<AtomCloud> {
    geometry.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = geometry.coordinate_std();
    let dists: Vec<Normal<f64>> = (0..3)
        .map(|a| Normal::new(geometry.center[a], std[a]).expect("validated widths"))
        .collect();
    let positions = (0..geometry.n_atoms)
        .map(|_| {
            Vec3::new(
                dists[0].sample(&mut rng),
                dists[1].sample(&mut rng),
                dists[2].sample(&mut rng),
            )
        })
        .collect();
    Ok(AtomCloud {
        geometry: *geometry,
        positions,
        seed,
    })
}

/// Resonant optical depth along z through the cloud center.
pub fn optical_depth(geometry: &CloudGeometry, cross_section: f64) -> Result<f64> {
    geometry.validate()?;
    require_positive("cross_section", cross_section)?;
    Ok(cross_section * geometry.peak_density() * geometry.sigma_z * (PI / 2.0).sqrt())
}

/// Expected number of ensemble atoms inside the cube of half-width
/// `exclusion_radius` around the tweezer.
pub fn escape_probability(geometry: &CloudGeometry, tweezer: &TweezerSpec) -> Result<f64> {
    geometry.validate()?;
    require_positive("exclusion_radius", tweezer.exclusion_radius)?;
    let a = tweezer.exclusion_radius;
    let mut p = geometry.n_atoms as f64;
    for axis in 0..3 {
        let c = tweezer.position[axis];
        let s = geometry.coordinate_std()[axis];
        let panels = ((2.0 * a / s).ceil() as usize).clamp(1, 4096);
        let breaks: Vec<f64> = (0..=panels)
            .map(|k| c - a + 2.0 * a * k as f64 / panels as f64)
            .collect();
        let factor = refine("escape probability", &[8, 16, 32, 64], 1e-10, |rule| {
            rule.integrate_panels(&breaks, |u| geometry.marginal(axis, u))
        })?;
        p *= factor;
    }
    Ok(p)
}

/// Blockade radius `(C6 / Omega_eff)^{1/6}` in um, both arguments in
/// internal units.
pub fn blockade_radius(c6: f64, omega_eff: f64) -> Result<f64> {
    require_positive("c6", c6)?;
    require_positive("omega_eff", omega_eff)?;
    Ok((c6 / omega_eff).powf(1.0 / 6.0))
}
