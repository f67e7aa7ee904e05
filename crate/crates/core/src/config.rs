//! Experiment configuration.
//!
//! [`ExperimentConfig`] mirrors the JSON file: frequencies carry an explicit
//! `_2pi_mhz` / `_2pi_khz` suffix and are converted once, by
//! [`ExperimentConfig::to_experiment`], into the internal [`Experiment`]
//! (rad/us, um, us). Missing keys take the defaults below; unknown keys are
//! rejected.

use crate::cloud::{CloudGeometry, TweezerSpec};
use crate::coupling::{ChannelLabel, RydbergChannel};
use crate::error::{Error, Result};
use crate::link::RateModel;
use crate::units::{from_2pi_khz, from_2pi_mhz, tabulated_coefficient};
use crate::write::{DecayModel, PulseSchedule, PulseShape};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleConfig,
    pub tweezer: TweezerConfig,
    pub channels: ChannelsConfig,
    pub pulses: PulsesConfig,
    pub retrieval: RetrievalConfig,
    pub link: LinkConfig,
    pub rate: RateConfig,
    pub mc: McConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    pub sigma_perp_um: f64,
    pub sigma_z_um: f64,
    pub center_um: [f64; 3],
    pub c6_ghz_um6: f64,
    pub omega_eff_2pi_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TweezerConfig {
    pub x_um: f64,
    pub y_um: f64,
    pub z_um: f64,
    pub exclusion_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsConfig {
    pub up: ChannelConfig,
    pub down: ChannelConfig,
    pub quantization_axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub c3_ghz_um3: f64,
    pub omega_max_2pi_mhz: f64,
    pub delta_2pi_mhz: f64,
    pub k0_dir: [f64; 3],
    pub k0_per_um: f64,
    pub gamma_s_2pi_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulsesConfig {
    pub t_total_us: f64,
    pub t_ramp_us: f64,
    pub t_fall_us: f64,
    pub delta_start_2pi_mhz: f64,
    pub delta_end_2pi_mhz: f64,
    pub shape: PulseShape,
    pub decay: DecayModel,
    pub n_output: usize,
    pub slaving_ratio: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    Flat,
    FromWrite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalConfig {
    pub od_override: Option<f64>,
    pub cross_section_um2: f64,
    pub delta_norm: f64,
    pub gamma_e_2pi_mhz: f64,
    pub gamma_s_2pi_mhz: f64,
    pub gamma_sg_2pi_mhz: f64,
    pub omega_c_2pi_mhz: f64,
    pub profile: ProfileMode,
    pub profile_bins: usize,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Fixed interface efficiency for the `link` and `rate` stages; when
    /// absent it is computed from the write and retrieval chain.
    pub eta_interface: Option<f64>,
    pub eta_t: f64,
    pub eta_d: f64,
    pub n_attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub tau_w_us: f64,
    pub tau_r_us: f64,
    pub tau_p_us: f64,
    pub prep_every: u32,
    pub prep_us: f64,
    pub cool_every: u32,
    pub cool_us: f64,
    pub paper_compat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let tilt = 0.05f64;
        Self {
            ensemble: EnsembleConfig {
                n_atoms: 500,
                sigma_perp_um: 4.0,
                sigma_z_um: 30.0,
                center_um: [0.0; 3],
                c6_ghz_um6: 360.7,
                omega_eff_2pi_mhz: 1.0,
            },
            tweezer: TweezerConfig {
                x_um: 7.1,
                y_um: 0.0,
                z_um: 0.0,
                exclusion_um: 1.0,
            },
            channels: ChannelsConfig {
                up: ChannelConfig {
                    c3_ghz_um3: 17.44,
                    omega_max_2pi_mhz: 14.7,
                    delta_2pi_mhz: 147.0,
                    k0_dir: [0.0, 0.0, 1.0],
                    k0_per_um: 21.15,
                    gamma_s_2pi_khz: 10.0,
                },
                down: ChannelConfig {
                    c3_ghz_um3: 21.08,
                    omega_max_2pi_mhz: 12.5,
                    delta_2pi_mhz: 125.0,
                    k0_dir: [tilt.sin(), 0.0, tilt.cos()],
                    k0_per_um: 21.15,
                    gamma_s_2pi_khz: 10.0,
                },
                quantization_axis: [0.0, 0.0, 1.0],
            },
            pulses: PulsesConfig {
                t_total_us: 1.0,
                t_ramp_us: 0.2,
                t_fall_us: 0.1,
                delta_start_2pi_mhz: 10.0,
                delta_end_2pi_mhz: -10.0,
                shape: PulseShape::Sin2RampHold,
                decay: DecayModel::Direct,
                n_output: 500,
                slaving_ratio: Some(25.0),
                rtol: 1e-8,
                atol: 1e-10,
            },
            retrieval: RetrievalConfig {
                od_override: None,
                cross_section_um2: 0.29,
                delta_norm: 0.0,
                gamma_e_2pi_mhz: 6.9,
                gamma_s_2pi_mhz: 0.0,
                gamma_sg_2pi_mhz: 0.0,
                omega_c_2pi_mhz: 10.0,
                profile: ProfileMode::Flat,
                profile_bins: 10,
                n_nodes: 400,
            },
            link: LinkConfig {
                eta_interface: None,
                eta_t: 0.7,
                eta_d: 0.9,
                n_attempts: 1_000_000,
            },
            rate: RateConfig {
                tau_w_us: 1.0,
                tau_r_us: 1.0,
                tau_p_us: 1.0,
                prep_every: 20,
                prep_us: 1.0,
                cool_every: 2000,
                cool_us: 1000.0,
                paper_compat: false,
            },
            mc: McConfig {
                n_realizations: 100,
                master_seed: 20_240_101,
            },
        }
    }
}

/// Write-step numerics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteSettings {
    pub decay: DecayModel,
    pub n_output: usize,
    pub slaving_ratio: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

/// Retrieval inputs in internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSettings {
    pub od_override: Option<f64>,
    pub cross_section_um2: f64,
    pub delta_norm: f64,
    pub gamma_e: f64,
    pub gamma_s: f64,
    pub gamma_sg: f64,
    pub omega_c: f64,
    pub profile: ProfileMode,
    pub profile_bins: usize,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSettings {
    pub eta_interface: Option<f64>,
    pub eta_transmission: f64,
    pub eta_detection: f64,
    pub n_attempts: u64,
}

/// Validated experiment in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub geometry: CloudGeometry,
    pub tweezer: TweezerSpec,
    pub c6: f64,
    pub omega_eff: f64,
    pub up: RydbergChannel,
    pub down: RydbergChannel,
    pub quantization_axis: [f64; 3],
    pub schedule: PulseSchedule,
    pub write: WriteSettings,
    pub retrieval: RetrievalSettings,
    pub link: LinkSettings,
    pub rate: RateModel,
    pub n_realizations: usize,
    pub master_seed: u64,
}

impl Experiment {
    pub fn channel(&self, label: ChannelLabel) -> &RydbergChannel {
        match label {
            ChannelLabel::Up => &self.up,
            ChannelLabel::Down => &self.down,
        }
    }

    pub fn axis(&self) -> crate::cloud::Vec3 {
        crate::cloud::Vec3::from(self.quantization_axis)
    }

    /// Default experiment.
    pub fn reference() -> Self {
        ExperimentConfig::default()
            .to_experiment()
            .expect("default configuration is valid")
    }
}

fn cfg_err(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be positive, got {v}")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be non-negative, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be finite, got {v}")))
    }
}

fn probability(key: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must lie in [0, 1], got {v}")))
    }
}

fn unit_vector(key: &str, v: [f64; 3]) -> Result<[f64; 3]> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n.is_finite() && n > 0.0) {
        return Err(cfg_err(key, "must be a non-zero finite vector"));
    }
    Ok(v.map(|x| x / n))
}

fn looks_like_frequency(key: &str) -> bool {
    key.ends_with("mhz") || key.ends_with("khz") || key.ends_with("hz")
}

/// Overlays `user` onto `base`, rejecting keys that `base` does not have.
fn merge(base: &mut Value, user: Value, path: &str) -> Result<()> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v, &key)?,
                    Some(slot) => *slot = v,
                    None if looks_like_frequency(&k) && !k.contains("_2pi_") => {
                        return Err(cfg_err(
                            &key,
                            "frequency keys must state the 2pi convention, e.g. `_2pi_mhz` or `_2pi_khz`",
                        ))
                    }
                    None => return Err(cfg_err(&key, "unknown key")),
                }
            }
            Ok(())
        }
        (_, u) if !u.is_object() => Err(cfg_err(path, "expected a JSON object")),
        _ => Err(cfg_err(path, "is not a section")),
    }
}

impl ExperimentConfig {
    /// Parses JSON text; blank input yields the defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let user: Value = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!(
                "parse error at line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        let mut base = serde_json::to_value(Self::default()).expect("defaults serialize");
        merge(&mut base, user, "")?;
        serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every field and converts to internal units.
    pub fn to_experiment(&self) -> Result<Experiment> {
        let e = &self.ensemble;
        let geometry = CloudGeometry {
            n_atoms: e.n_atoms,
            sigma_perp: positive("ensemble.sigma_perp_um", e.sigma_perp_um)?,
            sigma_z: positive("ensemble.sigma_z_um", e.sigma_z_um)?,
            center: [
                finite("ensemble.center_um", e.center_um[0])?,
                finite("ensemble.center_um", e.center_um[1])?,
                finite("ensemble.center_um", e.center_um[2])?,
            ],
        };
        let t = &self.tweezer;
        let tweezer = TweezerSpec {
            position: [
                finite("tweezer.x_um", t.x_um)?,
                finite("tweezer.y_um", t.y_um)?,
                finite("tweezer.z_um", t.z_um)?,
            ],
            exclusion_radius: positive("tweezer.exclusion_um", t.exclusion_um)?,
        };
        let channel = |label: ChannelLabel, c: &ChannelConfig| -> Result<RydbergChannel> {
            let p = format!("channels.{}", label.as_str());
            let dir = unit_vector(&format!("{p}.k0_dir"), c.k0_dir)?;
            let k = nonnegative(&format!("{p}.k0_per_um"), c.k0_per_um)?;
            let delta = finite(&format!("{p}.delta_2pi_mhz"), c.delta_2pi_mhz)?;
            if delta == 0.0 {
                return Err(cfg_err(&format!("{p}.delta_2pi_mhz"), "must be non-zero"));
            }
            let c3 = finite(&format!("{p}.c3_ghz_um3"), c.c3_ghz_um3)?;
            if c3 == 0.0 {
                return Err(cfg_err(&format!("{p}.c3_ghz_um3"), "must be non-zero"));
            }
            Ok(RydbergChannel {
                label,
                c3: tabulated_coefficient(c3),
                omega_max: from_2pi_mhz(positive(
                    &format!("{p}.omega_max_2pi_mhz"),
                    c.omega_max_2pi_mhz,
                )?),
                delta: from_2pi_mhz(delta),
                k0: dir.map(|x| x * k),
                gamma_s: from_2pi_khz(nonnegative(
                    &format!("{p}.gamma_s_2pi_khz"),
                    c.gamma_s_2pi_khz,
                )?),
            })
        };
        let up = channel(ChannelLabel::Up, &self.channels.up)?;
        let down = channel(ChannelLabel::Down, &self.channels.down)?;
        let axis = unit_vector(
            "channels.quantization_axis",
            self.channels.quantization_axis,
        )?;

        let p = &self.pulses;
        let schedule = PulseSchedule {
            t_total: positive("pulses.t_total_us", p.t_total_us)?,
            t_ramp: nonnegative("pulses.t_ramp_us", p.t_ramp_us)?,
            t_fall: nonnegative("pulses.t_fall_us", p.t_fall_us)?,
            delta_start: from_2pi_mhz(finite("pulses.delta_start_2pi_mhz", p.delta_start_2pi_mhz)?),
            delta_end: from_2pi_mhz(finite("pulses.delta_end_2pi_mhz", p.delta_end_2pi_mhz)?),
            shape: p.shape,
        };
        schedule.validate().map_err(|e| cfg_err("pulses", e))?;
        if p.n_output < 2 {
            return Err(cfg_err("pulses.n_output", "must be at least 2"));
        }
        if let Some(k) = p.slaving_ratio {
            positive("pulses.slaving_ratio", k)?;
        }
        let write = WriteSettings {
            decay: p.decay,
            n_output: p.n_output,
            slaving_ratio: p.slaving_ratio,
            rtol: positive("pulses.rtol", p.rtol)?,
            atol: positive("pulses.atol", p.atol)?,
        };

        let r = &self.retrieval;
        if let Some(od) = r.od_override {
            positive("retrieval.od_override", od)?;
        }
        if r.profile_bins == 0 {
            return Err(cfg_err("retrieval.profile_bins", "must be at least 1"));
        }
        if r.n_nodes < 16 {
            return Err(cfg_err("retrieval.n_nodes", "must be at least 16"));
        }
        let retrieval = RetrievalSettings {
            od_override: r.od_override,
            cross_section_um2: positive("retrieval.cross_section_um2", r.cross_section_um2)?,
            delta_norm: finite("retrieval.delta_norm", r.delta_norm)?,
            gamma_e: from_2pi_mhz(positive("retrieval.gamma_e_2pi_mhz", r.gamma_e_2pi_mhz)?),
            gamma_s: from_2pi_mhz(nonnegative("retrieval.gamma_s_2pi_mhz", r.gamma_s_2pi_mhz)?),
            gamma_sg: from_2pi_mhz(nonnegative(
                "retrieval.gamma_sg_2pi_mhz",
                r.gamma_sg_2pi_mhz,
            )?),
            omega_c: from_2pi_mhz(positive("retrieval.omega_c_2pi_mhz", r.omega_c_2pi_mhz)?),
            profile: r.profile,
            profile_bins: r.profile_bins,
            n_nodes: r.n_nodes,
        };

        if let Some(eta) = self.link.eta_interface {
            probability("link.eta_interface", eta)?;
        }
        let link = LinkSettings {
            eta_interface: self.link.eta_interface,
            eta_transmission: probability("link.eta_t", self.link.eta_t)?,
            eta_detection: probability("link.eta_d", self.link.eta_d)?,
            n_attempts: self.link.n_attempts,
        };
        let q = &self.rate;
        if q.prep_every == 0 {
            return Err(cfg_err("rate.prep_every", "must be at least 1"));
        }
        if q.cool_every == 0 {
            return Err(cfg_err("rate.cool_every", "must be at least 1"));
        }
        let rate = RateModel {
            tau_write: positive("rate.tau_w_us", q.tau_w_us)?,
            tau_retrieve: positive("rate.tau_r_us", q.tau_r_us)?,
            tau_pump: positive("rate.tau_p_us", q.tau_p_us)?,
            prep_every: q.prep_every,
            prep_duration: nonnegative("rate.prep_us", q.prep_us)?,
            cool_every: q.cool_every,
            cool_duration: nonnegative("rate.cool_us", q.cool_us)?,
            paper_compat: q.paper_compat,
        };
        if self.mc.n_realizations == 0 {
            return Err(cfg_err("mc.n_realizations", "must be at least 1"));
        }
        Ok(Experiment {
            geometry,
            tweezer,
            c6: tabulated_coefficient(positive("ensemble.c6_ghz_um6", e.c6_ghz_um6)?),
            omega_eff: from_2pi_mhz(positive("ensemble.omega_eff_2pi_mhz", e.omega_eff_2pi_mhz)?),
            up,
            down,
            quantization_axis: axis,
            schedule,
            write,
            retrieval,
            link,
            rate,
            n_realizations: self.mc.n_realizations,
            master_seed: self.mc.master_seed,
        })
    }
}

/// Reads, validates and converts a configuration file.
pub fn load_config(path: &Path) -> Result<Experiment> {
    ExperimentConfig::from_path(path)?.to_experiment()
}
