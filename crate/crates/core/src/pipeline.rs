//! End-to-end composition for a symmetric two-node link.
//!
//! Realizations are independent and run in parallel; each draws its cloud
//! from `rng::derive_seed(master, "<node>-cloud", index)`, so results do not
//! depend on scheduling. Aggregates are formed after collection, in index
//! order.

use crate::cloud::{blockade_radius, escape_probability, optical_depth, sample, AtomCloud};
use crate::config::{Experiment, ProfileMode};
use crate::coupling::{
    build_couplings, collective_strength_quadrature, truncated_coupling_sum, ChannelLabel,
    CollectiveStrength, CouplingSet,
};
use crate::error::{Error, Result};
use crate::link::{
    attempt_success_probability, entanglement_rate, simulate_attempts, AttemptTally, LinkBudget,
    RateReport,
};
use crate::ode::Dopri5;
use crate::retrieval::{
    collective_coupling_from_depth, retrieval_efficiency, z_s_from_rates, RetrievalParams,
    SpinWaveProfile,
};
use crate::rng::derive_seed;
use crate::units::to_2pi_mhz;
use crate::write::{simulate_write, spin_wave_profile, WriteOptions, WriteResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const NODES: [&str; 2] = ["node-a", "node-b"];

/// Sample mean with its standard error and range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            n,
        }
    }
}

pub fn cloud_seed(master: u64, node: &str, index: usize) -> u64 {
    derive_seed(master, &format!("{node}-cloud"), index as u64)
}

pub fn write_options(exp: &Experiment, label: ChannelLabel) -> WriteOptions {
    let w = &exp.write;
    WriteOptions {
        gamma_s: exp.channel(label).gamma_s,
        decay: w.decay,
        n_output: w.n_output,
        integrator: Dopri5 {
            rtol: w.rtol,
            atol: w.atol,
            ..Dopri5::default()
        },
        slaving_ratio: w.slaving_ratio,
    }
}

/// Couplings of `cloud` for one channel, with the partner laser's light shift.
pub fn channel_couplings(
    exp: &Experiment,
    cloud: &AtomCloud,
    label: ChannelLabel,
) -> Result<CouplingSet> {
    let partner = exp.channel(label.partner()).light_shift();
    build_couplings(
        cloud,
        &exp.tweezer,
        exp.channel(label),
        partner,
        &exp.axis(),
    )
}

/// One cloud realization driven through one channel.
pub struct Realization {
    pub cloud: AtomCloud,
    pub couplings: CouplingSet,
    pub write: WriteResult,
}

pub fn run_realization(
    exp: &Experiment,
    label: ChannelLabel,
    node: &str,
    index: usize,
) -> Result<Realization> {
    let cloud = sample(&exp.geometry, cloud_seed(exp.master_seed, node, index))
        .map_err(|e| e.in_stage("cloud"))?;
    let couplings = channel_couplings(exp, &cloud, label).map_err(|e| e.in_stage("coupling"))?;
    let write = simulate_write(&couplings, &exp.schedule, &write_options(exp, label))
        .map_err(|e| e.in_stage("write"))?;
    Ok(Realization {
        cloud,
        couplings,
        write,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationOutcome {
    pub index: usize,
    pub seed: u64,
    pub eta_w: f64,
    pub norm_loss: f64,
    /// `sum |D~_j|^2` over the whole cloud, rad^2/us^2.
    pub d_bar_sq: f64,
    /// Same sum restricted to the slab used by the quadrature.
    pub truncated_sum: f64,
    pub n_slaved: usize,
    pub steps: usize,
}

/// Realization-averaged populations on the output grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTrace {
    pub t: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteEnsemble {
    pub node: String,
    pub label: ChannelLabel,
    pub outcomes: Vec<RealizationOutcome>,
    pub trace: MeanTrace,
    /// Mean spin-wave profile; present when requested.
    pub profile: Option<SpinWaveProfile>,
}

impl WriteEnsemble {
    pub fn eta_w(&self) -> Summary {
        Summary::of(&self.outcomes.iter().map(|o| o.eta_w).collect::<Vec<_>>())
    }

    pub fn truncated_sum(&self) -> Summary {
        Summary::of(
            &self
                .outcomes
                .iter()
                .map(|o| o.truncated_sum)
                .collect::<Vec<_>>(),
        )
    }

    pub fn d_bar_sq(&self) -> Summary {
        Summary::of(&self.outcomes.iter().map(|o| o.d_bar_sq).collect::<Vec<_>>())
    }
}

/// Runs `n` realizations of one channel on one node.
pub fn write_ensemble(
    exp: &Experiment,
    label: ChannelLabel,
    node: &str,
    n: usize,
    profile_bins: Option<usize>,
) -> Result<WriteEnsemble> {
    if n == 0 {
        return Err(Error::domain("n_realizations", "must be at least 1").in_stage("write"));
    }
    type Item = (RealizationOutcome, WriteResult, Option<Vec<f64>>);
    let items: Vec<Item> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Item> {
            let r = run_realization(exp, label, node, i)?;
            let prof = match profile_bins {
                Some(bins) => Some(
                    spin_wave_profile(&r.write, &r.cloud, bins)
                        .map_err(|e| e.in_stage("write"))?
                        .amplitude,
                ),
                None => None,
            };
            let outcome = RealizationOutcome {
                index: i,
                seed: r.cloud.seed,
                eta_w: r.write.eta_w,
                norm_loss: r.write.norm_loss,
                d_bar_sq: r.couplings.d_bar * r.couplings.d_bar,
                truncated_sum: truncated_coupling_sum(&r.couplings, &r.cloud),
                n_slaved: r.write.n_slaved,
                steps: r.write.stats.accepted + r.write.stats.rejected,
            };
            Ok((outcome, r.write, prof))
        })
        .collect::<Result<_>>()?;

    let t = items[0].1.times.clone();
    let k = t.len();
    let mut p0 = vec![0.0; k];
    let mut p1 = vec![0.0; k];
    let mut norm = vec![0.0; k];
    for (_, w, _) in &items {
        for i in 0..k {
            p0[i] += w.p0[i] / n as f64;
            p1[i] += w.p1[i] / n as f64;
            norm[i] += w.norm[i] / n as f64;
        }
    }
    let profile = match profile_bins {
        Some(bins) => {
            let mut power = vec![0.0; bins];
            for (_, _, p) in &items {
                for (acc, a) in power.iter_mut().zip(p.as_ref().expect("profile requested")) {
                    *acc += a * a / n as f64;
                }
            }
            let scale = (power.iter().sum::<f64>() / bins as f64).sqrt();
            let amp = power.iter().map(|p| p.sqrt() / scale).collect();
            Some(SpinWaveProfile::binned(amp).map_err(|e| e.in_stage("write"))?)
        }
        None => None,
    };
    Ok(WriteEnsemble {
        node: node.to_string(),
        label,
        outcomes: items.into_iter().map(|(o, _, _)| o).collect(),
        trace: MeanTrace { t, p0, p1, norm },
        profile,
    })
}

/// Retrieval parameters implied by the experiment at optical depth `od`.
pub fn retrieval_params(exp: &Experiment, od: f64) -> Result<RetrievalParams> {
    let r = &exp.retrieval;
    let length = exp.geometry.sigma_z * (std::f64::consts::PI / 2.0).sqrt();
    Ok(RetrievalParams {
        od,
        delta_norm: r.delta_norm,
        z_s: z_s_from_rates(r.gamma_s, r.gamma_sg, r.gamma_e, r.omega_c)?,
        omega_c: r.omega_c,
        gamma_e: r.gamma_e,
        g_root_n: collective_coupling_from_depth(od, r.gamma_e, length)?,
    })
}

/// Optical depth used for retrieval: the override if set, else computed.
pub fn retrieval_depth(exp: &Experiment) -> Result<f64> {
    match exp.retrieval.od_override {
        Some(od) => Ok(od),
        None => optical_depth(&exp.geometry, exp.retrieval.cross_section_um2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudReport {
    pub rho_peak: f64,
    pub od: f64,
    pub p_int: f64,
    pub r_b: f64,
}

pub fn cloud_report(exp: &Experiment) -> Result<CloudReport> {
    Ok(CloudReport {
        rho_peak: exp.geometry.peak_density(),
        od: optical_depth(&exp.geometry, exp.retrieval.cross_section_um2)?,
        p_int: escape_probability(&exp.geometry, &exp.tweezer)?,
        r_b: blockade_radius(exp.c6, exp.omega_eff)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCouplingReport {
    pub label: ChannelLabel,
    pub d_center_2pi_mhz: f64,
    pub i_constant: f64,
    pub d_bar_2pi_mhz: f64,
    /// `sqrt` of the realization mean of the truncated sum.
    pub d_bar_mc_2pi_mhz: f64,
    /// Quadrature `D_bar^2` minus the sampled mean, in standard errors.
    pub d_bar_sq_z_score: f64,
    /// Untruncated realization mean of `sqrt(sum |D~_j|^2)`.
    pub d_bar_full_mc_2pi_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeChannelReport {
    pub node: String,
    pub label: ChannelLabel,
    pub eta_w: Summary,
    pub eta_r: f64,
    pub eta: f64,
    pub mean_slaved: f64,
    pub max_norm_loss: f64,
}

/// Headline number chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub rho_peak: f64,
    pub od: f64,
    pub p_int: f64,
    pub r_b: f64,
    pub d_center_up_2pi_mhz: f64,
    pub d_center_down_2pi_mhz: f64,
    pub i_constant: f64,
    pub d_bar_up_2pi_mhz: f64,
    pub d_bar_down_2pi_mhz: f64,
    pub eta_w_up: f64,
    pub eta_w_down: f64,
    pub eta_r: f64,
    pub eta: f64,
    pub p_e: f64,
    pub d_r_ideal: f64,
    pub d_r: f64,
    pub d_r_paper_compat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub n_realizations: usize,
    pub timestamp_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub chain: Chain,
    pub cloud: CloudReport,
    pub couplings: Vec<ChannelCouplingReport>,
    pub nodes: Vec<NodeChannelReport>,
    pub node_eta: Vec<(String, f64)>,
    pub retrieval_od: f64,
    pub rate: RateReport,
    pub rate_paper_compat: RateReport,
    pub attempts: Option<AttemptTally>,
    pub warnings: Vec<String>,
    pub config: Experiment,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn coupling_report(
    exp: &Experiment,
    label: ChannelLabel,
    ensemble: Option<&WriteEnsemble>,
) -> Result<(CollectiveStrength, ChannelCouplingReport)> {
    let q = collective_strength_quadrature(
        &exp.geometry,
        &exp.tweezer,
        exp.channel(label),
        &exp.axis(),
    )?;
    let (mc, z, full) = match ensemble {
        Some(e) => {
            let t = e.truncated_sum();
            let target = q.d_bar * q.d_bar;
            let z = if t.stderr > 0.0 {
                (target - t.mean) / t.stderr
            } else {
                0.0
            };
            let full = Summary::of(
                &e.outcomes
                    .iter()
                    .map(|o| o.d_bar_sq.sqrt())
                    .collect::<Vec<_>>(),
            );
            (t.mean.sqrt(), z, full.mean)
        }
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let report = ChannelCouplingReport {
        label,
        d_center_2pi_mhz: to_2pi_mhz(q.d_center),
        i_constant: q.i_constant,
        d_bar_2pi_mhz: to_2pi_mhz(q.d_bar),
        d_bar_mc_2pi_mhz: to_2pi_mhz(mc),
        d_bar_sq_z_score: z,
        d_bar_full_mc_2pi_mhz: to_2pi_mhz(full),
    };
    Ok((q, report))
}

/// Report plus the write ensembles behind it.
pub struct PipelineRun {
    pub report: RunReport,
    pub ensembles: Vec<WriteEnsemble>,
}

/// Runs both channels on both nodes and composes the link budget. The
/// weaker node sets the interface efficiency.
pub fn two_node_pipeline(exp: &Experiment, timestamp_unix: Option<u64>) -> Result<RunReport> {
    run_pipeline(exp, timestamp_unix).map(|r| r.report)
}

pub fn run_pipeline(exp: &Experiment, timestamp_unix: Option<u64>) -> Result<PipelineRun> {
    let cloud = cloud_report(exp).map_err(|e| e.in_stage("cloud"))?;
    if exp.geometry.n_atoms == 0 {
        return Err(Error::domain("n_atoms", "the ensemble has no atoms").in_stage("coupling"));
    }
    let od = retrieval_depth(exp).map_err(|e| e.in_stage("retrieval"))?;
    let params = retrieval_params(exp, od).map_err(|e| e.in_stage("retrieval"))?;
    let bins = match exp.retrieval.profile {
        ProfileMode::Flat => None,
        ProfileMode::FromWrite => Some(exp.retrieval.profile_bins),
    };
    let n_nodes = exp.retrieval.n_nodes;
    let flat_eta_r = retrieval_efficiency(&params, &SpinWaveProfile::flat(), n_nodes)
        .map_err(|e| e.in_stage("retrieval"))?;

    let mut warnings = Vec::new();
    let mut couplings = Vec::new();
    let mut nodes = Vec::new();
    let mut node_eta = Vec::new();
    let mut ensembles = Vec::new();
    for node in NODES {
        let mut etas = Vec::new();
        for label in ChannelLabel::BOTH {
            let ens = write_ensemble(exp, label, node, exp.n_realizations, bins)?;
            let eta_r = match &ens.profile {
                Some(p) => retrieval_efficiency(&params, p, n_nodes)
                    .map_err(|e| e.in_stage("retrieval"))?,
                None => flat_eta_r,
            };
            let eta_w = ens.eta_w();
            let max_norm_loss = ens.outcomes.iter().map(|o| o.norm_loss).fold(0.0, f64::max);
            let mean_slaved = ens.outcomes.iter().map(|o| o.n_slaved as f64).sum::<f64>()
                / ens.outcomes.len() as f64;
            if exp.channel(label).gamma_s == 0.0 && max_norm_loss > 1e-6 {
                warnings.push(format!(
                    "{node}/{}: norm drift {max_norm_loss:.2e} without decay",
                    label.as_str()
                ));
            }
            let eta = crate::retrieval::total_interface_efficiency(eta_w.mean, eta_r)
                .map_err(|e| e.in_stage("retrieval"))?;
            etas.push(eta);
            nodes.push(NodeChannelReport {
                node: node.to_string(),
                label,
                eta_w,
                eta_r,
                eta,
                mean_slaved,
                max_norm_loss,
            });
            ensembles.push(ens);
        }
        node_eta.push((
            node.to_string(),
            etas.iter().sum::<f64>() / etas.len() as f64,
        ));
    }
    for label in ChannelLabel::BOTH {
        let ens = ensembles
            .iter()
            .find(|e| e.node == NODES[0] && e.label == label);
        let (_, r) = coupling_report(exp, label, ens).map_err(|e| e.in_stage("coupling"))?;
        if r.d_bar_sq_z_score.abs() > 3.0 {
            warnings.push(format!(
                "{}: sampled collective coupling differs from quadrature by {:.1} standard errors",
                label.as_str(),
                r.d_bar_sq_z_score
            ));
        }
        couplings.push(r);
    }

    let (weak_idx, eta) = node_eta.iter().enumerate().map(|(i, (_, e))| (i, *e)).fold(
        (0, f64::INFINITY),
        |acc, x| if x.1 < acc.1 { x } else { acc },
    );
    let weak = NODES[weak_idx];
    let pick = |label: ChannelLabel| {
        nodes
            .iter()
            .find(|n| n.node == weak && n.label == label)
            .expect("node entry")
    };
    let (up, down) = (pick(ChannelLabel::Up), pick(ChannelLabel::Down));

    let budget = LinkBudget {
        eta_interface: eta,
        eta_transmission: exp.link.eta_transmission,
        eta_detection: exp.link.eta_detection,
    };
    let p_e = attempt_success_probability(&budget).map_err(|e| e.in_stage("link"))?;
    let attempts = if exp.link.n_attempts > 0 {
        let seed = derive_seed(exp.master_seed, "link", 0);
        Some(
            simulate_attempts(&budget, exp.link.n_attempts, seed)
                .map_err(|e| e.in_stage("link"))?,
        )
    } else {
        None
    };
    let general = crate::link::RateModel {
        paper_compat: false,
        ..exp.rate
    };
    let compat = crate::link::RateModel {
        paper_compat: true,
        ..exp.rate
    };
    let rate_general = entanglement_rate(p_e, &general).map_err(|e| e.in_stage("rate"))?;
    let rate_compat = entanglement_rate(p_e, &compat).map_err(|e| e.in_stage("rate"))?;
    let rate = if exp.rate.paper_compat {
        rate_compat
    } else {
        rate_general
    };

    let coupling = |label| {
        couplings
            .iter()
            .find(|c: &&ChannelCouplingReport| c.label == label)
            .expect("coupling")
    };
    let chain = Chain {
        rho_peak: cloud.rho_peak,
        od: cloud.od,
        p_int: cloud.p_int,
        r_b: cloud.r_b,
        d_center_up_2pi_mhz: coupling(ChannelLabel::Up).d_center_2pi_mhz,
        d_center_down_2pi_mhz: coupling(ChannelLabel::Down).d_center_2pi_mhz,
        i_constant: coupling(ChannelLabel::Up).i_constant,
        d_bar_up_2pi_mhz: coupling(ChannelLabel::Up).d_bar_2pi_mhz,
        d_bar_down_2pi_mhz: coupling(ChannelLabel::Down).d_bar_2pi_mhz,
        eta_w_up: up.eta_w.mean,
        eta_w_down: down.eta_w.mean,
        eta_r: 0.5 * (up.eta_r + down.eta_r),
        eta,
        p_e,
        d_r_ideal: rate.ideal_rate_hz,
        d_r: rate_general.practical_rate_hz,
        d_r_paper_compat: rate_compat.practical_rate_hz,
    };
    let report = RunReport {
        chain,
        cloud,
        couplings,
        nodes,
        node_eta,
        retrieval_od: od,
        rate,
        rate_paper_compat: rate_compat,
        attempts,
        warnings,
        config: exp.clone(),
        provenance: Provenance {
            seed: exp.master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            n_realizations: exp.n_realizations,
            timestamp_unix,
        },
    };
    Ok(PipelineRun { report, ensembles })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Experiment {
        let mut x = Experiment::reference();
        x.geometry.n_atoms = 40;
        x.n_realizations = 3;
        x.write.n_output = 20;
        x.link.n_attempts = 1000;
        x
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!((s.min, s.max, s.n), (1.0, 4.0, 4));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let x = small();
        let a = two_node_pipeline(&x, None).unwrap().to_json();
        let b = two_node_pipeline(&x, None).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn nodes_draw_different_clouds() {
        let x = small();
        assert_ne!(
            cloud_seed(x.master_seed, NODES[0], 0),
            cloud_seed(x.master_seed, NODES[1], 0)
        );
        let a = write_ensemble(&x, ChannelLabel::Up, NODES[0], 2, Some(4)).unwrap();
        let p = a.profile.unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_ensemble_fails_at_coupling() {
        let mut x = small();
        x.geometry.n_atoms = 0;
        match two_node_pipeline(&x, None) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "coupling"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(write_ensemble(&small(), ChannelLabel::Up, NODES[0], 0, None).is_err());
    }
}
