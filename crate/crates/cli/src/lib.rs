//! Command-line front end: loads a configuration, runs one stage or the whole
//! chain, and writes `report.json` plus CSV artifacts into the output
//! directory.

use clap::{Parser, Subcommand};
use qantenna_core::cloud::{blockade_radius, escape_probability, optical_depth, sample};
use qantenna_core::config::{Experiment, ExperimentConfig};
use qantenna_core::link::{
    attempt_success_probability, bell_measure, entanglement_rate, simulate_attempts,
    AtomPhotonState, AttemptTally,
};
use qantenna_core::pipeline::{
    channel_couplings, cloud_seed, coupling_report, retrieval_depth, retrieval_params,
    run_pipeline, write_ensemble, MeanTrace, Summary, NODES,
};
use qantenna_core::retrieval::{kernel_grid, retrieval_efficiency, SpinWaveProfile};
use qantenna_core::units::to_2pi_mhz;
use qantenna_core::{ChannelLabel, ProfileMode, RateReport};
use serde::Serialize;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Parser)]
#[command(name = "qantenna", version, about = "Quantum antenna link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed, overriding `mc.master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Number of cloud realizations, overriding `mc.n_realizations`.
    #[arg(long, global = true)]
    pub realizations: Option<usize>,

    /// Use the paper-compatible cooling overhead.
    #[arg(long, global = true)]
    pub paper_compat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Cloud statistics and one sampled realization.
    Cloud,
    /// Collective couplings and per-atom couplings of one realization.
    Couplings,
    /// Realization-averaged write dynamics for both channels.
    Write,
    /// Retrieval efficiency and kernel.
    Retrieve,
    /// Link budget, Bell measurement and Monte Carlo attempts.
    Link,
    /// Entanglement rate.
    Rate,
    /// Full two-node chain.
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cloud => "cloud",
            Command::Couplings => "couplings",
            Command::Write => "write",
            Command::Retrieve => "retrieve",
            Command::Link => "link",
            Command::Rate => "rate",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] qantenna_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(qantenna_core::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub seed: u64,
    pub version: &'static str,
    pub timestamp_unix: Option<u64>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    result: T,
    warnings: Vec<String>,
    config: &'a Experiment,
    provenance: Provenance,
}

/// Applies the command-line overrides and converts to internal units.
pub fn resolve_experiment(cli: &Cli) -> CliResult<Experiment> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.mc.master_seed = seed;
    }
    if let Some(n) = cli.realizations {
        cfg.mc.n_realizations = n;
    }
    if cli.paper_compat {
        cfg.rate.paper_compat = true;
    }
    Ok(cfg.to_experiment()?)
}

/// Files written by a run.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

/// Runs `cli.command` and writes its artifacts under `cli.out`.
pub fn run(cli: &Cli) -> CliResult<Artifacts> {
    let exp = resolve_experiment(cli)?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    let out = Output::new(&cli.out)?;
    let provenance = Provenance {
        command: cli.command.name(),
        seed: exp.master_seed,
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: timestamp,
    };
    match cli.command {
        Command::Cloud => cmd_cloud(&exp, out, provenance),
        Command::Couplings => cmd_couplings(&exp, out, provenance),
        Command::Write => cmd_write(&exp, out, provenance),
        Command::Retrieve => cmd_retrieve(&exp, out, provenance),
        Command::Link => cmd_link(&exp, out, provenance),
        Command::Rate => cmd_rate(&exp, out, provenance),
        Command::Pipeline => {
            let mut out = out;
            let run = run_pipeline(&exp, timestamp)?;
            for e in run.ensembles.iter().filter(|e| e.node == NODES[0]) {
                out.trace(e.label, &e.trace)?;
            }
            out.json(&run.report)?;
            Ok(out.done())
        }
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn json<T: Serialize>(&mut self, value: &T) -> CliResult<()> {
        let path = self.dir.join("report.json");
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn csv<R: Serialize>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = R>,
    ) -> CliResult<()> {
        let path = self.dir.join(name);
        let err = |source| CliError::Csv {
            path: path.clone(),
            source,
        };
        let file = File::create(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        for row in rows {
            w.serialize(row).map_err(err)?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn trace(&mut self, label: ChannelLabel, trace: &MeanTrace) -> CliResult<()> {
        #[derive(Serialize)]
        struct Row {
            t: f64,
            p0: f64,
            p1: f64,
            norm: f64,
        }
        let rows = (0..trace.t.len()).map(|i| Row {
            t: trace.t[i],
            p0: trace.p0[i],
            p1: trace.p1[i],
            norm: trace.norm[i],
        });
        self.csv(&format!("write_{}.csv", label.as_str()), rows)
    }

    fn envelope<T: Serialize>(
        mut self,
        exp: &Experiment,
        provenance: Provenance,
        result: T,
        warnings: Vec<String>,
    ) -> CliResult<Artifacts> {
        self.json(&Envelope {
            result,
            warnings,
            config: exp,
            provenance,
        })?;
        Ok(self.done())
    }

    fn done(self) -> Artifacts {
        Artifacts { files: self.files }
    }
}

fn cmd_cloud(exp: &Experiment, mut out: Output, provenance: Provenance) -> CliResult<Artifacts> {
    #[derive(Serialize)]
    struct CloudResult {
        peak_density: f64,
        od: f64,
        p_int: f64,
        r_blockade: f64,
        sample_seed: u64,
    }
    #[derive(Serialize)]
    struct Row {
        index: usize,
        x: f64,
        y: f64,
        z: f64,
    }
    let g = &exp.geometry;
    let seed = cloud_seed(exp.master_seed, NODES[0], 0);
    let result = CloudResult {
        peak_density: g.peak_density(),
        od: optical_depth(g, exp.retrieval.cross_section_um2)?,
        p_int: escape_probability(g, &exp.tweezer)?,
        r_blockade: blockade_radius(exp.c6, exp.omega_eff)?,
        sample_seed: seed,
    };
    let cloud = sample(g, seed)?;
    out.csv(
        "positions.csv",
        cloud.positions.iter().enumerate().map(|(index, r)| Row {
            index,
            x: r.x,
            y: r.y,
            z: r.z,
        }),
    )?;
    out.envelope(exp, provenance, result, Vec::new())
}

fn cmd_couplings(
    exp: &Experiment,
    mut out: Output,
    provenance: Provenance,
) -> CliResult<Artifacts> {
    #[derive(Serialize)]
    struct Row {
        index: usize,
        d_j: f64,
        d_tilde_j: f64,
        delta_tilde_j: f64,
        phase: f64,
    }
    let cloud = sample(&exp.geometry, cloud_seed(exp.master_seed, NODES[0], 0))?;
    let mut result = Vec::new();
    for label in ChannelLabel::BOTH {
        let (_, report) = coupling_report(exp, label, None)?;
        let set = channel_couplings(exp, &cloud, label)?;
        let rows: Vec<Row> = (0..set.len())
            .map(|j| Row {
                index: j,
                d_j: set.d[j],
                d_tilde_j: set.d_tilde[j],
                delta_tilde_j: set.delta_tilde(j),
                phase: set.phases[j],
            })
            .collect();
        out.csv(&format!("couplings_{}.csv", label.as_str()), rows)?;
        result.push(serde_json::json!({
            "label": label,
            "d_bar_2pi_mhz": report.d_bar_2pi_mhz,
            "d_center_2pi_mhz": report.d_center_2pi_mhz,
            "i_constant": report.i_constant,
            "d_bar_sample_2pi_mhz": to_2pi_mhz(set.d_bar),
        }));
    }
    out.envelope(exp, provenance, result, Vec::new())
}

#[derive(Serialize)]
struct WriteSummary {
    label: ChannelLabel,
    eta_w_mean: f64,
    eta_w_stderr: f64,
    n_realizations: usize,
    seed: u64,
}

fn cmd_write(exp: &Experiment, mut out: Output, provenance: Provenance) -> CliResult<Artifacts> {
    let mut result = Vec::new();
    for label in ChannelLabel::BOTH {
        let e = write_ensemble(exp, label, NODES[0], exp.n_realizations, None)?;
        out.trace(label, &e.trace)?;
        let s = e.eta_w();
        result.push(WriteSummary {
            label,
            eta_w_mean: s.mean,
            eta_w_stderr: s.stderr,
            n_realizations: s.n,
            seed: exp.master_seed,
        });
    }
    out.envelope(exp, provenance, result, Vec::new())
}

fn cmd_retrieve(exp: &Experiment, mut out: Output, provenance: Provenance) -> CliResult<Artifacts> {
    #[derive(Serialize)]
    struct Channel {
        label: ChannelLabel,
        eta_w: f64,
        eta_r: f64,
        eta: f64,
    }
    #[derive(Serialize)]
    struct RetrieveResult {
        od: f64,
        eta_r: f64,
        eta_total: f64,
        channels: Vec<Channel>,
    }
    #[derive(Serialize)]
    struct Row {
        z: f64,
        z_prime: f64,
        re: f64,
        im: f64,
    }
    let od = retrieval_depth(exp)?;
    let params = retrieval_params(exp, od)?;
    let bins = match exp.retrieval.profile {
        ProfileMode::Flat => None,
        ProfileMode::FromWrite => Some(exp.retrieval.profile_bins),
    };
    let flat = retrieval_efficiency(&params, &SpinWaveProfile::flat(), exp.retrieval.n_nodes)?;
    let mut channels = Vec::new();
    for label in ChannelLabel::BOTH {
        let e = write_ensemble(exp, label, NODES[0], exp.n_realizations, bins)?;
        let eta_r = match &e.profile {
            Some(p) => retrieval_efficiency(&params, p, exp.retrieval.n_nodes)?,
            None => flat,
        };
        let eta_w = e.eta_w().mean;
        channels.push(Channel {
            label,
            eta_w,
            eta_r,
            eta: eta_w * eta_r,
        });
    }
    let n = channels.len() as f64;
    let result = RetrieveResult {
        od,
        eta_r: channels.iter().map(|c| c.eta_r).sum::<f64>() / n,
        eta_total: channels.iter().map(|c| c.eta).sum::<f64>() / n,
        channels,
    };
    out.csv(
        "kernel.csv",
        kernel_grid(&params, 64)
            .into_iter()
            .map(|(z, z_prime, k)| Row {
                z,
                z_prime,
                re: k.re,
                im: k.im,
            }),
    )?;
    out.envelope(exp, provenance, result, Vec::new())
}

/// Interface efficiency: the configured value, or the weaker node's chain.
fn interface_efficiency(exp: &Experiment) -> CliResult<(f64, &'static str)> {
    match exp.link.eta_interface {
        Some(eta) => Ok((eta, "config")),
        None => {
            let mut etas = Vec::new();
            let od = retrieval_depth(exp)?;
            let eta_r = retrieval_efficiency(
                &retrieval_params(exp, od)?,
                &SpinWaveProfile::flat(),
                exp.retrieval.n_nodes,
            )?;
            for node in NODES {
                let mut per = Vec::new();
                for label in ChannelLabel::BOTH {
                    per.push(
                        write_ensemble(exp, label, node, exp.n_realizations, None)?
                            .eta_w()
                            .mean
                            * eta_r,
                    );
                }
                etas.push(Summary::of(&per).mean);
            }
            Ok((
                etas.into_iter().fold(f64::INFINITY, f64::min),
                "write and flat-profile retrieval",
            ))
        }
    }
}

fn budget(exp: &Experiment, eta: f64) -> qantenna_core::LinkBudget {
    qantenna_core::LinkBudget {
        eta_interface: eta,
        eta_transmission: exp.link.eta_transmission,
        eta_detection: exp.link.eta_detection,
    }
}

fn cmd_link(exp: &Experiment, out: Output, provenance: Provenance) -> CliResult<Artifacts> {
    #[derive(Serialize)]
    struct Outcome {
        pattern: String,
        probability: f64,
        herald: Option<String>,
    }
    #[derive(Serialize)]
    struct LinkResult {
        eta_interface: f64,
        eta_source: &'static str,
        p_e: f64,
        ideal_bell_outcomes: Vec<Outcome>,
        attempts: Option<AttemptTally>,
        attempt_success_fraction: Option<f64>,
    }
    let (eta, source) = interface_efficiency(exp)?;
    let b = budget(exp, eta);
    let p_e = attempt_success_probability(&b)?;
    let ideal = AtomPhotonState::entangled(0.0);
    let outcomes = bell_measure(&ideal, &ideal)?
        .into_iter()
        .map(|o| Outcome {
            pattern: format!("{:?}", o.pattern),
            probability: o.probability,
            herald: o.herald.map(|h| format!("{h:?}")),
        })
        .collect();
    let attempts = if exp.link.n_attempts > 0 {
        Some(simulate_attempts(
            &b,
            exp.link.n_attempts,
            qantenna_core::rng::derive_seed(exp.master_seed, "link", 0),
        )?)
    } else {
        None
    };
    let result = LinkResult {
        eta_interface: eta,
        eta_source: source,
        p_e,
        ideal_bell_outcomes: outcomes,
        attempt_success_fraction: attempts.map(|t| t.success_fraction()),
        attempts,
    };
    out.envelope(exp, provenance, result, Vec::new())
}

fn cmd_rate(exp: &Experiment, out: Output, provenance: Provenance) -> CliResult<Artifacts> {
    #[derive(Serialize)]
    struct RateResult {
        eta_interface: f64,
        p_e: f64,
        d_r_ideal: f64,
        d_r: f64,
        report: RateReport,
    }
    let (eta, _) = interface_efficiency(exp)?;
    let p_e = attempt_success_probability(&budget(exp, eta))?;
    let report = entanglement_rate(p_e, &exp.rate)?;
    let result = RateResult {
        eta_interface: eta,
        p_e,
        d_r_ideal: report.ideal_rate_hz,
        d_r: report.practical_rate_hz,
        report,
    };
    out.envelope(exp, provenance, result, Vec::new())
}
