//! `hbf`: batch front-end for the hybrid beamforming simulator.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hbf_core::array::{angle_grid, coupling_matrix, radiation_pattern, write_pattern_csv, ArrayGeometry, CouplingModel, ElementPattern};
use hbf_core::channel::load_channel_file;
use hbf_core::config::parse_snr_range;
use hbf_core::metrics::write_results_csv;
use hbf_core::sim::{evaluate_channel_tensor, run_montecarlo, write_rate_report_csv};
use hbf_core::{CVector, Error, RunConfig, Scenario64};
use serde::Serialize;
use sha2::{Digest, Sha256};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_FORMAT: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "hbf", version, about = "Wideband hybrid beamforming link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Radiation-pattern cuts of selected codewords.
    Pattern {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sel: PatternArgs,
    },
    /// Dump every codebook as CSV.
    Codebook {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo sweep over channel realizations and SNR points.
    Montecarlo {
        #[command(flatten)]
        common: Common,
    },
    /// Beam selection and rates on a channel tensor read from disk.
    EvaluateChannelFile {
        #[command(flatten)]
        common: Common,
        /// Binary channel tensor file.
        channel_file: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations (noise draws for evaluate-channel-file).
    #[arg(long)]
    realizations: Option<usize>,
    /// SNR grid as `start:step:stop` or a single value, in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Selector {
    ApOrthogonal,
    StaOrthogonal,
    ApSector,
    ApNarrow,
    StaSector,
    StaNarrow,
}

#[derive(Args)]
struct PatternArgs {
    #[arg(long, value_enum)]
    codebook: Selector,
    /// Codeword index m (all when omitted).
    #[arg(long)]
    index: Option<usize>,
    /// Second index: RF chain for AP sets, narrow beam for STA narrow.
    #[arg(long)]
    column: Option<usize>,
    /// Comma-separated subcarrier indices; defaults to the band edges.
    #[arg(long, value_delimiter = ',')]
    subcarriers: Vec<usize>,
    #[arg(long, default_value_t = hbf_core::array::DEFAULT_ANGLE_GRID)]
    grid_points: usize,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_hash: String,
    version: String,
    started_unix_s: u64,
    finished_unix_s: u64,
    outputs: Vec<OutputChecksum>,
}

#[derive(Serialize)]
struct OutputChecksum {
    file: String,
    sha256: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Config(_) => EXIT_CONFIG,
                Error::Format { .. } => EXIT_FORMAT,
                Error::Infeasible(_) => EXIT_INFEASIBLE,
                _ => EXIT_FAILURE,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_CONFIG;
        }
    }
    EXIT_FAILURE
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let started = unix_now();
    let (name, common) = match &cli.command {
        Command::Pattern { common, .. } => ("pattern", common),
        Command::Codebook { common } => ("codebook", common),
        Command::Montecarlo { common } => ("montecarlo", common),
        Command::EvaluateChannelFile { common, .. } => ("evaluate-channel-file", common),
    };
    let config = load_config(common)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers.unwrap_or(0))
        .build()?;

    let config_json = config.to_json();
    let mut outputs = vec![write_output(&out, "config.json", config_json.as_bytes())?];
    let mut code = 0;
    match &cli.command {
        Command::Pattern { sel, .. } => outputs.extend(cmd_pattern(&config, sel, &out)?),
        Command::Codebook { .. } => {
            let scn = Scenario64::from_config(&config)?;
            let mut buf = Vec::new();
            scn.codebooks.write_csv(&mut buf)?;
            outputs.push(write_output(&out, "codebooks.csv", &buf)?);
        }
        Command::Montecarlo { .. } => {
            let scn = Scenario64::from_config(&config)?;
            let report = pool.install(|| run_montecarlo(&scn))?;
            let mut buf = Vec::new();
            write_results_csv(&report.rows(&config.config_id), &mut buf)?;
            outputs.push(write_output(&out, "results.csv", &buf)?);
            let mut buf = Vec::new();
            report.training_log.write_csv(&mut buf)?;
            outputs.push(write_output(&out, "training_log.csv", &buf)?);
        }
        Command::EvaluateChannelFile { channel_file, .. } => {
            let scn = Scenario64::from_config(&config)?;
            let tensor = load_channel_file::<f64>(channel_file)
                .with_context(|| format!("reading {}", channel_file.display()))?;
            let report = pool.install(|| evaluate_channel_tensor(&scn, &tensor))?;
            let mut buf = Vec::new();
            write_rate_report_csv(&config.config_id, &report.points, &mut buf)?;
            outputs.push(write_output(&out, "rate_report.csv", &buf)?);
            if report.points.iter().any(|p| p.rate_count == 0) {
                eprintln!("error: every draw was infeasible at one or more SNR points");
                code = EXIT_INFEASIBLE;
            }
        }
    }

    let manifest = RunManifest {
        command: name.to_string(),
        config_hash: sha256_hex(config_json.as_bytes()),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(code)
}

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(n) = common.realizations {
        config.realizations = n;
        config.rate_realizations = config.rate_realizations.min(n);
    }
    if let Some(spec) = &common.snr_db {
        config.snr_db = parse_snr_range(spec)?;
    }
    if let Some(out) = &common.out {
        config.output_dir = Some(out.display().to_string());
    }
    config.validate()?;
    Ok(config)
}

fn cmd_pattern(config: &RunConfig, sel: &PatternArgs, out: &Path) -> anyhow::Result<Vec<OutputChecksum>> {
    let scn = Scenario64::from_config(config)?;
    let cb = &scn.codebooks;
    let ap_side = matches!(sel.codebook, Selector::ApOrthogonal | Selector::ApSector | Selector::ApNarrow);
    let (size, tag) = if ap_side { (config.m_ap, "ap") } else { (config.m_ue, "sta") };

    // (m, n, coefficients); n = 0 for sets indexed by m alone
    let mut words: Vec<(usize, usize, CVector<f64>)> = Vec::new();
    match sel.codebook {
        Selector::ApOrthogonal | Selector::StaOrthogonal => {
            let set = if ap_side { &cb.ap_orthogonal } else { &cb.sta_orthogonal };
            for m in 1..=set.size() {
                words.push((m, 0, set.get(m)?.coefficients().clone()));
            }
        }
        Selector::ApSector => {
            for m in 1..=cb.ap_sector.len() {
                let p = cb.ap_sector.get(m)?;
                for n in 1..=p.ncols() {
                    words.push((m, n, p.column(n - 1).into_owned()));
                }
            }
        }
        Selector::ApNarrow => {
            for m in 1..=cb.ap_sector.len() {
                for n in 1..=config.n_rf {
                    words.push((m, n, cb.ap_narrow.downlink_beamformer(m, n)?));
                }
            }
        }
        Selector::StaSector => {
            let gs = cb.sta_sector.as_ref().ok_or_else(|| anyhow!("mode has no STA sector codebook"))?;
            for m in 1..=gs.len() {
                words.push((m, 0, gs.get(m)?.coefficients().clone()));
            }
        }
        Selector::StaNarrow => {
            let gn = cb.sta_narrow.as_ref().ok_or_else(|| anyhow!("mode has no STA narrow codebook"))?;
            for m in 1..=config.m_sub {
                for n in 1..=gn.beams_per_sector() {
                    words.push((m, n, gn.get(m, n)?.coefficients().clone()));
                }
            }
        }
    }
    words.retain(|(m, n, _)| sel.index.is_none_or(|i| i == *m) && sel.column.is_none_or(|c| c == *n));
    if words.is_empty() {
        return Err(Error::Config(vec!["selector matches no codeword".into()]).into());
    }

    let ks = if sel.subcarriers.is_empty() {
        vec![1, config.num_subcarriers]
    } else {
        sel.subcarriers.clone()
    };
    let geom = ArrayGeometry::new(size, config.element_spacing, config.reference_frequency_hz)?;
    let coupling = match config.coupling_db {
        Some(db) => CouplingModel::from_db(db)?,
        None => CouplingModel::none(),
    };
    let thetas = angle_grid::<f64>(sel.grid_points);
    let mut outputs = Vec::new();
    for &k in &ks {
        let f = scn.grid.subcarrier_frequency(k)?;
        let s = coupling_matrix(&geom, &coupling, f);
        let s_ref = (!coupling.is_none()).then_some(&s);
        for (m, n, p) in &words {
            let psi = radiation_pattern(&geom, &ElementPattern::default(), s_ref, p, f, &thetas)?;
            let mut buf = Vec::new();
            write_pattern_csv(&mut buf, f, &thetas, &psi)?;
            let name = match n {
                0 => format!("pattern_{tag}_{}_m{m}_k{k}.csv", selector_name(sel.codebook)),
                _ => format!("pattern_{tag}_{}_m{m}_n{n}_k{k}.csv", selector_name(sel.codebook)),
            };
            outputs.push(write_output(out, &name, &buf)?);
        }
    }
    Ok(outputs)
}

fn selector_name(s: Selector) -> &'static str {
    match s {
        Selector::ApOrthogonal | Selector::StaOrthogonal => "orthogonal",
        Selector::ApSector | Selector::StaSector => "sector",
        Selector::ApNarrow | Selector::StaNarrow => "narrow",
    }
}

fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<OutputChecksum> {
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(OutputChecksum {
        file: name.to_string(),
        sha256: sha256_hex(bytes),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
