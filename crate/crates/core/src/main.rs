use clap::{Parser, ValueEnum};
use otfs_dse::harness::{
    emit_csv, emit_plot_script, run_experiment, ExperimentKind, ExperimentSpec, ResultRow, SimulationFile,
    ORACLE_TOLERANCE,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    OracleCheck,
    NmseModel,
    Estimate,
    Ber,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::OracleCheck => ExperimentKind::OracleCheck,
            Kind::NmseModel => ExperimentKind::NmseModel,
            Kind::Estimate => ExperimentKind::Estimate,
            Kind::Ber => ExperimentKind::Ber,
        }
    }
}

/// OTFS link simulator with Doppler squint.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    kind: Kind,
    /// Simulation file (TOML key-value form).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR points in dB; `inf` is noiseless.
    #[arg(long, value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    velocity_kmh: Option<Vec<f64>>,
    /// Subcarrier counts for `nmse-model`.
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// Detection threshold as a multiple of the noise standard deviation.
    #[arg(long)]
    gamma_sigma_mult: Option<f64>,
    /// Allow BER runs above the desk-scale subcarrier limit.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write a matplotlib script (and its data CSV) at this path.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn build_spec(cli: &Cli) -> Result<ExperimentSpec, Box<dyn std::error::Error>> {
    let file = SimulationFile::load(&cli.config)?;
    let mut spec = file.experiment(cli.kind.into());
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(trials) = cli.trials {
        spec.trials = trials;
    }
    if let Some(snr) = &cli.snr_db {
        spec.snr_db_list = snr.clone();
    }
    if let Some(v) = &cli.velocity_kmh {
        spec.velocity_kmh_list = v.clone();
    }
    if let Some(m) = &cli.m_list {
        spec.m_list = m.clone();
    }
    spec.gamma_override = cli.gamma_sigma_mult;
    spec.full_scale = cli.full_scale;
    Ok(spec)
}

fn run(cli: &Cli) -> Result<Vec<ResultRow>, Box<dyn std::error::Error>> {
    let spec = build_spec(cli)?;
    log::info!(
        "{} M={:?} N={} trials={} seed={}",
        spec.kind,
        if spec.kind == ExperimentKind::NmseModel { spec.m_list.clone() } else { vec![spec.cfg.m] },
        spec.cfg.n,
        spec.trials,
        spec.seed
    );
    let rows = run_experiment(&spec)?;
    emit_csv(&rows, &cli.out)?;
    if let Some(plot) = &cli.plot {
        let data = emit_plot_script(&rows, plot)?;
        log::info!("plot script {} (data {})", plot.display(), data.display());
    }
    Ok(rows)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(rows) => {
            let failed: usize = rows.iter().map(|r| r.failed_trials).sum();
            if failed > 0 {
                log::warn!("{failed} trial(s) failed across the sweep");
            }
            if let Kind::OracleCheck = cli.kind {
                let worst = rows.iter().filter_map(|r| r.oracle_max_rel_err).fold(0.0, f64::max);
                println!("max relative deviation {worst:.3e} (tolerance {ORACLE_TOLERANCE:e})");
                if worst.is_nan() || worst >= ORACLE_TOLERANCE {
                    return ExitCode::FAILURE;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
