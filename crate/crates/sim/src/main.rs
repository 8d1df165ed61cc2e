//! `hybridmm` command line: run a sum-rate sweep or the large-array probe.
//!
//!   hybridmm --preset desk --scheme mm-alt-opt,fd-wmmse --values -10,0,10 --out rates.csv
//!   hybridmm --config exp.toml --trials 10 --format json --out rates.json
//!   hybridmm probe --channel rayleigh --nt 32,64,128 --trials 20
//!
//! Exit codes: 0 success, 2 invalid spec, 3 infeasible everywhere, 4 I/O.
//! The thread count follows `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridmm_sim::{
    emit, run_asymptotic_probe, run_experiment_with, ChannelSpec, ExperimentSpec, Format, Parallelism, Preset,
    Result, Scheme, SimError, SweepAxis,
};

#[derive(Parser, Debug)]
#[command(name = "hybridmm", version, about = "Hybrid transceiver sum-rate experiments")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross-channel correlation and hybrid BD-ZF leakage versus Nt.
    Probe(ProbeArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base settings: `full` (100 trials) or `desk` (25 trials).
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated schemes, e.g. `mm-alt-opt,fd-wmmse`.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// Sweep axis: snr_db, n_rf, n_t or k_users.
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Record wall-clock time per record.
    #[arg(long)]
    timing: bool,
    /// Run trials on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// rayleigh or mmwave.
    #[arg(long, default_value = "mmwave")]
    channel: String,
    /// Paths of the mmWave model.
    #[arg(long, default_value_t = 10)]
    paths: usize,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    nt: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON output path; a table on standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_spec(a: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match (&a.config, &a.preset) {
        (Some(path), _) => ExperimentSpec::load(path)?,
        (None, Some(p)) => ExperimentSpec::preset(p.parse::<Preset>()?),
        (None, None) => ExperimentSpec::preset(Preset::Desk),
    };
    if a.config.is_some() {
        if let Some(p) = &a.preset {
            let trials = ExperimentSpec::preset(p.parse::<Preset>()?).trials;
            spec.trials = trials;
        }
    }
    if !a.scheme.is_empty() {
        spec.schemes = a.scheme.iter().map(|s| s.parse::<Scheme>()).collect::<Result<_>>()?;
    }
    if let Some(axis) = &a.sweep {
        spec.sweep.axis = axis.parse::<SweepAxis>()?;
    }
    if !a.values.is_empty() {
        spec.sweep.values = a.values.clone();
    }
    spec.trials = a.trials.unwrap_or(spec.trials);
    spec.seed = a.seed.unwrap_or(spec.seed);
    spec.timing |= a.timing;
    spec.validate()?;
    Ok(spec)
}

fn run(a: &RunArgs) -> Result<()> {
    let format = a.format.parse::<Format>()?;
    let spec = build_spec(a)?;
    let par = if a.serial { Parallelism::Serial } else { Parallelism::Parallel };
    let records = run_experiment_with(&spec, par)?;
    match &a.out {
        Some(path) => emit(&records, path, format),
        None => {
            let stdout = std::io::stdout();
            let path = PathBuf::from("<stdout>");
            match format {
                Format::Csv => hybridmm_sim::write_csv(&records, stdout.lock())
                    .map_err(|source| SimError::Csv { path, source }),
                Format::Json => serde_json::to_writer_pretty(stdout.lock(), &records)
                    .map_err(|source| SimError::Json { path, source }),
            }
        }
    }
}

fn probe(a: &ProbeArgs) -> Result<()> {
    let channel = match a.channel.as_str() {
        "rayleigh" => ChannelSpec::Rayleigh,
        "mmwave" => ChannelSpec::Mmwave { paths: a.paths },
        other => return Err(SimError::InvalidSpec(format!("unknown channel model `{other}`"))),
    };
    let rows = run_asymptotic_probe(channel, &a.nt, a.trials, a.seed)?;
    match &a.out {
        Some(path) => {
            let text = serde_json::to_string_pretty(&rows).map_err(|source| SimError::Json {
                path: path.clone(),
                source,
            })?;
            std::fs::write(path, text + "\n").map_err(|source| SimError::Io {
                path: path.clone(),
                source,
            })
        }
        None => {
            println!("{:>6} {:>14} {:>14} {:>14}", "nt", "correlation", "leakage", "leakage_rel");
            for r in rows {
                println!(
                    "{:>6} {:>14.6e} {:>14.6e} {:>14.6e}",
                    r.nt, r.correlation, r.leakage, r.leakage_normalized
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Some(Command::Probe(a)) => probe(a),
        None => run(&cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
