use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qlab::epr_bell::{CorrelationModel, LhvModel};
use qlab::polarization::TransmissionModel;
use qlab_cli::{load_config, resolve_out_dir, run, Experiment, ExperimentConfig, ExperimentId, RunError};

#[derive(Parser)]
#[command(
    name = "qlab",
    version,
    about = "Run quantum-mechanics experiments and write plot-ready data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file or by id with default parameters.
    Run {
        /// Path to a config file, or an experiment id.
        target: String,
        /// Output directory; defaults to the config value, then $QLAB_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// bell: analyzer angles a,a',b,b' in degrees.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        angles: Option<Vec<f64>>,
        /// bell: qm | malus | threshold=T.
        /// three_polarizer: quantum | imperfect=KPAR,KPERP.
        #[arg(long)]
        model: Option<String>,
        /// three_polarizer: start:stop:step in degrees.
        #[arg(long)]
        alpha_sweep: Option<String>,
        /// bell: pairs per setting for Monte Carlo estimates.
        #[arg(long)]
        n_pairs: Option<u64>,
    },
    /// Check a config file against every precondition without running it.
    Validate { config: PathBuf },
    /// List the experiment ids.
    ListExperiments,
}

struct Flags {
    angles: Option<Vec<f64>>,
    model: Option<String>,
    alpha_sweep: Option<String>,
    n_pairs: Option<u64>,
}

fn usage(msg: impl Into<String>) -> RunError {
    RunError::Parse(msg.into())
}

fn parse_bell_model(s: &str) -> Result<CorrelationModel, RunError> {
    match s {
        "qm" | "quantum" => Ok(CorrelationModel::Quantum),
        "malus" | "malus_stochastic" => Ok(CorrelationModel::Lhv {
            model: LhvModel::MalusStochastic,
        }),
        _ => {
            let t = s
                .strip_prefix("threshold=")
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| usage(format!("--model: unknown bell model {s:?}")))?;
            Ok(CorrelationModel::Lhv {
                model: LhvModel::DeterministicThreshold { threshold: t },
            })
        }
    }
}

fn parse_transmission_model(s: &str) -> Result<TransmissionModel, RunError> {
    if matches!(s, "quantum" | "qm") {
        return Ok(TransmissionModel::Quantum);
    }
    let ks: Option<Vec<f64>> = s
        .strip_prefix("imperfect=")
        .map(|rest| rest.split(',').filter_map(|k| k.parse().ok()).collect());
    match ks.as_deref() {
        Some(&[k_parallel, k_perp]) => Ok(TransmissionModel::ImperfectQuantum { k_parallel, k_perp }),
        _ => Err(usage(format!("--model: unknown three_polarizer model {s:?}"))),
    }
}

fn apply_flags(experiment: &mut Experiment, flags: Flags) -> Result<(), RunError> {
    let id = experiment.id();
    let unsupported = |flag: &str| usage(format!("{flag} does not apply to experiment {id}"));
    match experiment {
        Experiment::Bell(p) => {
            if let Some(a) = flags.angles {
                p.angles = a
                    .try_into()
                    .map_err(|_| usage("--angles needs exactly four values a,a',b,b'"))?;
            }
            if let Some(m) = flags.model {
                p.model = parse_bell_model(&m)?;
            }
            if let Some(n) = flags.n_pairs {
                p.n_pairs = n;
            }
            if flags.alpha_sweep.is_some() {
                return Err(unsupported("--alpha-sweep"));
            }
        }
        Experiment::ThreePolarizer(p) => {
            if let Some(m) = flags.model {
                p.model = parse_transmission_model(&m)?;
            }
            if let Some(s) = flags.alpha_sweep {
                let v: Vec<f64> = s
                    .split(':')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| usage("--alpha-sweep expects start:stop:step"))?;
                p.alpha_sweep = v
                    .try_into()
                    .map_err(|_| usage("--alpha-sweep expects start:stop:step"))?;
            }
            if flags.angles.is_some() {
                return Err(unsupported("--angles"));
            }
            if flags.n_pairs.is_some() {
                return Err(unsupported("--n-pairs"));
            }
        }
        _ => {
            for (set, flag) in [
                (flags.angles.is_some(), "--angles"),
                (flags.model.is_some(), "--model"),
                (flags.alpha_sweep.is_some(), "--alpha-sweep"),
                (flags.n_pairs.is_some(), "--n-pairs"),
            ] {
                if set {
                    return Err(unsupported(flag));
                }
            }
        }
    }
    Ok(())
}

fn run_command(target: &str, out: Option<PathBuf>, seed: Option<u64>, flags: Flags) -> Result<(), RunError> {
    let mut config = match ExperimentId::parse(target) {
        Some(id) => ExperimentConfig::new(Experiment::defaults(id), 0),
        None => load_config(target.as_ref())?,
    };
    apply_flags(&mut config.experiment, flags)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let dir = resolve_out_dir(out.as_deref(), &config);
    let (manifest, headline) = run(&config, &dir)?;
    // A closed stdout must not turn a completed run into a failure.
    let mut stdout = io::stdout().lock();
    let _ = writeln!(stdout, "{}: {headline}", config.experiment.id());
    let _ = writeln!(
        stdout,
        "wrote {} files and the manifest to {}",
        manifest.files.len(),
        dir.display()
    );
    Ok(())
}

fn validate_command(path: &std::path::Path) -> Result<(), RunError> {
    let report = load_config(path)?.validate();
    if report.is_empty() {
        println!("ok");
        return Ok(());
    }
    for v in &report.violations {
        println!("{}: {}", v.field, v.message);
    }
    Err(RunError::Invalid(report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            target,
            out,
            seed,
            angles,
            model,
            alpha_sweep,
            n_pairs,
        } => run_command(
            &target,
            out,
            seed,
            Flags {
                angles,
                model,
                alpha_sweep,
                n_pairs,
            },
        ),
        Command::Validate { config } => validate_command(&config),
        Command::ListExperiments => {
            for id in ExperimentId::ALL {
                println!("{:<18} {}", id.name(), id.summary());
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
