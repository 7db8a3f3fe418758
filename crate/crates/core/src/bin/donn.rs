use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use donn::app::{
    cmd_encode, cmd_eval, cmd_predict, cmd_rl, cmd_selftest, cmd_train, prepare_output, AppError, PredictInput,
    RlCommand, RunConfig, EXIT_USAGE,
};

#[derive(Parser)]
#[command(name = "donn", version, about = "Diffractive optical neural network toolkit")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a task into binary image caches.
    Encode,
    /// Train a model and write the report.
    Train,
    /// Evaluate a trained model on the test split.
    Eval {
        /// Quantize phases to this many levels first.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Classify one record or one bit image.
    Predict {
        /// Comma-separated feature values in schema order.
        #[arg(long, conflicts_with = "bits", required_unless_present = "bits")]
        record: Option<String>,
        /// File of 0/1 digits covering the active window.
        #[arg(long)]
        bits: Option<PathBuf>,
    },
    /// Cart-pole control pipeline.
    Rl {
        #[command(subcommand)]
        step: RlStep,
    },
    /// Run the built-in numerical property checks.
    Selftest,
}

#[derive(Subcommand, Clone, Copy)]
enum RlStep {
    Teach,
    Distill,
    Train,
    Run,
}

fn load_config(cli: &Cli) -> Result<(RunConfig, String), AppError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| AppError::Usage("this command needs --config".into()))?;
    let (mut cfg, raw) = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = 0;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok((cfg, raw))
}

fn run(cli: Cli) -> Result<(), AppError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(AppError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| AppError::Usage(e.to_string()))?;
    }
    let mut say = |line: &str| eprintln!("{line}");
    if let Command::Selftest = cli.command {
        cmd_selftest(&mut say)?;
        return Ok(());
    }
    let (mut cfg, raw) = load_config(&cli)?;
    prepare_output(&cfg, Some(&raw))?;
    match &cli.command {
        Command::Encode => {
            let m = cmd_encode(&cfg)?;
            println!("encoded {} train and {} test samples into {}", m.train_size, m.test_size, cfg.output_dir.display());
        }
        Command::Train => {
            let (_, report) = cmd_train(&cfg, &mut say)?;
            println!("test accuracy {:.4}", report.test.accuracy);
        }
        Command::Eval { levels } => {
            if levels.is_some() {
                cfg.quantize_levels = *levels;
            }
            let eval = cmd_eval(&cfg)?;
            println!("test accuracy {:.4}", eval.accuracy);
        }
        Command::Predict { record, bits } => {
            let input = match (record, bits) {
                (Some(r), _) => PredictInput::Record(r.clone()),
                (None, Some(b)) => PredictInput::Bits(b.clone()),
                (None, None) => return Err(AppError::Usage("predict needs --record or --bits".into())),
            };
            let p = cmd_predict(&cfg, &input)?;
            if p.zero_signal {
                eprintln!("warning: no light reached the detectors");
            }
            println!("{} ({})", p.label, p.class_index);
        }
        Command::Rl { step } => {
            let command = match step {
                RlStep::Teach => RlCommand::Teach,
                RlStep::Distill => RlCommand::Distill,
                RlStep::Train => RlCommand::Train,
                RlStep::Run => RlCommand::Run,
            };
            cmd_rl(&cfg, command, &mut say)?;
        }
        Command::Selftest => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
