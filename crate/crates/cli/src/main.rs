use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nelsonbath::config::{Scale, SelftestParams};
use nelsonbath::runner::{self, RunError};
use nelsonbath::{parse_config, Format, RunConfig, Subcommand};
use nelsonbath_core::heatbath::Mode;

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ModeArg {
    Paper,
    Physical,
}

/// Collision, heat-bath and Nelson-diffusion experiments.
#[derive(Debug, Parser)]
#[command(name = "nelsonbath", version)]
struct Cli {
    /// Subcommand; may be omitted when the config names one.
    #[arg(value_enum)]
    subcommand: Option<Subcommand>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Exchange mode for bath and minkowski runs.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Selftest sample sizes.
    #[arg(long, value_enum)]
    scale: Option<Scale>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn resolve(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| RunError::Input { path: path.clone(), message: e.to_string() })?;
            let mut cfg = parse_config(&text)?;
            cfg.base_dir = path.parent().map(PathBuf::from);
            if let Some(sub) = cli.subcommand {
                if sub != cfg.subcommand {
                    return Err(runner::usage(format!(
                        "command line asks for {} but the config is for {}",
                        sub.name(),
                        cfg.subcommand.name()
                    )));
                }
            }
            cfg
        }
        None => match cli.subcommand {
            Some(Subcommand::Selftest) => RunConfig::bare(Subcommand::Selftest),
            Some(other) => return Err(runner::usage(format!("{} needs --config", other.name()))),
            None => return Err(runner::usage("give a subcommand or --config")),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output = Some(out.clone());
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(m) = cli.mode {
        let mode = match m {
            ModeArg::Paper => Mode::Paper,
            ModeArg::Physical => Mode::Physical,
        };
        match (&mut cfg.bath, &mut cfg.minkowski) {
            (Some(b), _) => b.mode = mode,
            (_, Some(k)) => k.mode = mode,
            _ => return Err(runner::usage("--mode applies to bath and minkowski runs only")),
        }
    }
    if let Some(scale) = cli.scale {
        if cfg.subcommand != Subcommand::Selftest {
            return Err(runner::usage("--scale applies to selftest only"));
        }
        cfg.selftest = Some(SelftestParams { scale });
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| {
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| runner::usage(format!("cannot set up {n} threads: {e}")))?;
        }
        let cfg = resolve(&cli)?;
        let quiet = cli.quiet;
        // Progress goes to stderr when the table itself goes to stdout.
        let to_stderr = cfg.output.is_none();
        let mut on_line = |line: &str| match (quiet, to_stderr) {
            (true, _) => {}
            (false, true) => eprintln!("{line}"),
            (false, false) => println!("{line}"),
        };
        runner::run(&cfg, &mut on_line)
    })();
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
