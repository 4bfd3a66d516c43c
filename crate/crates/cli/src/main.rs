use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spemm_cli::{commands, CliError, Format, LoadedConfig, Outcome};

#[derive(Parser)]
#[command(name = "spemm", version, about = "Equivalent martingale measures for factor-driven exponential models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Admissibility of the configured pair.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Monte Carlo martingale checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Overrides `mc.n_paths`.
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Simulated paths with their density process, as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides `mc.n_paths`.
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Characteristic exponent of the model's Lévy triplet.
    Exponent {
        #[command(flatten)]
        common: Common,
        /// Comma-separated evaluation points.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
              default_value = "-5,-4,-3,-2,-1,0,1,2,3,4,5")]
        u: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (common, result) = match &cli.command {
        Command::Check { common, format } => {
            let cfg = LoadedConfig::from_path(&common.config)?;
            let seed = common.seed.unwrap_or(cfg.config.mc.seed);
            (common, commands::check(&cfg, seed, *format)?)
        }
        Command::Verify {
            common,
            paths,
            format,
        } => {
            let cfg = LoadedConfig::from_path(&common.config)?;
            let seed = common.seed.unwrap_or(cfg.config.mc.seed);
            let n = paths.unwrap_or(cfg.config.mc.n_paths);
            (common, commands::verify(&cfg, seed, n, *format)?)
        }
        Command::Simulate { common, paths } => {
            let cfg = LoadedConfig::from_path(&common.config)?;
            ensure_parent(common.out.as_deref())?;
            let seed = common.seed.unwrap_or(cfg.config.mc.seed);
            let n = paths.unwrap_or(cfg.config.mc.n_paths);
            (common, commands::simulate(&cfg, seed, n)?)
        }
        Command::Exponent { common, u, format } => {
            let cfg = LoadedConfig::from_path(&common.config)?;
            (common, commands::exponent(&cfg, u, *format)?)
        }
    };
    let Outcome { code, body } = result;
    commands::emit(&body, common.out.as_deref())?;
    Ok(code)
}

fn ensure_parent(out: Option<&std::path::Path>) -> Result<(), CliError> {
    if let Some(dir) = out.and_then(|p| p.parent()).filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("spemm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
