use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use p2atlas::exec::Exec;
use p2atlas_cli::commands::{self, Failure};
use p2atlas_cli::config::{Command, ConfigError, LambdaValue, Outputs, PartialConfig, PrecisionMode, RunConfig};
use p2atlas_cli::emit;
use serde_json::json;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "P2ATLAS_THREADS";

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "p2atlas", version, about = "Airy solutions of Painleve II, their poles, and the cubic-model phase diagram")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Poles and zeros of q_n in a window: CSV, JSON, SVG with the rescaled O_1 outline
    Poles(Flags),
    /// Phase classification of the t-plane on a grid, plus the region boundaries
    Phase(Flags),
    /// Critical graph and preferred S-curve of Q(z; t)
    Trajectories(Flags),
    /// Residuals of the cubic-model bridge identities over a t-grid
    Bridge(Flags),
    /// Run the acceptance suite; nonzero exit on any failure
    Verify(Flags),
    /// Run whatever command the config file names
    Run(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// TOML file with any of the config keys; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// two reals, or inf
    #[arg(long, num_args = 1..=2, allow_negative_numbers = true, value_names = ["RE", "IM"])]
    lambda: Option<Vec<String>>,
    #[arg(long = "bigN", visible_alias = "big-n")]
    big_n: Option<f64>,
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["RE", "IM"])]
    t: Option<Vec<f64>>,
    #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["RE_LO", "IM_LO", "RE_HI", "IM_HI"])]
    window: Option<Vec<f64>>,
    /// grid points per side
    #[arg(long, visible_alias = "grid")]
    resolution: Option<usize>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// verify: comma-separated criterion numbers
    #[arg(long, value_delimiter = ',')]
    criteria: Option<Vec<usize>>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    diagnostic: Option<PathBuf>,
    /// directory for outputs not named explicitly
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// write the resolved config as TOML
    #[arg(long)]
    dump_config: Option<PathBuf>,
    /// resolve and validate the config, then stop
    #[arg(long)]
    dry_run: bool,
}

impl Flags {
    fn partial(&self, command: Option<Command>) -> Result<PartialConfig, ConfigError> {
        let lambda = self.lambda.as_deref().map(LambdaValue::parse).transpose().map_err(ConfigError)?;
        let any_output = self.csv.is_some() || self.json.is_some() || self.svg.is_some() || self.diagnostic.is_some();
        Ok(PartialConfig {
            command,
            n: self.n,
            lambda,
            big_n: self.big_n,
            t: self.t.as_ref().map(|v| [v[0], v[1]]),
            window: self.window.as_ref().map(|v| [v[0], v[1], v[2], v[3]]),
            resolution: self.resolution,
            precision: self.precision,
            outputs: any_output.then(|| Outputs {
                csv: self.csv.clone(),
                json: self.json.clone(),
                svg: self.svg.clone(),
                diagnostic: self.diagnostic.clone(),
            }),
            seed: self.seed,
            criteria: self.criteria.clone(),
        })
    }

    fn resolve(&self, command: Option<Command>) -> Result<RunConfig, ConfigError> {
        let base = match &self.config {
            Some(p) => PartialConfig::load(p)?,
            None => PartialConfig::default(),
        };
        base.overlay(self.partial(command)?).resolve(self.out_dir.as_deref())
    }
}

/// Thread count comes from the environment only. One thread means sequential.
fn executor() -> Result<Exec, String> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(Exec::default());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("{THREADS_VAR}={v:?} is not a positive integer"))?;
    if n == 1 {
        return Ok(Exec::Sequential);
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(Exec::default())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (flags, command) = match &cli.command {
        Sub::Poles(f) => (f, Some(Command::Poles)),
        Sub::Phase(f) => (f, Some(Command::Phase)),
        Sub::Trajectories(f) => (f, Some(Command::Trajectories)),
        Sub::Bridge(f) => (f, Some(Command::Bridge)),
        Sub::Verify(f) => (f, Some(Command::Verify)),
        Sub::Run(f) => (f, None),
    };
    let cfg = match flags.resolve(command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("p2atlas: invalid config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let exec = match executor() {
        Ok(x) => x,
        Err(e) => {
            eprintln!("p2atlas: invalid config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(p) = &flags.dump_config {
        if let Err(e) = emit::write(p, &cfg.to_toml()) {
            eprintln!("p2atlas: {}: {e}", p.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if flags.dry_run {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    match commands::dispatch(&cfg, exec) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Config(m)) => {
            eprintln!("p2atlas: invalid config: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical { message, details }) => {
            eprintln!("p2atlas: numerical failure: {message}");
            if let Some(p) = &cfg.outputs.diagnostic {
                let doc = json!({ "command": cfg.command.name(), "message": message, "details": details, "config": cfg });
                match emit::write(p, &emit::json("diagnostic", &doc)) {
                    Ok(()) => eprintln!("p2atlas: diagnostic written to {}", p.display()),
                    Err(e) => eprintln!("p2atlas: could not write {}: {e}", p.display()),
                }
            }
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
