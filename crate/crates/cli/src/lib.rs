//! Command-line driver: parameter ledgers, norms, evolution, Picard solves,
//! scattering and Monte-Carlo verification, each writing plot-ready CSV/JSON
//! plus a `manifest.json` describing the run.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 hypothesis rejected,
//! 3 invalid input (usage, config or I/O).

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use modnls::dispersion::RecipExponent;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Environment variable with the default worker count.
pub const THREADS_ENV: &str = "MODNLS_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] modnls::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    /// Numerical checks ran but did not pass.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use modnls::Error as E;
        match self {
            CliError::Core(E::Hypothesis(_)) => EXIT_HYPOTHESIS,
            CliError::Core(
                E::NonContraction(_)
                | E::MaxIterations(_)
                | E::TailNotNegligible(_)
                | E::Overflow(_)
                | E::NonFinite(_)
                | E::StepTooLarge(_)
                | E::PartitionResidual { .. },
            )
            | CliError::Failed(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }

    fn status(&self) -> &'static str {
        match self.exit_code() {
            EXIT_HYPOTHESIS => "hypothesis-rejected",
            EXIT_NUMERICAL => "numerical-failure",
            _ => "invalid-input",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "modnls", version, about = "Modulation-space toolkit for higher-order anisotropic NLS")]
struct Cli {
    /// JSON config file of the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for random initial data and ensembles.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "modnls-out")]
    out: PathBuf,
    /// Worker threads; defaults to $MODNLS_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exponent ledger for (d, m, gamma) and optionally (r, p).
    Params(ParamsArgs),
    /// Modulation norm of initial data.
    Norm,
    /// Split-step evolution.
    Evolve,
    /// Picard iteration of the Duhamel formula.
    Picard,
    /// Wave operator u0- -> u0+ over the window.
    Scatter,
    /// Monte-Carlo checks of the estimates.
    Verify(VerifyArgs),
}

#[derive(Debug, clap::Args)]
struct ParamsArgs {
    /// Space dimension.
    #[arg(short = 'd')]
    d: Option<i64>,
    /// Degree m of the power nonlinearity.
    #[arg(short = 'm')]
    m: Option<i64>,
    /// The fourth-order coefficient gamma is nonzero.
    #[arg(long)]
    gamma_nonzero: bool,
    /// Time exponent r, e.g. 4, 8/3 or inf.
    #[arg(long)]
    r: Option<RecipExponent>,
    /// Space exponent p.
    #[arg(long)]
    p: Option<RecipExponent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    StrichartzHom,
    StrichartzInhom,
    Hoelder,
    Lipschitz,
    Embeddings,
    All,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    check: CheckName,
    /// Deliberately violate hypotheses and record trends only.
    #[arg(long)]
    probe: bool,
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "modnls-cli")]
    cli: &'static str,
    #[serde(rename = "modnls-core")]
    core: &'static str,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config: Option<String>,
    config_hash: Option<String>,
    seed: u64,
    threads: Option<usize>,
    versions: Versions,
    status: String,
    exit_code: i32,
    message: Option<String>,
    wall_time_s: f64,
    outputs: Vec<String>,
}

/// State shared by the subcommands of one run.
pub(crate) struct RunContext {
    out: PathBuf,
    config_dir: PathBuf,
    seed: u64,
    config_hash: Option<String>,
    outputs: Vec<String>,
}

impl RunContext {
    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.out.join(name)
    }

    pub(crate) fn set_config<T: Serialize>(&mut self, effective: &T) -> Result<(), CliError> {
        let bytes = serde_json::to_vec(effective)?;
        self.config_hash = Some(hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Params(_) => "params",
        Command::Norm => "norm",
        Command::Evolve => "evolve",
        Command::Picard => "picard",
        Command::Scatter => "scatter",
        Command::Verify(_) => "verify",
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} = `{v}` is not a thread count"))),
        _ => Ok(None),
    }
}

fn read_config(path: Option<&Path>) -> Result<Option<String>, CliError> {
    path.map(|p| fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))).transpose()
}

fn dispatch(cli: &Cli, ctx: &mut RunContext) -> Result<(), CliError> {
    let text = read_config(cli.config.as_deref())?;
    let origin = cli.config.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    let require = || {
        text.as_deref()
            .ok_or_else(|| CliError::Usage(format!("`{}` needs --config", subcommand_name(&cli.command))))
    };
    match &cli.command {
        Command::Params(a) => {
            let mut cfg: config::ParamsConfig = match &text {
                Some(t) => config::parse(t, &origin)?,
                None => config::ParamsConfig::default(),
            };
            cfg.d = a.d.or(cfg.d);
            cfg.m = a.m.or(cfg.m);
            if a.gamma_nonzero {
                cfg.gamma_nonzero = Some(true);
            }
            cfg.r = a.r.or(cfg.r);
            cfg.p = a.p.or(cfg.p);
            commands::params(ctx, &cfg)
        }
        Command::Norm => commands::norm(ctx, &config::parse(require()?, &origin)?),
        Command::Evolve => commands::evolve(ctx, &config::parse(require()?, &origin)?),
        Command::Picard => commands::picard(ctx, &config::parse(require()?, &origin)?),
        Command::Scatter => commands::scatter(ctx, &config::parse(require()?, &origin)?),
        Command::Verify(a) => {
            let mut cfg: config::VerifyConfig = match &text {
                Some(t) => config::parse(t, &origin)?,
                None => config::VerifyConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.ensemble.seed = seed;
            }
            ctx.seed = cfg.ensemble.seed;
            commands::verify(ctx, &cfg, a.check, a.probe)
        }
    }
}

/// Run the tool on `argv` (program name first) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let config_dir = cli
        .config
        .as_ref()
        .and_then(|p| p.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut ctx = RunContext { out: cli.out.clone(), config_dir, seed: cli.seed.unwrap_or(0), config_hash: None, outputs: Vec::new() };

    let threads = thread_count(cli.threads);
    let result = match (fs::create_dir_all(&cli.out), &threads) {
        (Err(e), _) => Err(CliError::Io(e)),
        (_, Err(e)) => Err(CliError::Usage(e.to_string())),
        (Ok(()), Ok(None)) => dispatch(&cli, &mut ctx),
        (Ok(()), Ok(Some(n))) => match rayon::ThreadPoolBuilder::new().num_threads(*n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, &mut ctx)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
    };
    if ctx.config_hash.is_none() {
        if let Some(Ok(bytes)) = cli.config.as_ref().map(fs::read) {
            ctx.config_hash = Some(hex::encode(Sha256::digest(&bytes)));
        }
    }

    let (code, status, message) = match &result {
        Ok(()) => (EXIT_OK, "ok", None),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), e.status(), Some(e.to_string()))
        }
    };
    let manifest = RunManifest {
        subcommand: subcommand_name(&cli.command).to_string(),
        config: cli.config.as_ref().map(|p| p.display().to_string()),
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        threads: threads.ok().flatten(),
        versions: Versions { cli: env!("CARGO_PKG_VERSION"), core: modnls::VERSION },
        status: status.to_string(),
        exit_code: code,
        message,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: ctx.outputs.clone(),
    };
    if let Err(e) = fs::create_dir_all(&cli.out).map_err(modnls::Error::from).and_then(|_| modnls::io::write_json(&cli.out.join("manifest.json"), &manifest)) {
        eprintln!("error: cannot write manifest: {e}");
    }
    code
}
