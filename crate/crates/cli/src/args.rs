//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mpemba_core::bloch::stability;
use mpemba_core::{Environment, Metric};

use crate::config::{preset, ExperimentConfig, Overrides, ParamsSpec};
use crate::error::{io_error, CliError};
use crate::run::{run, stability_json};

/// Environment variable selecting the number of worker threads.
pub const WORKERS_VAR: &str = "MPEMBA_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "mpemba", version, about = "Relaxation and Mpemba-effect experiments for spin-1/2 ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Crossover trajectories for states on a line (n = 1000, shared vs independent).
    Fig2(RunArgs),
    /// Thermalization-time maps and velocity fields (n = 100).
    Fig3(RunArgs),
    /// Anisotropic relaxation with T2 = 0.01 T1.
    Fig4(RunArgs),
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Print the fixed-point eigenvalues as JSON.
    ///
    /// PARAMS is a TOML file (a full config or a bare parameter table) or an
    /// inline list such as `t1=1,t2=1,n=1000,m0=0.5`.
    Stability {
        params: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Output directory [default: out/<experiment name>]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the effective config as TOML instead of running it.
    #[arg(long)]
    pub print_config: bool,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args)]
pub struct OverrideArgs {
    /// Metric for thermalization times: D, Dz, Dperp or S.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Number of particles.
    #[arg(long)]
    pub n: Option<u32>,
    /// Sets T2 = ratio * T1.
    #[arg(long)]
    pub t2_ratio: Option<f64>,
    /// Only the shared environment.
    #[arg(long, conflicts_with = "independent")]
    pub shared: bool,
    /// Only independent environments.
    #[arg(long)]
    pub independent: bool,
    /// Map grid as R_COUNTxTHETA_COUNT, e.g. 64x64.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Integration end time, in units of T1.
    #[arg(long)]
    pub horizon: Option<f64>,
}

impl OverrideArgs {
    pub fn overrides(&self) -> Overrides {
        let environment = match (self.shared, self.independent) {
            (true, _) => Some(Environment::Shared),
            (_, true) => Some(Environment::Independent),
            _ => None,
        };
        Overrides {
            metric: self.metric,
            cutoff: self.cutoff,
            n: self.n,
            t2_ratio: self.t2_ratio,
            environment,
            grid: self.grid,
            horizon: self.horizon,
        }
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    Metric::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown metric `{s}` (expected D, Dz, Dperp or S)"))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((w, h))
}

/// Sizes the global thread pool from [`WORKERS_VAR`], if set.
pub fn configure_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let workers: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_VAR}: expected a positive integer, got `{value}`")))?;
    // A pool that is already initialized keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_error(path))
}

/// Parameters and environments for the `stability` subcommand.
fn stability_inputs(arg: &str) -> Result<(ParamsSpec, Vec<Environment>), CliError> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        read(path)?
    } else {
        arg.split(',').collect::<Vec<_>>().join("\n")
    };
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("stability parameters: {e}"));
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| bad(&e))?;
    let envs = match table.remove("environments") {
        Some(v) => v.try_into().map_err(|e| bad(&e))?,
        None => vec![Environment::Shared, Environment::Independent],
    };
    let params = match table.remove("params") {
        Some(v) => v,
        None => toml::Value::Table(table),
    };
    Ok((params.try_into().map_err(|e| bad(&e))?, envs))
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (mut config, args) = match cli.command {
        Command::Fig2(args) => (preset("fig2").expect("known preset"), args),
        Command::Fig3(args) => (preset("fig3").expect("known preset"), args),
        Command::Fig4(args) => (preset("fig4").expect("known preset"), args),
        Command::Run { config, args } => (ExperimentConfig::from_toml(&read(&config)?)?, args),
        Command::Stability { params, overrides } => {
            let (mut spec, mut envs) = stability_inputs(&params)?;
            let o = overrides.overrides();
            if let Some(n) = o.n {
                spec.n = n;
            }
            if let Some(ratio) = o.t2_ratio {
                spec.t2 = Some(ratio * spec.t1);
                spec.tphi = None;
            }
            if let Some(env) = o.environment {
                envs = vec![env];
            }
            for env in envs {
                let p = spec.resolve(env)?;
                let report = stability(&p)?;
                write!(stdout, "{}", stability_json(&p, &report)).map_err(io_error(Path::new("<stdout>")))?;
            }
            return Ok(());
        }
    };
    args.overrides.overrides().apply(&mut config)?;
    if args.print_config {
        write!(stdout, "{}", config.to_toml()).map_err(io_error(Path::new("<stdout>")))?;
        return Ok(());
    }
    configure_workers()?;
    let out = args
        .out
        .unwrap_or_else(|| Path::new("out").join(&config.name));
    let files = run(&config, &out)?;
    writeln!(stdout, "wrote {} files to {}", files.len(), out.display())
        .map_err(io_error(Path::new("<stdout>")))?;
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mpemba: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag() {
        assert_eq!(parse_grid("64x32"), Ok((64, 32)));
        assert!(parse_grid("64").is_err());
        assert!(parse_grid("0x4").is_err());
    }

    #[test]
    fn metric_flag() {
        assert_eq!(parse_metric("dperp"), Ok(Metric::Dperp));
        assert!(parse_metric("entropy").is_err());
    }

    #[test]
    fn inline_stability_params() {
        let (spec, envs) = stability_inputs("t1=1.0,t2=1.0,n=1000,m0=0.5").unwrap();
        assert_eq!(spec.n, 1000);
        assert_eq!(envs.len(), 2);
        assert!(stability_inputs("t1=1.0,t2=1.0,m0=0.5").is_err());
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let mut sink = Vec::new();
        assert_eq!(main_with(["mpemba", "fig9"], &mut sink), 2);
        assert_eq!(main_with(["mpemba", "fig2", "--n", "0", "--print-config"], &mut sink), 2);
        assert_eq!(main_with(["mpemba", "fig2", "--shared", "--independent"], &mut sink), 2);
    }

    #[test]
    fn print_config_applies_overrides() {
        let mut out = Vec::new();
        assert_eq!(main_with(["mpemba", "fig3", "--n", "10", "--grid", "8x4", "--print-config"], &mut out), 0);
        let config = ExperimentConfig::from_toml(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(config.params.n, 10);
        assert_eq!(config.map_grid().theta_count, 4);
    }
}
