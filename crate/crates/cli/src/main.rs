//! `skewcorr`: correlation functions, skew-orthogonal polynomial tables and
//! validation runs from a TOML configuration.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Case, Chain, Command, Family, Format, RunConfig, Wrt};
use error::CliError;

/// Environment variable giving the default worker thread count.
const THREADS_ENV: &str = "SKEWCORR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "skewcorr", version, about = "Pfaffian correlation functions of orthogonal and symplectic ensembles")]
struct Cli {
    /// Command to run; overrides `command` in the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: $SKEWCORR_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    #[arg(long, value_enum, global = true)]
    family: Option<Family>,
    #[arg(long, value_enum, global = true)]
    case: Option<Case>,
    #[arg(long, value_enum, global = true)]
    chain: Option<Chain>,
    /// Eigenvalue count.
    #[arg(short, long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, global = true)]
    l: Option<u32>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    variance: Option<f64>,
    /// Horizon of the walker chain.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Chain times, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    times: Option<Vec<f64>>,
    #[arg(long, global = true)]
    jmax: Option<usize>,
    #[arg(long, value_enum, global = true)]
    wrt: Option<Wrt>,
    #[arg(long, global = true)]
    slice: Option<usize>,
    /// Grid points for `density`, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    xs: Option<Vec<f64>>,
    /// A point tuple `slice:x,slice:x`; repeat for several tuples, pass "" for the empty tuple.
    #[arg(long = "point", global = true, allow_hyphen_values = true)]
    points: Vec<String>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    count: Option<usize>,
}

fn parse_tuple(s: &str) -> Result<Vec<(usize, f64)>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let bad = || CliError::Config(format!("point {p:?} is not slice:x"));
            let (m, x) = p.split_once(':').ok_or_else(bad)?;
            Ok((m.trim().parse().map_err(|_| bad())?, x.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

impl Cli {
    /// File values patched by command-line flags.
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let e = &mut c.ensemble;
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        macro_rules! set_opt {
            ($($flag:ident),*) => {
                $(if self.$flag.is_some() {
                    e.$flag = self.$flag;
                })*
            };
        }
        set!(self.family => e.family);
        set!(self.case => e.case);
        set!(self.chain => e.chain);
        set!(self.n => e.n);
        set!(self.times => e.times);
        set!(self.wrt => e.wrt);
        set!(self.seed => c.seed);
        set!(self.slice => c.grid.slice);
        set!(self.xs => c.grid.xs);
        set!(self.format => c.output.format);
        set_opt!(a, b, l, q, alpha, variance, horizon, jmax);
        if let Some(n) = self.count {
            c.mc.count = n;
            c.walkers.count = n;
        }
        if self.command.is_some() {
            c.command = self.command;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if self.output.is_some() {
            c.output.path = self.output.clone();
        }
        if !self.points.is_empty() {
            c.points = self.points.iter().map(|s| parse_tuple(s)).collect::<Result<_, _>>()?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn threads(cfg: &RunConfig) -> Result<Option<usize>, CliError> {
    if cfg.threads.is_some() {
        return Ok(cfg.threads);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = cli.config()?;
    if let Some(n) = threads(&cfg)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let report = commands::run(&cfg)?;
    let text = report.render(cfg.output.format);
    match &cfg.output.path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::Config(e.to_string().trim_end().to_string()).report());
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": "check", "message": "one or more checks failed", "exit_code": 1 } })
            );
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuples_parse() {
        assert_eq!(parse_tuple("0:-1.5, 1:2").unwrap(), vec![(0, -1.5), (1, 2.0)]);
        assert!(parse_tuple("").unwrap().is_empty());
        assert!(parse_tuple("x").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let cli = Cli::parse_from(["skewcorr", "density", "-n", "3", "--xs", "-1,0,1", "--seed", "9"]);
        let c = cli.config().unwrap();
        assert_eq!((c.ensemble.n, c.seed, c.command), (3, 9, Some(Command::Density)));
        assert_eq!(c.grid.xs, vec![-1.0, 0.0, 1.0]);
    }
}
