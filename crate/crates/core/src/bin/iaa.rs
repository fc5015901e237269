//! `iaa`: spectra, eigenstate sweeps, quenches and thermalization campaigns.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iaa_core::campaign::{self, emit_outputs, emit_quench, run, run_quench, CampaignConfig, Stage};
use iaa_core::check;
use iaa_core::{Error, FockState, Result};

#[derive(Parser)]
#[command(name = "iaa", version, about = "Interacting bosons in a quasi-periodic chain: exact diagonalization and thermalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level statistics: windowed gap ratio versus energy.
    Spectrum(Common),
    /// Eigenstate sweep of site-1 observables and their dispersion.
    Eth(Common),
    /// Time evolution of one occupation state.
    Quench(QuenchArgs),
    /// Quench every selected state and classify it against the microcanonical curve.
    Thermalize(Common),
    /// Toy-size invariant checks.
    Check,
}

#[derive(Args)]
struct Common {
    /// Config file (TOML or key = value lines).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Bosons N (sites default to N).
    #[arg(short = 'n', long)]
    particles: Option<usize>,
    #[arg(short = 'm', long)]
    sites: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Any config key, e.g. `--set t_eq=5000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct QuenchArgs {
    #[command(flatten)]
    common: Common,
    /// Initial occupation state, e.g. `1,1,1,1,1,1,1`. Defaults to unit filling.
    #[arg(long)]
    state: Option<String>,
    #[arg(long, default_value_t = 1e4)]
    t_max: f64,
    /// Number of log-spaced times after t = 0.
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 1e-2)]
    t_min: f64,
}

impl Common {
    fn config(&self) -> Result<CampaignConfig> {
        let mut table = match &self.config {
            Some(p) => campaign::load_table(p)?,
            None => toml::Table::new(),
        };
        let mut set = |k: &str, v: toml::Value| {
            table.insert(k.to_string(), v);
        };
        if let Some(n) = self.particles {
            set("particles", toml::Value::Integer(n as i64));
            if self.sites.is_none() {
                set("sites", toml::Value::Integer(n as i64));
            }
        }
        if let Some(m) = self.sites {
            set("sites", toml::Value::Integer(m as i64));
        }
        if let Some(s) = self.seed {
            let s = i64::try_from(s).map_err(|_| Error::Config("seed must be below 2^63".into()))?;
            set("master_seed", toml::Value::Integer(s));
        }
        if let Some(k) = self.realizations {
            set("realizations", toml::Value::Integer(k as i64));
        }
        if let Some(o) = &self.out {
            set("output_dir", toml::Value::String(o.display().to_string()));
        }
        if let Some(w) = self.workers {
            set("workers", toml::Value::Integer(w as i64));
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set {kv}: expected KEY=VALUE")))?;
            set(k.trim(), campaign::parse_value(v.trim()));
        }
        let config = CampaignConfig::from_table(table)?;
        config.validate()?;
        Ok(config)
    }
}

fn log_times(t_min: f64, t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || points < 2 {
        return Err(Error::Config("need 0 < t_min < t_max and at least 2 points".into()));
    }
    let ratio = (t_max / t_min).ln() / (points - 1) as f64;
    let mut times = vec![0.0];
    times.extend((0..points - 1).map(|i| t_min * (ratio * i as f64).exp()));
    times.push(t_max);
    Ok(times)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Spectrum(c) => {
            let config = c.config()?;
            let result = run(&config, Stage::Spectrum)?;
            println!("dim {}  realizations {}", result.dim(), result.realizations.len());
            if let Some(r) = result.tail_r_mean(0.1) {
                println!("top-decile <r> = {r:.4}");
            }
            report(&emit_outputs(&result, &config.output_dir)?);
        }
        Command::Eth(c) => {
            let config = c.config()?;
            let result = run(&config, Stage::Eth)?;
            let max_std = |d: &[iaa_core::observables::Dispersion]| d.iter().map(|x| x.std).fold(0.0, f64::max);
            println!(
                "dim {}  max window std: n1 {:.4}  S1 {:.4}",
                result.dim(),
                max_std(&result.n1_dispersion),
                max_std(&result.s1_dispersion)
            );
            report(&emit_outputs(&result, &config.output_dir)?);
        }
        Command::Thermalize(c) => {
            let config = c.config()?;
            let result = run(&config, Stage::Thermalize)?;
            let thermal = result.verdicts.iter().filter(|v| v.thermal).count();
            println!("dim {}  thermal {thermal} of {} states", result.dim(), result.verdicts.len());
            report(&emit_outputs(&result, &config.output_dir)?);
        }
        Command::Quench(q) => {
            let config = q.common.config()?;
            let state = match &q.state {
                Some(s) => FockState::parse(s).map_err(|e| Error::Config(e.to_string()))?,
                None => FockState::mott(config.sites),
            };
            let times = log_times(q.t_min, q.t_max, q.points)?;
            let traj = run_quench(&config, &state, &times)?;
            let last = traj.times.len() - 1;
            println!("state {state}  S1(t_max) = {:.4}  n1(t_max) = {:.4}", traj.s1[last], traj.n1[last]);
            report(&emit_quench(&traj, &config, &config.output_dir)?);
        }
        Command::Check => {
            let outcomes = check::run_all()?;
            for o in &outcomes {
                println!("{o}");
            }
            if let Some(f) = outcomes.iter().find(|o| !o.passed) {
                return Err(Error::Degenerate(format!("check failed: {}", f.name)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
