//! `cpr`: command-line front end for the CPR simulator.
//!
//! Exit codes: 0 on success, 1 on a bad flag or invalid scenario, 2 on a
//! runtime or I/O failure (including a failed invariant check).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpr_core::check::{run_invariant_suite, CheckConfig};
use cpr_core::sim::{self, Method, RunResult, Scenario};
use cpr_core::Error;

#[derive(Debug, Parser)]
#[command(name = "cpr", version, about = "Complete power reallocation beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean sum-rate after every iteration on static channels.
    Convergence(RunArgs),
    /// Sum-rate and per-UE rates over SNR.
    SweepSnr(RunArgs),
    /// Per-UE rates over moving-UE velocity.
    SweepVelocity(RunArgs),
    /// Randomized invariant suite; `--trials` sets the instance count.
    Check(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON scenario file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; a JSON sidecar with the scenario is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioFlags,
}

#[derive(Debug, Args)]
struct ScenarioFlags {
    /// Number of BS antennas.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Number of moving UEs.
    #[arg(long = "Km")]
    k_m: Option<usize>,
    /// Number of static UEs.
    #[arg(long = "Ks")]
    k_s: Option<usize>,
    /// SNR points in dB, comma-separated.
    #[arg(long = "snr", value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// Moving-UE velocities in km/h, comma-separated.
    #[arg(long = "v", value_delimiter = ',')]
    velocity_kmh: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Methods, comma-separated (cpr_ep, cpr_wf, fc_cpr_ep, fc_cpr_wf,
    /// cpr_cc_wf, normalized_zf, miso_opt).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Antenna-set threshold of plain CPR.
    #[arg(long)]
    p: Option<f64>,
    /// Stop once total power reaches this fraction of P_tot.
    #[arg(long)]
    power_frac_stop: Option<f64>,
    /// Stop once this fraction of antennas is at P_ant.
    #[arg(long)]
    ant_frac_stop: Option<f64>,
    /// Relative tolerance for counting an antenna as full.
    #[arg(long)]
    ant_full_tol: Option<f64>,
    /// Cap on iterations per CPR run, below M-K+1.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    p_init: Option<f64>,
    #[arg(long)]
    delta_p: Option<f64>,
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    carrier_hz: Option<f64>,
    #[arg(long)]
    interval_s: Option<f64>,
    #[arg(long)]
    light_speed: Option<f64>,
    /// Magnitude of the spatial correlation coefficient.
    #[arg(long)]
    corr_mag: Option<f64>,
    /// Number of outdated blocks offered as candidates for moving UEs.
    #[arg(long)]
    n_candidates: Option<usize>,
}

impl ScenarioFlags {
    fn apply(self, s: &mut Scenario) {
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        set(&mut s.m, self.m);
        set(&mut s.k_m, self.k_m);
        set(&mut s.k_s, self.k_s);
        set(&mut s.snr_db_list, self.snr_db);
        set(&mut s.velocity_kmh_list, self.velocity_kmh);
        set(&mut s.trials, self.trials);
        set(&mut s.seed, self.seed);
        set(&mut s.methods, self.methods);
        set(&mut s.cpr.p, self.p);
        for cfg in [&mut s.cpr, &mut s.fc.inner] {
            set(&mut cfg.power_frac_stop, self.power_frac_stop);
            set(&mut cfg.ant_frac_stop, self.ant_frac_stop);
            set(&mut cfg.ant_full_tol, self.ant_full_tol);
            if self.max_iter.is_some() {
                cfg.max_iter_override = self.max_iter;
            }
        }
        set(&mut s.fc.p_init, self.p_init);
        set(&mut s.fc.delta_p, self.delta_p);
        set(&mut s.fc.p_max, self.p_max);
        set(&mut s.physical.carrier_hz, self.carrier_hz);
        set(&mut s.physical.interval_s, self.interval_s);
        set(&mut s.physical.light_speed, self.light_speed);
        set(&mut s.corr_mag, self.corr_mag);
        set(&mut s.n_candidates, self.n_candidates);
    }
}

fn worker_count() -> Result<usize, Error> {
    match std::env::var("CPR_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("CPR_THREADS must be a non-negative integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Error::Domain(format!("CPR_THREADS: {e}"))),
    }
}

fn scenario_from(config: Option<&PathBuf>, flags: ScenarioFlags) -> Result<Scenario, Error> {
    let mut scenario = match config {
        Some(path) => sim::read_scenario(path)?,
        None => Scenario::default(),
    };
    flags.apply(&mut scenario);
    scenario.validate()?;
    Ok(scenario)
}

fn emit(result: &RunResult, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => {
            sim::write_results(result, path)?;
            log::info!("wrote {} rows to {}", result.rows.len(), path.display());
        }
        None => print!("{}", result.to_csv()),
    }
    Ok(())
}

fn check(scenario: &Scenario, out: Option<&PathBuf>) -> Result<(), Error> {
    let config = CheckConfig {
        seed: scenario.seed,
        instances: scenario.trials,
        cpr: scenario.cpr,
        fc: scenario.fc,
        ..CheckConfig::default()
    };
    let report = run_invariant_suite(&config)?;
    let text = report.to_string();
    match out {
        Some(path) => std::fs::write(path, &text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.tallies.iter().filter(|t| t.failed > 0).map(|t| t.name).collect();
        Err(Error::Invariant(format!("failed invariants: {}", failed.join(", "))))
    }
}

fn run(command: Command) -> Result<(), Error> {
    let workers = worker_count()?;
    let (args, op): (RunArgs, fn(&Scenario, Option<&PathBuf>) -> Result<(), Error>) = match command {
        Command::Convergence(a) => (a, |s, out| emit(&sim::run_convergence(s)?, out)),
        Command::SweepSnr(a) => (a, |s, out| emit(&sim::sweep_snr(s)?, out)),
        Command::SweepVelocity(a) => (a, |s, out| emit(&sim::sweep_velocity(s)?, out)),
        Command::Check(a) => (a, check),
    };
    let RunArgs { config, out, scenario } = args;
    let scenario = scenario_from(config.as_ref(), scenario)?;
    sim::with_workers(workers, || op(&scenario, out.as_ref()))?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                eprintln!("run `cpr --help` for usage");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
