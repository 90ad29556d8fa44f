//! Seeded Monte Carlo runner: convergence traces, SNR sweeps and velocity
//! sweeps, with CSV output and a JSON sidecar holding the scenario.
//!
//! Every trial draws from its own ChaCha stream keyed by the scenario seed and
//! `(sweep point, trial index)`, and aggregation runs in trial order, so the
//! output does not depend on the number of worker threads.

use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{
    self, cpr_cc, cpr_observed, fc_cpr_observed, miso_optimal, normalized_zf, waterfill, Beamformer, CprConfig,
    DistributionWeights, FcConfig, PowerBudget, POWER_TOL,
};
use crate::channel::{sample_large_scale, ChannelSet, PhysicalParams, UeProfile};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, papc_check, LinkReport};
use crate::numerics::{col, stream_rng, CMatrix, SimRng};

/// Beamforming methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CprEp,
    CprWf,
    FcCprEp,
    FcCprWf,
    CprCcWf,
    NormalizedZf,
    MisoOpt,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CprEp,
        Method::CprWf,
        Method::FcCprEp,
        Method::FcCprWf,
        Method::CprCcWf,
        Method::NormalizedZf,
        Method::MisoOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CprEp => "cpr_ep",
            Method::CprWf => "cpr_wf",
            Method::FcCprEp => "fc_cpr_ep",
            Method::FcCprWf => "fc_cpr_wf",
            Method::CprCcWf => "cpr_cc_wf",
            Method::NormalizedZf => "normalized_zf",
            Method::MisoOpt => "miso_opt",
        }
    }

    fn water_filling(self) -> bool {
        matches!(self, Method::CprWf | Method::FcCprWf | Method::CprCcWf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown method {s:?}")))
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K_m")]
    pub k_m: usize,
    #[serde(rename = "K_s")]
    pub k_s: usize,
    pub snr_db_list: Vec<f64>,
    pub velocity_kmh_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub cpr: CprConfig,
    pub fc: FcConfig,
    pub physical: PhysicalParams,
    pub corr_mag: f64,
    pub n_candidates: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            m: 16,
            k_m: 0,
            k_s: 4,
            snr_db_list: vec![10.0],
            velocity_kmh_list: vec![3.0],
            trials: 200,
            seed: 1,
            methods: vec![
                Method::CprEp,
                Method::CprWf,
                Method::FcCprEp,
                Method::FcCprWf,
                Method::CprCcWf,
                Method::NormalizedZf,
            ],
            cpr: CprConfig::default(),
            fc: FcConfig::default(),
            physical: PhysicalParams::default(),
            corr_mag: 0.6,
            n_candidates: 2,
        }
    }
}

impl Scenario {
    pub fn users(&self) -> usize {
        self.k_m + self.k_s
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        if k == 0 || k > self.m {
            return Err(Error::domain(format!("need 1 <= K_m + K_s <= M, got K = {k}, M = {}", self.m)));
        }
        if self.trials == 0 {
            return Err(Error::domain("trials must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::domain("no methods selected"));
        }
        if self.methods.contains(&Method::MisoOpt) && k != 1 {
            return Err(Error::domain("miso_opt needs exactly one UE"));
        }
        if !(0.0..1.0).contains(&self.corr_mag) {
            return Err(Error::domain(format!("corr_mag must lie in [0, 1), got {}", self.corr_mag)));
        }
        if self.n_candidates == 0 {
            return Err(Error::domain("n_candidates must be >= 1"));
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("SNR values must be finite"));
        }
        if self.velocity_kmh_list.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::domain("velocities must be finite and >= 0"));
        }
        self.cpr.validate()?;
        self.fc.validate()?;
        self.physical.validate()
    }

    fn budget(&self) -> Result<PowerBudget> {
        PowerBudget::new(1.0, self.m)
    }
}

/// Noise variance for `P_tot = 1` at the given SNR.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// One aggregated statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub method: String,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub metric: String,
    pub mean: f64,
    pub ci95: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: Scenario,
    pub rows: Vec<StatRow>,
}

pub const CSV_HEADER: &str = "method,sweep_var,sweep_value,metric,mean,ci95,trials";

impl RunResult {
    pub fn find(&self, method: &str, sweep_var: &str, sweep_value: f64, metric: &str) -> Option<&StatRow> {
        self.rows.iter().find(|r| {
            r.method == method && r.sweep_var == sweep_var && r.sweep_value == sweep_value && r.metric == metric
        })
    }

    /// Rows of one series ordered by sweep value.
    pub fn series(&self, method: &str, sweep_var: &str, metric: &str) -> Vec<&StatRow> {
        let mut out: Vec<&StatRow> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.sweep_var == sweep_var && r.metric == metric)
            .collect();
        out.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.method, r.sweep_var, r.sweep_value, r.metric, r.mean, r.ci95, r.trials
            );
        }
        s
    }
}

/// Sidecar path: `out.csv` becomes `out.json`, anything else gets `.json`
/// appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    match path.extension() {
        Some(ext) if ext == "csv" => path.with_extension("json"),
        _ => {
            let mut s = path.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        }
    }
}

/// Writes the CSV to `path` and the scenario as JSON next to it.
pub fn write_results(result: &RunResult, path: &Path) -> Result<()> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    std::fs::write(path, result.to_csv()).map_err(io(path))?;
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&result.scenario)?;
    std::fs::write(&sidecar, json + "\n").map_err(io(&sidecar))?;
    Ok(())
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_trials<T: Send>(trials: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let outcomes: Vec<Result<T>> = (0..trials).into_par_iter().map(&f).collect();
    outcomes
        .into_iter()
        .enumerate()
        .map(|(trial, r)| {
            r.map_err(|e| Error::Trial {
                trial,
                source: Box::new(e),
            })
        })
        .collect()
}

fn stream_id(point: usize, trial: usize) -> u64 {
    ((point as u64) << 32) | trial as u64
}

/// Mean and normal-approximation 95% half-width.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

fn push_stat(rows: &mut Vec<StatRow>, method: &str, sweep_var: &str, sweep_value: f64, metric: &str, values: &[f64]) {
    let (mean, ci95) = mean_ci95(values);
    rows.push(StatRow {
        method: method.to_string(),
        sweep_var: sweep_var.to_string(),
        sweep_value,
        metric: metric.to_string(),
        mean,
        ci95,
        trials: values.len(),
    });
}

fn draw_profiles(scenario: &Scenario, velocity_kmh: f64, rng: &mut SimRng) -> Result<Vec<UeProfile>> {
    (0..scenario.users())
        .map(|k| {
            let phase = (rng.random::<f64>() * TAU) % TAU;
            let beta = sample_large_scale(rng);
            let v = if k < scenario.k_m { velocity_kmh } else { 0.0 };
            UeProfile::new(scenario.corr_mag, phase, v, beta)
        })
        .collect()
}

fn ensure_admissible(method: &str, f: &CMatrix, budget: &PowerBudget) -> Result<()> {
    let excess = papc_check(f, budget);
    let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
    if excess > POWER_TOL * budget.p_ant() || total > budget.p_tot() * (1.0 + POWER_TOL) {
        return Err(Error::Invariant(format!(
            "{method} violates the power constraints (PAPC excess {excess:.3e}, total {total:.6})"
        )));
    }
    Ok(())
}

/// Design inputs of one trial.
struct Design<'a> {
    h: &'a CMatrix,
    candidates: Vec<Vec<CMatrix>>,
    k_m: usize,
    budget: PowerBudget,
    noise_var: f64,
}

impl Design<'_> {
    fn build(&self, method: Method, scenario: &Scenario, wf: Option<&DistributionWeights>) -> Result<Beamformer> {
        let k = self.h.ncols();
        let ep = DistributionWeights::equal(k);
        let weights = if method.water_filling() {
            wf.expect("water-filling weights computed")
        } else {
            &ep
        };
        let noop = &mut |_: &beamform::IterationRecord, _: &CMatrix| {};
        match method {
            Method::CprEp | Method::CprWf => cpr_observed(self.h, &scenario.cpr, weights, &self.budget, None, noop),
            Method::FcCprEp | Method::FcCprWf => fc_cpr_observed(self.h, &scenario.fc, weights, &self.budget, noop),
            Method::CprCcWf => cpr_cc(self.h, &self.candidates, self.k_m, &scenario.cpr, weights, &self.budget),
            Method::NormalizedZf => normalized_zf(self.h, &self.budget),
            Method::MisoOpt => miso_optimal(self.h, &self.budget),
        }
    }
}

struct MethodOutcome {
    sum_rate: f64,
    moving_rate: Option<f64>,
    static_rate: Option<f64>,
    iterations: f64,
}

fn split_rates(report: &LinkReport, k_m: usize) -> (Option<f64>, Option<f64>) {
    let mean = |s: &[f64]| {
        if s.is_empty() {
            None
        } else {
            Some(s.iter().sum::<f64>() / s.len() as f64)
        }
    };
    let (moving, stat) = report.per_ue_rate.split_at(k_m);
    (mean(moving), mean(stat))
}

/// One trial of the aging protocol: draw `H_{i-Nc}`, age to `H_{i-1}` (the
/// design channel) and once more to `H_i` (the evaluation channel).
fn aging_trial(scenario: &Scenario, snr_db: f64, velocity_kmh: f64, rng: &mut SimRng) -> Result<Vec<MethodOutcome>> {
    let profiles = draw_profiles(scenario, velocity_kmh, rng)?;
    let depth = scenario.n_candidates + 1;
    let mut set = ChannelSet::new(scenario.m, profiles, &scenario.physical, depth, rng)?;
    for _ in 0..scenario.n_candidates {
        set.step(rng)?;
    }
    let h_design = set.lagged(1).expect("history holds the design block").clone();
    let h_eval = set.current().clone();
    let candidates: Vec<Vec<CMatrix>> = (0..scenario.k_m)
        .map(|k| {
            (1..=scenario.n_candidates)
                .map(|lag| col(set.lagged(lag).expect("history holds every candidate block"), k))
                .collect()
        })
        .collect();

    let design = Design {
        h: &h_design,
        candidates,
        k_m: scenario.k_m,
        budget: scenario.budget()?,
        noise_var: noise_variance(snr_db),
    };
    let wf = if scenario.methods.iter().any(|m| m.water_filling()) {
        Some(waterfill(&h_design, &design.budget, design.noise_var)?)
    } else {
        None
    };

    scenario
        .methods
        .iter()
        .map(|&method| {
            let bf = design.build(method, scenario, wf.as_ref())?;
            ensure_admissible(method.name(), &bf.f, &design.budget)?;
            let report = evaluate(&h_eval, &bf.f, design.noise_var, &design.budget)?;
            let (moving_rate, static_rate) = split_rates(&report, scenario.k_m);
            Ok(MethodOutcome {
                sum_rate: report.sum_rate,
                moving_rate,
                static_rate,
                iterations: bf.iterations_used as f64,
            })
        })
        .collect()
}

fn aggregate_point(
    rows: &mut Vec<StatRow>,
    scenario: &Scenario,
    sweep_var: &str,
    value: f64,
    outcomes: &[Vec<MethodOutcome>],
) {
    for (i, method) in scenario.methods.iter().enumerate() {
        let pick = |f: &dyn Fn(&MethodOutcome) -> Option<f64>| -> Vec<f64> {
            outcomes.iter().filter_map(|t| f(&t[i])).collect()
        };
        let name = method.name();
        push_stat(rows, name, sweep_var, value, "sum_rate", &pick(&|o| Some(o.sum_rate)));
        if scenario.k_m > 0 {
            push_stat(rows, name, sweep_var, value, "moving_rate", &pick(&|o| o.moving_rate));
        }
        if scenario.k_s > 0 {
            push_stat(rows, name, sweep_var, value, "static_rate", &pick(&|o| o.static_rate));
        }
        push_stat(rows, name, sweep_var, value, "iterations", &pick(&|o| Some(o.iterations)));
    }
}

/// Sum-rate and per-UE rates over SNR. Moving UEs use the first entry of
/// `velocity_kmh_list`.
pub fn sweep_snr(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    if scenario.snr_db_list.is_empty() {
        return Err(Error::domain("snr_db_list is empty"));
    }
    let velocity = if scenario.k_m > 0 {
        *scenario
            .velocity_kmh_list
            .first()
            .ok_or_else(|| Error::domain("moving UEs need a velocity"))?
    } else {
        0.0
    };
    let mut rows = Vec::new();
    for (point, &snr) in scenario.snr_db_list.iter().enumerate() {
        let outcomes = run_trials(scenario.trials, |t| {
            let mut rng = stream_rng(scenario.seed, stream_id(point, t));
            aging_trial(scenario, snr, velocity, &mut rng)
        })?;
        aggregate_point(&mut rows, scenario, "snr_db", snr, &outcomes);
    }
    Ok(RunResult {
        scenario: scenario.clone(),
        rows,
    })
}

/// Per-UE rates over velocity at the first SNR of `snr_db_list`.
pub fn sweep_velocity(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    if scenario.velocity_kmh_list.is_empty() {
        return Err(Error::domain("velocity_kmh_list is empty"));
    }
    if scenario.k_m == 0 {
        return Err(Error::domain("velocity sweep needs at least one moving UE"));
    }
    let snr = *scenario
        .snr_db_list
        .first()
        .ok_or_else(|| Error::domain("snr_db_list is empty"))?;
    let mut rows = Vec::new();
    for (point, &v) in scenario.velocity_kmh_list.iter().enumerate() {
        let outcomes = run_trials(scenario.trials, |t| {
            let mut rng = stream_rng(scenario.seed, stream_id(point, t));
            aging_trial(scenario, snr, v, &mut rng)
        })?;
        aggregate_point(&mut rows, scenario, "velocity_kmh", v, &outcomes);
    }
    Ok(RunResult {
        scenario: scenario.clone(),
        rows,
    })
}

/// A curve of the convergence figure.
#[derive(Debug, Clone)]
struct Series {
    label: String,
    method: Method,
    /// Overrides `cpr.p` for plain CPR.
    p: Option<f64>,
}

fn convergence_series(scenario: &Scenario) -> Vec<Series> {
    let mut out = Vec::new();
    for &method in &scenario.methods {
        out.push(Series {
            label: method.name().to_string(),
            method,
            p: None,
        });
        if matches!(method, Method::CprEp | Method::CprWf) {
            out.push(Series {
                label: format!("{}_pinit", method.name()),
                method,
                p: Some(scenario.fc.p_init),
            });
        }
    }
    out
}

struct SeriesOutcome {
    /// Sum-rate after iteration `j`; entry 0 is the initial beamformer.
    trace: Vec<f64>,
    iterations: usize,
}

fn convergence_trial(scenario: &Scenario, snr_db: f64, series: &[Series], rng: &mut SimRng) -> Result<Vec<SeriesOutcome>> {
    // Static UEs only.
    let profiles = (0..scenario.users())
        .map(|_| {
            let phase = (rng.random::<f64>() * TAU) % TAU;
            UeProfile::new(scenario.corr_mag, phase, 0.0, sample_large_scale(rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = ChannelSet::new(scenario.m, profiles, &scenario.physical, 3, rng)?;
    let h = set.current();
    let budget = scenario.budget()?;
    let noise_var = noise_variance(snr_db);
    let wf = waterfill(h, &budget, noise_var)?;
    let ep = DistributionWeights::equal(h.ncols());

    series
        .iter()
        .map(|s| {
            let weights = if s.method.water_filling() { &wf } else { &ep };
            let mut trace = vec![0.0];
            let mut failure = None;
            let mut observe = |_: &beamform::IterationRecord, f: &CMatrix| match evaluate(h, f, noise_var, &budget) {
                Ok(r) => trace.push(r.sum_rate),
                Err(e) => failure = Some(e),
            };
            let bf = match s.method {
                Method::CprEp | Method::CprWf | Method::CprCcWf => {
                    let cfg = CprConfig {
                        p: s.p.unwrap_or(scenario.cpr.p),
                        ..scenario.cpr
                    };
                    cpr_observed(h, &cfg, weights, &budget, None, &mut observe)?
                }
                Method::FcCprEp | Method::FcCprWf => fc_cpr_observed(h, &scenario.fc, weights, &budget, &mut observe)?,
                Method::NormalizedZf => normalized_zf(h, &budget)?,
                Method::MisoOpt => miso_optimal(h, &budget)?,
            };
            if let Some(e) = failure {
                return Err(e);
            }
            ensure_admissible(&s.label, &bf.f, &budget)?;
            if bf.iterations_used == 0 {
                trace = vec![evaluate(h, &bf.f, noise_var, &budget)?.sum_rate];
            }
            Ok(SeriesOutcome {
                trace,
                iterations: bf.iterations_used,
            })
        })
        .collect()
}

/// Mean sum-rate after every iteration for each method on static channels.
/// Plain CPR methods are traced at both `cpr.p` and `fc.p_init` (the latter
/// labelled `<method>_pinit`). Exactly one SNR value is expected.
pub fn run_convergence(scenario: &Scenario) -> Result<RunResult> {
    scenario.validate()?;
    let snr = match scenario.snr_db_list.as_slice() {
        [snr] => *snr,
        other => {
            return Err(Error::domain(format!(
                "convergence runs take exactly one SNR value, got {}",
                other.len()
            )))
        }
    };
    if !scenario.methods.iter().any(|m| {
        matches!(
            m,
            Method::CprEp | Method::CprWf | Method::FcCprEp | Method::FcCprWf | Method::CprCcWf
        )
    }) {
        return Err(Error::domain("convergence runs need at least one CPR variant"));
    }
    let series = convergence_series(scenario);
    let outcomes = run_trials(scenario.trials, |t| {
        let mut rng = stream_rng(scenario.seed, stream_id(0, t));
        convergence_trial(scenario, snr, &series, &mut rng)
    })?;

    let longest = outcomes
        .iter()
        .flat_map(|t| t.iter().map(|s| s.trace.len()))
        .max()
        .unwrap_or(1);
    let mut rows = Vec::new();
    for (i, s) in series.iter().enumerate() {
        for j in 0..longest {
            // converged runs hold their final value
            let values: Vec<f64> = outcomes
                .iter()
                .map(|t| {
                    let tr = &t[i].trace;
                    tr[j.min(tr.len() - 1)]
                })
                .collect();
            push_stat(&mut rows, &s.label, "iteration", j as f64, "sum_rate", &values);
        }
        let finals: Vec<f64> = outcomes.iter().map(|t| *t[i].trace.last().expect("nonempty trace")).collect();
        push_stat(&mut rows, &s.label, "snr_db", snr, "sum_rate", &finals);
        let iters: Vec<f64> = outcomes.iter().map(|t| t[i].iterations as f64).collect();
        push_stat(&mut rows, &s.label, "snr_db", snr, "iterations", &iters);
    }
    Ok(RunResult {
        scenario: scenario.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        Scenario {
            m: 8,
            k_m: 1,
            k_s: 2,
            snr_db_list: vec![0.0, 10.0],
            velocity_kmh_list: vec![3.0],
            trials: 6,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cpr".parse::<Method>().is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::default().validate().is_ok());
        let s = Scenario {
            k_s: 17,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = Scenario {
            methods: vec![Method::MisoOpt],
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = Scenario {
            trials: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn mean_ci_basics() {
        assert_eq!(mean_ci95(&[2.0]), (2.0, 0.0));
        let (m, ci) = mean_ci95(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((ci - 1.96 * (2f64).sqrt() / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sweep_rows_cover_every_method_and_metric() {
        let r = sweep_snr(&small()).unwrap();
        for m in &r.scenario.methods {
            for snr in [0.0, 10.0] {
                for metric in ["sum_rate", "moving_rate", "static_rate", "iterations"] {
                    let row = r.find(m.name(), "snr_db", snr, metric).unwrap();
                    assert_eq!(row.trials, 6);
                    assert!(row.ci95 >= 0.0);
                }
            }
        }
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("a/fig2.csv")), PathBuf::from("a/fig2.json"));
        assert_eq!(sidecar_path(Path::new("out")), PathBuf::from("out.json"));
    }

    #[test]
    fn convergence_needs_one_snr() {
        let s = Scenario {
            snr_db_list: vec![0.0, 5.0],
            ..small()
        };
        assert!(run_convergence(&s).is_err());
    }

    #[test]
    fn velocity_sweep_needs_moving_user() {
        let s = Scenario { k_m: 0, ..small() };
        assert!(sweep_velocity(&s).is_err());
    }
}
