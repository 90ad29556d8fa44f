//! Randomized invariant suite behind `cpr check`.
//!
//! Each instance draws a correlated channel of random size and SNR, runs every
//! method on it and records which invariants held.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::beamform::{
    cpr_cc, cpr_observed, fc_cpr_observed, miso_optimal, normalized_zf, waterfill, Beamformer, CprConfig,
    DistributionWeights, FcConfig, PowerBudget,
};
use crate::channel::{sample_large_scale, ChannelSet, PhysicalParams, UeProfile};
use crate::error::{Error, Result};
use crate::metrics::zf_residual;
use crate::numerics::{col, pseudo_inverse, stream_rng, CMatrix, SimRng};

/// Instance generator settings.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub seed: u64,
    pub instances: usize,
    pub min_antennas: usize,
    pub max_antennas: usize,
    pub max_users: usize,
    pub snr_db_range: (f64, f64),
    pub cpr: CprConfig,
    pub fc: FcConfig,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            seed: 1,
            instances: 200,
            min_antennas: 4,
            max_antennas: 32,
            max_users: 16,
            snr_db_range: (-10.0, 20.0),
            cpr: CprConfig::default(),
            fc: FcConfig::default(),
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::domain("need at least one instance"));
        }
        if self.min_antennas == 0 || self.min_antennas > self.max_antennas {
            return Err(Error::domain("need 1 <= min_antennas <= max_antennas"));
        }
        if self.max_users == 0 {
            return Err(Error::domain("max_users must be >= 1"));
        }
        let (lo, hi) = self.snr_db_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::domain("invalid SNR range"));
        }
        self.cpr.validate()?;
        self.fc.validate()
    }
}

/// Names of the invariants, in report order.
pub const INVARIANTS: [&str; 9] = [
    "papc",
    "gain_increase",
    "nulling",
    "alignment",
    "progress",
    "iteration_bound",
    "waterfill_kkt",
    "moore_penrose",
    "candidate_nulling",
];

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantTally {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub instances: usize,
    pub tallies: Vec<InvariantTally>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.tallies.iter().all(|t| t.failed == 0)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} instances", self.instances)?;
        for t in &self.tallies {
            let status = if t.failed == 0 { "PASS" } else { "FAIL" };
            write!(f, "{status} {:<18} passed {:>6} failed {:>6}", t.name, t.passed, t.failed)?;
            if let Some(msg) = &t.first_failure {
                write!(f, "  first failure: {msg}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Outcome of one invariant on one instance: `None` when not applicable.
type Verdict = Option<std::result::Result<(), String>>;

fn verdict(ok: bool, msg: impl FnOnce() -> String) -> Verdict {
    Some(if ok { Ok(()) } else { Err(msg()) })
}

/// A random problem: static correlated UEs plus, when there is room, the
/// outdated history of one moving UE for the candidate check.
pub struct Instance {
    pub h: CMatrix,
    pub budget: PowerBudget,
    pub noise_var: f64,
    /// `(H_{i-1}, candidate of UE 0 from H_{i-2})` for the candidate check.
    pub aged: Option<(CMatrix, CMatrix)>,
}

pub fn random_instance(config: &CheckConfig, rng: &mut SimRng) -> Result<Instance> {
    let m = rng.random_range(config.min_antennas..=config.max_antennas);
    let k = rng.random_range(1..=config.max_users.min(m));
    let (lo, hi) = config.snr_db_range;
    let snr_db = lo + (hi - lo) * rng.random::<f64>();
    let params = PhysicalParams::default();
    let draw_profiles = |v: f64, rng: &mut SimRng| -> Result<Vec<UeProfile>> {
        (0..k)
            .map(|j| {
                let phase = (rng.random::<f64>() * TAU) % TAU;
                UeProfile::new(0.6, phase, if j == 0 { v } else { 0.0 }, sample_large_scale(rng))
            })
            .collect()
    };
    let h = ChannelSet::new(m, draw_profiles(0.0, rng)?, &params, 3, rng)?.current().clone();
    let aged = if k < m {
        let mut set = ChannelSet::new(m, draw_profiles(3.0, rng)?, &params, 3, rng)?;
        set.step(rng)?;
        let outdated = set.current().clone();
        let candidate = col(set.lagged(1).expect("two blocks stored"), 0);
        Some((outdated, candidate))
    } else {
        None
    };
    Ok(Instance {
        h,
        budget: PowerBudget::new(1.0, m)?,
        noise_var: 10f64.powf(-snr_db / 10.0),
        aged,
    })
}

struct Traced {
    bf: Beamformer,
    fs: Vec<CMatrix>,
}

fn traced_cpr(inst: &Instance, cfg: &CprConfig, w: &DistributionWeights) -> Result<Traced> {
    let mut fs = Vec::new();
    let bf = cpr_observed(&inst.h, cfg, w, &inst.budget, None, &mut |_, f| fs.push(f.clone()))?;
    Ok(Traced { bf, fs })
}

fn check_instance(inst: &Instance, config: &CheckConfig) -> Result<Vec<Verdict>> {
    let h = &inst.h;
    let (m, k) = h.shape();
    let cap = m - k + 1;
    let budget = &inst.budget;
    let ep = DistributionWeights::equal(k);
    let wf = waterfill(h, budget, inst.noise_var)?;

    let cpr_ep = traced_cpr(inst, &config.cpr, &ep)?;
    let cpr_wf = traced_cpr(inst, &config.cpr, &wf)?;
    let fc_ep = fc_cpr_observed(h, &config.fc, &ep, budget, &mut |_, _| {})?;
    let fc_wf = fc_cpr_observed(h, &config.fc, &wf, budget, &mut |_, _| {})?;
    let nzf = normalized_zf(h, budget)?;
    let miso = if k == 1 { Some(miso_optimal(h, budget)?) } else { None };
    let cc = match &inst.aged {
        Some((outdated, cand)) => {
            let bf = cpr_cc(outdated, &[vec![cand.clone()]], 1, &config.cpr, &ep, budget)?;
            Some((outdated, cand, bf))
        }
        None => None,
    };

    let mut out = Vec::with_capacity(INVARIANTS.len());

    // papc
    let mut all: Vec<(&str, &CMatrix)> = vec![
        ("cpr_ep", &cpr_ep.bf.f),
        ("cpr_wf", &cpr_wf.bf.f),
        ("fc_cpr_ep", &fc_ep.f),
        ("fc_cpr_wf", &fc_wf.f),
        ("normalized_zf", &nzf.f),
    ];
    if let Some(b) = &miso {
        all.push(("miso_opt", &b.f));
    }
    if let Some((_, _, b)) = &cc {
        all.push(("cpr_cc", &b.f));
    }
    let bad = all.iter().find(|(_, f)| !budget.admits(f)).map(|(n, _)| *n);
    out.push(verdict(bad.is_none(), || format!("{} exceeds a power cap (M={m}, K={k})", bad.unwrap_or(""))));

    // gain_increase
    let trace = &cpr_ep.bf.trace;
    let mut prev = vec![0.0; k];
    let mut gain_err = None;
    for (n, rec) in trace.iter().enumerate() {
        if let Some(u) = (0..k).find(|&u| rec.per_ue_gain[u] <= prev[u]) {
            gain_err = Some(format!("UE {u} gain did not grow at iteration {} (M={m}, K={k})", n + 1));
            break;
        }
        prev.clone_from(&rec.per_ue_gain);
    }
    out.push(verdict(gain_err.is_none(), || gain_err.clone().unwrap_or_default()));

    // nulling
    let worst = cpr_ep
        .fs
        .iter()
        .chain(&cpr_wf.fs)
        .map(|f| zf_residual(h, f))
        .fold(0.0, f64::max);
    out.push(verdict(worst < 1e-7, || format!("ZF residual {worst:.3e} (M={m}, K={k})")));

    // alignment
    let misaligned = cpr_ep.fs.iter().find_map(|f| {
        (0..k).find_map(|u| {
            let z: Complex64 = h.column(u).dotc(&f.column(u));
            (!(z.re > 0.0 && z.im.abs() <= 1e-8 * z.norm())).then(|| format!("UE {u}: h^H f = {z}"))
        })
    });
    out.push(verdict(misaligned.is_none(), || misaligned.clone().unwrap_or_default()));

    // progress
    let progress = [&cpr_ep.bf.trace, &cpr_wf.bf.trace].iter().all(|t| {
        t.iter()
            .scan(0usize, |full, rec| {
                let ok = rec.antennas_at_cap > *full;
                *full = rec.antennas_at_cap;
                Some(ok)
            })
            .all(|ok| ok)
    });
    out.push(verdict(progress, || format!("an iteration filled no antenna (M={m}, K={k})")));

    // iteration_bound
    let iters = [
        cpr_ep.bf.iterations_used,
        cpr_wf.bf.iterations_used,
        fc_ep.iterations_used,
        fc_wf.iterations_used,
    ];
    let over = iters.iter().copied().max().unwrap_or(0);
    out.push(verdict(over <= cap, || format!("{over} iterations with M-K+1 = {cap}")));

    // waterfill_kkt
    out.push(Some(waterfill_kkt(h, wf.as_slice(), budget.p_tot(), inst.noise_var)));

    // moore_penrose
    out.push(Some(moore_penrose(h)));

    // candidate_nulling
    out.push(cc.map(|(outdated, cand, bf)| {
        let kk = outdated.ncols();
        let scale = bf.f.norm() * (outdated.norm() + cand.norm());
        let mut leak: f64 = 0.0;
        for l in 1..kk {
            leak = leak.max(cand.column(0).dotc(&bf.f.column(l)).norm());
            for j in (0..kk).filter(|&j| j != l) {
                leak = leak.max(outdated.column(j).dotc(&bf.f.column(l)).norm());
            }
        }
        if leak < 1e-6 * scale {
            Ok(())
        } else {
            Err(format!("leak {leak:.3e} against scale {scale:.3e}"))
        }
    }));

    Ok(out)
}

fn waterfill_kkt(h: &CMatrix, b: &[f64], p_tot: f64, noise_var: f64) -> std::result::Result<(), String> {
    let gains = crate::beamform::effective_gains(h).map_err(|e| e.to_string())?;
    let total: f64 = b.iter().map(|x| x * x).sum();
    if (total - p_tot).abs() > 1e-10 * p_tot {
        return Err(format!("allocated power {total} != {p_tot}"));
    }
    let levels: Vec<f64> = b
        .iter()
        .zip(&gains)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, g)| x * x / noise_var + 1.0 / g)
        .collect();
    let mu = levels[0];
    if levels.iter().any(|l| (l - mu).abs() > 1e-8 * mu) {
        return Err(format!("water levels differ: {levels:?}"));
    }
    if let Some((_, g)) = b.iter().zip(&gains).find(|(x, g)| **x == 0.0 && 1.0 / **g < mu * (1.0 - 1e-8)) {
        return Err(format!("inactive UE with floor {} below level {mu}", 1.0 / g));
    }
    Ok(())
}

fn moore_penrose(h: &CMatrix) -> std::result::Result<(), String> {
    let a = h.adjoint();
    let x = pseudo_inverse(&a).map_err(|e| e.to_string())?;
    let tol = 1e-9 * (1.0 + a.norm() * x.norm()).powi(2);
    let conds = [
        (&a * &x * &a - &a).norm() / a.norm().max(f64::MIN_POSITIVE),
        (&x * &a * &x - &x).norm() / x.norm().max(f64::MIN_POSITIVE),
        (&a * &x - (&a * &x).adjoint()).norm(),
        (&x * &a - (&x * &a).adjoint()).norm(),
    ];
    match conds.iter().position(|&c| c > tol) {
        None => Ok(()),
        Some(i) => Err(format!("Penrose condition {} off by {:.3e}", i + 1, conds[i])),
    }
}

/// Runs the suite. Instance `i` uses stream `i` of `config.seed`, so the
/// report does not depend on the thread count.
pub fn run_invariant_suite(config: &CheckConfig) -> Result<CheckReport> {
    config.validate()?;
    let per_instance: Vec<Result<Vec<Verdict>>> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            let inst = random_instance(config, &mut rng)?;
            check_instance(&inst, config)
        })
        .collect();

    let mut tallies: Vec<InvariantTally> = INVARIANTS
        .iter()
        .map(|&name| InvariantTally {
            name,
            passed: 0,
            failed: 0,
            first_failure: None,
        })
        .collect();
    for (i, verdicts) in per_instance.into_iter().enumerate() {
        let verdicts = verdicts.map_err(|e| Error::Trial {
            trial: i,
            source: Box::new(e),
        })?;
        for (tally, v) in tallies.iter_mut().zip(verdicts) {
            match v {
                Some(Ok(())) => tally.passed += 1,
                Some(Err(msg)) => {
                    tally.failed += 1;
                    tally.first_failure.get_or_insert_with(|| format!("instance {i}: {msg}"));
                }
                None => {}
            }
        }
    }
    Ok(CheckReport {
        instances: config.instances,
        tallies,
    })
}
