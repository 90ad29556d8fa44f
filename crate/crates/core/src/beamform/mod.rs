//! Beamformer constructions under a per-antenna power constraint (PAPC).
//!
//! Every constructor returns a [`Beamformer`] whose `M x K` matrix `F` keeps
//! each antenna's summed power at or below `P_ant = P_tot / M`.

mod candidates;
mod cpr;
mod waterfill;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse_with_spectrum, row_powers, CMatrix};

pub use candidates::{cpr_cc, cpr_cc_observed, ExtendedChannel};
pub use cpr::{
    antenna_set, cpr, cpr_observed, expand_rows, fc_cpr, fc_cpr_observed, solve_alpha, AlphaSolution,
};
pub use waterfill::{effective_gains, waterfill, waterfill_gains};

/// Relative slack allowed on both power constraints.
pub const POWER_TOL: f64 = 1e-9;

/// Conditioning below which a channel is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Total power `P_tot` and per-antenna cap `P_ant = P_tot / M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    p_tot: f64,
    p_ant: f64,
    antennas: usize,
}

impl PowerBudget {
    pub fn new(p_tot: f64, antennas: usize) -> Result<Self> {
        if !(p_tot > 0.0 && p_tot.is_finite()) {
            return Err(Error::domain(format!("P_tot must be positive, got {p_tot}")));
        }
        if antennas == 0 {
            return Err(Error::domain("power budget needs M >= 1"));
        }
        Ok(PowerBudget {
            p_tot,
            p_ant: p_tot / antennas as f64,
            antennas,
        })
    }

    pub fn p_tot(&self) -> f64 {
        self.p_tot
    }

    pub fn p_ant(&self) -> f64 {
        self.p_ant
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Checks both constraints on `f` with relative slack [`POWER_TOL`].
    pub fn admits(&self, f: &CMatrix) -> bool {
        let rows = row_powers(f);
        let total: f64 = rows.iter().sum();
        rows.iter().all(|&p| p <= self.p_ant * (1.0 + POWER_TOL)) && total <= self.p_tot * (1.0 + POWER_TOL)
    }
}

/// Parameters of one CPR run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CprConfig {
    /// Antennas below `p * P_ant` are eligible for a power top-up.
    pub p: f64,
    /// Stop once total power reaches this fraction of `P_tot`.
    pub power_frac_stop: f64,
    /// Stop once this fraction of antennas is at `P_ant`.
    pub ant_frac_stop: f64,
    /// Relative tolerance for counting an antenna as full.
    pub ant_full_tol: f64,
    pub max_iter_override: Option<usize>,
}

impl Default for CprConfig {
    fn default() -> Self {
        CprConfig {
            p: 0.999,
            power_frac_stop: 0.99,
            ant_frac_stop: 0.90,
            ant_full_tol: 1e-6,
            max_iter_override: None,
        }
    }
}

impl CprConfig {
    pub fn with_p(p: f64) -> Self {
        CprConfig {
            p,
            ..Default::default()
        }
    }

    /// Only the iteration cap and antenna-set exhaustion end the run.
    pub fn exhaustive(p: f64) -> Self {
        CprConfig {
            p,
            power_frac_stop: 1.0,
            ant_frac_stop: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1], got {}", self.p)));
        }
        for (name, v) in [
            ("power_frac_stop", self.power_frac_stop),
            ("ant_frac_stop", self.ant_frac_stop),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.ant_full_tol >= 0.0 && self.ant_full_tol < 1.0) {
            return Err(Error::domain(format!(
                "ant_full_tol must lie in [0, 1), got {}",
                self.ant_full_tol
            )));
        }
        if self.max_iter_override == Some(0) {
            return Err(Error::domain("max_iter_override must be positive"));
        }
        Ok(())
    }
}

/// Fast-convergence CPR schedule: `p` starts at `p_init` and grows by
/// `delta_p` after every converged CPR run until it reaches `p_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcConfig {
    pub p_init: f64,
    pub delta_p: f64,
    pub p_max: f64,
    pub inner: CprConfig,
}

impl Default for FcConfig {
    fn default() -> Self {
        FcConfig {
            p_init: 0.699,
            delta_p: 0.05,
            p_max: 0.999,
            inner: CprConfig::default(),
        }
    }
}

impl FcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_init > 0.0 && self.p_init < self.p_max && self.p_max <= 1.0) {
            return Err(Error::domain(format!(
                "need 0 < p_init < p_max <= 1, got p_init = {}, p_max = {}",
                self.p_init, self.p_max
            )));
        }
        if !(self.delta_p > 0.0 && self.delta_p.is_finite()) {
            return Err(Error::domain(format!("delta_p must be positive, got {}", self.delta_p)));
        }
        self.inner.validate()
    }
}

/// Per-UE amplitude weights `b` of the power distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionWeights(Vec<f64>);

impl DistributionWeights {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::domain("distribution weights must be finite and nonnegative"));
        }
        if !b.iter().any(|&x| x > 0.0) {
            return Err(Error::domain("at least one distribution weight must be positive"));
        }
        Ok(DistributionWeights(b))
    }

    /// Equal power distribution over `k` UEs.
    pub fn equal(k: usize) -> Self {
        DistributionWeights(vec![1.0; k.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|b| b * b).sum()
    }
}

/// Diagnostics of one beamformer update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Value of `p` in force during the update.
    pub p: f64,
    pub antenna_set_size: usize,
    pub alpha: f64,
    /// Antenna whose cap bound the update.
    pub binding_antenna: usize,
    pub total_power: f64,
    pub antennas_at_cap: usize,
    /// `|h_k^H F(:, k)|^2` on the design channel.
    pub per_ue_gain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub f: CMatrix,
    pub iterations_used: usize,
    pub trace: Vec<IterationRecord>,
}

impl Beamformer {
    fn closed_form(f: CMatrix) -> Self {
        Beamformer {
            f,
            iterations_used: 0,
            trace: Vec::new(),
        }
    }

    pub fn total_power(&self) -> f64 {
        row_powers(&self.f).iter().sum()
    }
}

fn nonzero_column(h: &CMatrix, budget: &PowerBudget) -> Result<()> {
    if h.ncols() != 1 || h.nrows() != budget.antennas() {
        return Err(Error::domain(format!(
            "expected a {}x1 channel, got {:?}",
            budget.antennas(),
            h.shape()
        )));
    }
    if h.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Degenerate("zero channel".into()));
    }
    Ok(())
}

/// Optimal single-UE beamformer under the PAPC: every antenna at full power
/// with the phase of its channel coefficient. Gain is
/// `P_ant * (sum_m |h_m|)^2`.
pub fn miso_optimal(h: &CMatrix, budget: &PowerBudget) -> Result<Beamformer> {
    nonzero_column(h, budget)?;
    let amp = budget.p_ant().sqrt();
    let f = h.map(|z| {
        if z.norm_sqr() > 0.0 {
            Complex64::from_polar(amp, z.arg())
        } else {
            Complex64::new(amp, 0.0)
        }
    });
    Ok(Beamformer::closed_form(f))
}

/// Matched beamformer scaled so its strongest antenna sits exactly at `P_ant`.
pub fn scaled_matched(h: &CMatrix, budget: &PowerBudget) -> Result<CMatrix> {
    nonzero_column(h, budget)?;
    let peak = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(h * Complex64::new(budget.p_ant().sqrt() / peak, 0.0))
}

/// Zero-forcing beamformer `(H^H)^+`, so that `H^H W = I`.
pub fn zf(h: &CMatrix) -> Result<CMatrix> {
    let (m, k) = h.shape();
    if k > m {
        return Err(Error::domain(format!("zero forcing needs M >= K, got M = {m}, K = {k}")));
    }
    let pinv = pseudo_inverse_with_spectrum(&h.adjoint())?;
    let cond = pinv.conditioning();
    if cond < RANK_TOL {
        return Err(Error::RankDeficient(cond));
    }
    Ok(pinv.matrix)
}

/// ZF columns normalized to unit norm and scaled by the largest common factor
/// that respects the PAPC.
pub fn normalized_zf(h: &CMatrix, budget: &PowerBudget) -> Result<Beamformer> {
    if h.nrows() != budget.antennas() {
        return Err(Error::domain(format!(
            "channel has {} antennas, budget expects {}",
            h.nrows(),
            budget.antennas()
        )));
    }
    let mut w = zf(h)?;
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        col /= Complex64::new(n, 0.0);
    }
    let nu = row_powers(&w)
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| (budget.p_ant() / p).sqrt())
        .fold(f64::INFINITY, f64::min);
    Ok(Beamformer::closed_form(w * Complex64::new(nu, 0.0)))
}
