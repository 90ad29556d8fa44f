//! Rates and power-constraint diagnostics for a (channel, beamformer) pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamform::PowerBudget;
use crate::error::{Error, Result};
use crate::numerics::{row_powers, CMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    /// bits/s/Hz
    pub per_ue_rate: Vec<f64>,
    pub sum_rate: f64,
    pub per_ue_gain: Vec<f64>,
    pub per_ue_interference: Vec<f64>,
    pub per_antenna_power: Vec<f64>,
    pub papc_excess: f64,
    pub total_power: f64,
}

/// Evaluates `log2(1 + |h_k^H f_k|^2 / (sigma^2 + |sum_{l != k} h_k^H f_l|^2))`
/// for every UE. The interference term is the squared magnitude of the summed
/// cross products.
pub fn evaluate(h: &CMatrix, f: &CMatrix, noise_var: f64, budget: &PowerBudget) -> Result<LinkReport> {
    if h.nrows() != f.nrows() || h.ncols() != f.ncols() {
        return Err(Error::domain(format!(
            "channel {:?} and beamformer {:?} shapes differ",
            h.shape(),
            f.shape()
        )));
    }
    if f.nrows() != budget.antennas() {
        return Err(Error::domain(format!(
            "beamformer has {} antennas, budget expects {}",
            f.nrows(),
            budget.antennas()
        )));
    }
    if !(noise_var > 0.0 && noise_var.is_finite()) {
        return Err(Error::domain(format!("noise variance must be positive, got {noise_var}")));
    }
    // cross[k][l] = h_k^H f_l
    let cross = h.adjoint() * f;
    let k_count = h.ncols();
    let mut per_ue_rate = Vec::with_capacity(k_count);
    let mut per_ue_gain = Vec::with_capacity(k_count);
    let mut per_ue_interference = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let gain = cross[(k, k)].norm_sqr();
        let interference = (0..k_count)
            .filter(|&l| l != k)
            .map(|l| cross[(k, l)])
            .sum::<Complex64>()
            .norm_sqr();
        per_ue_rate.push((1.0 + gain / (noise_var + interference)).log2());
        per_ue_gain.push(gain);
        per_ue_interference.push(interference);
    }
    let per_antenna_power = row_powers(f);
    Ok(LinkReport {
        sum_rate: per_ue_rate.iter().sum(),
        per_ue_rate,
        per_ue_gain,
        per_ue_interference,
        papc_excess: papc_check(f, budget),
        total_power: per_antenna_power.iter().sum(),
        per_antenna_power,
    })
}

/// `max_m sum_k |F(m, k)|^2 - P_ant`; negative when the constraint holds with
/// slack.
pub fn papc_check(f: &CMatrix, budget: &PowerBudget) -> f64 {
    row_powers(f).into_iter().fold(f64::NEG_INFINITY, f64::max) - budget.p_ant()
}

/// Largest normalized cross-talk `|h_k^H f_l| / (|h_k| |f_l|)` over `k != l`.
pub fn zf_residual(h: &CMatrix, f: &CMatrix) -> f64 {
    let cross = h.adjoint() * f;
    let mut worst: f64 = 0.0;
    for k in 0..h.ncols() {
        let hn = h.column(k).norm();
        for l in 0..f.ncols() {
            if l != k {
                let ratio = cross[(k, l)].norm() / (hn * f.column(l).norm() + 1e-30);
                worst = worst.max(ratio);
            }
        }
    }
    worst
}
