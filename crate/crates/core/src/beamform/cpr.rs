//! Complete power reallocation: iteratively add sub-array ZF beamformers,
//! each scaled so that one more antenna reaches its power cap.

use num_complex::Complex64;

use super::candidates::ExtendedChannel;
use super::{Beamformer, CprConfig, DistributionWeights, FcConfig, IterationRecord, PowerBudget, RANK_TOL};
use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse_with_spectrum, row_powers, CMatrix};

/// Source of the extra beamformer computed for an antenna subset.
pub(crate) trait ExtraBeamformer {
    /// Smallest antenna set for which `extra` is well defined.
    fn required_antennas(&self) -> usize;

    /// `|rows| x K` extra beamformer restricted to `rows`.
    fn extra(&self, rows: &[usize]) -> Result<CMatrix>;
}

/// `((H)_{rows,:}^H)^+`, rejecting ill-conditioned sub-channels.
pub(crate) fn restricted_zf(h: &CMatrix, rows: &[usize]) -> Result<CMatrix> {
    let sub = h.select_rows(rows.iter());
    let pinv = pseudo_inverse_with_spectrum(&sub.adjoint())?;
    let cond = pinv.conditioning();
    if cond < RANK_TOL {
        return Err(Error::RankDeficient(cond));
    }
    Ok(pinv.matrix)
}

/// Antennas whose summed power is strictly below `p * P_ant`, ascending.
pub fn antenna_set(f: &CMatrix, p: f64, budget: &PowerBudget) -> Vec<usize> {
    let limit = p * budget.p_ant();
    row_powers(f)
        .into_iter()
        .enumerate()
        .filter(|&(_, power)| power < limit)
        .map(|(m, _)| m)
        .collect()
}

/// Places the rows of `w_hat` at the antenna indices `rows` of an `M x K`
/// matrix; other rows are zero.
pub fn expand_rows(w_hat: &CMatrix, rows: &[usize], m: usize) -> Result<CMatrix> {
    if rows.len() != w_hat.nrows() {
        return Err(Error::domain(format!(
            "{} row indices for a {}-row extra beamformer",
            rows.len(),
            w_hat.nrows()
        )));
    }
    let mut out = CMatrix::zeros(m, w_hat.ncols());
    let mut seen = vec![false; m];
    for (src, &dst) in rows.iter().enumerate() {
        if dst >= m || seen[dst] {
            return Err(Error::domain(format!("antenna index {dst} out of range or repeated")));
        }
        seen[dst] = true;
        out.set_row(dst, &w_hat.row(src));
    }
    Ok(out)
}

/// Step size chosen for one CPR update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSolution {
    /// Minimum-modulus root over the antenna set, before projection.
    pub alpha: Complex64,
    /// Antenna attaining the minimum.
    pub antenna: usize,
}

impl AlphaSolution {
    /// Relative imaginary residue `|Im(alpha)| / |alpha|`.
    pub fn imag_residue(&self) -> f64 {
        let n = self.alpha.norm();
        if n > 0.0 {
            self.alpha.im.abs() / n
        } else {
            0.0
        }
    }

    /// Real step actually applied to the beamformer.
    pub fn applied(&self) -> f64 {
        let residue = self.imag_residue();
        if residue > 1e-6 {
            log::warn!(
                "alpha {} has imaginary residue {residue:.3e} at antenna {}; projecting to real",
                self.alpha,
                self.antenna
            );
        }
        self.alpha.re
    }
}

/// Solves, for every antenna `m` in `rows`, the quadratic that puts antenna
/// `m` exactly at `P_ant` after adding `alpha * W diag(b ⊙ w̄)`, with the root
/// rotated so the extra beamformer stays phase-aligned with `f_prev`, and
/// returns the root of smallest modulus.
///
/// `col_norm_inv[k]` is `1 / ||W(:, k)||`. Antennas whose weighted row is
/// zero are not affected by the update and are skipped.
pub fn solve_alpha(
    f_prev: &CMatrix,
    w: &CMatrix,
    col_norm_inv: &[f64],
    weights: &DistributionWeights,
    rows: &[usize],
    budget: &PowerBudget,
) -> Result<AlphaSolution> {
    let k_count = w.ncols();
    if f_prev.shape() != w.shape() || col_norm_inv.len() != k_count || weights.len() != k_count {
        return Err(Error::domain("solve_alpha operands disagree in shape"));
    }
    let p_ant = budget.p_ant();
    let scale: Vec<f64> = weights
        .as_slice()
        .iter()
        .zip(col_norm_inv)
        .map(|(b, inv)| b * inv)
        .collect();

    let mut best: Option<AlphaSolution> = None;
    for &m in rows {
        if m >= w.nrows() {
            return Err(Error::domain(format!("antenna index {m} out of range")));
        }
        let u: Vec<Complex64> = (0..k_count).map(|k| w[(m, k)] * scale[k]).collect();
        let uu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        if uu == 0.0 {
            continue;
        }
        // c = F(m,:) u^H
        let c: Complex64 = (0..k_count).map(|k| f_prev[(m, k)] * u[k].conj()).sum();
        let ff: f64 = (0..k_count).map(|k| f_prev[(m, k)].norm_sqr()).sum();
        let radicand = c.norm_sqr() - uu * (ff - p_ant);
        if !(radicand > 0.0) {
            return Err(Error::Invariant(format!(
                "negative radicand {radicand:.3e} at antenna {m} (row power {ff:.3e}, cap {p_ant:.3e})"
            )));
        }
        let root = radicand.sqrt();
        let theta = (c.im / root).clamp(-1.0, 1.0).asin();
        let alpha = (Complex64::from_polar(root, theta) - c) / uu;
        let better = match best {
            None => true,
            Some(b) => alpha.norm() < b.alpha.norm() * (1.0 - 1e-12),
        };
        if better {
            best = Some(AlphaSolution { alpha, antenna: m });
        }
    }
    let sol = best.ok_or_else(|| Error::NoProgress("every weighted row of the extra beamformer is zero".into()))?;

    // Post-check on the applied real step.
    let a = sol.applied();
    for &m in rows {
        let power: f64 = (0..k_count)
            .map(|k| (f_prev[(m, k)] + w[(m, k)] * (a * scale[k])).norm_sqr())
            .sum();
        if power > p_ant * (1.0 + super::POWER_TOL) {
            return Err(Error::Invariant(format!(
                "update pushes antenna {m} to {power:.6e} > cap {p_ant:.6e}"
            )));
        }
        if m == sol.antenna && (power - p_ant).abs() > 1e-8 * p_ant {
            return Err(Error::Invariant(format!(
                "binding antenna {m} ends at {power:.6e}, expected cap {p_ant:.6e}"
            )));
        }
    }
    Ok(sol)
}

pub(crate) type Observer<'a> = &'a mut dyn FnMut(&IterationRecord, &CMatrix);

/// Core CPR loop shared by plain CPR, FC-CPR and CPR-cc. `h` is the design
/// channel used for the gain trace and the iteration bound.
pub(crate) fn run_cpr<X: ExtraBeamformer>(
    h: &CMatrix,
    extra: &X,
    config: &CprConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
    f0: Option<&CMatrix>,
    observer: Observer<'_>,
) -> Result<Beamformer> {
    config.validate()?;
    let (m, k) = h.shape();
    if m != budget.antennas() {
        return Err(Error::domain(format!(
            "channel has {m} antennas, budget expects {}",
            budget.antennas()
        )));
    }
    if k > m {
        return Err(Error::domain(format!("CPR needs K <= M, got K = {k}, M = {m}")));
    }
    if weights.len() != k {
        return Err(Error::domain(format!("{} weights for {k} UEs", weights.len())));
    }
    let mut f = match f0 {
        Some(f0) => {
            if f0.shape() != (m, k) {
                return Err(Error::domain(format!("initial beamformer has shape {:?}", f0.shape())));
            }
            if !budget.admits(f0) {
                return Err(Error::domain("initial beamformer violates the power constraints"));
            }
            f0.clone()
        }
        None => CMatrix::zeros(m, k),
    };

    // Antennas within ant_full_tol of the cap count as full, which guarantees
    // progress when p = 1.
    let threshold = config.p.min(1.0 - config.ant_full_tol);
    let max_iter = (m - k + 1).min(config.max_iter_override.unwrap_or(usize::MAX));
    let full_level = budget.p_ant() * (1.0 - config.ant_full_tol);
    let b = weights.as_slice();
    let mut trace = Vec::new();

    for _ in 0..max_iter {
        let rows = antenna_set(&f, threshold, budget);
        if rows.len() < extra.required_antennas() {
            break;
        }
        let w_hat = extra.extra(&rows)?;
        let w = expand_rows(&w_hat, &rows, m)?;
        let col_norm_inv: Vec<f64> = w
            .column_iter()
            .map(|c| {
                let n = c.norm();
                if n > 0.0 {
                    1.0 / n
                } else {
                    0.0
                }
            })
            .collect();
        let sol = solve_alpha(&f, &w, &col_norm_inv, weights, &rows, budget)?;
        let alpha = sol.applied();
        for kk in 0..k {
            let a = alpha * b[kk] * col_norm_inv[kk];
            if a != 0.0 {
                let add = w.column(kk) * Complex64::new(a, 0.0);
                let mut col = f.column_mut(kk);
                col += add;
            }
        }

        let powers = row_powers(&f);
        let total_power: f64 = powers.iter().sum();
        let antennas_at_cap = powers.iter().filter(|&&p| p >= full_level).count();
        let record = IterationRecord {
            p: config.p,
            antenna_set_size: rows.len(),
            alpha,
            binding_antenna: sol.antenna,
            total_power,
            antennas_at_cap,
            per_ue_gain: (0..k).map(|kk| h.column(kk).dotc(&f.column(kk)).norm_sqr()).collect(),
        };
        observer(&record, &f);
        trace.push(record);

        if total_power >= config.power_frac_stop * budget.p_tot()
            || antennas_at_cap as f64 >= config.ant_frac_stop * m as f64
        {
            break;
        }
    }

    Ok(Beamformer {
        f,
        iterations_used: trace.len(),
        trace,
    })
}

/// ZF-based CPR on channel `h` (`M x K`), starting from `f0` or from zero.
pub fn cpr(
    h: &CMatrix,
    config: &CprConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
    f0: Option<&CMatrix>,
) -> Result<Beamformer> {
    cpr_observed(h, config, weights, budget, f0, &mut |_, _| {})
}

/// [`cpr`] with a callback receiving each iteration's record and beamformer.
pub fn cpr_observed(
    h: &CMatrix,
    config: &CprConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
    f0: Option<&CMatrix>,
    observer: &mut dyn FnMut(&IterationRecord, &CMatrix),
) -> Result<Beamformer> {
    let extra = ExtendedChannel::plain(h);
    run_cpr(h, &extra, config, weights, budget, f0, observer)
}

/// Fast-convergence CPR: rerun CPR from the previous output with `p` raised
/// by `delta_p` until `p_max` has been used.
pub fn fc_cpr(
    h: &CMatrix,
    config: &FcConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
) -> Result<Beamformer> {
    fc_cpr_observed(h, config, weights, budget, &mut |_, _| {})
}

pub fn fc_cpr_observed(
    h: &CMatrix,
    config: &FcConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
    observer: &mut dyn FnMut(&IterationRecord, &CMatrix),
) -> Result<Beamformer> {
    config.validate()?;
    let (m, k) = h.shape();
    if k > m {
        return Err(Error::domain(format!("CPR needs K <= M, got K = {k}, M = {m}")));
    }
    let extra = ExtendedChannel::plain(h);
    let mut f = CMatrix::zeros(m, k);
    let mut trace = Vec::new();
    for run in 0..(m - k + 1) {
        // p_init + run * delta_p, clamped so the last run uses p_max exactly.
        let p = (config.p_init + run as f64 * config.delta_p).min(config.p_max);
        let last = p >= config.p_max - 1e-12;
        let inner = CprConfig {
            p: if last { config.p_max } else { p },
            ..config.inner
        };
        let out = run_cpr(h, &extra, &inner, weights, budget, Some(&f), observer)?;
        f = out.f;
        trace.extend(out.trace);
        if last {
            break;
        }
    }
    Ok(Beamformer {
        f,
        iterations_used: trace.len(),
        trace,
    })
}
