//! CPR with candidate channels (CPR-cc).
//!
//! The outdated channel `H_{i-1}` is extended with candidate columns for the
//! moving UEs (the first `K_m` columns). Every UE's extra beamformer then nulls
//! the other UEs' outdated channels and every candidate that does not belong
//! to it.

use super::cpr::{restricted_zf, run_cpr, ExtraBeamformer};
use super::{Beamformer, CprConfig, DistributionWeights, IterationRecord, PowerBudget};
use crate::error::{Error, Result};
use crate::numerics::CMatrix;

/// Outdated channel plus deduplicated candidate columns.
#[derive(Debug, Clone)]
pub struct ExtendedChannel {
    /// `M x N` with the `K` UE channels first.
    columns: CMatrix,
    /// UE owning each column.
    owner: Vec<usize>,
    users: usize,
}

impl ExtendedChannel {
    /// No candidates: the extra beamformer is plain ZF of the sub-channel.
    pub fn plain(h: &CMatrix) -> Self {
        ExtendedChannel {
            columns: h.clone(),
            owner: (0..h.ncols()).collect(),
            users: h.ncols(),
        }
    }

    /// Appends `candidates[k]` for moving UE `k`, skipping any column that is
    /// exactly equal to one already present.
    pub fn new(h: &CMatrix, candidates: &[Vec<CMatrix>]) -> Result<Self> {
        let (m, k) = h.shape();
        if candidates.len() > k {
            return Err(Error::domain(format!(
                "{} moving UEs among {k} UEs",
                candidates.len()
            )));
        }
        let mut cols: Vec<CMatrix> = (0..k).map(|j| crate::numerics::col(&h, j)).collect();
        let mut owner: Vec<usize> = (0..k).collect();
        for (ue, list) in candidates.iter().enumerate() {
            for c in list {
                if c.shape() != (m, 1) {
                    return Err(Error::domain(format!(
                        "candidate for UE {ue} has shape {:?}, expected ({m}, 1)",
                        c.shape()
                    )));
                }
                if cols.iter().any(|existing| existing == c) {
                    continue;
                }
                cols.push(c.clone());
                owner.push(ue);
            }
        }
        let refs: Vec<_> = cols.iter().map(|c| c.column(0)).collect();
        Ok(ExtendedChannel {
            columns: CMatrix::from_columns(&refs),
            owner,
            users: k,
        })
    }

    /// Number of columns after deduplication.
    pub fn width(&self) -> usize {
        self.columns.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.columns
    }

    /// UE that owns column `j`.
    pub fn owner(&self, j: usize) -> usize {
        self.owner[j]
    }

    fn has_candidates(&self, ue: usize) -> bool {
        self.owner[self.users..].contains(&ue)
    }
}

impl ExtraBeamformer for ExtendedChannel {
    fn required_antennas(&self) -> usize {
        self.width()
    }

    fn extra(&self, rows: &[usize]) -> Result<CMatrix> {
        let k = self.users;
        let mut w_hat = CMatrix::zeros(rows.len(), k);
        let needs_shared = (0..k).any(|ue| !self.has_candidates(ue));
        if needs_shared {
            let shared = restricted_zf(&self.columns, rows)?;
            for ue in (0..k).filter(|&ue| !self.has_candidates(ue)) {
                w_hat.set_column(ue, &shared.column(ue));
            }
        }
        for ue in (0..k).filter(|&ue| self.has_candidates(ue)) {
            // [h_ue, every column not owned by ue]
            let picks: Vec<usize> = std::iter::once(ue)
                .chain((0..self.width()).filter(|&j| self.owner[j] != ue))
                .collect();
            let sub = self.columns.select_columns(picks.iter());
            let w = restricted_zf(&sub, rows)?;
            w_hat.set_column(ue, &w.column(0));
        }
        Ok(w_hat)
    }
}

/// CPR-cc on the outdated channel `h_outdated`. `candidates[k]` lists the
/// candidate columns of moving UE `k` (the first `k_m` UEs).
pub fn cpr_cc(
    h_outdated: &CMatrix,
    candidates: &[Vec<CMatrix>],
    k_m: usize,
    config: &CprConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
) -> Result<Beamformer> {
    cpr_cc_observed(h_outdated, candidates, k_m, config, weights, budget, &mut |_, _| {})
}

pub fn cpr_cc_observed(
    h_outdated: &CMatrix,
    candidates: &[Vec<CMatrix>],
    k_m: usize,
    config: &CprConfig,
    weights: &DistributionWeights,
    budget: &PowerBudget,
    observer: &mut dyn FnMut(&IterationRecord, &CMatrix),
) -> Result<Beamformer> {
    if candidates.len() != k_m {
        return Err(Error::domain(format!(
            "{} candidate lists for {k_m} moving UEs",
            candidates.len()
        )));
    }
    let extended = ExtendedChannel::new(h_outdated, candidates)?;
    if extended.width() > h_outdated.nrows() {
        return Err(Error::domain(format!(
            "extended channel has {} columns but only {} antennas",
            extended.width(),
            h_outdated.nrows()
        )));
    }
    run_cpr(h_outdated, &extended, config, weights, budget, None, observer)
}
