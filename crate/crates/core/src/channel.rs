//! Spatially and temporally correlated block-fading channels.
//!
//! Each UE's channel starts as `h_0 = sqrt(beta) R^{1/2} g` and then ages
//! between fading blocks as
//! `h_i = eta h_{i-1} + sqrt(1 - eta^2) sqrt(beta) R^{1/2} g_i`,
//! where `R` is an exponential correlation matrix and `eta` follows Jakes'
//! model.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, CMatrix};

/// Carrier, block interval and propagation speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub carrier_hz: f64,
    pub interval_s: f64,
    pub light_speed: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            carrier_hz: 2.3e9,
            interval_s: 0.040,
            light_speed: 3.0e8,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("interval_s", self.interval_s),
            ("light_speed", self.light_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Doppler frequency in Hz for a UE moving at `velocity_kmh`.
    pub fn doppler_hz(&self, velocity_kmh: f64) -> f64 {
        velocity_kmh / 3.6 * self.carrier_hz / self.light_speed
    }
}

/// Second-order statistics of one UE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeProfile {
    pub spatial_corr_mag: f64,
    pub spatial_corr_phase: f64,
    pub velocity_kmh: f64,
    pub beta: f64,
    pub is_moving: bool,
}

impl UeProfile {
    pub fn new(spatial_corr_mag: f64, spatial_corr_phase: f64, velocity_kmh: f64, beta: f64) -> Result<Self> {
        let profile = UeProfile {
            spatial_corr_mag,
            spatial_corr_phase,
            velocity_kmh,
            beta,
            is_moving: velocity_kmh > 0.0,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.spatial_corr_mag) {
            return Err(Error::domain(format!(
                "|r| must lie in [0, 1), got {}",
                self.spatial_corr_mag
            )));
        }
        if !(0.0..TAU).contains(&self.spatial_corr_phase) {
            return Err(Error::domain(format!(
                "angle of r must lie in [0, 2pi), got {}",
                self.spatial_corr_phase
            )));
        }
        if !(self.velocity_kmh >= 0.0 && self.velocity_kmh.is_finite()) {
            return Err(Error::domain(format!("velocity must be >= 0, got {}", self.velocity_kmh)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {}", self.beta)));
        }
        if self.is_moving != (self.velocity_kmh > 0.0) {
            return Err(Error::domain("is_moving must match a nonzero velocity"));
        }
        Ok(())
    }

    pub fn corr_coefficient(&self) -> Complex64 {
        Complex64::from_polar(self.spatial_corr_mag, self.spatial_corr_phase)
    }
}

/// Exponential correlation matrix: entry `(a, b)` is `r^(b-a)` on and above
/// the diagonal and its conjugate below.
pub fn exp_correlation(r: Complex64, m: usize) -> Result<CMatrix> {
    if m == 0 {
        return Err(Error::domain("exp_correlation with M = 0"));
    }
    if !(r.norm() < 1.0) {
        return Err(Error::domain(format!("|r| must be < 1, got {}", r.norm())));
    }
    let powers: Vec<Complex64> = std::iter::successors(Some(Complex64::new(1.0, 0.0)), |p| Some(p * r))
        .take(m)
        .collect();
    Ok(CMatrix::from_fn(m, m, |a, b| {
        if b >= a {
            powers[b - a]
        } else {
            powers[a - b].conj()
        }
    }))
}

/// Jakes' temporal correlation `J0(2 pi f_D t)`.
pub fn temporal_corr(velocity_kmh: f64, params: &PhysicalParams) -> Result<f64> {
    if !(velocity_kmh >= 0.0 && velocity_kmh.is_finite()) {
        return Err(Error::domain(format!("velocity must be >= 0, got {velocity_kmh}")));
    }
    params.validate()?;
    if velocity_kmh == 0.0 {
        return Ok(1.0);
    }
    let fd = params.doppler_hz(velocity_kmh);
    numerics::bessel_j0(TAU * fd * params.interval_s)
}

/// Large-scale gain `z / x`: pathloss `x ~ U[1, 5]`, log-normal shadowing `z`
/// with 8 dB standard deviation.
pub fn sample_large_scale<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let x = 1.0 + 4.0 * rng.random::<f64>();
    let shadow_db = 8.0 * numerics::standard_normal(rng);
    10f64.powf(shadow_db / 10.0) / x
}

/// `sqrt(beta) R^{1/2}` for a profile.
pub fn correlation_factor(profile: &UeProfile, m: usize) -> Result<CMatrix> {
    profile.validate()?;
    let r = exp_correlation(profile.corr_coefficient(), m)?;
    Ok(numerics::hermitian_sqrt(&r)? * Complex64::new(profile.beta.sqrt(), 0.0))
}

fn draw_correlated<R: Rng + ?Sized>(factor: &CMatrix, rng: &mut R) -> Result<CMatrix> {
    let g = numerics::complex_gaussian(factor.ncols(), 1.0, rng)?;
    Ok(factor * g)
}

/// Initial channel `h_0 = R^{1/2} g`, `g ~ CN(0, beta I)`.
pub fn init_channel<R: Rng + ?Sized>(profile: &UeProfile, m: usize, rng: &mut R) -> Result<CMatrix> {
    let factor = correlation_factor(profile, m)?;
    draw_correlated(&factor, rng)
}

/// One aging step with temporal correlation `eta` and precomputed
/// `sqrt(beta) R^{1/2}` factor. `eta == 1` returns `h_prev` unchanged without
/// consuming randomness.
pub fn evolve_with_factor<R: Rng + ?Sized>(
    h_prev: &CMatrix,
    eta: f64,
    factor: &CMatrix,
    rng: &mut R,
) -> Result<CMatrix> {
    if !(eta.abs() <= 1.0) {
        return Err(Error::Invariant(format!("temporal correlation {eta} outside [-1, 1]")));
    }
    if h_prev.shape() != (factor.nrows(), 1) {
        return Err(Error::domain(format!(
            "h_prev has shape {:?}, expected ({}, 1)",
            h_prev.shape(),
            factor.nrows()
        )));
    }
    if eta == 1.0 {
        return Ok(h_prev.clone());
    }
    let innovation = draw_correlated(factor, rng)?;
    let a = Complex64::new(eta, 0.0);
    let b = Complex64::new((1.0 - eta * eta).sqrt(), 0.0);
    Ok(h_prev * a + innovation * b)
}

/// Ages `h_prev` by one fading block for the given profile.
pub fn evolve_channel<R: Rng + ?Sized>(
    h_prev: &CMatrix,
    profile: &UeProfile,
    params: &PhysicalParams,
    rng: &mut R,
) -> Result<CMatrix> {
    let eta = temporal_corr(profile.velocity_kmh, params)?;
    let factor = correlation_factor(profile, h_prev.nrows())?;
    evolve_with_factor(h_prev, eta, &factor, rng)
}

/// Channel state of all UEs with a bounded history of fading blocks.
///
/// `history[0]` is the oldest stored block, the last entry is the current
/// block `H_i`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    antennas: usize,
    profiles: Vec<UeProfile>,
    sqrt_corr: Vec<CMatrix>,
    etas: Vec<f64>,
    history: VecDeque<CMatrix>,
    depth: usize,
}

impl ChannelSet {
    /// Draws `H_0` for every profile. `depth` is the number of blocks kept
    /// (at least 3).
    pub fn new<R: Rng + ?Sized>(
        antennas: usize,
        profiles: Vec<UeProfile>,
        params: &PhysicalParams,
        depth: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if antennas == 0 || profiles.is_empty() {
            return Err(Error::domain("channel set needs M >= 1 and K >= 1"));
        }
        let sqrt_corr = profiles
            .iter()
            .map(|p| correlation_factor(p, antennas))
            .collect::<Result<Vec<_>>>()?;
        let etas = profiles
            .iter()
            .map(|p| temporal_corr(p.velocity_kmh, params))
            .collect::<Result<Vec<_>>>()?;
        let mut h0 = CMatrix::zeros(antennas, profiles.len());
        for (k, factor) in sqrt_corr.iter().enumerate() {
            h0.set_column(k, &draw_correlated(factor, rng)?.column(0));
        }
        let mut history = VecDeque::new();
        history.push_back(h0);
        Ok(ChannelSet {
            antennas,
            profiles,
            sqrt_corr,
            etas,
            history,
            depth: depth.max(3),
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.profiles.len()
    }

    pub fn profiles(&self) -> &[UeProfile] {
        &self.profiles
    }

    pub fn temporal_correlations(&self) -> &[f64] {
        &self.etas
    }

    /// Advances every UE by one fading block.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let prev = self.current();
        let mut next = CMatrix::zeros(self.antennas, self.users());
        for k in 0..self.users() {
            let h = evolve_with_factor(&crate::numerics::col(&prev, k), self.etas[k], &self.sqrt_corr[k], rng)?;
            next.set_column(k, &h.column(0));
        }
        self.history.push_back(next);
        while self.history.len() > self.depth {
            self.history.pop_front();
        }
        Ok(())
    }

    /// Current block `H_i`.
    pub fn current(&self) -> &CMatrix {
        self.history.back().expect("history is never empty")
    }

    /// Block `H_{i - lag}` if still stored.
    pub fn lagged(&self, lag: usize) -> Option<&CMatrix> {
        let len = self.history.len();
        if lag < len {
            self.history.get(len - 1 - lag)
        } else {
            None
        }
    }

    pub fn stored_blocks(&self) -> usize {
        self.history.len()
    }
}
