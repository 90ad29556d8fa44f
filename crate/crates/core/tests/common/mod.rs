#![allow(dead_code)]

use std::f64::consts::TAU;

use cpr_core::channel::{sample_large_scale, ChannelSet, PhysicalParams, UeProfile};
use cpr_core::numerics::{standard_complex_normal, stream_rng, SimRng};
use cpr_core::CMatrix;
use num_complex::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// I.i.d. CN(0, 1) entries.
pub fn iid(m: usize, k: usize, rng: &mut SimRng) -> CMatrix {
    CMatrix::from_fn(m, k, |_, _| standard_complex_normal(rng))
}

/// Static UEs with exponential correlation of magnitude 0.6 and random
/// large-scale fading.
pub fn correlated(m: usize, k: usize, rng: &mut SimRng) -> CMatrix {
    let profiles: Vec<UeProfile> = (0..k)
        .map(|_| {
            let phase = (rng.random::<f64>() * TAU) % TAU;
            UeProfile::new(0.6, phase, 0.0, sample_large_scale(rng)).unwrap()
        })
        .collect();
    ChannelSet::new(m, profiles, &PhysicalParams::default(), 3, rng)
        .unwrap()
        .current()
        .clone()
}

pub fn rng(seed: u64) -> SimRng {
    stream_rng(seed, 0)
}

pub fn row_powers(f: &CMatrix) -> Vec<f64> {
    (0..f.nrows()).map(|m| f.row(m).iter().map(|z| z.norm_sqr()).sum()).collect()
}

pub fn gain(h: &CMatrix, f: &CMatrix, k: usize) -> Complex64 {
    h.column(k).dotc(&f.column(k))
}
