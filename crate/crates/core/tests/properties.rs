//! Invariants over randomized problems.

mod common;

use common::{correlated, gain, iid, rng, row_powers};
use cpr_core::beamform::{
    antenna_set, cpr_cc, cpr_observed, effective_gains, expand_rows, fc_cpr_observed, normalized_zf, waterfill,
    CprConfig, DistributionWeights, FcConfig, IterationRecord, PowerBudget,
};
use cpr_core::channel::exp_correlation;
use cpr_core::metrics::{evaluate, zf_residual};
use cpr_core::numerics::hermitian_sqrt;
use cpr_core::CMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Problem {
    h: CMatrix,
    budget: PowerBudget,
    noise_var: f64,
}

fn problem() -> impl Strategy<Value = Problem> {
    (2usize..=24, 0.0f64..1.0, any::<u64>(), -10.0f64..20.0).prop_map(|(m, kf, seed, snr)| {
        let k = 1 + ((m as f64 * kf) as usize).min(m - 1).min(15);
        Problem {
            h: correlated(m, k, &mut rng(seed)),
            budget: PowerBudget::new(1.0, m).unwrap(),
            noise_var: 10f64.powf(-snr / 10.0),
        }
    })
}

/// Runs CPR and keeps every intermediate beamformer.
fn traced(p: &Problem, cfg: &CprConfig, w: &DistributionWeights) -> (Vec<IterationRecord>, Vec<CMatrix>) {
    let mut fs = Vec::new();
    let out = cpr_observed(&p.h, cfg, w, &p.budget, None, &mut |_, f| fs.push(f.clone())).unwrap();
    (out.trace, fs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn every_method_respects_power_caps(p in problem()) {
        let k = p.h.ncols();
        let wf = waterfill(&p.h, &p.budget, p.noise_var).unwrap();
        let ep = DistributionWeights::equal(k);
        for w in [&ep, &wf] {
            let (_, fs) = traced(&p, &CprConfig::default(), w);
            for f in &fs {
                prop_assert!(p.budget.admits(f));
            }
            let fc = fc_cpr_observed(&p.h, &FcConfig::default(), w, &p.budget, &mut |_, f| {
                assert!(p.budget.admits(f));
            }).unwrap();
            prop_assert!(p.budget.admits(&fc.f));
        }
        prop_assert!(p.budget.admits(&normalized_zf(&p.h, &p.budget).unwrap().f));
    }

    #[test]
    fn gains_grow_without_new_interference(p in problem()) {
        let k = p.h.ncols();
        let (trace, fs) = traced(&p, &CprConfig::default(), &DistributionWeights::equal(k));
        let mut prev = CMatrix::zeros(p.h.nrows(), k);
        for (rec, f) in trace.iter().zip(&fs) {
            let delta = f - &prev;
            for u in 0..k {
                prop_assert!(gain(&p.h, f, u).norm_sqr() > gain(&p.h, &prev, u).norm_sqr());
                prop_assert!((rec.per_ue_gain[u] - gain(&p.h, f, u).norm_sqr()).abs() <= 1e-12 * rec.per_ue_gain[u]);
                for l in (0..k).filter(|&l| l != u) {
                    let leak = p.h.column(u).dotc(&delta.column(l)).norm();
                    let bound = 1e-8 * p.h.column(u).norm() * delta.column(l).norm() + 1e-12;
                    prop_assert!(leak < bound, "leak {} >= {}", leak, bound);
                }
            }
            prop_assert!(zf_residual(&p.h, f) < 1e-7);
            prev = f.clone();
        }
    }

    #[test]
    fn desired_gains_stay_real_and_positive(p in problem()) {
        let k = p.h.ncols();
        let wf = waterfill(&p.h, &p.budget, p.noise_var).unwrap();
        let (_, fs) = traced(&p, &CprConfig::default(), &wf);
        for f in &fs {
            for u in (0..k).filter(|&u| wf.as_slice()[u] > 0.0) {
                let z = gain(&p.h, f, u);
                prop_assert!(z.re > 0.0 && z.im.abs() <= 1e-8 * z.norm(), "{}", z);
            }
        }
    }

    #[test]
    fn every_update_fills_an_antenna(p in problem(), pth in 0.3f64..=1.0) {
        let (m, k) = p.h.shape();
        let (trace, fs) = traced(&p, &CprConfig::exhaustive(pth), &DistributionWeights::equal(k));
        prop_assert!(trace.len() <= m - k + 1);
        let mut prev = CMatrix::zeros(m, k);
        let mut last_set = m + 1;
        for (rec, f) in trace.iter().zip(&fs) {
            let set = antenna_set(&prev, pth, &p.budget);
            prop_assert_eq!(set.len(), rec.antenna_set_size);
            let powers = row_powers(f);
            let b = rec.binding_antenna;
            prop_assert!(set.contains(&b));
            prop_assert!((powers[b] - p.budget.p_ant()).abs() <= 1e-8 * p.budget.p_ant());
            // rows outside the set are untouched
            for row in (0..m).filter(|r| !set.contains(r)) {
                prop_assert_eq!(f.row(row), prev.row(row));
            }
            if pth == 1.0 {
                prop_assert!(set.len() < last_set);
            }
            last_set = set.len();
            prev = f.clone();
        }
    }

    #[test]
    fn fc_cpr_stays_within_iteration_cap(p in problem()) {
        let (m, k) = p.h.shape();
        let mut ps = Vec::new();
        let out = fc_cpr_observed(&p.h, &FcConfig::default(), &DistributionWeights::equal(k), &p.budget,
            &mut |rec, _| ps.push(rec.p)).unwrap();
        prop_assert!(out.iterations_used <= m - k + 1);
        prop_assert_eq!(out.iterations_used, out.trace.len());
        prop_assert!(ps.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(ps.iter().all(|&x| x <= 0.999 + 1e-15));
    }

    #[test]
    fn waterfill_kkt(p in problem()) {
        let b = waterfill(&p.h, &p.budget, p.noise_var).unwrap();
        let g = effective_gains(&p.h).unwrap();
        let total: f64 = b.as_slice().iter().map(|x| x * x).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let levels: Vec<f64> = b.as_slice().iter().zip(&g).filter(|(x, _)| **x > 0.0)
            .map(|(x, g)| x * x / p.noise_var + 1.0 / g).collect();
        prop_assert!(!levels.is_empty());
        for l in &levels {
            prop_assert!((l - levels[0]).abs() <= 1e-8 * levels[0]);
        }
        for (x, g) in b.as_slice().iter().zip(&g) {
            if *x == 0.0 {
                prop_assert!(1.0 / g >= levels[0] * (1.0 - 1e-8));
            }
        }
    }

    #[test]
    fn rates_ignore_a_common_phase(p in problem(), phi in 0.0f64..std::f64::consts::TAU) {
        let f = normalized_zf(&p.h, &p.budget).unwrap().f;
        let rotated = &f * Complex64::from_polar(1.0, phi);
        let a = evaluate(&p.h, &f, p.noise_var, &p.budget).unwrap();
        let b = evaluate(&p.h, &rotated, p.noise_var, &p.budget).unwrap();
        for (x, y) in a.per_ue_rate.iter().zip(&b.per_ue_rate) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x));
        }
    }

    #[test]
    fn expand_rows_places_rows(m in 1usize..12, k in 1usize..4, seed in any::<u64>(), mask in any::<u16>()) {
        let rows: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        prop_assume!(!rows.is_empty());
        let w = iid(rows.len(), k, &mut rng(seed));
        let full = expand_rows(&w, &rows, m).unwrap();
        prop_assert_eq!(full.shape(), (m, k));
        for (i, &r) in rows.iter().enumerate() {
            prop_assert_eq!(full.row(r), w.row(i));
        }
        for r in (0..m).filter(|r| !rows.contains(r)) {
            prop_assert!(full.row(r).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        }
    }

    #[test]
    fn correlation_square_root_squares_back(m in 1usize..40, mag in 0.0f64..0.99, phase in 0.0f64..6.28) {
        let r = exp_correlation(Complex64::from_polar(mag, phase), m).unwrap();
        let s = hermitian_sqrt(&r).unwrap();
        prop_assert!((&s - s.adjoint()).norm() < 1e-12);
        prop_assert!((&s * &s - &r).norm() < 1e-10 * r.norm());
    }

    #[test]
    fn candidates_are_nulled(m in 6usize..24, kf in 0.0f64..1.0, seed in any::<u64>()) {
        let k = 2 + ((m as f64 * kf) as usize).min(m - 4);
        let mut r = rng(seed);
        let h = correlated(m, k, &mut r);
        let cand = iid(m, 1, &mut r);
        let b = PowerBudget::new(1.0, m).unwrap();
        let out = cpr_cc(&h, &[vec![cand.clone()]], 1, &CprConfig::default(), &DistributionWeights::equal(k), &b).unwrap();
        prop_assert!(b.admits(&out.f));
        let scale = out.f.norm() * (h.norm() + cand.norm());
        for l in 1..k {
            prop_assert!(cand.column(0).dotc(&out.f.column(l)).norm() < 1e-6 * scale);
        }
        prop_assert!(zf_residual(&h, &out.f) < 1e-7);
    }
}
