//! Monte Carlo runner: persistence, determinism and qualitative trends.

mod common;

use std::f64::consts::TAU;

use cpr_core::beamform::{cpr, cpr_cc, waterfill, CprConfig, PowerBudget};
use cpr_core::channel::{sample_large_scale, ChannelSet, PhysicalParams, UeProfile};
use cpr_core::metrics::evaluate;
use cpr_core::numerics::col;
use cpr_core::sim::{
    read_scenario, run_convergence, sidecar_path, sweep_snr, sweep_velocity, with_workers, write_results, Method,
    Scenario, CSV_HEADER,
};
use rand::Rng;

fn small() -> Scenario {
    Scenario {
        m: 8,
        k_m: 1,
        k_s: 2,
        snr_db_list: vec![0.0, 10.0],
        velocity_kmh_list: vec![0.0, 3.0, 12.0],
        trials: 16,
        seed: 42,
        ..Default::default()
    }
}

#[test]
fn csv_and_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let scenario = small();
    let result = sweep_snr(&scenario).unwrap();
    write_results(&result, &out).unwrap();

    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(csv.lines().count(), result.rows.len() + 1);

    let echoed = read_scenario(&sidecar_path(&out)).unwrap();
    assert_eq!(echoed, scenario);
    let again = dir.path().join("again.csv");
    write_results(&sweep_snr(&echoed).unwrap(), &again).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn write_to_missing_directory_is_io_error() {
    let result = sweep_snr(&Scenario { trials: 2, ..small() }).unwrap();
    let err = write_results(&result, std::path::Path::new("/definitely/missing/x.csv")).unwrap_err();
    assert!(!err.is_validation());
    assert!(err.to_string().contains("/definitely/missing/x.csv"));
}

#[test]
fn output_is_independent_of_worker_count() {
    let scenario = small();
    let csv = |n: usize| with_workers(n, || sweep_velocity(&scenario).unwrap().to_csv()).unwrap();
    let one = csv(1);
    assert_eq!(one, csv(2));
    assert_eq!(one, csv(8));
}

#[test]
fn aggregates_cover_every_trial() {
    let r = sweep_velocity(&small()).unwrap();
    assert!(!r.rows.is_empty());
    for row in &r.rows {
        assert_eq!(row.trials, 16);
        assert!(row.ci95 >= 0.0 && row.mean.is_finite());
    }
}

#[test]
fn candidates_change_nothing_without_motion() {
    let r = sweep_velocity(&small()).unwrap();
    let a = r.find("cpr_cc_wf", "velocity_kmh", 0.0, "moving_rate").unwrap();
    let b = r.find("cpr_wf", "velocity_kmh", 0.0, "moving_rate").unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.ci95, b.ci95);
}

#[test]
fn convergence_is_reproducible_and_pinit_stops_early() {
    let s = Scenario {
        m: 24,
        k_m: 0,
        k_s: 4,
        snr_db_list: vec![0.0],
        trials: 20,
        methods: vec![Method::CprWf, Method::FcCprWf],
        ..Default::default()
    };
    let a = run_convergence(&s).unwrap();
    assert_eq!(a, run_convergence(&s).unwrap());
    let it = |label: &str| a.find(label, "snr_db", 0.0, "iterations").unwrap().mean;
    let fin = |label: &str| a.find(label, "snr_db", 0.0, "sum_rate").unwrap().mean;
    assert!(it("cpr_wf_pinit") < it("cpr_wf"));
    assert!(fin("cpr_wf_pinit") < fin("cpr_wf"));
    let trace = a.series("fc_cpr_wf", "iteration", "sum_rate");
    assert_eq!(trace[0].mean, 0.0);
    assert_eq!(trace.last().unwrap().mean, fin("fc_cpr_wf"));
}

#[test]
fn single_trial_runs_are_identical() {
    let s = Scenario {
        trials: 1,
        snr_db_list: vec![5.0],
        k_m: 0,
        ..small()
    };
    assert_eq!(run_convergence(&s).unwrap().to_csv(), run_convergence(&s).unwrap().to_csv());
}

#[test]
fn cpr_beats_normalized_zf_on_static_channels() {
    let s = Scenario {
        m: 16,
        k_m: 0,
        k_s: 4,
        snr_db_list: vec![-10.0, 0.0, 10.0, 20.0],
        trials: 150,
        methods: vec![Method::CprEp, Method::CprWf, Method::NormalizedZf],
        ..Default::default()
    };
    let r = sweep_snr(&s).unwrap();
    for snr in &s.snr_db_list {
        let get = |m: &str| r.find(m, "snr_db", *snr, "sum_rate").unwrap().mean;
        assert!(get("cpr_wf") > get("normalized_zf"), "snr {snr}");
        assert!(get("cpr_wf") >= get("cpr_ep"), "snr {snr}");
    }
}

#[test]
fn candidates_reduce_interference_on_moving_user() {
    let params = PhysicalParams::default();
    let (m, k) = (16, 4);
    let budget = PowerBudget::new(1.0, m).unwrap();
    let noise = 0.1;
    let (mut plain, mut robust) = (0.0, 0.0);
    for trial in 0..1000 {
        let mut r = cpr_core::numerics::stream_rng(301, trial);
        let profiles: Vec<UeProfile> = (0..k)
            .map(|u| {
                let phase = (r.random::<f64>() * TAU) % TAU;
                UeProfile::new(0.6, phase, if u == 0 { 3.0 } else { 0.0 }, sample_large_scale(&mut r)).unwrap()
            })
            .collect();
        let mut set = ChannelSet::new(m, profiles, &params, 3, &mut r).unwrap();
        set.step(&mut r).unwrap();
        set.step(&mut r).unwrap();
        let design = set.lagged(1).unwrap();
        let cand = vec![vec![col(set.lagged(1).unwrap(), 0), col(set.lagged(2).unwrap(), 0)]];
        let w = waterfill(design, &budget, noise).unwrap();
        let a = cpr(design, &CprConfig::default(), &w, &budget, None).unwrap();
        let b = cpr_cc(design, &cand, 1, &CprConfig::default(), &w, &budget).unwrap();
        plain += evaluate(set.current(), &a.f, noise, &budget).unwrap().per_ue_interference[0];
        robust += evaluate(set.current(), &b.f, noise, &budget).unwrap().per_ue_interference[0];
    }
    assert!(robust < plain, "cpr_cc {robust} vs cpr {plain}");
}

#[test]
fn invalid_scenarios_are_validation_errors() {
    for s in [
        Scenario { m: 2, ..small() },
        Scenario { trials: 0, ..small() },
        Scenario { snr_db_list: vec![], ..small() },
        Scenario { corr_mag: 1.0, ..small() },
    ] {
        let err = sweep_snr(&s).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
    let err = sweep_velocity(&Scenario { velocity_kmh_list: vec![], ..small() }).unwrap_err();
    assert!(err.is_validation());
}
