mod common;

use ngrid_core::dispatch::{
    connected_step, islanded_step, sr_capacity, CapacityParams, NGridState,
};
use ngrid_core::fleet::Fleet;
use ngrid_core::metrics::{final_metric, metric_report, prc_auc, roc_auc, LabeledScore};
use ngrid_core::sim::{run_simulation, ChargePolicy, DerateTable, ExecMode, Scenario};
use ngrid_core::sor::SorTable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn samples(labels: &[bool], scores: &[f64]) -> Vec<LabeledScore> {
    labels
        .iter()
        .zip(scores)
        .map(|(l, s)| LabeledScore::new(*l, *s).unwrap())
        .collect()
}

fn dataset() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    prop::collection::vec((any::<bool>(), 0u8..8), 2..40)
        .prop_filter("both classes", |v| {
            v.iter().any(|(l, _)| *l) && v.iter().any(|(l, _)| !*l)
        })
        .prop_map(|v| v.into_iter().map(|(l, s)| (l, f64::from(s) / 8.0)).unzip())
}

proptest! {
    #[test]
    fn auc_matches_pairwise_oracles((labels, scores) in dataset()) {
        let s = samples(&labels, &scores);
        prop_assert!((roc_auc(&s).unwrap() - common::brute_roc(&labels, &scores)).abs() < 1e-12);
        prop_assert!((prc_auc(&s).unwrap() - common::brute_prc(&labels, &scores)).abs() < 1e-12);
    }

    #[test]
    fn roc_is_rank_invariant((labels, scores) in dataset()) {
        let squashed: Vec<f64> = scores.iter().map(|s| s * s * 0.5 + 0.25).collect();
        let a = roc_auc(&samples(&labels, &scores)).unwrap();
        let b = roc_auc(&samples(&labels, &squashed)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn flipping_labels_mirrors_roc((labels, scores) in dataset()) {
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let a = roc_auc(&samples(&labels, &scores)).unwrap();
        let b = roc_auc(&samples(&flipped, &scores)).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_stays_in_unit_interval((labels, scores) in dataset(), t in 0.0f64..=1.0) {
        let r = metric_report(&samples(&labels, &scores), t).unwrap();
        for v in [r.roc_auc, r.f1, r.prc_auc, r.fm] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((r.fm - final_metric(r.roc_auc, r.f1, r.prc_auc).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn islanded_hours_follow_priority_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ngrid = common::random_ngrid(&mut rng);
        let state = common::random_state(&mut rng, &ngrid);
        let hour = rng.random_range(0..common::HORIZON);
        let (out, next) = islanded_step(&ngrid, &state, hour).unwrap();
        if let Err(e) = common::check_islanded(&ngrid, &state, hour, &out, &next) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn islanded_days_keep_every_hour_valid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ngrid = common::random_ngrid(&mut rng);
        let mut state = NGridState::initial(&ngrid);
        for hour in 0..common::HORIZON {
            state.begin_hour(&ngrid, hour);
            let (out, next) = islanded_step(&ngrid, &state, hour).unwrap();
            if let Err(e) = common::check_islanded(&ngrid, &state, hour, &out, &next) {
                prop_assert!(false, "hour {}: {}", hour, e);
            }
            state = next;
        }
    }

    #[test]
    fn connected_hours_balance_through_the_grid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ngrid = common::random_ngrid(&mut rng);
        let state = common::random_state(&mut rng, &ngrid);
        let hour = rng.random_range(0..common::HORIZON);
        let (out, next) = connected_step(&ngrid, &state, hour).unwrap();
        prop_assert!(out.balance_residual().abs() < 1e-9);
        prop_assert_eq!(out.ens_kw, 0.0);
        prop_assert_eq!(out.spilled_kw, 0.0);
        prop_assert!(out.bess_kw <= 0.0);
        prop_assert!(next.check(&ngrid).is_ok());
        let sr = sr_capacity(&ngrid, &state, &out, &CapacityParams::default()).unwrap();
        prop_assert!(sr.total_sr_kw >= 0.0);
        let derated = sr_capacity(&ngrid, &state, &out, &CapacityParams { derate: 0.6, ..CapacityParams::default() }).unwrap();
        prop_assert!(derated.total_sr_kw <= sr.total_sr_kw + 1e-12);
    }
}

fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feeders: Vec<String> = (0..rng.random_range(1..4))
        .map(|f| format!("F{f}"))
        .collect();
    let mut ngrids = Vec::new();
    for (i, f) in feeders.iter().enumerate() {
        for j in 0..rng.random_range(1..5) {
            let mut n = common::random_ngrid(&mut rng);
            n.id = format!("n{i}-{j}");
            n.feeder_id = f.clone();
            ngrids.push(n);
        }
    }
    let sor = SorTable::from_entries(
        feeders
            .iter()
            .flat_map(|f| (0..24).map(move |h| (f.clone(), h)))
            .map(|(f, h)| (f, h, rng.random_range(0.0..0.3)))
            .collect::<Vec<_>>(),
        &feeders,
        24,
    )
    .unwrap();
    let derate = DerateTable::from_entries(
        feeders
            .iter()
            .flat_map(|f| (0..24).map(move |h| (f.clone(), h)))
            .map(|(f, h)| (f, h, rng.random_range(0.5..=1.0)))
            .collect::<Vec<_>>(),
        &feeders,
        24,
    )
    .unwrap();
    Scenario {
        fleet: Fleet::from_ngrids(ngrids),
        sor,
        horizon: 24,
        repair_hours: rng.random_range(0.5..4.0),
        replications: 6,
        master_seed: seed,
        sr_delivery_hours: rng.random_range(0.5..2.0),
        derate: Some(derate),
        policy: if rng.random_bool(0.5) {
            ChargePolicy::Full
        } else {
            ChargePolicy::sor_default()
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fleet_series_invariants(seed in any::<u64>()) {
        let scenario = random_scenario(seed);
        let report = run_simulation(&scenario, ExecMode::Serial).unwrap();
        for rep in &report.replications {
            for h in &rep.series.hours {
                prop_assert!(h.ens_kw >= 0.0 && h.spilled_kw >= 0.0);
                prop_assert!(h.ru_avail_kw <= h.ru_total_kw + 1e-9);
                prop_assert!(h.rd_avail_kw <= h.rd_total_kw + 1e-9);
                prop_assert!(h.rd_avail_kw >= 0.0 && h.ru_avail_kw >= 0.0);
            }
            for e in &rep.outages {
                prop_assert!(e.duration_hours >= 1 && e.start_hour + e.duration_hours <= 24);
            }
        }
        prop_assert_eq!(run_simulation(&scenario, ExecMode::Parallel).unwrap(), report);
    }
}
