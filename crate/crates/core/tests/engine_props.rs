mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::{place_all, rng, tiny_instance};
use reshare::baselines::{oracle_optimal_cost, OracleInstance};
use reshare::scenario::VerifyMode;
use reshare::sim::Simulation;
use reshare::workload::EventKind;
use reshare::StrategyKind;

fn strategy_of(k: u8) -> StrategyKind {
    match k % 4 {
        0 => StrategyKind::Reshare,
        1 => StrategyKind::CReshare(0.5),
        2 => StrategyKind::RelaxSota,
        _ => StrategyKind::CReshare(0.125),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Random exponential lifetimes on the ramp system: every event keeps the
    // engine consistent, and the incremental cost matches a recomputation.
    #[test]
    fn engine_stays_consistent_under_churn(seed in 0u64..1000, k in 0u8..4, mean in 5.0f64..80.0) {
        let mut sc = common::load("ramp");
        let mut file = sc.file.clone();
        file.workload.phases[0].lifetime = reshare::workload::Lifetime::Exponential { mean };
        file.workload.phases[0].process = reshare::workload::Process::Poisson;
        file.workload.phases[0].end = 200.0;
        file.workload.horizon = 400.0;
        sc = reshare::Scenario::from_file(file, ".").unwrap();
        let w = sc.workload(seed).unwrap();
        let s = strategy_of(k);
        let mut sim = Simulation::new(Arc::clone(&sc.model), s, 1.0, VerifyMode::Full, sc.horizon()).unwrap();
        for ev in &w.events {
            if ev.time > sc.horizon() { break; }
            match ev.kind {
                EventKind::Arrival => sim.arrive(w.request(ev.request)).unwrap(),
                EventKind::Departure => sim.depart(ev.request, ev.time).unwrap(),
            }
            let st = sim.state();
            let fresh = st.phi_recomputed();
            prop_assert!((st.phi() - fresh).abs() <= 1e-9 * fresh.max(1.0));
            prop_assert!(sim.pod_fraction() >= -1e-12);
        }
        prop_assert!(sim.violations().is_empty(), "{:?}", sim.violations());
    }

    // Departing everything returns the engine to the empty state.
    #[test]
    fn full_drain_empties_the_engine(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let inst = tiny_instance(&mut r, 6);
        let mut st = place_all(&inst, 0.5);
        for req in &inst.requests {
            st.remove_request(req.id).unwrap();
            st.check_invariants().unwrap();
        }
        prop_assert_eq!(st.vm_count(), 0);
        prop_assert_eq!(st.phi(), 0.0);
    }

    // Range-pure packing never beats the exhaustive optimum.
    #[test]
    fn engine_is_never_below_optimum(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let inst = tiny_instance(&mut r, 5);
        let opt = oracle_optimal_cost(&OracleInstance::from_requests(&inst.model, &inst.requests).unwrap()).unwrap();
        for eps in [1.0, 0.25] {
            let st = place_all(&inst, eps);
            prop_assert!(st.phi() >= opt.cost * (1.0 - 1e-9), "{} < {}", st.phi(), opt.cost);
        }
    }
}
