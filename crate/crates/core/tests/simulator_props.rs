use proptest::prelude::*;

use mrsched::model::{Job, SystemConfig};
use mrsched::moo::GaParams;
use mrsched::policies::PolicySpec;
use mrsched::simulator::{audit_event_log, run_simulation, EventKind};
use mrsched::trace::Workload;

const NODES: u32 = 32;
const BB: u64 = 4096;

fn job_strategy() -> impl Strategy<Value = (i64, u32, u64, u64, u64)> {
    (
        0i64..2000,
        1u32..=NODES,
        1u64..900,
        0u64..=2,
        prop_oneof![Just(0u64), 1u64..=BB],
    )
}

fn workload(specs: Vec<(i64, u32, u64, u64, u64)>, chain: bool) -> Workload {
    let jobs = specs
        .into_iter()
        .enumerate()
        .map(|(i, (submit, n, rt, slack, bb))| {
            // slack 0 makes some jobs overrun their estimate
            let est = if slack == 0 { (rt / 2).max(1) } else { rt * slack };
            let mut j = Job::new(format!("j{i}"), submit, n, rt)
                .with_estimate(est)
                .with_bb(bb);
            if chain && i % 3 == 2 {
                j = j.with_dependencies([format!("j{}", i - 1)]);
            }
            j
        })
        .collect();
    Workload::new(jobs, "proptest").unwrap()
}

fn config(window: usize, backfill: bool) -> SystemConfig {
    let mut cfg = SystemConfig::new(NODES, BB);
    cfg.scheduler.window_size = window;
    cfg.scheduler.starvation_bound = 4;
    cfg.scheduler.backfill = backfill;
    cfg.scheduler.ga = GaParams::new(20, 8, 1);
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_policy_produces_a_valid_log(
        specs in prop::collection::vec(job_strategy(), 1..25),
        window in 1usize..6,
        backfill: bool,
        chain: bool,
    ) {
        let wl = workload(specs, chain);
        let cfg = config(window, backfill);
        for policy in PolicySpec::standard_suite(false) {
            let out = run_simulation(&wl, &cfg, &policy).unwrap();
            prop_assert!(out.rejected.is_empty(), "{}: {:?}", policy.name, out.rejected);
            if let Err(e) = audit_event_log(&out.events, &wl, &cfg) {
                prop_assert!(false, "{}: {}", policy.name, e);
            }
            let ends = out.events.iter().filter(|e| e.kind == EventKind::JobEnd).count();
            prop_assert_eq!(ends, wl.len());
        }
    }

    #[test]
    fn runs_are_deterministic(
        specs in prop::collection::vec(job_strategy(), 1..20),
        window in 1usize..6,
    ) {
        let wl = workload(specs, false);
        let cfg = config(window, true);
        let p = PolicySpec::bbsched(2.0);
        let a = run_simulation(&wl, &cfg, &p).unwrap();
        let b = run_simulation(&wl, &cfg, &p).unwrap();
        prop_assert_eq!(a.events, b.events);
    }
}

#[test]
fn oversized_jobs_are_rejected_not_started() {
    let wl = Workload::new(
        vec![
            Job::new("ok", 0, 4, 100),
            Job::new("too_wide", 0, NODES + 1, 100),
            Job::new("too_much_bb", 5, 1, 100).with_bb(BB + 1),
        ],
        "t",
    )
    .unwrap();
    let cfg = config(4, true);
    let out = run_simulation(&wl, &cfg, &PolicySpec::naive()).unwrap();
    let mut ids: Vec<&str> = out.rejected.iter().map(|r| r.job.as_str()).collect();
    ids.sort();
    assert_eq!(ids, ["too_much_bb", "too_wide"]);
    let started: Vec<_> = out
        .events
        .iter()
        .filter(|e| e.kind == EventKind::JobStart)
        .filter_map(|e| e.job.as_deref())
        .collect();
    assert_eq!(started, ["ok"]);
}
