use proptest::prelude::*;

use taplab::adversary::{gen_random, ArrivalPattern, GenParams, RatioDist};
use taplab::dtap::{dtap_awake_lower, fairly_parallel_work_holds};
use taplab::engine::{simulate, validate_trace, EngineConfig, Trace};
use taplab::metrics::metrics_from_trace;
use taplab::model::{normalize_task, round_pow2, scale_tap, scale_works, Task};
use taplab::oracle::{opt_awake_exhaustive, opt_trt_lower, DEFAULT_MAX_EVALS};
use taplab::registry::{default_config, make_scheduler, SchedOptions};
use taplab::verify::{ballistic_stats, one_per_type_stats};
use taplab::{q, Decision, Rational, Tap};

const AWAKE_CATALOG: [&str; 7] = ["bal", "unk", "mwf-all-serial", "mwf-all-parallel", "equi", "rigid-parallel", "turtle"];

fn params(p: usize, n: usize, seed: u64, ratio: RatioDist, arrivals: ArrivalPattern) -> GenParams {
    GenParams { ratio, arrivals, ..GenParams::new(p, n, seed) }
}

fn ratio_dist() -> impl Strategy<Value = RatioDist> {
    prop_oneof![Just(RatioDist::Uniform), Just(RatioDist::Extremes), Just(RatioDist::PowersOfTwo)]
}

fn arrivals() -> impl Strategy<Value = ArrivalPattern> {
    prop_oneof![Just(ArrivalPattern::Batch), Just(ArrivalPattern::PoissonLike), Just(ArrivalPattern::Bursty)]
}

fn small_tap() -> impl Strategy<Value = Tap> {
    (2usize..=9, 1usize..=6, any::<u64>(), ratio_dist(), arrivals())
        .prop_map(|(p, n, s, r, a)| gen_random(&params(p, n, s, r, a)).unwrap())
}

fn pow2_tap() -> impl Strategy<Value = Tap> {
    (prop_oneof![Just(4usize), Just(8), Just(16)], 1usize..=10, any::<u64>(), arrivals()).prop_map(|(p, n, s, a)| {
        let g = GenParams { work_range: (q(1, 2), q(8, 1)), ..params(p, n, s, RatioDist::PowersOfTwo, a) };
        gen_random(&g).unwrap()
    })
}

fn dtap() -> impl Strategy<Value = Tap> {
    (prop_oneof![Just(4usize), Just(9), Just(16)], 1usize..=8, any::<u64>(), ratio_dist()).prop_map(|(p, n, s, r)| {
        let g = GenParams { dep_prob: 0.5, ..params(p, n, s, r, ArrivalPattern::PoissonLike) };
        gen_random(&g).unwrap()
    })
}

fn run(tap: &Tap, name: &str) -> (Trace, EngineConfig) {
    let cfg = default_config(name, tap.p()).unwrap();
    let mut s = make_scheduler(name, &SchedOptions::default()).unwrap();
    (simulate(tap, &mut s, cfg.clone()).unwrap(), cfg)
}

fn nonzero() -> impl Strategy<Value = Rational> {
    (1i64..10_000, 1i64..10_000, any::<bool>()).prop_map(|(a, b, neg)| Rational::new(if neg { -a } else { a }, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rational_inverse(x in nonzero()) {
        prop_assert_eq!(&x * (Rational::one() / &x), Rational::one());
    }

    #[test]
    fn normalize_is_idempotent(s in 1i64..50, pi in 1i64..400, p in 2usize..20) {
        let t = Task::new(0, q(s, 4), q(pi, 4), Rational::zero());
        let once = normalize_task(&t, p).unwrap();
        prop_assert_eq!(normalize_task(&once, p).unwrap(), once);
    }

    #[test]
    fn round_pow2_within_factor_two(tap in small_tap().prop_filter("power-of-two p", |t| t.p().is_power_of_two())) {
        let r = round_pow2(&tap);
        for (a, b) in tap.tasks().iter().zip(r.tasks()) {
            prop_assert!(b.sigma >= a.sigma && b.sigma < &a.sigma * Rational::from(2));
            prop_assert!(b.pi >= a.pi && b.pi < &a.pi * Rational::from(2));
        }
    }

    #[test]
    fn catalog_traces_are_valid_and_bounded(tap in small_tap()) {
        let (opt, _) = opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS).unwrap();
        let trt_lb = opt_trt_lower(&tap);
        let fastest = tap.tasks().iter().map(|t| t.fastest(tap.p())).max().unwrap();
        for name in AWAKE_CATALOG {
            let (trace, cfg) = run(&tap, name);
            prop_assert!(validate_trace(&trace, &tap, &cfg).is_empty(), "{} invalid", name);
            let m = metrics_from_trace(&trace, &tap).unwrap();
            prop_assert!(m.awake <= m.trt);
            prop_assert!(m.awake >= fastest);
            prop_assert!(opt <= m.awake, "{} beats the optimum", name);
            prop_assert!(trt_lb <= m.trt, "{} beats the response-time bound", name);
        }
    }

    #[test]
    fn simulation_is_deterministic(tap in small_tap(), k in 0usize..AWAKE_CATALOG.len()) {
        let a = run(&tap, AWAKE_CATALOG[k]).0.to_json();
        let b = run(&tap, AWAKE_CATALOG[k]).0.to_json();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn speed_matches_scaled_works(tap in small_tap(), c in 2i64..5, k in 0usize..4) {
        let name = ["mwf-all-serial", "mwf-all-parallel", "equi", "bal"][k];
        let c = Rational::from(c);
        let base = run(&tap, name).0;
        let scaled = scale_works(&tap, &c).unwrap();
        let mut s = make_scheduler(name, &SchedOptions::default()).unwrap();
        let fast = simulate(&scaled, &mut s, EngineConfig::new(tap.p()).with_speed(c)).unwrap();
        prop_assert_eq!(&base.completions, &fast.completions);
        prop_assert_eq!(base.final_decisions(), fast.final_decisions());
    }

    #[test]
    fn bal_decides_once_at_arrival(tap in small_tap()) {
        let (trace, _) = run(&tap, "bal");
        for t in tap.tasks() {
            let recs = &trace.decisions[&t.id];
            prop_assert_eq!(recs.len(), 1);
            prop_assert_eq!(&recs[0].time, &t.arrival);
        }
    }

    #[test]
    fn unk_ignores_parallel_work_of_serial_tasks(tap in small_tap(), bump in 0i64..8) {
        let (trace, _) = run(&tap, "unk");
        let decisions = trace.final_decisions();
        let p = Rational::from(tap.p());
        let changed = tap
            .map_tasks(|t| {
                if decisions[&t.id] == Decision::Serial {
                    let pi = (&t.sigma + &t.sigma * Rational::new(bump, 8) * (&p - Rational::one())).min(&t.sigma * &p);
                    Task { pi, ..t.clone() }
                } else {
                    t.clone()
                }
            })
            .unwrap();
        let (other, _) = run(&changed, "unk");
        prop_assert_eq!(&trace.decisions, &other.decisions);
        prop_assert_eq!(&trace.completions, &other.completions);
    }

    #[test]
    fn canc_completes_everything(tap in pow2_tap()) {
        let (trace, cfg) = run(&tap, "canc");
        prop_assert_eq!(trace.completions.len(), tap.len());
        prop_assert!(validate_trace(&trace, &tap, &cfg).is_empty());
    }

    #[test]
    fn bsched_runs_one_parallel_task_per_type(tap in pow2_tap()) {
        let (trace, cfg) = run(&tap, "bsched");
        prop_assert!(validate_trace(&trace, &tap, &cfg).is_empty());
        prop_assert!(one_per_type_stats(&trace, &tap).unwrap().0 <= 1);
    }

    #[test]
    fn csched_never_cancels(tap in pow2_tap()) {
        let (trace, cfg) = run(&tap, "csched");
        prop_assert!(trace.cancellations.is_empty());
        prop_assert!(validate_trace(&trace, &tap, &cfg).is_empty());
        let st = ballistic_stats(&trace, &tap);
        prop_assert!(!st.problems.iter().any(|p| p.contains("cancellation") || p.contains("reserve")));
    }

    #[test]
    fn turtle_respects_dependencies_and_bounds(tap in dtap()) {
        let (trace, cfg) = run(&tap, "turtle");
        prop_assert!(validate_trace(&trace, &tap, &cfg).is_empty());
        for s in &trace.slices {
            for id in s.alloc.keys() {
                let t = tap.task(*id).unwrap();
                prop_assert!(t.arrival <= s.start);
                for d in &t.deps {
                    prop_assert!(trace.completions[d] <= s.start);
                }
            }
        }
        prop_assert!(fairly_parallel_work_holds(&tap));
        let awake = metrics_from_trace(&trace, &tap).unwrap().awake;
        let lb = dtap_awake_lower(&tap);
        // awake <= 3 sqrt(p) lb, squared
        prop_assert!(&awake * &awake <= &lb * &lb * Rational::from(9 * tap.p()));
    }

    #[test]
    fn oracle_monotone_under_added_task(tap in small_tap().prop_filter("room", |t| t.len() < 6), s in 1i64..16, r in 0i64..8) {
        let (before, _) = opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS).unwrap();
        let sigma = q(s, 4);
        let pi = &sigma * (Rational::one() + Rational::new(r, 8) * Rational::from(tap.p() - 1));
        let extra = Task::new(tap.next_id(), sigma, pi, q(r, 2));
        let (after, _) = opt_awake_exhaustive(&tap.with_task(extra).unwrap(), DEFAULT_MAX_EVALS).unwrap();
        prop_assert!(after >= before);
    }

    #[test]
    fn oracle_scales_with_works(tap in small_tap(), c in 1i64..4) {
        let c = Rational::from(c);
        let (v, _) = opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS).unwrap();
        let (w, _) = opt_awake_exhaustive(&scale_tap(&tap, &c).unwrap(), DEFAULT_MAX_EVALS).unwrap();
        if tap.tasks().iter().all(|t| t.arrival.is_zero()) {
            prop_assert_eq!(w, &c * v);
        } else {
            prop_assert!(w <= &c * v);
        }
    }

    #[test]
    fn generators_are_pure(p in 2usize..20, n in 1usize..12, seed in any::<u64>(), r in ratio_dist(), a in arrivals()) {
        let g = params(p, n, seed, r, a);
        prop_assert_eq!(gen_random(&g).unwrap(), gen_random(&g).unwrap());
    }
}
