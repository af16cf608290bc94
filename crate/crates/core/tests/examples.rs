//! Worked values of the constructions, checked end to end through the
//! public API. Expected numbers are computed by hand in the comments.

use taplab::adversary::{
    duel, expensive_ids, gen_dtap_levels, gen_geometric, gen_mrt_cheap_expensive, gen_oblivious_pair, golden_seed,
    randlb_blocks, AdvGolden, Block,
};
use taplab::dtap::dtap_opt_upper_levels;
use taplab::engine::{simulate, EngineConfig};
use taplab::metrics::metrics_from_trace;
use taplab::model::{normalize_task, task_type, Task};
use taplab::oracle::{opt_awake_exhaustive, opt_awake_given_decisions, opt_trt_lower, DEFAULT_MAX_EVALS};
use taplab::rational::{phi_hat, sqrt3_hat};
use taplab::sched_awake::{MwfFixed, MwfUniform};
use taplab::sched_mrt::{relaxed_rate, RelaxedJob};
use taplab::{q, Decision, Rational, Tap, TaskType};

fn r(n: i64) -> Rational {
    Rational::from(n)
}

#[test]
fn normalization_clamps_both_ways() {
    let t = normalize_task(&Task::new(0, r(2), r(1), r(0)), 4).unwrap();
    assert_eq!((t.sigma, t.pi), (r(1), r(1)));
    let t = normalize_task(&Task::new(0, r(1), r(8), r(0)), 4).unwrap();
    assert_eq!((t.sigma, t.pi), (r(1), r(4)));
}

#[test]
fn type_of_power_of_two_task() {
    assert_eq!(task_type(&Task::new(0, r(2), r(16), r(0))).unwrap(), TaskType { j: 3, i: 1 });
}

#[test]
fn golden_seed_in_parallel_takes_one() {
    let tap = golden_seed(4).unwrap();
    let par = [(0, Decision::Parallel)].into_iter().collect();
    assert_eq!(opt_awake_given_decisions(&tap, &par).unwrap(), r(1));
    let (opt, best) = opt_awake_exhaustive(&tap, DEFAULT_MAX_EVALS).unwrap();
    assert_eq!((opt, best), (r(1), par));
}

#[test]
fn golden_adversary_against_serial_start() {
    // no injection; the serial task alone takes phi while OPT is 1
    let mut adv = AdvGolden::new(8);
    let out = duel(&mut adv, &mut MwfUniform::all_serial(), EngineConfig::new(8)).unwrap();
    assert_eq!(out.tap.len(), 1);
    let awake = metrics_from_trace(&out.trace, &out.tap).unwrap().awake;
    assert_eq!(awake, phi_hat());
}

#[test]
fn speed_halves_completion() {
    let tap = Tap::new(2, vec![Task::new(0, r(1), r(2), r(0))]).unwrap();
    let tr = simulate(&tap, &mut MwfUniform::all_parallel(), EngineConfig::new(2).with_speed(r(2))).unwrap();
    assert_eq!(tr.completions[&0], q(1, 2));
}

#[test]
fn relaxed_rates() {
    let job = RelaxedJob { task_id: 0, total_work: r(2), threshold: r(4), progress: r(0) };
    assert_eq!(relaxed_rate(&job, &r(2)), r(1));
    assert_eq!(relaxed_rate(&job, &r(8)), r(2));
}

#[test]
fn geometric_instance_at_four() {
    // k = 2: tasks (2, 4), (4, 8), then two tasks (4, 16)
    let tap = gen_geometric(4).unwrap();
    let works: Vec<(Rational, Rational)> = tap.tasks().iter().map(|t| (t.sigma.clone(), t.pi.clone())).collect();
    assert_eq!(works, vec![(r(2), r(4)), (r(4), r(8)), (r(4), r(16)), (r(4), r(16))]);
    // all parallel: 4/4 + 8/4 + 2 * 16/4 = 11 with no idle time, and
    // 2^k (2 - k/p) - 1 = 5 bounds it from below
    let tr = simulate(&tap, &mut MwfUniform::all_parallel(), EngineConfig::new(4)).unwrap();
    let awake = metrics_from_trace(&tr, &tap).unwrap().awake;
    assert_eq!(awake, r(11));
    assert!(awake >= r(5));
}

#[test]
fn randomized_blocks() {
    let a = randlb_blocks(4, &[Block::A]).unwrap();
    assert_eq!(a.len(), 1);
    let b = randlb_blocks(4, &[Block::B]).unwrap();
    assert_eq!(b.len(), 4);
    assert!(b.tasks()[1..].iter().all(|t| t.arrival == r(1) && t.sigma == sqrt3_hat()));
}

#[test]
fn oblivious_pair_sizes() {
    let (a, b) = gen_oblivious_pair(16).unwrap();
    assert_eq!((a.len(), b.len()), (4, 4));
    for (x, y) in a.tasks().iter().zip(b.tasks()) {
        assert_eq!((&x.sigma, &x.arrival), (&y.sigma, &y.arrival));
    }
}

#[test]
fn cheap_expensive_counts_and_witness() {
    let tap = gen_mrt_cheap_expensive(16, 3).unwrap();
    let exp = expensive_ids(&tap);
    assert_eq!((tap.len(), exp.len()), (6, 2));
    let decisions = tap
        .ids()
        .map(|id| (id, if exp.contains(&id) { Decision::Serial } else { Decision::Parallel }))
        .collect();
    let tr = simulate(&tap, &mut MwfFixed::new(decisions), EngineConfig::new(16)).unwrap();
    let trt = metrics_from_trace(&tr, &tap).unwrap().trt;
    // cheap tasks in parallel, one at a time: 1/16 + ... + 4/16; expensive ones at 1
    assert!(trt <= r(1) + r(2) + q(10, 16));
    assert!(opt_trt_lower(&tap) <= trt);
}

#[test]
fn expensive_back_to_back_in_parallel() {
    // k expensive tasks (1, p) run one after another on p processors finish at 1, 2, ..., k
    let p = 16;
    let tap = Tap::new(p, (0..3).map(|i| Task::new(i, r(1), r(16), r(0))).collect()).unwrap();
    let tr = simulate(&tap, &mut taplab::sched_mrt::RigidParallel::default(), EngineConfig::new(p)).unwrap();
    assert_eq!(metrics_from_trace(&tr, &tap).unwrap().trt, r(6));
}

#[test]
fn level_instance_shape_and_witness() {
    let tap = gen_dtap_levels(16, 1).unwrap();
    assert_eq!(tap.len(), 16);
    assert!(tap.tasks().iter().all(|t| t.sigma == r(1) && t.pi == r(4)));
    let (_, v) = dtap_opt_upper_levels(&tap).unwrap();
    assert!(v <= r(2));
}
