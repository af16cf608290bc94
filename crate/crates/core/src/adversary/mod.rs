//! Instance generators: seeded random corpora and the lower-bound
//! constructions, plus adaptive adversaries that react to a running
//! scheduler.

mod adaptive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adaptive::{duel, AdvGolden, AdvNonpreemptive, Adversary, DuelOutcome};

use crate::error::{Error, Result};
use crate::model::{Tap, Task, TaskId};
use crate::rational::{eps, phi_hat, sqrt3_hat, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDist {
    /// `pi / sigma` uniform on the nine points `1 + (p-1) k/8`.
    Uniform,
    /// `pi / sigma` is 1 or `p`.
    Extremes,
    /// Power-of-two `sigma` and `pi / sigma`.
    PowersOfTwo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalPattern {
    Batch,
    PoissonLike,
    Bursty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub p: usize,
    pub n: usize,
    pub work_range: (Rational, Rational),
    /// Works and arrivals are multiples of this.
    pub grain: Rational,
    pub ratio: RatioDist,
    pub arrivals: ArrivalPattern,
    /// Mean gap between arrivals (or bursts).
    pub mean_gap: Rational,
    /// Chance that a task depends on one earlier task.
    pub dep_prob: f64,
    pub seed: u64,
}

impl GenParams {
    pub fn new(p: usize, n: usize, seed: u64) -> Self {
        GenParams {
            p,
            n,
            work_range: (Rational::one(), Rational::from(8)),
            grain: Rational::new(1, 4),
            ratio: RatioDist::Uniform,
            arrivals: ArrivalPattern::PoissonLike,
            mean_gap: Rational::one(),
            dep_prob: 0.0,
            seed,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick_multiple(rng: &mut ChaCha8Rng, lo: &Rational, hi: &Rational, grain: &Rational) -> Rational {
    let steps = ((hi - lo) / grain).floor().to_i64().unwrap_or(0).max(0);
    lo + grain * Rational::from(rng.gen_range(0..=steps))
}

fn exponent_range(lo: &Rational, hi: &Rational) -> Result<(i32, i32)> {
    let (_, a) = lo.ceil_pow2();
    let (_, b) = hi.floor_pow2();
    if a > b {
        return Err(Error::InvalidArgument(format!("no power of two in [{lo}, {hi}]")));
    }
    Ok((a, b))
}

/// Seeded random TAP (or DTAP when `dep_prob > 0`).
pub fn gen_random(params: &GenParams) -> Result<Tap> {
    let GenParams { p, n, work_range: (lo, hi), grain, .. } = params;
    if *p == 0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    if !lo.is_positive() || lo > hi {
        return Err(Error::InvalidArgument(format!("empty work range [{lo}, {hi}]")));
    }
    if !grain.is_positive() {
        return Err(Error::InvalidArgument(format!("grain {grain} must be positive")));
    }
    let mut rng = rng(params.seed);
    let pr = Rational::from(*p);
    let (_, pexp) = pr.floor_pow2();
    let lo_g = if *lo < *grain { grain.clone() } else { lo.clone() };
    let mut t = Rational::zero();
    let mut burst_left = 0usize;
    let mut tasks = Vec::with_capacity(*n);
    for id in 0..*n {
        let (sigma, pi) = match params.ratio {
            RatioDist::PowersOfTwo => {
                let (a, b) = exponent_range(lo, hi)?;
                let sigma = Rational::pow2(rng.gen_range(a..=b));
                let r = Rational::pow2(rng.gen_range(0..=pexp));
                (sigma.clone(), sigma * r)
            }
            RatioDist::Uniform => {
                let sigma = pick_multiple(&mut rng, &lo_g, hi, grain);
                let k = rng.gen_range(0..=8i64);
                let r = Rational::one() + (&pr - Rational::one()) * Rational::new(k, 8);
                (sigma.clone(), sigma * r)
            }
            RatioDist::Extremes => {
                let sigma = pick_multiple(&mut rng, &lo_g, hi, grain);
                let r = if rng.gen_bool(0.5) { Rational::one() } else { pr.clone() };
                (sigma.clone(), sigma * r)
            }
        };
        if id > 0 {
            match params.arrivals {
                ArrivalPattern::Batch => {}
                ArrivalPattern::PoissonLike => {
                    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let gap = -u.ln() * params.mean_gap.to_f64() / grain.to_f64();
                    t += grain * Rational::from(gap.round() as i64);
                }
                ArrivalPattern::Bursty => {
                    if burst_left == 0 {
                        burst_left = rng.gen_range(1..=4);
                        t += &params.mean_gap * Rational::from(rng.gen_range(1..=3i64));
                    }
                }
            }
        }
        burst_left = burst_left.saturating_sub(1);
        let mut task = Task::new(id, sigma, pi, t.clone());
        if id > 0 && params.dep_prob > 0.0 && rng.gen_bool(params.dep_prob.min(1.0)) {
            task = task.with_deps(vec![rng.gen_range(0..id)]);
        }
        tasks.push(task);
    }
    Tap::new(*p, tasks)
}

/// Single task `(phi, p)` at time 0; the first task of the golden-ratio
/// adversary.
pub fn golden_seed(p: usize) -> Result<Tap> {
    Tap::new(p, vec![Task::new(0, phi_hat(), Rational::from(p), Rational::zero())])
}

/// `k = floor(log2 p)` tasks `(2^i, 2^(i-1) p)` at `i eps`, then `p - k`
/// tasks `(2^k, 2^k p)` at `(k+1) eps`.
pub fn gen_geometric(p: usize) -> Result<Tap> {
    if p < 4 {
        return Err(Error::InvalidArgument(format!("p = {p} < 4")));
    }
    let (_, k) = Rational::from(p).floor_pow2();
    let pr = Rational::from(p);
    let mut tasks = Vec::with_capacity(p);
    for i in 1..=k {
        let at = eps() * Rational::from(i);
        tasks.push(Task::new(tasks.len(), Rational::pow2(i), Rational::pow2(i - 1) * &pr, at));
    }
    let at = eps() * Rational::from(k + 1);
    for _ in k as usize..p {
        tasks.push(Task::new(tasks.len(), Rational::pow2(k), Rational::pow2(k) * &pr, at.clone()));
    }
    Tap::new(p, tasks)
}

/// Prefix of [`gen_geometric`] holding its first `j` tasks.
pub fn geometric_prefix(p: usize, j: usize) -> Result<Tap> {
    let full = gen_geometric(p)?;
    Tap::new(p, full.tasks().iter().take(j).cloned().collect())
}

/// Which of the two randomized lower-bound blocks was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    A,
    B,
}

/// Blocks at times `10 i`. Block A is one task `(s + 1, 2p)` with
/// `s ~ sqrt 3`; block B adds `p - 1` tasks `(s, p s)` one time unit later.
pub fn gen_randlb(p: usize, n_blocks: usize, seed: u64) -> Result<(Tap, Vec<Block>)> {
    let mut rng = rng(seed);
    let blocks: Vec<Block> = (0..n_blocks).map(|_| if rng.gen_bool(0.5) { Block::A } else { Block::B }).collect();
    Ok((randlb_blocks(p, &blocks)?, blocks))
}

pub fn randlb_blocks(p: usize, blocks: &[Block]) -> Result<Tap> {
    if p < 4 {
        return Err(Error::InvalidArgument(format!("p = {p} < 4")));
    }
    let s = sqrt3_hat();
    let pr = Rational::from(p);
    let mut tasks = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        let t0 = Rational::from(10 * i);
        tasks.push(Task::new(tasks.len(), &s + Rational::one(), &pr * Rational::from(2), t0.clone()));
        if *b == Block::B {
            for _ in 1..p {
                tasks.push(Task::new(tasks.len(), s.clone(), &pr * &s, &t0 + Rational::one()));
            }
        }
    }
    Tap::new(p, tasks)
}

fn ceil_sqrt(p: usize) -> usize {
    let mut r = (p as f64).sqrt() as usize;
    while r * r < p {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= p {
        r -= 1;
    }
    r
}

fn exact_root(p: usize, k: u32) -> Option<usize> {
    let r = (p as f64).powf(1.0 / k as f64).round() as usize;
    (r.max(1) - 1..=r + 1).find(|x| x.pow(k) == p)
}

/// `ceil(sqrt p)` unit tasks, not parallelizable in (a) and perfectly
/// scalable in (b). Their serial views coincide.
pub fn gen_oblivious_pair(p: usize) -> Result<(Tap, Tap)> {
    if p < 4 {
        return Err(Error::InvalidArgument(format!("p = {p} < 4")));
    }
    let k = ceil_sqrt(p);
    let make = |pi: Rational| {
        Tap::new(p, (0..k).map(|i| Task::new(i, Rational::one(), pi.clone(), Rational::zero())).collect())
    };
    Ok((make(Rational::one())?, make(Rational::from(p))?))
}

/// Two unit-serial tasks at time 0. With `unparallelizable` both have
/// `pi = p`; otherwise `pi_1 = p (x + 1/p)` and `pi_2 = 1`.
pub fn gen_obliv_two_task(p: usize, x: &Rational, unparallelizable: bool) -> Result<Tap> {
    let pr = Rational::from(p);
    let (pi1, pi2) = if unparallelizable {
        (pr.clone(), pr.clone())
    } else {
        if x.is_negative() || *x > Rational::one() - pr.recip() {
            return Err(Error::InvalidArgument(format!("x = {x} outside [0, 1 - 1/p]")));
        }
        (&pr * x + Rational::one(), Rational::one())
    };
    Tap::new(
        p,
        vec![
            Task::new(0, Rational::one(), pi1, Rational::zero()),
            Task::new(1, Rational::one(), pi2, Rational::zero()),
        ],
    )
}

/// `sqrt p` cheap tasks `(1, 1)` and `p^(1/4)` expensive tasks `(1, p)`,
/// all at time 0, ids shuffled by `seed`.
pub fn gen_mrt_cheap_expensive(p: usize, seed: u64) -> Result<Tap> {
    let q4 = exact_root(p, 4).ok_or_else(|| Error::InvalidArgument(format!("{p} is not a fourth power")))?;
    let mut kinds: Vec<bool> = std::iter::repeat_n(false, q4 * q4).chain(std::iter::repeat_n(true, q4)).collect();
    kinds.shuffle(&mut rng(seed));
    let pr = Rational::from(p);
    let tasks = kinds
        .iter()
        .enumerate()
        .map(|(id, exp)| Task::new(id, Rational::one(), if *exp { pr.clone() } else { Rational::one() }, Rational::zero()))
        .collect();
    Tap::new(p, tasks)
}

/// Ids of the expensive (`pi = p`) tasks of a cheap/expensive instance.
pub fn expensive_ids(tap: &Tap) -> Vec<TaskId> {
    let pr = Rational::from(tap.p());
    tap.tasks().iter().filter(|t| t.pi == pr && t.pi != t.sigma).map(|t| t.id).collect()
}

/// `sqrt p` levels of `sqrt p` tasks `(1, sqrt p)`, all at time 0. One
/// seeded task per level (its spawner) is the only dependency of every
/// task on the next level.
pub fn gen_dtap_levels(p: usize, seed: u64) -> Result<Tap> {
    let l = exact_root(p, 2).ok_or_else(|| Error::InvalidArgument(format!("{p} is not a perfect square")))?;
    if p < 4 {
        return Err(Error::InvalidArgument(format!("p = {p} < 4")));
    }
    let mut rng = rng(seed);
    let root = Rational::from(l);
    let mut tasks = Vec::with_capacity(l * l);
    let mut spawner: Option<TaskId> = None;
    for level in 0..l {
        let first = level * l;
        for k in 0..l {
            let t = Task::new(first + k, Rational::one(), root.clone(), Rational::zero());
            tasks.push(match spawner {
                Some(s) => t.with_deps(vec![s]),
                None => t,
            });
        }
        spawner = Some(first + rng.gen_range(0..l));
    }
    Tap::new(p, tasks)
}

/// Power-of-two instance built to push the non-cancelling scheduler into
/// its exceptional modes. A class-`2^j` task of serial work `2^a` shares
/// the inner parallel pool with enough class-1 tasks of the same serial
/// work that it is cancelled unfinished at age `3 * 2^a` (ballistic). The
/// crowd expires at the same instant, and a small class-`2^j` task of
/// serial work `2^(a-m)` then arrives into an empty pool and is finished
/// by the inner run while its class is still in emergency
/// (semi-ballistic).
pub fn gen_ballistic_crafted(p: usize, j: i32, a: i32, m: i32) -> Result<Tap> {
    let pr = Rational::from(p);
    if Rational::pow2(j + 2) > pr || j < 1 || m < 1 {
        return Err(Error::InvalidArgument(format!("need 1 <= j, 4 * 2^j <= p, m >= 1 (j={j}, m={m})")));
    }
    let crowd = 3 * p / (1usize << j) + 1;
    let sigma = Rational::pow2(a);
    let mut tasks = vec![Task::new(0, sigma.clone(), &sigma * Rational::pow2(j), Rational::zero())];
    for _ in 0..crowd {
        tasks.push(Task::new(tasks.len(), sigma.clone(), sigma.clone(), Rational::zero()));
    }
    let small = Rational::pow2(a - m);
    tasks.push(Task::new(tasks.len(), small.clone(), small * Rational::pow2(j), &sigma * Rational::from(3)));
    Tap::new(p, tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dependency_depths;
    use crate::rational::q;

    #[test]
    fn random_is_deterministic_and_valid() {
        let mut params = GenParams::new(4, 0, 42);
        assert!(gen_random(&params).unwrap().is_empty());
        params.n = 10;
        assert_eq!(gen_random(&params).unwrap(), gen_random(&params).unwrap());
        for seed in 0..200 {
            for (ratio, arrivals) in [
                (RatioDist::Uniform, ArrivalPattern::Batch),
                (RatioDist::Extremes, ArrivalPattern::Bursty),
                (RatioDist::PowersOfTwo, ArrivalPattern::PoissonLike),
            ] {
                let params = GenParams { ratio, arrivals, dep_prob: 0.3, ..GenParams::new(2 + seed as usize % 15, 10, seed) };
                let tap = gen_random(&params).unwrap();
                assert_eq!(tap.len(), 10);
            }
        }
        params.work_range = (q(3, 1), q(2, 1));
        assert!(gen_random(&params).is_err());
    }

    #[test]
    fn geometric_p4() {
        let tap = gen_geometric(4).unwrap();
        let works: Vec<(Rational, Rational)> = tap.tasks().iter().map(|t| (t.sigma.clone(), t.pi.clone())).collect();
        assert_eq!(
            works,
            vec![(q(2, 1), q(4, 1)), (q(4, 1), q(8, 1)), (q(4, 1), q(16, 1)), (q(4, 1), q(16, 1))]
        );
        assert_eq!(tap.tasks()[2].arrival, eps() * q(3, 1));
    }

    #[test]
    fn randlb_blocks_shape() {
        assert_eq!(randlb_blocks(8, &[Block::A]).unwrap().len(), 1);
        let b = randlb_blocks(8, &[Block::B]).unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.tasks()[1..].iter().all(|t| t.arrival == q(1, 1)));
        let (t1, _) = gen_randlb(8, 5, 3).unwrap();
        let (t2, _) = gen_randlb(8, 5, 3).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn oblivious_pairs() {
        let (a, b) = gen_oblivious_pair(16).unwrap();
        assert_eq!((a.len(), b.len()), (4, 4));
        let serial = |t: &Tap| t.tasks().iter().map(|x| (x.sigma.clone(), x.arrival.clone())).collect::<Vec<_>>();
        assert_eq!(serial(&a), serial(&b));
        let two = gen_obliv_two_task(4, &q(1, 2), false).unwrap();
        assert_eq!(two.tasks()[0].pi, q(3, 1));
        assert!(gen_obliv_two_task(4, &q(1, 1), false).is_err());
    }

    #[test]
    fn cheap_expensive_counts() {
        let tap = gen_mrt_cheap_expensive(16, 1).unwrap();
        assert_eq!(tap.len(), 6);
        assert_eq!(expensive_ids(&tap).len(), 2);
        assert_eq!(gen_mrt_cheap_expensive(256, 1).unwrap().len(), 20);
        assert!(gen_mrt_cheap_expensive(32, 1).is_err());
    }

    #[test]
    fn levels_form_a_tree() {
        let tap = gen_dtap_levels(16, 5).unwrap();
        assert_eq!(tap.len(), 16);
        let depth = dependency_depths(&tap);
        assert_eq!(depth.values().max(), Some(&3));
        assert!(gen_dtap_levels(12, 5).is_err());
    }
}
