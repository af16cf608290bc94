//! Tasks, task arrival processes and the transformations applied to them
//! before simulation: cost-ratio normalization, work scaling and
//! power-of-two rounding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

pub type TaskId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub sigma: Rational,
    pub pi: Rational,
    pub arrival: Rational,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deps: Vec<TaskId>,
}

impl Task {
    pub fn new(id: TaskId, sigma: Rational, pi: Rational, arrival: Rational) -> Self {
        Task { id, sigma, pi, arrival, deps: Vec::new() }
    }

    pub fn with_deps(mut self, deps: Vec<TaskId>) -> Self {
        self.deps = deps;
        self
    }

    /// Work required under `decision`.
    pub fn work(&self, decision: Decision) -> &Rational {
        match decision {
            Decision::Serial => &self.sigma,
            Decision::Parallel => &self.pi,
        }
    }

    /// Shortest possible lifetime of the task on `p` processors.
    pub fn fastest(&self, p: usize) -> Rational {
        let par = &self.pi / Rational::from(p);
        self.sigma.clone().min(par)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Decision {
    Serial,
    Parallel,
}

/// Power-of-two signature of a rounded task: `pi/sigma == 2^j`, `sigma == 2^i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskType {
    pub j: i32,
    pub i: i32,
}

/// A task arrival process: processor count plus tasks sorted by arrival.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tap {
    p: usize,
    tasks: Vec<Task>,
    index: BTreeMap<TaskId, usize>,
}

#[derive(Serialize, Deserialize)]
struct TapFile {
    version: u32,
    p: usize,
    tasks: Vec<Task>,
}

impl Tap {
    /// Validates and sorts `tasks` by `(arrival, id)`.
    pub fn new(p: usize, mut tasks: Vec<Task>) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInstance(format!("processor count {p} < 2")));
        }
        tasks.sort_by(|a, b| a.arrival.cmp(&b.arrival).then(a.id.cmp(&b.id)));
        let mut index = BTreeMap::new();
        for (pos, t) in tasks.iter().enumerate() {
            if index.insert(t.id, pos).is_some() {
                return Err(Error::InvalidInstance(format!("duplicate task id {}", t.id)));
            }
        }
        let pr = Rational::from(p);
        for t in &tasks {
            if !t.sigma.is_positive() || !t.pi.is_positive() {
                return Err(Error::InvalidInstance(format!("task {} has non-positive work", t.id)));
            }
            if t.pi < t.sigma || t.pi > &t.sigma * &pr {
                return Err(Error::InvalidInstance(format!(
                    "task {} cost ratio {}/{} outside [1, {p}]",
                    t.id, t.pi, t.sigma
                )));
            }
            if t.arrival.is_negative() {
                return Err(Error::InvalidInstance(format!("task {} arrives before 0", t.id)));
            }
            for d in &t.deps {
                if !index.contains_key(d) {
                    return Err(Error::InvalidInstance(format!(
                        "task {} depends on unknown task {d}",
                        t.id
                    )));
                }
                if *d == t.id {
                    return Err(Error::InvalidInstance("cyclic dependencies".into()));
                }
            }
        }
        let tap = Tap { p, tasks, index };
        tap.check_acyclic()?;
        Ok(tap)
    }

    /// Normalizes every task's cost ratio, then validates.
    pub fn normalized(p: usize, tasks: Vec<Task>) -> Result<Self> {
        let tasks = tasks
            .into_iter()
            .map(|t| normalize_task(&t, p))
            .collect::<Result<Vec<_>>>()?;
        Tap::new(p, tasks)
    }

    pub fn empty(p: usize) -> Self {
        Tap::new(p, Vec::new()).expect("p >= 2")
    }

    fn check_acyclic(&self) -> Result<()> {
        // Kahn's algorithm over the dependency edges.
        let mut indeg: BTreeMap<TaskId, usize> = self.tasks.iter().map(|t| (t.id, t.deps.len())).collect();
        let mut children: BTreeMap<TaskId, Vec<TaskId>> = BTreeMap::new();
        for t in &self.tasks {
            for d in &t.deps {
                children.entry(*d).or_default().push(t.id);
            }
        }
        let mut ready: Vec<TaskId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        let mut seen = 0;
        while let Some(id) = ready.pop() {
            seen += 1;
            for c in children.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                let e = indeg.get_mut(c).expect("known id");
                *e -= 1;
                if *e == 0 {
                    ready.push(*c);
                }
            }
        }
        if seen != self.tasks.len() {
            return Err(Error::InvalidInstance("cyclic dependencies".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.index.get(&id).map(|&i| &self.tasks[i])
    }

    pub fn has_deps(&self) -> bool {
        self.tasks.iter().any(|t| !t.deps.is_empty())
    }

    pub fn ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.tasks.iter().map(|t| t.id)
    }

    /// Tasks that list `id` as a dependency.
    pub fn dependents(&self, id: TaskId) -> Vec<TaskId> {
        self.tasks.iter().filter(|t| t.deps.contains(&id)).map(|t| t.id).collect()
    }

    pub fn next_id(&self) -> TaskId {
        self.tasks.iter().map(|t| t.id + 1).max().unwrap_or(0)
    }

    pub fn with_task(&self, task: Task) -> Result<Tap> {
        let mut tasks = self.tasks.clone();
        tasks.push(task);
        Tap::new(self.p, tasks)
    }

    pub fn map_tasks(&self, f: impl Fn(&Task) -> Task) -> Result<Tap> {
        Tap::new(self.p, self.tasks.iter().map(f).collect())
    }

    pub fn total_sigma(&self) -> Rational {
        self.tasks.iter().map(|t| &t.sigma).sum()
    }

    pub fn to_json(&self) -> String {
        let file = TapFile { version: 1, p: self.p, tasks: self.tasks.clone() };
        serde_json::to_string(&file).expect("tap serializes")
    }

    /// Parses the versioned JSON format; task works are normalized on load.
    pub fn from_json(s: &str) -> Result<Tap> {
        let file: TapFile = serde_json::from_str(s)?;
        if file.version != 1 {
            return Err(Error::InvalidInstance(format!("unsupported version {}", file.version)));
        }
        Tap::normalized(file.p, file.tasks)
    }

    /// 64-bit FNV-1a hash of the canonical JSON bytes.
    pub fn instance_hash(&self) -> u64 {
        fnv1a(self.to_json().as_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Clamps a task's cost ratio into `[1, p]`.
pub fn normalize_task(task: &Task, p: usize) -> Result<Task> {
    if !task.sigma.is_positive() || !task.pi.is_positive() {
        return Err(Error::InvalidInstance(format!("task {} has non-positive work", task.id)));
    }
    let sigma = task.sigma.clone().min(task.pi.clone());
    let pi = task.pi.clone().min(&sigma * Rational::from(p));
    Ok(Task { sigma, pi, ..task.clone() })
}

/// Multiplies every work by `c >= 1`; arrivals are untouched.
pub fn scale_tap(tap: &Tap, c: &Rational) -> Result<Tap> {
    if *c < Rational::one() {
        return Err(Error::InvalidArgument(format!("scale factor {c} < 1")));
    }
    scale_works(tap, c)
}

/// Like [`scale_tap`] but accepts any positive factor.
pub fn scale_works(tap: &Tap, c: &Rational) -> Result<Tap> {
    if !c.is_positive() {
        return Err(Error::InvalidArgument(format!("scale factor {c} <= 0")));
    }
    tap.map_tasks(|t| Task { sigma: &t.sigma * c, pi: &t.pi * c, ..t.clone() })
}

/// Rounds every work up to a power of two and re-clamps the ratio into
/// `[1, 2^floor(log2 p)]`. When `p` is not a power of two the clamp raises
/// `sigma` rather than lowering `pi`, so no work ever decreases.
pub fn round_pow2(tap: &Tap) -> Tap {
    let (pmax, _) = Rational::from(tap.p()).floor_pow2();
    let tasks = tap
        .tasks()
        .iter()
        .map(|t| {
            let (mut sigma, _) = t.sigma.ceil_pow2();
            let (pi, _) = t.pi.ceil_pow2();
            if pi > &sigma * &pmax {
                sigma = &pi / &pmax;
            }
            Task { sigma, pi, ..t.clone() }
        })
        .collect();
    Tap::new(tap.p(), tasks).expect("rounding preserves validity")
}

pub fn task_type(task: &Task) -> Result<TaskType> {
    let i = task.sigma.log2_exact();
    let ij = task.pi.log2_exact();
    match (i, ij) {
        (Some(i), Some(ij)) if ij >= i => Ok(TaskType { j: ij - i, i }),
        _ => Err(Error::Contract(format!(
            "task {} works ({}, {}) are not powers of two",
            task.id, task.sigma, task.pi
        ))),
    }
}

/// Topological levels of a dependency DAG (0 for tasks without deps).
pub fn dependency_depths(tap: &Tap) -> BTreeMap<TaskId, usize> {
    let mut depth = BTreeMap::new();
    let mut pending: BTreeSet<TaskId> = tap.ids().collect();
    while !pending.is_empty() {
        let ready: Vec<TaskId> = pending
            .iter()
            .copied()
            .filter(|id| tap.task(*id).unwrap().deps.iter().all(|d| depth.contains_key(d)))
            .collect();
        for id in ready {
            let d = tap.task(id).unwrap().deps.iter().map(|d| depth[d] + 1).max().unwrap_or(0);
            depth.insert(id, d);
            pending.remove(&id);
        }
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use proptest::prelude::*;

    fn t(sigma: Rational, pi: Rational) -> Task {
        Task::new(0, sigma, pi, Rational::zero())
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_task(&t(q(2, 1), q(1, 1)), 4).unwrap();
        assert_eq!((n.sigma, n.pi), (q(1, 1), q(1, 1)));
        let n = normalize_task(&t(q(1, 1), q(8, 1)), 4).unwrap();
        assert_eq!((n.sigma, n.pi), (q(1, 1), q(4, 1)));
        let n = normalize_task(&t(q(1, 1), q(2, 1)), 4).unwrap();
        assert_eq!((n.sigma, n.pi), (q(1, 1), q(2, 1)));
        assert!(normalize_task(&t(q(0, 1), q(2, 1)), 4).is_err());
        assert!(normalize_task(&t(q(1, 1), q(-2, 1)), 4).is_err());
    }

    #[test]
    fn scale_examples() {
        let tap = Tap::new(4, vec![t(q(1, 1), q(2, 1))]).unwrap();
        assert_eq!(scale_tap(&tap, &q(1, 1)).unwrap(), tap);
        let s = scale_tap(&tap, &q(3, 1)).unwrap();
        assert_eq!((s.tasks()[0].sigma.clone(), s.tasks()[0].pi.clone()), (q(3, 1), q(6, 1)));
        assert!(matches!(scale_tap(&tap, &q(1, 2)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn round_examples() {
        let tap = Tap::new(8, vec![t(q(3, 1), q(5, 1)), Task::new(1, q(4, 1), q(4, 1), q(0, 1))]).unwrap();
        let r = round_pow2(&tap);
        assert_eq!((r.tasks()[0].sigma.clone(), r.tasks()[0].pi.clone()), (q(4, 1), q(8, 1)));
        assert_eq!(r.tasks()[1].sigma, q(4, 1));
        // p = 6 caps the ratio at 4 by growing sigma
        let tap = Tap::new(6, vec![t(q(1, 1), q(6, 1))]).unwrap();
        let r = round_pow2(&tap);
        assert_eq!((r.tasks()[0].sigma.clone(), r.tasks()[0].pi.clone()), (q(2, 1), q(8, 1)));
    }

    #[test]
    fn type_examples() {
        assert_eq!(task_type(&t(q(2, 1), q(16, 1))).unwrap(), TaskType { j: 3, i: 1 });
        assert_eq!(task_type(&t(q(1, 1), q(1, 1))).unwrap(), TaskType { j: 0, i: 0 });
        assert_eq!(task_type(&t(q(1, 2), q(4, 1))).unwrap(), TaskType { j: 3, i: -1 });
        assert!(task_type(&t(q(3, 1), q(4, 1))).is_err());
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(Tap::new(1, vec![]).is_err());
        let a = Task::new(0, q(1, 1), q(1, 1), q(0, 1)).with_deps(vec![1]);
        let b = Task::new(1, q(1, 1), q(1, 1), q(0, 1)).with_deps(vec![0]);
        let err = Tap::new(2, vec![a, b]).unwrap_err();
        assert!(err.to_string().contains("cyclic dependencies"));
        let dup = vec![t(q(1, 1), q(1, 1)), t(q(1, 1), q(1, 1))];
        assert!(Tap::new(2, dup).is_err());
        assert!(Tap::new(2, vec![t(q(1, 1), q(3, 1))]).is_err());
    }

    #[test]
    fn json_format_is_exact() {
        let a = Task::new(0, q(1, 1), q(3, 2), q(0, 1));
        let b = Task::new(1, q(1, 2), q(1, 1), q(1, 4)).with_deps(vec![0]);
        let tap = Tap::new(4, vec![a, b]).unwrap();
        let s = tap.to_json();
        assert_eq!(
            s,
            r#"{"version":1,"p":4,"tasks":[{"id":0,"sigma":"1","pi":"3/2","arrival":"0"},{"id":1,"sigma":"1/2","pi":"1","arrival":"1/4","deps":[0]}]}"#
        );
        assert_eq!(Tap::from_json(&s).unwrap(), tap);
        let unnormalized = r#"{"version":1,"p":4,"tasks":[{"id":0,"sigma":"2","pi":"1","arrival":"0"}]}"#;
        let tap = Tap::from_json(unnormalized).unwrap();
        assert_eq!(tap.tasks()[0].sigma, q(1, 1));
    }

    fn in_range_task() -> impl Strategy<Value = (i64, i64, i64)> {
        (1i64..20, 1i64..8, 1i64..5).prop_map(|(s, r, d)| (s, s * r, d))
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in 1i64..50, pi in 1i64..400, p in 2usize..16) {
            let once = normalize_task(&t(q(s, 3), q(pi, 5)), p).unwrap();
            let twice = normalize_task(&once, p).unwrap();
            prop_assert!(once.pi >= once.sigma);
            prop_assert!(once.pi <= &once.sigma * Rational::from(p));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn scale_commutes_with_normalize(tasks in prop::collection::vec(in_range_task(), 0..6), c in 1i64..7) {
            let p = 8;
            let raw: Vec<Task> = tasks
                .iter()
                .enumerate()
                .map(|(i, &(s, pi, d))| Task::new(i, q(s, d), q(pi, d), q(i as i64, 1)))
                .collect();
            let tap = Tap::normalized(p, raw).unwrap();
            let c = q(c, 2).max(Rational::one());
            let a = Tap::normalized(p, scale_tap(&tap, &c).unwrap().tasks().to_vec()).unwrap();
            let b = scale_tap(&Tap::normalized(p, tap.tasks().to_vec()).unwrap(), &c).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn rounding_grows_by_less_than_two(tasks in prop::collection::vec(in_range_task(), 1..6)) {
            let raw: Vec<Task> = tasks
                .iter()
                .enumerate()
                .map(|(i, &(s, pi, d))| Task::new(i, q(s, d), q(pi, d), Rational::zero()))
                .collect();
            let tap = Tap::normalized(16, raw).unwrap();
            let r = round_pow2(&tap);
            for (a, b) in tap.tasks().iter().zip(r.tasks()) {
                prop_assert!(b.sigma >= a.sigma && b.sigma < &a.sigma * q(2, 1));
                prop_assert!(b.pi <= &a.pi * q(2, 1));
                prop_assert!(task_type(b).is_ok());
            }
        }
    }
}
