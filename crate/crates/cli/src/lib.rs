//! Workload driver behind `augtree-stress`.
//!
//! Runs a seeded random mix of operations from one or more threads against
//! one structure, optionally sweeping invariants every 100 operations or
//! checking the recorded history, and reports `key=value` metrics.
//!
//! Keys ending in `_ms` or `_per_sec` depend on timing; every other key is
//! a function of the configuration alone when `--threads 1 --ops N` is used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use augtree::bst::{Bst, FastBst};
use augtree::lincheck::{check, Clock, History, Operation, Subject, ThreadLog, MAX_OPS};
use augtree::oracle::{Mode, Op, OpResult, Oracle};
use augtree::stats::{self, StepCounts};
use augtree::trie::{FastTrie, KvTrie, MultisetTrie, SetTrie};
use clap::{Parser, ValueEnum};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Structure {
    Trie,
    TrieFast,
    Bst,
    BstFast,
    Multiset,
    Kv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckLevel {
    None,
    Invariants,
    Linearizability,
}

/// Operation mix in percent: `insert:delete:find:select:range`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mix {
    pub insert: u32,
    pub delete: u32,
    pub find: u32,
    pub select: u32,
    pub range: u32,
}

impl Default for Mix {
    fn default() -> Self {
        Mix {
            insert: 25,
            delete: 25,
            find: 20,
            select: 15,
            range: 15,
        }
    }
}

impl FromStr for Mix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<u32> = s
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| format!("bad mix component {p:?}")))
            .collect::<Result<_, _>>()?;
        let [insert, delete, find, select, range] = parts[..] else {
            return Err("mix needs five components insert:delete:find:select:range".into());
        };
        if parts.iter().sum::<u32>() != 100 {
            return Err(format!("mix {s} does not sum to 100"));
        }
        Ok(Mix {
            insert,
            delete,
            find,
            select,
            range,
        })
    }
}

impl std::fmt::Display for Mix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}:{}:{}", self.insert, self.delete, self.find, self.select, self.range)
    }
}

#[derive(Clone, Debug, Parser)]
#[command(name = "augtree-stress", about = "Stress and step-count driver for augmented concurrent trees")]
pub struct Config {
    #[arg(long, value_enum)]
    pub structure: Structure,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Total operations, split evenly over the threads.
    #[arg(long, conflicts_with = "duration")]
    pub ops: Option<u64>,
    /// Run for a fixed time instead, e.g. `2s` or `500ms`.
    #[arg(long, value_parser = humantime::parse_duration)]
    pub duration: Option<Duration>,
    /// Keys are drawn from `0..universe`; a power of two for trie structures.
    #[arg(long, default_value_t = 1024)]
    pub universe: u64,
    #[arg(long, default_value_t = Mix::default())]
    pub mix: Mix,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CheckLevel::None)]
    pub check: CheckLevel,
    /// Write the recorded history in the line format read by `History::parse`.
    #[arg(long)]
    pub history_out: Option<std::path::PathBuf>,
}

/// Operations run when neither `--ops` nor `--duration` is given.
pub const DEFAULT_OPS: u64 = 10_000;

/// Sweep cadence in completed operations.
pub const SWEEP_EVERY: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Threads,
    Universe(String),
    LinearizabilityNeedsOps,
    Io(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Threads => write!(f, "--threads must be at least 1"),
            ConfigError::Universe(e) => write!(f, "invalid --universe: {e}"),
            ConfigError::LinearizabilityNeedsOps => write!(f, "--check linearizability needs --ops"),
            ConfigError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Metrics in output order, plus the failures of enabled checks.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub metrics: Vec<(String, String)>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metrics.push((key.into(), value.to_string()));
    }

    /// One `key=value` line per metric.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

enum Target {
    Trie(SetTrie),
    TrieFast(FastTrie),
    Bst(Bst<u64>),
    BstFast(FastBst<u64>),
    Multiset(MultisetTrie),
    Kv(KvTrie<u64>),
}

impl Target {
    fn new(structure: Structure, universe: u64) -> Result<Target, ConfigError> {
        let bad = |e: augtree::trie::TrieError| ConfigError::Universe(e.to_string());
        Ok(match structure {
            Structure::Trie => Target::Trie(SetTrie::new(universe).map_err(bad)?),
            Structure::TrieFast => Target::TrieFast(FastTrie::new(universe).map_err(bad)?),
            Structure::Multiset => Target::Multiset(MultisetTrie::new(universe).map_err(bad)?),
            Structure::Kv => Target::Kv(KvTrie::new(universe).map_err(bad)?),
            Structure::Bst | Structure::BstFast if universe == 0 => {
                return Err(ConfigError::Universe("must be positive".into()))
            }
            Structure::Bst => Target::Bst(Bst::new()),
            Structure::BstFast => Target::BstFast(FastBst::new()),
        })
    }

    fn subject(&self) -> &dyn Subject {
        match self {
            Target::Trie(t) => t,
            Target::TrieFast(t) => t,
            Target::Bst(t) => t,
            Target::BstFast(t) => t,
            Target::Multiset(t) => t,
            Target::Kv(t) => t,
        }
    }

    /// Invariant sweep over the current state, safe under concurrent updates.
    fn sweep(&self) -> Result<(), String> {
        let e = |e: &dyn std::fmt::Display| e.to_string();
        match self {
            Target::Trie(t) => t.verify().map_err(|x| e(&x)),
            Target::TrieFast(t) => t.verify().map_err(|x| e(&x)),
            Target::Multiset(t) => t.verify().map_err(|x| e(&x)),
            Target::Kv(t) => t.verify().map_err(|x| e(&x)),
            Target::Bst(t) => t.verify_snapshot().map_err(|x| e(&x)),
            Target::BstFast(t) => t.verify_snapshot().map_err(|x| e(&x)),
        }
    }

    /// Full check once all updates have finished.
    fn sweep_quiescent(&self) -> Result<(), String> {
        match self {
            Target::Bst(t) => t.verify_quiescent().map_err(|x| x.to_string()),
            Target::BstFast(t) => t.verify_quiescent().map_err(|x| x.to_string()),
            _ => self.sweep(),
        }
    }
}

fn random_op(rng: &mut StdRng, mode: Mode, mix: &Mix, universe: u64) -> Op {
    let k = rng.random_range(0..universe);
    let roll = rng.random_range(0..100);
    let map = mode == Mode::Map;
    if roll < mix.insert {
        if !map {
            Op::Insert(k)
        } else if rng.random_bool(0.5) {
            Op::Replace(k, rng.random_range(0..1_000_000))
        } else {
            Op::Assign(k, rng.random_range(0..1_000_000))
        }
    } else if roll < mix.insert + mix.delete {
        if map {
            Op::Remove(k)
        } else {
            Op::Delete(k)
        }
    } else if roll < mix.insert + mix.delete + mix.find {
        if map {
            Op::Get(k)
        } else {
            Op::Find(k)
        }
    } else if roll < 100 - mix.range {
        Op::Select(rng.random_range(1..=universe / 2 + 1))
    } else {
        let hi = (k + rng.random_range(0..=universe / 16)).min(universe - 1);
        if rng.random_bool(0.5) {
            Op::RangeCount(k, hi)
        } else {
            Op::RangeCollect(k, hi)
        }
    }
}

/// Per-kind tallies of one worker.
#[derive(Default)]
struct Tally {
    count: BTreeMap<&'static str, u64>,
    /// Operations returning `true` or a present key/value.
    hits: BTreeMap<&'static str, u64>,
}

impl Tally {
    fn add(&mut self, op: &Op, result: &OpResult) {
        *self.count.entry(op.name()).or_default() += 1;
        let hit = match result {
            OpResult::Bool(b) => *b,
            OpResult::Key(k) => k.is_some(),
            OpResult::Value(v) => v.is_some(),
            _ => false,
        };
        if hit {
            *self.hits.entry(op.name()).or_default() += 1;
        }
    }

    fn merge(&mut self, other: Tally) {
        for (k, v) in other.count {
            *self.count.entry(k).or_default() += v;
        }
        for (k, v) in other.hits {
            *self.hits.entry(k).or_default() += v;
        }
    }
}

/// Split of `total` operations over `threads` workers.
fn share(total: u64, threads: usize, t: usize) -> u64 {
    let n = threads as u64;
    total / n + u64::from((t as u64) < total % n)
}

/// Necessary condition on any linearization of a large history: each key's
/// final state follows from the net effect of the updates that succeeded.
pub fn net_effect_check(ops: &[Operation], last: &Oracle) -> Result<(), String> {
    let mode = last.mode();
    let mut net: BTreeMap<u64, i64> = BTreeMap::new();
    let mut written: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for o in ops {
        match (o.op, &o.result) {
            (Op::Insert(k), OpResult::Bool(true)) => *net.entry(k).or_default() += 1,
            (Op::Delete(k), OpResult::Bool(true)) => *net.entry(k).or_default() -= 1,
            (Op::Replace(k, v) | Op::Assign(k, v), _) => written.entry(k).or_default().push(v),
            _ => {}
        }
    }
    match mode {
        Mode::Set | Mode::Multiset => {
            for (&k, &n) in &net {
                let have = last.entries().get(&k).copied().unwrap_or(0) as i64;
                if n != have || n < 0 || (mode == Mode::Set && n > 1) {
                    return Err(format!("key {k}: net effect {n}, final count {have}"));
                }
            }
            if let Some((k, _)) = last.entries().iter().find(|(k, _)| !net.contains_key(k)) {
                return Err(format!("key {k} present but never inserted"));
            }
        }
        Mode::Map => {
            for (k, v) in last.entries() {
                if !written.get(k).is_some_and(|w| w.contains(v)) {
                    return Err(format!("key {k} holds {v}, which was never written"));
                }
            }
        }
    }
    Ok(())
}

/// Runs the configured workload.
pub fn run(cfg: &Config) -> Result<Report, ConfigError> {
    if cfg.threads == 0 {
        return Err(ConfigError::Threads);
    }
    if cfg.check == CheckLevel::Linearizability && cfg.ops.is_none() {
        return Err(ConfigError::LinearizabilityNeedsOps);
    }
    let target = Target::new(cfg.structure, cfg.universe)?;
    let subject = target.subject();
    let mode = subject.mode();
    let record = cfg.check == CheckLevel::Linearizability || cfg.history_out.is_some();
    let sweeping = cfg.check == CheckLevel::Invariants;
    let total = match (cfg.ops, cfg.duration) {
        (Some(n), _) => Some(n),
        (None, None) => Some(DEFAULT_OPS),
        (None, Some(_)) => None,
    };

    let clock = Clock::new();
    let done = AtomicU64::new(0);
    let sweeps = AtomicU64::new(0);
    let violations = AtomicU64::new(0);
    let first_violation = Mutex::new(None::<String>);
    let start = Instant::now();
    let deadline = cfg.duration.map(|d| start + d);

    let results: Vec<(Tally, StepCounts, Option<ThreadLog>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.threads)
            .map(|t| {
                let (target, clock, done, sweeps, violations, first_violation) =
                    (&target, &clock, &done, &sweeps, &violations, &first_violation);
                scope.spawn(move || {
                    let mut rng = StdRng::seed_from_u64(cfg.seed.wrapping_add((t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
                    let mut log = record.then(|| clock.log(t));
                    let mut tally = Tally::default();
                    let before = stats::snapshot();
                    let quota = total.map(|n| share(n, cfg.threads, t));
                    let mut ran = 0;
                    loop {
                        if quota.is_some_and(|q| ran >= q) || deadline.is_some_and(|d| Instant::now() >= d) {
                            break;
                        }
                        let op = random_op(&mut rng, mode, &cfg.mix, cfg.universe);
                        let result = match &mut log {
                            Some(log) => log.record(op, |op| subject.apply(op)),
                            None => subject.apply(&op),
                        };
                        tally.add(&op, &result);
                        ran += 1;
                        if sweeping && (done.fetch_add(1, Ordering::Relaxed) + 1) % SWEEP_EVERY == 0 {
                            sweeps.fetch_add(1, Ordering::Relaxed);
                            if let Err(e) = target.sweep() {
                                violations.fetch_add(1, Ordering::Relaxed);
                                first_violation.lock().unwrap().get_or_insert(e);
                            }
                        }
                    }
                    (tally, stats::snapshot() - before, log)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let elapsed = start.elapsed();

    let mut tally = Tally::default();
    let mut steps = StepCounts::default();
    let mut logs = Vec::new();
    for (t, s, log) in results {
        tally.merge(t);
        steps = steps.merge(&s);
        logs.extend(log);
    }
    let ops: u64 = tally.count.values().sum();

    let mut report = Report::default();
    report.put("structure", format!("{:?}", cfg.structure).to_lowercase());
    report.put("threads", cfg.threads);
    report.put("seed", cfg.seed);
    report.put("universe", cfg.universe);
    report.put("mix", cfg.mix);
    report.put("check", format!("{:?}", cfg.check).to_lowercase());
    report.put("ops", ops);
    for (kind, n) in &tally.count {
        report.put(format!("op_{kind}"), n);
        report.put(format!("op_{kind}_hits"), tally.hits.get(kind).copied().unwrap_or(0));
    }
    report.put("reads", steps.reads);
    report.put("cas_attempts", steps.cas_attempts);
    report.put("cas_successes", steps.cas_successes);
    report.put("refresh_rereads", steps.refresh_rereads);
    report.put("query_visits", steps.query_visits);
    report.put("versions_created", steps.versions_created);
    report.put("rbt_nodes_created", steps.rbt_nodes_created);
    if matches!(cfg.structure, Structure::TrieFast | Structure::BstFast) {
        report.put("max_join_size", steps.max_join_size);
    }
    report.put("final_size", subject.contents().size());

    if sweeping {
        let mut v = violations.into_inner();
        let mut first = first_violation.into_inner().unwrap();
        if let Err(e) = target.sweep_quiescent() {
            v += 1;
            first.get_or_insert(e);
        }
        report.put("invariant_sweeps", sweeps.into_inner() + 1);
        report.put("invariant_violations", v);
        if let Some(e) = first {
            report.failures.push(format!("invariant violation: {e}"));
        }
    }

    if record {
        let history = History::merge(logs);
        if let Some(path) = &cfg.history_out {
            std::fs::write(path, history.dump()).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        }
        if cfg.check == CheckLevel::Linearizability {
            let last = subject.contents();
            let operations = history.operations().expect("recorded histories are well formed");
            let (kind, verdict) = if operations.len() <= MAX_OPS {
                let v = check(&history, &Oracle::new(mode), Some(&last)).expect("history within bound");
                ("full", v.is_accept().then_some(()).ok_or_else(|| "no valid linearization".to_string()))
            } else {
                ("net-effect", net_effect_check(&operations, &last))
            };
            report.put("lin_check", kind);
            report.put("lin_result", if verdict.is_ok() { "accept" } else { "reject" });
            if let Err(e) = verdict {
                report.failures.push(format!("linearizability: {e}"));
            }
        }
    }

    let secs = elapsed.as_secs_f64().max(1e-9);
    report.put("elapsed_ms", format!("{:.3}", secs * 1e3));
    report.put("ops_per_sec", format!("{:.0}", ops as f64 / secs));
    for (kind, n) in &tally.count {
        report.put(format!("op_{kind}_per_sec"), format!("{:.0}", *n as f64 / secs));
    }
    report.put("result", if report.passed() { "pass" } else { "fail" });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_parsing() {
        assert_eq!("25:25:20:15:15".parse::<Mix>().unwrap(), Mix::default());
        assert!("50:50:0:0".parse::<Mix>().is_err());
        assert!("50:50:10:0:0".parse::<Mix>().is_err());
        assert_eq!(Mix::default().to_string(), "25:25:20:15:15");
    }

    #[test]
    fn ops_split_evenly() {
        let parts: Vec<u64> = (0..3).map(|t| share(10, 3, t)).collect();
        assert_eq!(parts, [4, 3, 3]);
    }

    #[test]
    fn generated_ops_respect_mode_and_range() {
        let mut rng = StdRng::seed_from_u64(1);
        let mix = Mix::default();
        for _ in 0..1000 {
            match random_op(&mut rng, Mode::Map, &mix, 16) {
                Op::Insert(_) | Op::Delete(_) | Op::Find(_) => panic!("set op in map mode"),
                Op::RangeCount(lo, hi) | Op::RangeCollect(lo, hi) => assert!(lo <= hi && hi < 16),
                _ => {}
            }
        }
    }

    #[test]
    fn net_effect_detects_phantom_key() {
        let op = |op, result| Operation {
            thread: 0,
            op,
            result,
            invoked: 0,
            responded: 1,
        };
        let ops = [op(Op::Insert(1), OpResult::Bool(true)), op(Op::Insert(1), OpResult::Bool(false))];
        assert!(net_effect_check(&ops, &Oracle::from_keys(Mode::Set, [1])).is_ok());
        assert!(net_effect_check(&ops, &Oracle::from_keys(Mode::Set, [1, 2])).is_err());
        assert!(net_effect_check(&ops, &Oracle::new(Mode::Set)).is_err());
    }
}
