//! Deterministic interleaving of test threads at pause points.
//!
//! Every thread of a [`Program`] runs on its own OS thread, but only one is
//! ever allowed to run: at each pause point the running thread consults a
//! [`Decider`] (under a lock) about who runs next. Continuing costs nothing;
//! switching hands control to the chosen thread and blocks the caller. Given
//! the same program and the same decisions, the execution and its history
//! are identical.
//!
//! Each thread's first decision point is the invocation of its first
//! operation; later operations park at [`Point::Invoke`].

use std::fmt::Write as _;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use super::checker::{self, Verdict};
use super::history::{Clock, History};
use super::subject::Subject;
use crate::oracle::{Op, Oracle, ParseError};
use crate::sched::{self, point, Point};
use crate::stats::{self, StepCounts};

/// Per-thread operation scripts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub threads: Vec<Vec<Op>>,
}

impl Program {
    pub fn new(threads: Vec<Vec<Op>>) -> Self {
        Program { threads }
    }

    pub fn op_count(&self) -> usize {
        self.threads.iter().map(Vec::len).sum()
    }
}

/// Run `thread` until it is parked at `point` again (at least one step), or
/// until it finishes when `point` is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub thread: usize,
    pub point: Option<Point>,
}

impl Step {
    pub fn to(thread: usize, point: Point) -> Step {
        Step {
            thread,
            point: Some(point),
        }
    }

    pub fn finish(thread: usize) -> Step {
        Step { thread, point: None }
    }
}

/// Steps in order. Text form: one `step thread point` line per step, with
/// `end` as the point of a run-to-completion step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    pub steps: Vec<Step>,
}

impl Schedule {
    pub fn new(steps: Vec<Step>) -> Self {
        Schedule { steps }
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (i, st) in self.steps.iter().enumerate() {
            let p = st.point.map_or("end", Point::label);
            let _ = writeln!(s, "{i} {} {p}", st.thread);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Schedule, ParseError> {
        let mut steps = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || ParseError(line.to_string());
            let tok: Vec<&str> = line.split_whitespace().collect();
            let [_, thread, p] = tok[..] else { return Err(bad()) };
            let thread = thread.parse().map_err(|_| bad())?;
            let point = match p {
                "end" => None,
                p => Some(p.parse().map_err(|_| bad())?),
            };
            steps.push(Step { thread, point });
        }
        Ok(Schedule { steps })
    }
}

/// State offered to a [`Decider`]: every unfinished thread with the point
/// it is parked at, and the thread that ran last.
#[derive(Debug)]
pub struct Decision<'a> {
    pub runnable: &'a [(usize, Point)],
    pub previous: Option<usize>,
}

impl Decision<'_> {
    pub fn is_runnable(&self, thread: usize) -> bool {
        self.runnable.iter().any(|&(t, _)| t == thread)
    }

    /// Keep running the previous thread if possible, else the lowest id.
    pub fn default_choice(&self) -> usize {
        match self.previous {
            Some(p) if self.is_runnable(p) => p,
            _ => self.runnable[0].0,
        }
    }
}

pub trait Decider: Send {
    /// Returns the id of a runnable thread.
    fn decide(&mut self, d: &Decision<'_>) -> usize;
}

/// Never preempts.
#[derive(Debug, Default)]
pub struct Sequential;

impl Decider for Sequential {
    fn decide(&mut self, d: &Decision<'_>) -> usize {
        d.default_choice()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("schedule step {index}: thread {thread} finished before reaching {point}")]
    Unreachable { index: usize, thread: usize, point: String },
    #[error("schedule step {index}: no thread {thread}")]
    NoThread { index: usize, thread: usize },
}

/// Follows a [`Schedule`], then falls back to [`Decision::default_choice`].
#[derive(Debug)]
pub struct ScheduleDecider {
    steps: Vec<Step>,
    index: usize,
    resumed: bool,
    error: Option<ScheduleError>,
}

impl ScheduleDecider {
    pub fn new(schedule: &Schedule) -> Self {
        ScheduleDecider {
            steps: schedule.steps.clone(),
            index: 0,
            resumed: false,
            error: None,
        }
    }

    fn fail(&mut self, err: ScheduleError) {
        self.error.get_or_insert(err);
        self.index = self.steps.len();
    }
}

impl Decider for ScheduleDecider {
    fn decide(&mut self, d: &Decision<'_>) -> usize {
        while let Some(&step) = self.steps.get(self.index) {
            let pending = d.runnable.iter().find(|&&(t, _)| t == step.thread).map(|&(_, p)| p);
            if self.resumed {
                // `step.thread` ran last and has parked or finished.
                let reached = match (step.point, pending) {
                    (Some(want), Some(at)) => want == at,
                    (None, None) => true,
                    (Some(want), None) => {
                        self.fail(ScheduleError::Unreachable {
                            index: self.index,
                            thread: step.thread,
                            point: want.to_string(),
                        });
                        continue;
                    }
                    (None, Some(_)) => false,
                };
                if reached {
                    self.index += 1;
                    self.resumed = false;
                    continue;
                }
                return step.thread;
            }
            if pending.is_some() {
                self.resumed = true;
                return step.thread;
            }
            match step.point {
                // already finished
                None => self.index += 1,
                Some(want) => self.fail(ScheduleError::Unreachable {
                    index: self.index,
                    thread: step.thread,
                    point: want.to_string(),
                }),
            }
        }
        d.default_choice()
    }
}

/// Everything observed in one scheduled execution.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub history: History,
    /// Steps in execution order: the thread and the point it moved past.
    pub trace: Vec<(usize, Point)>,
    /// Step counters of each operation, per thread.
    pub op_steps: Vec<Vec<StepCounts>>,
}

/// Executions longer than this are assumed to livelock.
pub const STEP_LIMIT: usize = 1_000_000;

struct Ctl<D> {
    decider: D,
    parked: Vec<Option<Point>>,
    registered: usize,
    current: Option<usize>,
    trace: Vec<(usize, Point)>,
    done: bool,
    overrun: bool,
}

impl<D: Decider> Ctl<D> {
    /// Chooses and records the next thread to run.
    fn pick(&mut self, previous: Option<usize>) {
        let runnable: Vec<(usize, Point)> = self
            .parked
            .iter()
            .enumerate()
            .filter_map(|(t, p)| p.map(|p| (t, p)))
            .collect();
        if runnable.is_empty() {
            self.current = None;
            self.done = true;
            return;
        }
        let t = self.decider.decide(&Decision {
            runnable: &runnable,
            previous,
        });
        let p = self.parked[t].take().expect("decider chose a runnable thread");
        self.trace.push((t, p));
        self.current = Some(t);
    }
}

struct Shared<D> {
    ctl: Mutex<Ctl<D>>,
    cv: Condvar,
}

impl<D: Decider> Shared<D> {
    fn lock(&self) -> MutexGuard<'_, Ctl<D>> {
        self.ctl.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wait_turn<'a>(&self, mut g: MutexGuard<'a, Ctl<D>>, t: usize) -> MutexGuard<'a, Ctl<D>> {
        while g.current != Some(t) {
            g = self.cv.wait(g).unwrap_or_else(|e| e.into_inner());
        }
        g
    }

    fn park(&self, t: usize, p: Point) {
        let mut g = self.lock();
        if g.trace.len() >= STEP_LIMIT && !g.overrun {
            // Unwinds this thread; the others run to completion.
            g.overrun = true;
            drop(g);
            panic!("execution exceeded {STEP_LIMIT} steps");
        }
        g.parked[t] = Some(p);
        g.pick(Some(t));
        if g.current != Some(t) {
            self.cv.notify_all();
            drop(self.wait_turn(g, t));
        }
    }
}

/// Marks its thread finished and hands control on, even when unwinding.
struct Finish<D: Decider> {
    shared: Arc<Shared<D>>,
    thread: usize,
}

impl<D: Decider> Drop for Finish<D> {
    fn drop(&mut self) {
        let mut g = self.shared.lock();
        g.parked[self.thread] = None;
        g.pick(Some(self.thread));
        self.shared.cv.notify_all();
    }
}

/// Runs `program` against `subject`, consulting `decider` at every pause
/// point. Returns the outcome and the decider.
pub fn run_with<S, D>(subject: &S, program: &Program, decider: D) -> (RunOutcome, D)
where
    S: Subject,
    D: Decider + 'static,
{
    let n = program.threads.len();
    let shared = Arc::new(Shared {
        ctl: Mutex::new(Ctl {
            decider,
            parked: vec![None; n],
            registered: 0,
            current: None,
            trace: Vec::new(),
            done: false,
            overrun: false,
        }),
        cv: Condvar::new(),
    });
    let clock = Clock::new();
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = program
            .threads
            .iter()
            .enumerate()
            .map(|(t, ops)| {
                let shared = shared.clone();
                let mut log = clock.log(t);
                scope.spawn(move || {
                    let mut steps = Vec::with_capacity(ops.len());
                    {
                        let mut g = shared.lock();
                        g.registered += 1;
                        if ops.is_empty() {
                            shared.cv.notify_all();
                            return (log, steps);
                        }
                        g.parked[t] = Some(Point::Invoke);
                        shared.cv.notify_all();
                        drop(shared.wait_turn(g, t));
                    }
                    let finish = Finish {
                        shared: shared.clone(),
                        thread: t,
                    };
                    let hook_shared = shared.clone();
                    sched::set_hook(move |p| hook_shared.park(t, p));
                    for (i, op) in ops.iter().enumerate() {
                        if i > 0 {
                            point(Point::Invoke);
                        }
                        let before = stats::snapshot();
                        log.record(*op, |op| subject.apply(op));
                        steps.push(stats::snapshot() - before);
                    }
                    sched::clear_hook();
                    drop(finish);
                    (log, steps)
                })
            })
            .collect();
        {
            let mut g = shared.lock();
            while g.registered < n {
                g = shared.cv.wait(g).unwrap_or_else(|e| e.into_inner());
            }
            g.pick(None);
            shared.cv.notify_all();
            while !g.done {
                g = shared.cv.wait(g).unwrap_or_else(|e| e.into_inner());
            }
        }
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect::<Vec<_>>()
    });
    let (logs, op_steps): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let ctl = Arc::try_unwrap(shared)
        .ok()
        .expect("all threads joined")
        .ctl
        .into_inner()
        .unwrap_or_else(|e| e.into_inner());
    let outcome = RunOutcome {
        history: History::merge(logs),
        trace: ctl.trace,
        op_steps,
    };
    (outcome, ctl.decider)
}

/// Runs `program` following `schedule`; once the schedule is used up the
/// running thread continues, then the lowest-numbered unfinished thread.
pub fn run_schedule<S: Subject>(subject: &S, program: &Program, schedule: &Schedule) -> Result<RunOutcome, ScheduleError> {
    for (index, s) in schedule.steps.iter().enumerate() {
        if s.thread >= program.threads.len() {
            return Err(ScheduleError::NoThread { index, thread: s.thread });
        }
    }
    let (outcome, mut decider) = run_with(subject, program, ScheduleDecider::new(schedule));
    // Every thread finished; any remaining step that waits for a point
    // could not be reached.
    if let Some((index, step)) = decider.steps.iter().enumerate().skip(decider.index).find(|(_, s)| s.point.is_some()) {
        let err = ScheduleError::Unreachable {
            index,
            thread: step.thread,
            point: step.point.map(|p| p.to_string()).unwrap_or_default(),
        };
        decider.fail(err);
    }
    match decider.error {
        Some(e) => Err(e),
        None => Ok(outcome),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreConfig {
    /// Maximum number of preemptions (switching away from a thread that
    /// could have continued) per execution; `None` explores everything.
    pub preemption_bound: Option<usize>,
    /// Stop after this many executions.
    pub max_executions: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            preemption_bound: None,
            max_executions: usize::MAX,
        }
    }
}

/// A history the checker did not accept, with the schedule that produced it.
#[derive(Clone, Debug)]
pub struct Rejection {
    pub schedule: Schedule,
    pub history: History,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Exploration {
    pub executions: usize,
    /// True when every schedule within the bound was run.
    pub complete: bool,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug)]
struct Choice {
    /// Runnable threads, default choice first.
    options: Vec<usize>,
    chosen: usize,
    /// Whether the previous thread could have continued.
    preemptible: bool,
}

/// Replays a prefix of choices, then takes default choices, recording all.
#[derive(Debug, Default)]
struct DfsDecider {
    prefix: Vec<usize>,
    record: Vec<Choice>,
}

impl Decider for DfsDecider {
    fn decide(&mut self, d: &Decision<'_>) -> usize {
        let default = d.default_choice();
        let mut options = vec![default];
        options.extend(d.runnable.iter().map(|&(t, _)| t).filter(|&t| t != default));
        let i = self.record.len();
        let chosen = self.prefix.get(i).copied().unwrap_or(0);
        assert!(chosen < options.len(), "replay diverged at decision {i}");
        let t = options[chosen];
        self.record.push(Choice {
            options,
            chosen,
            preemptible: d.previous.is_some_and(|p| d.is_runnable(p)),
        });
        t
    }
}

/// Next choice prefix in depth-first order, or `None` when exhausted.
fn next_prefix(record: &[Choice], bound: Option<usize>) -> Option<Vec<usize>> {
    let cost = |c: &Choice, pos: usize| (c.preemptible && pos > 0) as usize;
    let used: Vec<usize> = record
        .iter()
        .scan(0, |acc, c| {
            let before = *acc;
            *acc += cost(c, c.chosen);
            Some(before)
        })
        .collect();
    for i in (0..record.len()).rev() {
        let c = &record[i];
        let next = c.chosen + 1;
        if next < c.options.len() && bound.is_none_or(|b| used[i] + cost(c, next) <= b) {
            let mut prefix: Vec<usize> = record[..i].iter().map(|c| c.chosen).collect();
            prefix.push(next);
            return Some(prefix);
        }
    }
    None
}

/// Depth-first enumeration of the schedules of `program`. Each execution
/// starts from a fresh subject built by `make` (holding the contents of
/// `initial`) and its history is checked against `initial`, with the final
/// contents as the required end state.
pub fn explore<S, F>(make: F, initial: &Oracle, program: &Program, config: ExploreConfig) -> Exploration
where
    S: Subject,
    F: Fn() -> S,
{
    let mut out = Exploration::default();
    let mut prefix = Vec::new();
    loop {
        if out.executions >= config.max_executions {
            return out;
        }
        let subject = make();
        let (outcome, decider) = run_with(
            &subject,
            program,
            DfsDecider {
                prefix,
                record: Vec::new(),
            },
        );
        out.executions += 1;
        let last = subject.contents();
        let reason = match checker::check(&outcome.history, initial, Some(&last)) {
            Ok(Verdict::Accept { .. }) => None,
            Ok(Verdict::Reject { deepest }) => Some(format!("no linearization; longest valid prefix {deepest:?}")),
            Err(e) => Some(e.to_string()),
        };
        if let Some(reason) = reason {
            out.rejections.push(Rejection {
                schedule: schedule_of(&outcome.trace),
                history: outcome.history,
                reason,
            });
        }
        match next_prefix(&decider.record, config.preemption_bound) {
            Some(p) => prefix = p,
            None => {
                out.complete = true;
                return out;
            }
        }
    }
}

/// A schedule reproducing `trace`: one step per executed point.
pub fn schedule_of(trace: &[(usize, Point)]) -> Schedule {
    // Step i resumes the thread that moved past trace[i] and stops it where
    // it parks next, which is the point of its following trace entry.
    let mut steps = Vec::new();
    for (i, &(t, _)) in trace.iter().enumerate() {
        let next = trace[i + 1..].iter().find(|&&(u, _)| u == t).map(|&(_, p)| p);
        steps.push(Step { thread: t, point: next });
    }
    Schedule { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Mode, OpResult};
    use crate::trie::SetTrie;

    #[test]
    fn one_thread_matches_direct_calls() {
        let program = Program::new(vec![vec![Op::Insert(1), Op::Insert(1), Op::Find(1), Op::Size]]);
        let t = SetTrie::new(4).unwrap();
        let out = run_schedule(&t, &program, &Schedule::default()).unwrap();
        let results: Vec<_> = out.history.operations().unwrap().into_iter().map(|o| o.result).collect();
        let direct = SetTrie::new(4).unwrap();
        let expected: Vec<_> = program.threads[0].iter().map(|op| direct.apply(op)).collect();
        assert_eq!(results, expected);
        assert_eq!(results[1], OpResult::Bool(false));
    }

    #[test]
    fn single_thread_has_one_schedule() {
        let program = Program::new(vec![vec![Op::Insert(1), Op::Delete(1)]]);
        let init = Oracle::new(Mode::Set);
        let ex = explore(|| SetTrie::new(4).unwrap(), &init, &program, ExploreConfig::default());
        assert!(ex.complete);
        assert_eq!(ex.executions, 1);
        assert!(ex.rejections.is_empty());
    }

    #[test]
    fn schedule_text_round_trip() {
        let s = Schedule::new(vec![Step::to(1, Point::CasRefresh), Step::finish(0)]);
        assert_eq!(s.dump(), "0 1 cas-refresh\n1 0 end\n");
        assert_eq!(Schedule::parse(&s.dump()).unwrap(), s);
        assert!(Schedule::parse("0 1 nowhere").is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let program = Program::new(vec![vec![Op::Insert(2), Op::Size], vec![Op::Insert(3), Op::Delete(2)]]);
        let sched = Schedule::new(vec![
            Step::to(0, Point::ReadOld),
            Step::to(1, Point::CasRefresh),
            Step::to(0, Point::ReadRight),
        ]);
        let a = run_schedule(&SetTrie::new(4).unwrap(), &program, &sched).unwrap();
        let b = run_schedule(&SetTrie::new(4).unwrap(), &program, &sched).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn recorded_trace_replays() {
        let program = Program::new(vec![vec![Op::Insert(2)], vec![Op::Insert(3)]]);
        let sched = Schedule::new(vec![Step::to(0, Point::ReadLeft), Step::to(1, Point::CasRefresh)]);
        let a = run_schedule(&SetTrie::new(4).unwrap(), &program, &sched).unwrap();
        let replay = schedule_of(&a.trace);
        let b = run_schedule(&SetTrie::new(4).unwrap(), &program, &replay).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn unreachable_step_is_reported() {
        let program = Program::new(vec![vec![Op::Find(1)]]);
        let sched = Schedule::new(vec![Step::to(0, Point::CasRefresh)]);
        let err = run_schedule(&SetTrie::new(4).unwrap(), &program, &sched).unwrap_err();
        assert!(matches!(err, ScheduleError::Unreachable { index: 0, .. }));
    }

    #[test]
    fn racing_inserts_one_winner_everywhere() {
        let program = Program::new(vec![vec![Op::Insert(1)], vec![Op::Insert(1)]]);
        let init = Oracle::new(Mode::Set);
        let ex = explore(|| SetTrie::new(2).unwrap(), &init, &program, ExploreConfig::default());
        assert!(ex.complete);
        assert!(ex.executions > 1);
        assert!(ex.rejections.is_empty(), "{:?}", ex.rejections.first());
    }
}
