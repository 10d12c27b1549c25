//! Concurrent histories: recording, pairing and the text dump format.
//!
//! One record per line: `seq thread kind op args result`, for example
//! `3 1 invoke insert 5 -` and `4 1 respond insert 5 true`. `args` is a comma
//! separated list or `-`; `result` is `-` on invocations.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::oracle::{Op, OpResult, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Invoke,
    Respond,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub thread: usize,
    pub kind: EventKind,
    pub op: Op,
    /// Present on responses only.
    pub result: Option<OpResult>,
}

/// A completed operation extracted from a history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub thread: usize,
    pub op: Op,
    pub result: OpResult,
    pub invoked: u64,
    pub responded: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("sequence numbers not strictly increasing at {0}")]
    Order(u64),
    #[error("thread {thread}: {kind:?} at {seq} does not alternate")]
    Alternation { thread: usize, kind: EventKind, seq: u64 },
    #[error("thread {thread}: response at {seq} does not match its invocation")]
    Mismatch { thread: usize, seq: u64 },
    #[error("thread {0} has a pending invocation")]
    Pending(usize),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: ParseError,
    },
}

/// Events ordered by sequence number.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct History {
    pub events: Vec<Event>,
}

impl History {
    /// Merges per-thread logs into one history.
    pub fn merge(logs: impl IntoIterator<Item = ThreadLog>) -> History {
        let mut events: Vec<Event> = logs.into_iter().flat_map(|l| l.events).collect();
        events.sort_by_key(|e| e.seq);
        History { events }
    }

    /// Pairs invocations with responses, checking per-thread alternation.
    pub fn operations(&self) -> Result<Vec<Operation>, HistoryError> {
        let mut open: Vec<Option<&Event>> = Vec::new();
        let mut out = Vec::new();
        let mut last = None;
        for e in &self.events {
            if last.is_some_and(|l| e.seq <= l) {
                return Err(HistoryError::Order(e.seq));
            }
            last = Some(e.seq);
            if open.len() <= e.thread {
                open.resize(e.thread + 1, None);
            }
            let alternation = HistoryError::Alternation {
                thread: e.thread,
                kind: e.kind,
                seq: e.seq,
            };
            match (e.kind, open[e.thread].take()) {
                (EventKind::Invoke, None) => open[e.thread] = Some(e),
                (EventKind::Respond, Some(inv)) => {
                    let Some(result) = e.result.clone() else {
                        return Err(alternation);
                    };
                    if inv.op != e.op {
                        return Err(HistoryError::Mismatch {
                            thread: e.thread,
                            seq: e.seq,
                        });
                    }
                    out.push(Operation {
                        thread: e.thread,
                        op: e.op,
                        result,
                        invoked: inv.seq,
                        responded: e.seq,
                    });
                }
                _ => return Err(alternation),
            }
        }
        if let Some(t) = open.iter().position(Option::is_some) {
            return Err(HistoryError::Pending(t));
        }
        out.sort_by_key(|o| o.invoked);
        Ok(out)
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            let kind = match e.kind {
                EventKind::Invoke => "invoke",
                EventKind::Respond => "respond",
            };
            let result = e.result.as_ref().map_or("-".to_string(), ToString::to_string);
            let _ = writeln!(s, "{} {} {} {} {}", e.seq, e.thread, kind, e.op, result);
        }
        s
    }

    pub fn parse(text: &str) -> Result<History, HistoryError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |source| HistoryError::Parse { line: i + 1, source };
            let bad = || err(ParseError(line.to_string()));
            let tok: Vec<&str> = line.split_whitespace().collect();
            let [seq, thread, kind, name, args, result] = tok[..] else {
                return Err(bad());
            };
            let op = Op::parse(name, args).map_err(err)?;
            let kind = match kind {
                "invoke" => EventKind::Invoke,
                "respond" => EventKind::Respond,
                _ => return Err(bad()),
            };
            let result = match (kind, result) {
                (EventKind::Invoke, "-") => None,
                (EventKind::Respond, r) => Some(op.parse_result(r).map_err(err)?),
                _ => return Err(bad()),
            };
            events.push(Event {
                seq: seq.parse().map_err(|_| bad())?,
                thread: thread.parse().map_err(|_| bad())?,
                kind,
                op,
                result,
            });
        }
        Ok(History { events })
    }
}

/// Shared sequence-number source for one recording.
#[derive(Clone, Debug, Default)]
pub struct Clock(Arc<AtomicU64>);

impl Clock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn log(&self, thread: usize) -> ThreadLog {
        ThreadLog {
            thread,
            clock: self.clone(),
            events: Vec::new(),
        }
    }

    fn tick(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst)
    }
}

/// Events of one thread; owned by that thread while it records.
#[derive(Debug)]
pub struct ThreadLog {
    thread: usize,
    clock: Clock,
    events: Vec<Event>,
}

impl ThreadLog {
    pub fn invoke(&mut self, op: Op) {
        let seq = self.clock.tick();
        self.events.push(Event {
            seq,
            thread: self.thread,
            kind: EventKind::Invoke,
            op,
            result: None,
        });
    }

    pub fn respond(&mut self, op: Op, result: OpResult) {
        let seq = self.clock.tick();
        self.events.push(Event {
            seq,
            thread: self.thread,
            kind: EventKind::Respond,
            op,
            result: Some(result),
        });
    }

    /// Records `op` around `f`.
    pub fn record(&mut self, op: Op, f: impl FnOnce(&Op) -> OpResult) -> OpResult {
        self.invoke(op);
        let r = f(&op);
        self.respond(op, r.clone());
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_and_round_trip() {
        let clock = Clock::new();
        let mut a = clock.log(0);
        let mut b = clock.log(1);
        a.invoke(Op::Insert(5));
        b.record(Op::RangeCollect(0, 9), |_| OpResult::Keys(vec![]));
        a.respond(Op::Insert(5), OpResult::Bool(true));
        let h = History::merge([a, b]);
        let text = h.dump();
        assert!(text.starts_with("0 0 invoke insert 5 -\n"));
        assert_eq!(History::parse(&text).unwrap(), h);
        let ops = h.operations().unwrap();
        assert_eq!(ops.len(), 2);
        assert_eq!((ops[0].invoked, ops[0].responded), (0, 3));
    }

    #[test]
    fn rejects_malformed() {
        let h = History::parse("0 0 respond find 1 true\n").unwrap();
        assert!(matches!(h.operations(), Err(HistoryError::Alternation { .. })));
        let h = History::parse("0 0 invoke find 1 -\n").unwrap();
        assert_eq!(h.operations(), Err(HistoryError::Pending(0)));
        assert!(History::parse("0 0 invoke find").is_err());
    }
}
