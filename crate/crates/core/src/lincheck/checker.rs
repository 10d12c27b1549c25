//! Wing–Gong linearizability search with memoization on
//! `(linearized set, model state)`.

use std::collections::HashSet;

use super::history::{History, HistoryError, Operation};
use crate::oracle::Oracle;

/// Largest history the exhaustive search accepts.
pub const MAX_OPS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Indices into the operation list in a valid linearization order.
    Accept { order: Vec<usize> },
    /// No valid order; `deepest` is the longest prefix that replayed.
    Reject { deepest: Vec<usize> },
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("{0} operations exceed the search bound of {MAX_OPS}")]
    TooManyOps(usize),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// Checks a recorded history starting from `initial`. With `last` given, the
/// linearization must also end in exactly that state.
pub fn check(history: &History, initial: &Oracle, last: Option<&Oracle>) -> Result<Verdict, CheckError> {
    let ops = history.operations()?;
    check_operations(&ops, initial, last)
}

pub fn check_operations(ops: &[Operation], initial: &Oracle, last: Option<&Oracle>) -> Result<Verdict, CheckError> {
    if ops.len() > MAX_OPS {
        return Err(CheckError::TooManyOps(ops.len()));
    }
    // before[i]: operations that responded before i was invoked.
    let before: Vec<u32> = ops
        .iter()
        .map(|a| {
            ops.iter()
                .enumerate()
                .filter(|(_, b)| b.responded < a.invoked)
                .fold(0, |m, (j, _)| m | 1 << j)
        })
        .collect();
    let mut search = Search {
        ops,
        before,
        last,
        failed: HashSet::new(),
        order: Vec::new(),
        deepest: Vec::new(),
    };
    Ok(if search.dfs(0, initial.clone()) {
        Verdict::Accept { order: search.order }
    } else {
        Verdict::Reject {
            deepest: search.deepest,
        }
    })
}

struct Search<'a> {
    ops: &'a [Operation],
    before: Vec<u32>,
    last: Option<&'a Oracle>,
    failed: HashSet<(u32, Oracle)>,
    order: Vec<usize>,
    deepest: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, done: u32, state: Oracle) -> bool {
        if self.order.len() > self.deepest.len() {
            self.deepest = self.order.clone();
        }
        let full = (1u32 << self.ops.len()) - 1;
        if done == full {
            return self.last.is_none_or(|l| *l == state);
        }
        if self.failed.contains(&(done, state.clone())) {
            return false;
        }
        for i in 0..self.ops.len() {
            let bit = 1 << i;
            if done & bit != 0 || self.before[i] & !done != 0 {
                continue;
            }
            let mut next = state.clone();
            if next.apply(&self.ops[i].op) != self.ops[i].result {
                continue;
            }
            self.order.push(i);
            if self.dfs(done | bit, next) {
                return true;
            }
            self.order.pop();
        }
        self.failed.insert((done, state));
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Mode, Op, OpResult};

    fn op(thread: usize, op: Op, result: OpResult, invoked: u64, responded: u64) -> Operation {
        Operation {
            thread,
            op,
            result,
            invoked,
            responded,
        }
    }

    #[test]
    fn sequential_history_accepts() {
        let ops = [
            op(0, Op::Insert(3), OpResult::Bool(true), 0, 1),
            op(0, Op::Find(3), OpResult::Bool(true), 2, 3),
            op(0, Op::Delete(3), OpResult::Bool(true), 4, 5),
        ];
        let v = check_operations(&ops, &Oracle::new(Mode::Set), None).unwrap();
        assert_eq!(v, Verdict::Accept { order: vec![0, 1, 2] });
    }

    #[test]
    fn overlapping_double_insert_rejects() {
        let ops = [
            op(0, Op::Insert(3), OpResult::Bool(true), 0, 2),
            op(1, Op::Insert(3), OpResult::Bool(true), 1, 3),
        ];
        let v = check_operations(&ops, &Oracle::new(Mode::Set), None).unwrap();
        assert!(!v.is_accept());
    }

    #[test]
    fn overlap_allows_reordering() {
        // find returns true although it was invoked first
        let ops = [
            op(0, Op::Find(3), OpResult::Bool(true), 0, 3),
            op(1, Op::Insert(3), OpResult::Bool(true), 1, 2),
        ];
        let v = check_operations(&ops, &Oracle::new(Mode::Set), None).unwrap();
        assert_eq!(v, Verdict::Accept { order: vec![1, 0] });
        // but not when the find finished before the insert started
        let ops = [
            op(0, Op::Find(3), OpResult::Bool(true), 0, 1),
            op(1, Op::Insert(3), OpResult::Bool(true), 2, 3),
        ];
        assert!(!check_operations(&ops, &Oracle::new(Mode::Set), None).unwrap().is_accept());
    }

    #[test]
    fn final_state_constraint() {
        let ops = [op(0, Op::Insert(1), OpResult::Bool(true), 0, 1)];
        let init = Oracle::new(Mode::Set);
        let good = Oracle::from_keys(Mode::Set, [1]);
        let bad = Oracle::from_keys(Mode::Set, [2]);
        assert!(check_operations(&ops, &init, Some(&good)).unwrap().is_accept());
        assert!(!check_operations(&ops, &init, Some(&bad)).unwrap().is_accept());
    }

    #[test]
    fn bound_enforced() {
        let ops: Vec<_> = (0..11).map(|i| op(0, Op::Size, OpResult::Count(0), 2 * i, 2 * i + 1)).collect();
        assert_eq!(
            check_operations(&ops, &Oracle::new(Mode::Set), None),
            Err(CheckError::TooManyOps(11))
        );
    }
}
