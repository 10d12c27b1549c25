//! Uniform `Op`-level access to every structure, for the scheduler, the
//! checker and the stress driver.

use crate::bst::{Bst, BstRepr};
use crate::oracle::{Mode, Op, OpResult, Oracle};
use crate::query::OrderedSnapshot;
use crate::trie::{KvTrie, Multiset, Set, Trie, TrieRepr};

/// A structure driven through [`Op`]s with `u64` keys.
pub trait Subject: Send + Sync {
    fn mode(&self) -> Mode;

    /// Runs one operation. Panics on operations outside the structure's
    /// mode or key range; callers generate valid operations.
    fn apply(&self, op: &Op) -> OpResult;

    /// Current contents. Only meaningful when no update is running.
    fn contents(&self) -> Oracle;
}

fn query<S: OrderedSnapshot<u64>>(s: &S, op: &Op) -> Option<OpResult> {
    use OpResult::*;
    Some(match *op {
        Op::Find(k) => Bool(s.find(&k)),
        Op::Select(j) => Key(s.select(j)),
        Op::Rank(x) => Count(s.rank(&x)),
        Op::Predecessor(x) => Key(s.predecessor(&x)),
        Op::Successor(x) => Key(s.successor(&x)),
        Op::Minimum => Key(s.minimum()),
        Op::Maximum => Key(s.maximum()),
        Op::RangeCount(lo, hi) => Count(s.range_count(&lo, &hi)),
        Op::RangeCollect(lo, hi) => Keys(s.range_collect(&lo, &hi)),
        Op::Size => Count(s.size()),
        _ => return None,
    })
}

fn unsupported(op: &Op, mode: Mode) -> ! {
    panic!("{} is not supported in {mode:?} mode", op.name())
}

impl<R: TrieRepr> Subject for Trie<R, Set> {
    fn mode(&self) -> Mode {
        Mode::Set
    }

    fn apply(&self, op: &Op) -> OpResult {
        match *op {
            Op::Insert(k) => OpResult::Bool(self.insert(k).expect("key in universe")),
            Op::Delete(k) => OpResult::Bool(self.delete(k).expect("key in universe")),
            _ => query(&self.snapshot(), op).unwrap_or_else(|| unsupported(op, Mode::Set)),
        }
    }

    fn contents(&self) -> Oracle {
        let keys = self.snapshot().range_collect(&0, &(self.universe() - 1));
        Oracle::from_keys(Mode::Set, keys)
    }
}

impl<R: TrieRepr> Subject for Trie<R, Multiset> {
    fn mode(&self) -> Mode {
        Mode::Multiset
    }

    fn apply(&self, op: &Op) -> OpResult {
        match *op {
            Op::Insert(k) => OpResult::Bool(self.insert(k).expect("key in universe")),
            Op::Delete(k) => OpResult::Bool(self.delete(k).expect("key in universe")),
            _ => query(&self.snapshot(), op).unwrap_or_else(|| unsupported(op, Mode::Multiset)),
        }
    }

    fn contents(&self) -> Oracle {
        let keys = self.snapshot().range_collect(&0, &(self.universe() - 1));
        Oracle::from_keys(Mode::Multiset, keys)
    }
}

impl Subject for KvTrie<u64> {
    fn mode(&self) -> Mode {
        Mode::Map
    }

    fn apply(&self, op: &Op) -> OpResult {
        match *op {
            Op::Replace(k, v) => OpResult::Value(self.replace(k, v).expect("key in universe")),
            Op::Assign(k, v) => {
                self.assign(k, v).expect("key in universe");
                OpResult::Unit
            }
            Op::Remove(k) => OpResult::Value(self.remove(k).expect("key in universe")),
            Op::Get(k) => OpResult::Value(self.get(k).expect("key in universe")),
            _ => query(&self.snapshot(), op).unwrap_or_else(|| unsupported(op, Mode::Map)),
        }
    }

    fn contents(&self) -> Oracle {
        let snap = self.snapshot();
        let entries = snap
            .entries()
            .into_iter()
            .map(|(k, _)| (k, *snap.get(k).expect("present key has a value")));
        Oracle::from_entries(Mode::Map, entries)
    }
}

impl<R: BstRepr<u64>> Subject for Bst<u64, R> {
    fn mode(&self) -> Mode {
        Mode::Set
    }

    fn apply(&self, op: &Op) -> OpResult {
        match *op {
            Op::Insert(k) => OpResult::Bool(self.insert(k)),
            Op::Delete(k) => OpResult::Bool(self.delete(&k)),
            _ => query(&self.snapshot(), op).unwrap_or_else(|| unsupported(op, Mode::Set)),
        }
    }

    fn contents(&self) -> Oracle {
        Oracle::from_keys(Mode::Set, self.snapshot().range_collect(&0, &u64::MAX))
    }
}
