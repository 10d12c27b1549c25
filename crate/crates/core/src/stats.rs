//! Per-thread step counters.
//!
//! Counting is compiled in only with the `stats` feature; without it every
//! hook is an empty inline function and [`snapshot`] returns zeros. Counters
//! are thread-local so a single operation's cost can be measured by diffing
//! two snapshots taken on the calling thread, even while other threads run.
//!
//! Counting convention: a *shared read* is a load of a mutable shared
//! location (a version slot, a child pointer, an update word) or, inside a
//! query, the visit of one immutable Version or RBT node. Summaries of
//! Versions an update has just loaded from a slot are treated as part of that
//! load.

use std::ops::Sub;

/// Snapshot of the calling thread's counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub reads: u64,
    pub cas_attempts: u64,
    pub cas_successes: u64,
    /// Extra iterations of the consistent child/version re-read loop.
    pub refresh_rereads: u64,
    /// Versions or RBT nodes reached by a query.
    pub query_visits: u64,
    /// Deepest Version/RBT level reached by a query (max over queries).
    pub max_query_depth: u64,
    pub versions_created: u64,
    pub rbt_nodes_created: u64,
    /// Largest tree (in keys) produced by a join.
    pub max_join_size: u64,
    /// BST updates: depth of the leaf reached by each update's first search,
    /// summed over updates.
    pub search_depth: u64,
}

impl StepCounts {
    /// Component-wise sum; `max_*` fields take the maximum.
    pub fn merge(&self, other: &StepCounts) -> StepCounts {
        StepCounts {
            reads: self.reads + other.reads,
            cas_attempts: self.cas_attempts + other.cas_attempts,
            cas_successes: self.cas_successes + other.cas_successes,
            refresh_rereads: self.refresh_rereads + other.refresh_rereads,
            query_visits: self.query_visits + other.query_visits,
            max_query_depth: self.max_query_depth.max(other.max_query_depth),
            versions_created: self.versions_created + other.versions_created,
            rbt_nodes_created: self.rbt_nodes_created + other.rbt_nodes_created,
            max_join_size: self.max_join_size.max(other.max_join_size),
            search_depth: self.search_depth + other.search_depth,
        }
    }
}

impl Sub for StepCounts {
    type Output = StepCounts;

    /// Difference of two snapshots; `max_*` fields keep the later value.
    fn sub(self, earlier: StepCounts) -> StepCounts {
        StepCounts {
            reads: self.reads - earlier.reads,
            cas_attempts: self.cas_attempts - earlier.cas_attempts,
            cas_successes: self.cas_successes - earlier.cas_successes,
            refresh_rereads: self.refresh_rereads - earlier.refresh_rereads,
            query_visits: self.query_visits - earlier.query_visits,
            max_query_depth: self.max_query_depth,
            versions_created: self.versions_created - earlier.versions_created,
            rbt_nodes_created: self.rbt_nodes_created - earlier.rbt_nodes_created,
            max_join_size: self.max_join_size,
            search_depth: self.search_depth - earlier.search_depth,
        }
    }
}

/// True when the crate was built with counting enabled.
pub const ENABLED: bool = cfg!(feature = "stats");

#[cfg(feature = "stats")]
mod imp {
    use super::StepCounts;
    use std::cell::Cell;

    thread_local! {
        static COUNTS: Cell<StepCounts> = const { Cell::new(StepCounts {
            reads: 0,
            cas_attempts: 0,
            cas_successes: 0,
            refresh_rereads: 0,
            query_visits: 0,
            max_query_depth: 0,
            versions_created: 0,
            rbt_nodes_created: 0,
            max_join_size: 0,
            search_depth: 0,
        }) };
    }

    #[inline]
    pub fn update(f: impl FnOnce(&mut StepCounts)) {
        COUNTS.with(|c| {
            let mut v = c.get();
            f(&mut v);
            c.set(v);
        });
    }

    pub fn snapshot() -> StepCounts {
        COUNTS.with(|c| c.get())
    }

    pub fn reset() {
        COUNTS.with(|c| c.set(StepCounts::default()));
    }
}

#[cfg(not(feature = "stats"))]
mod imp {
    use super::StepCounts;

    #[inline(always)]
    pub fn update(_f: impl FnOnce(&mut StepCounts)) {}

    pub fn snapshot() -> StepCounts {
        StepCounts::default()
    }

    pub fn reset() {}
}

/// Counters of the calling thread.
pub fn snapshot() -> StepCounts {
    imp::snapshot()
}

/// Zero the calling thread's counters.
pub fn reset() {
    imp::reset()
}

#[inline(always)]
pub(crate) fn read() {
    imp::update(|c| c.reads += 1);
}

#[inline(always)]
pub(crate) fn cas(success: bool) {
    imp::update(|c| {
        c.cas_attempts += 1;
        c.cas_successes += success as u64;
    });
}

#[inline(always)]
pub(crate) fn reread() {
    imp::update(|c| c.refresh_rereads += 1);
}

#[inline(always)]
pub(crate) fn visit() {
    imp::update(|c| c.query_visits += 1);
}

#[inline(always)]
pub(crate) fn query_depth(depth: u64) {
    imp::update(|c| c.max_query_depth = c.max_query_depth.max(depth));
}

#[inline(always)]
pub(crate) fn version_created() {
    imp::update(|c| c.versions_created += 1);
}

#[inline(always)]
pub(crate) fn rbt_node_created() {
    imp::update(|c| c.rbt_nodes_created += 1);
}

#[inline(always)]
pub(crate) fn join_size(keys: u64) {
    imp::update(|c| c.max_join_size = c.max_join_size.max(keys));
}

#[inline(always)]
pub(crate) fn search_depth(depth: u64) {
    imp::update(|c| c.search_depth += depth);
}
