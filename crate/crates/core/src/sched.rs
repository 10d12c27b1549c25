//! Cooperative pause points.
//!
//! The data structures call [`point`] just before executing each labelled
//! step. With the `sched` feature a thread may install a hook that runs at
//! every point; the deterministic scheduler in [`crate::lincheck`] uses this
//! to serialize threads. Without the feature [`point`] compiles to nothing.

use std::fmt;
use std::str::FromStr;

/// A labelled step in one of the algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    /// Before an operation starts (the scheduler records the invocation here).
    Invoke,
    /// Query: read of the root slot.
    ReadRoot,
    // Trie updates.
    ReadOldIns,
    CasIns,
    ReadOldDel,
    CasDel,
    /// Multiset / key-value leaf read and leaf CAS.
    ReadLeaf,
    CasLeaf,
    // Trie refresh.
    ReadOld,
    ReadLeft,
    ReadRight,
    CasRefresh,
    // BST search and coordination.
    ReadChild,
    Flag,
    Flagged,
    Mark,
    ChildCas,
    Unflag,
    // BST refresh.
    BstReadOld,
    ReadLeftChild,
    ReadLeftVersion,
    RecheckLeft,
    ReadRightChild,
    ReadRightVersion,
    RecheckRight,
    BstCasRefresh,
}

impl Point {
    pub const ALL: [Point; 26] = [
        Point::Invoke,
        Point::ReadRoot,
        Point::ReadOldIns,
        Point::CasIns,
        Point::ReadOldDel,
        Point::CasDel,
        Point::ReadLeaf,
        Point::CasLeaf,
        Point::ReadOld,
        Point::ReadLeft,
        Point::ReadRight,
        Point::CasRefresh,
        Point::ReadChild,
        Point::Flag,
        Point::Flagged,
        Point::Mark,
        Point::ChildCas,
        Point::Unflag,
        Point::BstReadOld,
        Point::ReadLeftChild,
        Point::ReadLeftVersion,
        Point::RecheckLeft,
        Point::ReadRightChild,
        Point::ReadRightVersion,
        Point::RecheckRight,
        Point::BstCasRefresh,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Point::Invoke => "invoke",
            Point::ReadRoot => "read-root",
            Point::ReadOldIns => "read-old-ins",
            Point::CasIns => "cas-ins",
            Point::ReadOldDel => "read-old-del",
            Point::CasDel => "cas-del",
            Point::ReadLeaf => "read-leaf",
            Point::CasLeaf => "cas-leaf",
            Point::ReadOld => "read-old",
            Point::ReadLeft => "read-left",
            Point::ReadRight => "read-right",
            Point::CasRefresh => "cas-refresh",
            Point::ReadChild => "read-child",
            Point::Flag => "flag",
            Point::Flagged => "flagged",
            Point::Mark => "mark",
            Point::ChildCas => "child-cas",
            Point::Unflag => "unflag",
            Point::BstReadOld => "bst-read-old",
            Point::ReadLeftChild => "read-left-child",
            Point::ReadLeftVersion => "read-left-version",
            Point::RecheckLeft => "recheck-left",
            Point::ReadRightChild => "read-right-child",
            Point::ReadRightVersion => "read-right-version",
            Point::RecheckRight => "recheck-right",
            Point::BstCasRefresh => "bst-cas-refresh",
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown pause point `{0}`")]
pub struct UnknownPoint(pub String);

impl FromStr for Point {
    type Err = UnknownPoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Point::ALL
            .iter()
            .copied()
            .find(|p| p.label() == s)
            .ok_or_else(|| UnknownPoint(s.to_string()))
    }
}

/// True when pause points are compiled in.
pub const ENABLED: bool = cfg!(feature = "sched");

#[cfg(feature = "sched")]
mod imp {
    use super::Point;
    use std::cell::RefCell;

    type Hook = Box<dyn FnMut(Point)>;

    thread_local! {
        static HOOK: RefCell<Option<Hook>> = const { RefCell::new(None) };
    }

    #[inline]
    pub fn point(p: Point) {
        // The hook is taken out while it runs so it may itself touch the
        // data structure without re-entering.
        let hook = HOOK.with(|h| h.borrow_mut().take());
        if let Some(mut hook) = hook {
            hook(p);
            HOOK.with(|h| {
                let mut slot = h.borrow_mut();
                if slot.is_none() {
                    *slot = Some(hook);
                }
            });
        }
    }

    pub fn set_hook(f: impl FnMut(Point) + 'static) {
        HOOK.with(|h| *h.borrow_mut() = Some(Box::new(f)));
    }

    pub fn clear_hook() {
        HOOK.with(|h| *h.borrow_mut() = None);
    }
}

#[cfg(not(feature = "sched"))]
mod imp {
    use super::Point;

    #[inline(always)]
    pub fn point(_p: Point) {}

    pub fn set_hook(_f: impl FnMut(Point) + 'static) {}

    pub fn clear_hook() {}
}

/// Pause point; runs the calling thread's hook if one is installed.
#[inline(always)]
pub fn point(p: Point) {
    imp::point(p)
}

/// Install a hook for the calling thread, replacing any previous one.
/// A no-op unless the `sched` feature is enabled.
pub fn set_hook(f: impl FnMut(Point) + 'static) {
    imp::set_hook(f)
}

pub fn clear_hook() {
    imp::clear_hook()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for p in Point::ALL {
            assert_eq!(p.label().parse::<Point>().unwrap(), p);
        }
        assert!("nope".parse::<Point>().is_err());
    }
}
