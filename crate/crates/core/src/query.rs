//! Order-statistic queries over an immutable snapshot.
//!
//! The descent code is written once against [`Cursor`], a read-only view of a
//! leaf-oriented tree where every internal node splits its keys into
//! `left < split <= right`. The trie routes by index arithmetic, the BST by the
//! key stored in each Version; both provide a cursor.
//!
//! Conventions: `rank(x)` counts keys `<= x`, `predecessor(x)` is the largest
//! key `< x`, `successor(x)` the smallest key `> x`. Ranks are 1-based.

use crate::stats;

/// Queries answerable from one snapshot. Implemented by the snapshot types of
/// every structure in the crate.
pub trait OrderedSnapshot<K> {
    /// Number of keys (with multiplicity in the multiset variant).
    fn size(&self) -> u64;
    fn find(&self, key: &K) -> bool;
    /// The `j`-th smallest key, `None` when `j == 0` or `j > size()`.
    fn select(&self, j: u64) -> Option<K>;
    fn rank(&self, x: &K) -> u64;
    fn predecessor(&self, x: &K) -> Option<K>;
    fn successor(&self, x: &K) -> Option<K>;
    fn minimum(&self) -> Option<K>;
    fn maximum(&self) -> Option<K>;
    /// Keys in `[lo, hi]`; 0 when `lo > hi`.
    fn range_count(&self, lo: &K, hi: &K) -> u64;
    /// Keys in `[lo, hi]` in ascending order.
    fn range_collect(&self, lo: &K, hi: &K) -> Vec<K>;
}

/// Read-only position in a leaf-oriented tree.
pub(crate) trait Cursor: Sized {
    type Key: Ord + Clone;

    fn count(&self) -> u64;
    fn children(&self) -> Option<(Self, Self)>;
    /// Whether `x` belongs to the right subtree of this internal node.
    fn goes_right(&self, x: &Self::Key) -> bool;
    /// Key of a leaf; `None` for sentinel leaves.
    fn leaf_key(&self) -> Option<Self::Key>;
}

#[inline]
fn visit() {
    stats::read();
    stats::visit();
}

pub(crate) fn size<C: Cursor>(root: &C) -> u64 {
    visit();
    root.count()
}

pub(crate) fn find<C: Cursor>(root: C, x: &C::Key) -> bool {
    let mut c = root;
    let mut depth = 0;
    visit();
    while let Some((l, r)) = c.children() {
        c = if c.goes_right(x) { r } else { l };
        visit();
        depth += 1;
    }
    stats::query_depth(depth);
    c.count() > 0 && c.leaf_key().as_ref() == Some(x)
}

pub(crate) fn select<C: Cursor>(root: C, mut j: u64) -> Option<C::Key> {
    visit();
    if j == 0 || root.count() < j {
        return None;
    }
    let mut c = root;
    let mut depth = 0;
    while let Some((l, r)) = c.children() {
        visit();
        let in_left = l.count();
        if in_left >= j {
            c = l;
        } else {
            j -= in_left;
            visit();
            c = r;
        }
        depth += 1;
    }
    stats::query_depth(depth);
    c.leaf_key()
}

/// Number of keys `<= x` (`inclusive`) or `< x`.
fn rank_impl<C: Cursor>(root: C, x: &C::Key, inclusive: bool) -> u64 {
    let mut acc = 0;
    let mut c = root;
    let mut depth = 0;
    visit();
    while let Some((l, r)) = c.children() {
        if c.goes_right(x) {
            visit();
            acc += l.count();
            c = r;
        } else {
            c = l;
        }
        visit();
        depth += 1;
    }
    stats::query_depth(depth);
    if let Some(k) = c.leaf_key() {
        if k < *x || (inclusive && k == *x) {
            acc += c.count();
        }
    }
    acc
}

pub(crate) fn rank<C: Cursor>(root: C, x: &C::Key) -> u64 {
    rank_impl(root, x, true)
}

pub(crate) fn rank_below<C: Cursor>(root: C, x: &C::Key) -> u64 {
    rank_impl(root, x, false)
}

pub(crate) fn predecessor<C: Cursor + Clone>(root: C, x: &C::Key) -> Option<C::Key> {
    match rank_below(root.clone(), x) {
        0 => None,
        r => select(root, r),
    }
}

pub(crate) fn successor<C: Cursor + Clone>(root: C, x: &C::Key) -> Option<C::Key> {
    let r = rank(root.clone(), x);
    if r >= root.count() {
        None
    } else {
        select(root, r + 1)
    }
}

pub(crate) fn range_count<C: Cursor + Clone>(root: C, lo: &C::Key, hi: &C::Key) -> u64 {
    if lo > hi {
        return 0;
    }
    rank(root.clone(), hi) - rank_below(root, lo)
}

/// Collects keys in `[lo, hi]`, skipping subtrees that are empty or lie
/// outside the range. Iterative because BST Version trees may be deep.
pub(crate) fn range_collect<C: Cursor>(root: C, lo: &C::Key, hi: &C::Key) -> Vec<C::Key> {
    let mut out = Vec::new();
    if lo > hi {
        return out;
    }
    let mut stack = vec![root];
    while let Some(c) = stack.pop() {
        visit();
        let n = c.count();
        if n == 0 {
            continue;
        }
        match c.children() {
            None => {
                if let Some(k) = c.leaf_key() {
                    if *lo <= k && k <= *hi {
                        out.extend(std::iter::repeat_n(k, n as usize));
                    }
                }
            }
            Some((l, r)) => {
                if c.goes_right(hi) {
                    stack.push(r);
                }
                if !c.goes_right(lo) {
                    stack.push(l);
                }
            }
        }
    }
    out
}
