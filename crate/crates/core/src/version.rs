//! Immutable Version objects, augmentation policies and the atomic slot that
//! publishes them.
//!
//! A [`Version`] is never mutated after construction. An internal Version
//! points at the two child Versions its summary was computed from, so reading
//! one root Version yields a consistent snapshot of everything below it.
//! Versions are reference counted; a reader that loaded a Version keeps its
//! entire subtree alive for as long as it holds the `Arc`.

use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use arc_swap::ArcSwap;

use crate::stats;

/// How a tree is augmented: an associative way to combine two child
/// summaries. Implementations must be pure.
pub trait Augmentation: Send + Sync + 'static {
    type Summary: Clone + PartialEq + fmt::Debug + Send + Sync + 'static;

    fn combine(&self, left: &Self::Summary, right: &Self::Summary) -> Self::Summary;

    /// Number of keys (with multiplicity) a summary accounts for. Order
    /// statistic queries are driven by this.
    fn count(&self, summary: &Self::Summary) -> u64;

    /// Summary of a subtree holding no keys.
    fn empty(&self) -> Self::Summary;
}

/// Leaf summaries for leaves identified by `Q` (a trie index or a BST key).
pub trait LeafSummary<Q>: Augmentation {
    /// Summary of a leaf holding `count` copies of `key` (0 means absent).
    fn leaf(&self, key: &Q, count: u64) -> Self::Summary;
}

/// Subtree key count. The default augmentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SumPolicy;

impl Augmentation for SumPolicy {
    type Summary = u64;

    #[inline]
    fn combine(&self, left: &u64, right: &u64) -> u64 {
        left + right
    }

    #[inline]
    fn count(&self, summary: &u64) -> u64 {
        *summary
    }

    fn empty(&self) -> u64 {
        0
    }
}

impl<Q> LeafSummary<Q> for SumPolicy {
    #[inline]
    fn leaf(&self, _key: &Q, count: u64) -> u64 {
        count
    }
}

/// Key count plus the smallest and largest key present in a subtree.
pub struct MinMaxPolicy<Q>(PhantomData<fn() -> Q>);

impl<Q> MinMaxPolicy<Q> {
    pub fn new() -> Self {
        MinMaxPolicy(PhantomData)
    }
}

impl<Q> Default for MinMaxPolicy<Q> {
    fn default() -> Self {
        Self::new()
    }
}

impl<Q> Clone for MinMaxPolicy<Q> {
    fn clone(&self) -> Self {
        Self::new()
    }
}

impl<Q> fmt::Debug for MinMaxPolicy<Q> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MinMaxPolicy")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinMax<Q> {
    pub count: u64,
    pub min: Option<Q>,
    pub max: Option<Q>,
}

impl<Q> Augmentation for MinMaxPolicy<Q>
where
    Q: Clone + Ord + fmt::Debug + Send + Sync + 'static,
{
    type Summary = MinMax<Q>;

    fn combine(&self, left: &MinMax<Q>, right: &MinMax<Q>) -> MinMax<Q> {
        let pick = |a: &Option<Q>, b: &Option<Q>, take_min: bool| match (a, b) {
            (Some(a), Some(b)) => Some(if take_min { a.min(b) } else { a.max(b) }.clone()),
            (Some(a), None) => Some(a.clone()),
            (None, b) => b.clone(),
        };
        MinMax {
            count: left.count + right.count,
            min: pick(&left.min, &right.min, true),
            max: pick(&left.max, &right.max, false),
        }
    }

    fn count(&self, summary: &MinMax<Q>) -> u64 {
        summary.count
    }

    fn empty(&self) -> MinMax<Q> {
        MinMax {
            count: 0,
            min: None,
            max: None,
        }
    }
}

impl<Q> LeafSummary<Q> for MinMaxPolicy<Q>
where
    Q: Clone + Ord + fmt::Debug + Send + Sync + 'static,
{
    fn leaf(&self, key: &Q, count: u64) -> MinMax<Q> {
        let present = (count > 0).then(|| key.clone());
        MinMax {
            count,
            min: present.clone(),
            max: present,
        }
    }
}

/// Immutable snapshot node.
///
/// `K` is the routing key (`()` in the trie, where routing is by index),
/// `S` the policy summary and `V` an optional per-leaf value for key-value
/// maps.
pub struct Version<K, S, V = ()> {
    key: K,
    summary: S,
    body: Body<K, S, V>,
}

enum Body<K, S, V> {
    Leaf(Option<V>),
    Internal(Arc<Version<K, S, V>>, Arc<Version<K, S, V>>),
}

impl<K, S, V> Version<K, S, V> {
    /// Childless Version whose summary is `policy.leaf(at, count)`.
    pub fn leaf<Q, P>(policy: &P, at: &Q, count: u64, key: K, value: Option<V>) -> Arc<Self>
    where
        P: LeafSummary<Q, Summary = S>,
    {
        stats::version_created();
        Arc::new(Version {
            key,
            summary: policy.leaf(at, count),
            body: Body::Leaf(value),
        })
    }

    /// Childless Version accounting for no keys.
    pub fn empty_leaf<P>(policy: &P, key: K) -> Arc<Self>
    where
        P: Augmentation<Summary = S>,
    {
        stats::version_created();
        Arc::new(Version {
            key,
            summary: policy.empty(),
            body: Body::Leaf(None),
        })
    }

    /// Version over two children with `summary = combine(left, right)`.
    pub fn internal<P>(policy: &P, left: Arc<Self>, right: Arc<Self>, key: K) -> Arc<Self>
    where
        P: Augmentation<Summary = S>,
    {
        stats::version_created();
        Arc::new(Version {
            key,
            summary: policy.combine(&left.summary, &right.summary),
            body: Body::Internal(left, right),
        })
    }

    #[inline]
    pub fn key(&self) -> &K {
        &self.key
    }

    #[inline]
    pub fn summary(&self) -> &S {
        &self.summary
    }

    #[inline]
    pub fn is_leaf(&self) -> bool {
        matches!(self.body, Body::Leaf(_))
    }

    #[inline]
    pub fn left(&self) -> Option<&Arc<Self>> {
        self.children().map(|(l, _)| l)
    }

    #[inline]
    pub fn right(&self) -> Option<&Arc<Self>> {
        self.children().map(|(_, r)| r)
    }

    #[inline]
    pub fn children(&self) -> Option<(&Arc<Self>, &Arc<Self>)> {
        match &self.body {
            Body::Internal(l, r) => Some((l, r)),
            Body::Leaf(_) => None,
        }
    }

    /// Leaf value (key-value variant); `None` for internal Versions.
    #[inline]
    pub fn value(&self) -> Option<&V> {
        match &self.body {
            Body::Leaf(v) => v.as_ref(),
            Body::Internal(..) => None,
        }
    }
}

impl<K, S, V> Drop for Version<K, S, V> {
    // Version trees of an unbalanced BST can be arbitrarily deep, so children
    // are released iteratively instead of through recursive drops.
    fn drop(&mut self) {
        let mut pending = Vec::new();
        if let Body::Internal(l, r) = std::mem::replace(&mut self.body, Body::Leaf(None)) {
            pending.push(l);
            pending.push(r);
        }
        while let Some(v) = pending.pop() {
            if let Some(mut owned) = Arc::into_inner(v) {
                if let Body::Internal(l, r) = std::mem::replace(&mut owned.body, Body::Leaf(None)) {
                    pending.push(l);
                    pending.push(r);
                }
            }
        }
    }
}

impl<K: fmt::Debug, S: fmt::Debug, V> fmt::Debug for Version<K, S, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Version");
        d.field("key", &self.key).field("summary", &self.summary);
        if let Some((l, r)) = self.children() {
            d.field("left", l).field("right", r);
        }
        d.finish()
    }
}

/// Atomically swappable reference to an immutable value.
///
/// The contents only change through [`VersionSlot::cas`]. Callers keep the
/// expected value alive (they hold its `Arc`) for the duration of the CAS, so
/// its address cannot be recycled underneath them; together with installing
/// only freshly allocated values this rules out ABA.
pub struct VersionSlot<T> {
    cell: ArcSwap<T>,
}

impl<T> VersionSlot<T> {
    pub fn new(initial: Arc<T>) -> Self {
        VersionSlot {
            cell: ArcSwap::new(initial),
        }
    }

    /// Current contents. The returned `Arc` and everything reachable from it
    /// stay valid until dropped.
    #[inline]
    pub fn load(&self) -> Arc<T> {
        stats::read();
        self.cell.load_full()
    }

    /// Replace the contents with `new` iff they are still `expected`
    /// (pointer identity). Returns whether the swap happened.
    #[inline]
    pub fn cas(&self, expected: &Arc<T>, new: Arc<T>) -> bool {
        let prev = self.cell.compare_and_swap(expected, new);
        let ok = Arc::ptr_eq(&prev, expected);
        stats::cas(ok);
        ok
    }

    /// Load without touching the step counters (verification walks).
    pub(crate) fn peek(&self) -> Arc<T> {
        self.cell.load_full()
    }
}

impl<T: fmt::Debug> fmt::Debug for VersionSlot<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("VersionSlot").field(&*self.cell.load()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Version<Option<u64>, u64>;

    fn leaf(count: u64, key: Option<u64>) -> Arc<V> {
        Version::leaf(&SumPolicy, &0u64, count, key, None)
    }

    #[test]
    fn leaf_versions() {
        let present = leaf(1, None);
        assert_eq!(*present.summary(), 1);
        assert!(present.is_leaf());
        assert!(present.left().is_none() && present.right().is_none());

        let absent = leaf(0, None);
        assert_eq!(*absent.summary(), 0);

        let keyed = leaf(1, Some(5));
        assert_eq!(*keyed.key(), Some(5));
        assert_eq!(*keyed.summary(), 1);
    }

    #[test]
    fn internal_versions_combine() {
        let three = Version::internal(&SumPolicy, leaf(1, None), {
            Version::internal(&SumPolicy, leaf(1, None), leaf(1, None), None)
        }, None);
        assert_eq!(*three.summary(), 3);
        assert_eq!(*three.left().unwrap().summary(), 1);
        assert_eq!(*three.right().unwrap().summary(), 2);

        let zero = Version::internal(&SumPolicy, leaf(0, None), leaf(0, None), None);
        assert_eq!(*zero.summary(), 0);

        let keyed = Version::internal(&SumPolicy, leaf(1, Some(1)), leaf(1, Some(2)), Some(2));
        assert_eq!(*keyed.key(), Some(2));
        assert_eq!(*keyed.summary(), 2);
        assert!(!keyed.is_leaf());
    }

    #[test]
    fn min_max_policy() {
        let p = MinMaxPolicy::<u64>::new();
        let a = p.leaf(&4, 1);
        let b = p.leaf(&9, 0);
        let c = p.leaf(&2, 2);
        let ab = p.combine(&a, &b);
        assert_eq!(ab, MinMax { count: 1, min: Some(4), max: Some(4) });
        let all = p.combine(&ab, &c);
        assert_eq!(all, MinMax { count: 3, min: Some(2), max: Some(4) });
        assert_eq!(p.combine(&a, &c), p.combine(&a, &c));
    }

    #[test]
    fn slot_read_and_cas() {
        let v0 = leaf(0, None);
        let slot = VersionSlot::new(v0.clone());
        assert!(Arc::ptr_eq(&slot.load(), &v0));

        let v1 = leaf(1, None);
        assert!(slot.cas(&v0, v1.clone()));
        assert!(Arc::ptr_eq(&slot.load(), &v1));

        // stale expectation fails and leaves the slot alone
        assert!(!slot.cas(&v0, leaf(2, None)));
        assert!(Arc::ptr_eq(&slot.load(), &v1));
    }

    #[test]
    fn racing_cas_same_expected_exactly_one_wins() {
        for _ in 0..200 {
            let v0 = leaf(0, None);
            let slot = Arc::new(VersionSlot::new(v0.clone()));
            let wins: usize = std::thread::scope(|s| {
                let hs: Vec<_> = (0..2)
                    .map(|i| {
                        let slot = &slot;
                        let v0 = v0.clone();
                        s.spawn(move || slot.cas(&v0, leaf(i + 1, None)) as usize)
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().unwrap()).sum()
            });
            assert_eq!(wins, 1);
        }
    }

    #[test]
    fn deep_chain_drops_without_overflow() {
        let mut v = leaf(0, None);
        for _ in 0..200_000 {
            v = Version::internal(&SumPolicy, v, leaf(1, None), None);
        }
        assert_eq!(*v.summary(), 200_000);
        drop(v);
    }
}
