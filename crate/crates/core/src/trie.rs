//! Wait-free augmented static trie over the universe `0..N`.
//!
//! The node tree is a perfect binary tree stored as an array of version
//! slots: slot 1 is the root, slot `i` has children `2i` and `2i + 1`, and the
//! leaf for key `k` is slot `N + k`. An update changes its leaf slot with one
//! CAS and then propagates towards the root, performing a double refresh at
//! every ancestor. Queries read the root slot once and run sequential code on
//! the immutable tree they got back.
//!
//! Three modes share the machinery: sets ([`Set`]), multisets ([`Multiset`],
//! lock-free leaf counters) and key-value maps ([`KeyValue`]).

use std::fmt;
use std::marker::PhantomData;
use std::sync::Arc;

use crate::query::{self, Cursor, OrderedSnapshot};
use crate::rbt::{self, Rbt};
use crate::sched::{point, Point};
use crate::version::{Augmentation, LeafSummary, SumPolicy, Version, VersionSlot};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrieError {
    #[error("universe size {0} is not a power of two >= 2")]
    InvalidUniverse(u64),
    #[error("key {key} outside universe 0..{universe}")]
    KeyOutOfRange { key: u64, universe: u64 },
    #[error("empty range: {lo} > {hi}")]
    InvalidRange { lo: u64, hi: u64 },
}

/// A structural invariant found broken by a verification walk.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("slot {slot}: Version tree is not perfect with {leaves} leaves")]
    Shape { slot: usize, leaves: u64 },
    #[error("slot {slot}: summary differs from the combination of its children")]
    Summary { slot: usize },
    #[error("slot {slot}: {source}")]
    Rbt {
        slot: usize,
        #[source]
        source: rbt::RbtViolation,
    },
    #[error("slot {slot}: key {key} outside the slot's key interval")]
    KeyRange { slot: usize, key: u64 },
}

/// What a trie slot holds and how a refresh builds a parent value.
pub trait TrieRepr: Send + Sync + 'static {
    type Version: Send + Sync + 'static;
    type Value: Clone + Send + Sync + 'static;
    type Snapshot: OrderedSnapshot<u64>;

    /// Fresh leaf value for key `index` holding `count` copies.
    fn leaf(&self, index: u64, count: u64, value: Option<Self::Value>) -> Arc<Self::Version>;

    /// Fresh parent value computed from the two children.
    fn combine(&self, left: &Arc<Self::Version>, right: &Arc<Self::Version>) -> Arc<Self::Version>;

    /// Initial value of an internal slot; defaults to [`TrieRepr::combine`].
    fn initial_internal(&self, left: &Arc<Self::Version>, right: &Arc<Self::Version>) -> Arc<Self::Version> {
        self.combine(left, right)
    }

    /// Initial value of a leaf slot; defaults to an empty leaf.
    fn initial_leaf(&self, index: u64) -> Arc<Self::Version> {
        self.leaf(index, 0, None)
    }

    fn leaf_count(&self, leaf: &Self::Version) -> u64;

    fn leaf_value(&self, leaf: &Self::Version) -> Option<Self::Value>;

    fn snapshot(&self, root: Arc<Self::Version>, universe: u64) -> Self::Snapshot;

    /// Checks the value held by `slot`, whose subtree covers keys
    /// `lo..lo + width`.
    fn verify_slot(&self, slot: usize, v: &Self::Version, lo: u64, width: u64) -> Result<(), InvariantViolation>;
}

/// Version trees augmented by policy `P`, with optional leaf values `V`.
#[derive(Clone, Debug)]
pub struct Augmented<P = SumPolicy, V = ()> {
    pub(crate) policy: P,
    _value: PhantomData<fn() -> V>,
}

impl<P: Default, V> Default for Augmented<P, V> {
    fn default() -> Self {
        Augmented::new(P::default())
    }
}

impl<P, V> Augmented<P, V> {
    pub fn new(policy: P) -> Self {
        Augmented {
            policy,
            _value: PhantomData,
        }
    }
}

pub type TrieVersion<P, V = ()> = Version<(), <P as Augmentation>::Summary, V>;

impl<P, V> TrieRepr for Augmented<P, V>
where
    P: LeafSummary<u64> + Clone,
    V: Clone + Send + Sync + 'static,
{
    type Version = TrieVersion<P, V>;
    type Value = V;
    type Snapshot = TrieSnapshot<P, V>;

    fn leaf(&self, index: u64, count: u64, value: Option<V>) -> Arc<Self::Version> {
        Version::leaf(&self.policy, &index, count, (), value)
    }

    fn combine(&self, left: &Arc<Self::Version>, right: &Arc<Self::Version>) -> Arc<Self::Version> {
        Version::internal(&self.policy, left.clone(), right.clone(), ())
    }

    fn leaf_count(&self, leaf: &Self::Version) -> u64 {
        self.policy.count(leaf.summary())
    }

    fn leaf_value(&self, leaf: &Self::Version) -> Option<V> {
        leaf.value().cloned()
    }

    fn snapshot(&self, root: Arc<Self::Version>, universe: u64) -> TrieSnapshot<P, V> {
        TrieSnapshot {
            root,
            universe,
            policy: self.policy.clone(),
        }
    }

    fn verify_slot(&self, slot: usize, v: &Self::Version, lo: u64, width: u64) -> Result<(), InvariantViolation> {
        let shape = InvariantViolation::Shape { slot, leaves: width };
        // (version, first key, width)
        let mut stack = vec![(v, lo, width)];
        while let Some((v, lo, width)) = stack.pop() {
            match v.children() {
                None if width == 1 => {
                    if *v.summary() != self.policy.leaf(&lo, self.policy.count(v.summary())) {
                        return Err(InvariantViolation::Summary { slot });
                    }
                }
                Some((l, r)) if width > 1 => {
                    if *v.summary() != self.policy.combine(l.summary(), r.summary()) {
                        return Err(InvariantViolation::Summary { slot });
                    }
                    let half = width / 2;
                    stack.push((l, lo, half));
                    stack.push((r, lo + half, half));
                }
                _ => return Err(shape),
            }
        }
        Ok(())
    }
}

/// Balanced-RBT slots: queries take `O(log |S|)` instead of `O(log N)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RbtRepr;

impl TrieRepr for RbtRepr {
    type Version = Rbt<u64>;
    type Value = ();
    type Snapshot = Rbt<u64>;

    fn leaf(&self, index: u64, count: u64, _value: Option<()>) -> Arc<Rbt<u64>> {
        Arc::new(if count > 0 { Rbt::singleton(index) } else { Rbt::empty() })
    }

    fn combine(&self, left: &Arc<Rbt<u64>>, right: &Arc<Rbt<u64>>) -> Arc<Rbt<u64>> {
        rbt::fast_combine(left, right)
    }

    // Every slot starts out pointing at one shared dummy.
    fn initial_internal(&self, left: &Arc<Rbt<u64>>, _right: &Arc<Rbt<u64>>) -> Arc<Rbt<u64>> {
        left.clone()
    }

    fn initial_leaf(&self, _index: u64) -> Arc<Rbt<u64>> {
        thread_local! {
            static DUMMY: Arc<Rbt<u64>> = Arc::new(Rbt::empty());
        }
        DUMMY.with(Arc::clone)
    }

    fn leaf_count(&self, leaf: &Rbt<u64>) -> u64 {
        leaf.sum()
    }

    fn leaf_value(&self, _leaf: &Rbt<u64>) -> Option<()> {
        None
    }

    fn snapshot(&self, root: Arc<Rbt<u64>>, _universe: u64) -> Rbt<u64> {
        (*root).clone()
    }

    fn verify_slot(&self, slot: usize, v: &Rbt<u64>, lo: u64, width: u64) -> Result<(), InvariantViolation> {
        v.verify().map_err(|source| InvariantViolation::Rbt { slot, source })?;
        if let Some(&key) = v.keys().iter().find(|&&k| k < lo || k >= lo + width) {
            return Err(InvariantViolation::KeyRange { slot, key });
        }
        Ok(())
    }
}

/// Set mode marker.
#[derive(Debug)]
pub enum Set {}
/// Multiset mode marker: leaf summaries count copies.
#[derive(Debug)]
pub enum Multiset {}
/// Key-value mode marker: leaves carry a value.
#[derive(Debug)]
pub enum KeyValue {}

struct Inner<R: TrieRepr> {
    universe: u64,
    /// `slots[i - 1]` is node `i`.
    slots: Box<[VersionSlot<R::Version>]>,
    repr: R,
}

/// Shared handle to a trie. Cloning the handle does not copy the structure.
pub struct Trie<R: TrieRepr = Augmented, M = Set> {
    inner: Arc<Inner<R>>,
    _mode: PhantomData<fn() -> M>,
}

pub type SetTrie = Trie<Augmented, Set>;
pub type FastTrie = Trie<RbtRepr, Set>;
pub type MultisetTrie = Trie<Augmented, Multiset>;
pub type KvTrie<V> = Trie<Augmented<SumPolicy, V>, KeyValue>;

impl<R: TrieRepr, M> Clone for Trie<R, M> {
    fn clone(&self) -> Self {
        Trie {
            inner: self.inner.clone(),
            _mode: PhantomData,
        }
    }
}

impl<R: TrieRepr, M> fmt::Debug for Trie<R, M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trie")
            .field("universe", &self.inner.universe)
            .finish_non_exhaustive()
    }
}

impl<R: TrieRepr + Default, M> Trie<R, M> {
    /// Empty structure over `0..universe`.
    pub fn new(universe: u64) -> Result<Self, TrieError> {
        Trie::with_repr(universe, R::default())
    }
}

impl<R: TrieRepr, M> Trie<R, M> {
    /// Builds the initial perfect tree: every leaf empty and every internal
    /// slot referencing its children's initial values.
    pub fn with_repr(universe: u64, repr: R) -> Result<Self, TrieError> {
        if universe < 2 || !universe.is_power_of_two() {
            return Err(TrieError::InvalidUniverse(universe));
        }
        let n = universe as usize;
        let mut initial: Vec<Option<Arc<R::Version>>> = vec![None; 2 * n];
        for k in 0..n {
            initial[n + k] = Some(repr.initial_leaf(k as u64));
        }
        for i in (1..n).rev() {
            let v = repr.initial_internal(
                initial[2 * i].as_ref().unwrap(),
                initial[2 * i + 1].as_ref().unwrap(),
            );
            initial[i] = Some(v);
        }
        let slots = initial
            .into_iter()
            .skip(1)
            .map(|v| VersionSlot::new(v.unwrap()))
            .collect();
        Ok(Trie {
            inner: Arc::new(Inner { universe, slots, repr }),
            _mode: PhantomData,
        })
    }

    pub fn universe(&self) -> u64 {
        self.inner.universe
    }

    /// Number of slots, `2N - 1`.
    pub fn slot_count(&self) -> usize {
        self.inner.slots.len()
    }

    #[inline]
    fn slot(&self, i: usize) -> &VersionSlot<R::Version> {
        &self.inner.slots[i - 1]
    }

    fn leaf_index(&self, key: u64) -> Result<usize, TrieError> {
        if key >= self.inner.universe {
            return Err(TrieError::KeyOutOfRange {
                key,
                universe: self.inner.universe,
            });
        }
        Ok((self.inner.universe + key) as usize)
    }

    /// One attempt to install a fresh parent value at internal node `i`.
    pub(crate) fn refresh(&self, i: usize) -> bool {
        point(Point::ReadOld);
        let old = self.slot(i).load();
        point(Point::ReadLeft);
        let left = self.slot(2 * i).load();
        point(Point::ReadRight);
        let right = self.slot(2 * i + 1).load();
        let new = self.inner.repr.combine(&left, &right);
        point(Point::CasRefresh);
        self.slot(i).cas(&old, new)
    }

    /// Double refresh at `i` and every ancestor up to the root.
    pub(crate) fn propagate(&self, mut i: usize) {
        while i >= 1 {
            if !self.refresh(i) {
                self.refresh(i);
            }
            i /= 2;
        }
    }

    /// Reads the root slot; everything reachable from the result is a
    /// consistent snapshot of the set.
    pub fn snapshot(&self) -> R::Snapshot {
        point(Point::ReadRoot);
        let root = self.slot(1).load();
        self.inner.repr.snapshot(root, self.inner.universe)
    }

    /// Current raw value of slot `i` (1-based, root is 1).
    pub fn slot_value(&self, i: usize) -> Arc<R::Version> {
        self.slot(i).peek()
    }

    /// Checks every slot: perfect shape with the right number of leaves and
    /// summaries equal to the combination of their children.
    pub fn verify(&self) -> Result<(), InvariantViolation> {
        let n = self.inner.universe;
        for i in 1..=self.slot_count() {
            let depth = usize::BITS - 1 - i.leading_zeros();
            let width = n >> depth;
            let lo = (i as u64 - (1 << depth)) * width;
            let v = self.slot(i).peek();
            self.inner.repr.verify_slot(i, &v, lo, width)?;
        }
        Ok(())
    }

    fn check_range(&self, lo: u64, hi: u64) -> Result<(), TrieError> {
        self.leaf_index(lo)?;
        self.leaf_index(hi)?;
        if lo > hi {
            return Err(TrieError::InvalidRange { lo, hi });
        }
        Ok(())
    }

    pub fn size(&self) -> u64 {
        self.snapshot().size()
    }

    pub fn find(&self, key: u64) -> Result<bool, TrieError> {
        self.leaf_index(key)?;
        Ok(self.snapshot().find(&key))
    }

    /// The `j`-th smallest key; `None` if fewer than `j` keys are present.
    pub fn select(&self, j: u64) -> Option<u64> {
        self.snapshot().select(j)
    }

    /// Number of keys `<= x`.
    pub fn rank(&self, x: u64) -> Result<u64, TrieError> {
        self.leaf_index(x)?;
        Ok(self.snapshot().rank(&x))
    }

    /// Largest key `< x`.
    pub fn predecessor(&self, x: u64) -> Result<Option<u64>, TrieError> {
        self.leaf_index(x)?;
        Ok(self.snapshot().predecessor(&x))
    }

    /// Smallest key `> x`.
    pub fn successor(&self, x: u64) -> Result<Option<u64>, TrieError> {
        self.leaf_index(x)?;
        Ok(self.snapshot().successor(&x))
    }

    pub fn minimum(&self) -> Option<u64> {
        self.snapshot().minimum()
    }

    pub fn maximum(&self) -> Option<u64> {
        self.snapshot().maximum()
    }

    pub fn range_count(&self, lo: u64, hi: u64) -> Result<u64, TrieError> {
        self.check_range(lo, hi)?;
        Ok(self.snapshot().range_count(&lo, &hi))
    }

    pub fn range_collect(&self, lo: u64, hi: u64) -> Result<Vec<u64>, TrieError> {
        self.check_range(lo, hi)?;
        Ok(self.snapshot().range_collect(&lo, &hi))
    }
}

impl<R: TrieRepr> Trie<R, Set> {
    /// Adds `key`; true iff it was absent. Always propagates, so a `false`
    /// result also guarantees the insert that made the key present has
    /// reached the root.
    pub fn insert(&self, key: u64) -> Result<bool, TrieError> {
        let leaf = self.leaf_index(key)?;
        point(Point::ReadOldIns);
        let old = self.slot(leaf).load();
        let mut result = self.inner.repr.leaf_count(&old) == 0;
        if result {
            let new = self.inner.repr.leaf(key, 1, None);
            point(Point::CasIns);
            result = self.slot(leaf).cas(&old, new);
        }
        self.propagate(leaf / 2);
        Ok(result)
    }

    /// Removes `key`; true iff it was present. Always propagates.
    pub fn delete(&self, key: u64) -> Result<bool, TrieError> {
        let leaf = self.leaf_index(key)?;
        point(Point::ReadOldDel);
        let old = self.slot(leaf).load();
        let mut result = self.inner.repr.leaf_count(&old) == 1;
        if result {
            let new = self.inner.repr.leaf(key, 0, None);
            point(Point::CasDel);
            result = self.slot(leaf).cas(&old, new);
        }
        self.propagate(leaf / 2);
        Ok(result)
    }
}

impl<R: TrieRepr> Trie<R, Multiset> {
    /// Adds one copy of `key`. Lock-free: retries the leaf CAS until it wins.
    pub fn insert(&self, key: u64) -> Result<bool, TrieError> {
        let leaf = self.leaf_index(key)?;
        loop {
            point(Point::ReadLeaf);
            let old = self.slot(leaf).load();
            let count = self.inner.repr.leaf_count(&old);
            let new = self.inner.repr.leaf(key, count + 1, None);
            point(Point::CasLeaf);
            if self.slot(leaf).cas(&old, new) {
                break;
            }
        }
        self.propagate(leaf / 2);
        Ok(true)
    }

    /// Removes one copy of `key`; false if there was none.
    pub fn delete(&self, key: u64) -> Result<bool, TrieError> {
        let leaf = self.leaf_index(key)?;
        let result = loop {
            point(Point::ReadLeaf);
            let old = self.slot(leaf).load();
            let count = self.inner.repr.leaf_count(&old);
            if count == 0 {
                break false;
            }
            let new = self.inner.repr.leaf(key, count - 1, None);
            point(Point::CasLeaf);
            if self.slot(leaf).cas(&old, new) {
                break true;
            }
        };
        self.propagate(leaf / 2);
        Ok(result)
    }

    /// Copies of `key` currently present.
    pub fn count(&self, key: u64) -> Result<u64, TrieError> {
        let lo = key;
        self.range_count(lo, key)
    }
}

impl<R: TrieRepr> Trie<R, KeyValue> {
    /// Associates `value` with `key` and returns the value it displaced.
    /// Lock-free: the leaf CAS is retried until it succeeds, so the returned
    /// value is exactly the one replaced.
    pub fn replace(&self, key: u64, value: R::Value) -> Result<Option<R::Value>, TrieError> {
        self.swap_leaf(key, Some(value))
    }

    /// Removes `key`, returning its value.
    pub fn remove(&self, key: u64) -> Result<Option<R::Value>, TrieError> {
        self.swap_leaf(key, None)
    }

    fn swap_leaf(&self, key: u64, value: Option<R::Value>) -> Result<Option<R::Value>, TrieError> {
        let leaf = self.leaf_index(key)?;
        let displaced = loop {
            point(Point::ReadLeaf);
            let old = self.slot(leaf).load();
            let new = self.inner.repr.leaf(key, value.is_some() as u64, value.clone());
            point(Point::CasLeaf);
            if self.slot(leaf).cas(&old, new) {
                break self.inner.repr.leaf_value(&old);
            }
        };
        self.propagate(leaf / 2);
        Ok(displaced)
    }

    /// Wait-free store: a single leaf CAS. If it fails, a concurrent store
    /// to the same key succeeded after this one read the leaf, and this store
    /// is ordered immediately before it (and immediately overwritten).
    pub fn assign(&self, key: u64, value: R::Value) -> Result<(), TrieError> {
        let leaf = self.leaf_index(key)?;
        point(Point::ReadLeaf);
        let old = self.slot(leaf).load();
        let new = self.inner.repr.leaf(key, 1, Some(value));
        point(Point::CasLeaf);
        self.slot(leaf).cas(&old, new);
        self.propagate(leaf / 2);
        Ok(())
    }
}

impl<P, V> Trie<Augmented<P, V>, KeyValue>
where
    P: LeafSummary<u64> + Clone,
    V: Clone + Send + Sync + 'static,
{
    /// Value stored under `key`, read from one snapshot.
    pub fn get(&self, key: u64) -> Result<Option<V>, TrieError> {
        self.leaf_index(key)?;
        Ok(self.snapshot().get(key).cloned())
    }
}

/// Snapshot of an augmented trie: the root Version plus what is needed to
/// navigate it by index arithmetic.
pub struct TrieSnapshot<P: Augmentation, V = ()> {
    root: Arc<TrieVersion<P, V>>,
    universe: u64,
    policy: P,
}

impl<P: Augmentation + Clone, V> Clone for TrieSnapshot<P, V> {
    fn clone(&self) -> Self {
        TrieSnapshot {
            root: self.root.clone(),
            universe: self.universe,
            policy: self.policy.clone(),
        }
    }
}

impl<P: Augmentation, V> TrieSnapshot<P, V> {
    pub fn root(&self) -> &Arc<TrieVersion<P, V>> {
        &self.root
    }

    pub fn summary(&self) -> &P::Summary {
        self.root.summary()
    }

    fn cursor(&self) -> TrieCursor<'_, P, V> {
        TrieCursor {
            v: &self.root,
            lo: 0,
            width: self.universe,
            policy: &self.policy,
        }
    }

    /// The leaf Version for `key`, found by following the bits of the key
    /// from the most significant one (0 = left, 1 = right).
    pub fn leaf(&self, key: u64) -> &TrieVersion<P, V> {
        let mut v = &self.root;
        let mut bit = self.universe >> 1;
        while let Some((l, r)) = v.children() {
            v = if key & bit == 0 { l } else { r };
            bit >>= 1;
        }
        v
    }

    pub fn get(&self, key: u64) -> Option<&V> {
        self.leaf(key).value()
    }

    /// Copies of each present key, ascending.
    pub fn entries(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut stack = vec![(&self.root, 0u64, self.universe)];
        while let Some((v, lo, width)) = stack.pop() {
            let c = self.policy.count(v.summary());
            if c == 0 {
                continue;
            }
            match v.children() {
                None => out.push((lo, c)),
                Some((l, r)) => {
                    stack.push((r, lo + width / 2, width / 2));
                    stack.push((l, lo, width / 2));
                }
            }
        }
        out
    }
}

struct TrieCursor<'a, P: Augmentation, V> {
    v: &'a Arc<TrieVersion<P, V>>,
    lo: u64,
    width: u64,
    policy: &'a P,
}

impl<P: Augmentation, V> Clone for TrieCursor<'_, P, V> {
    fn clone(&self) -> Self {
        TrieCursor { ..*self }
    }
}

impl<P: Augmentation, V> Cursor for TrieCursor<'_, P, V> {
    type Key = u64;

    fn count(&self) -> u64 {
        self.policy.count(self.v.summary())
    }

    fn children(&self) -> Option<(Self, Self)> {
        let (l, r) = self.v.children()?;
        let half = self.width / 2;
        Some((
            TrieCursor { v: l, lo: self.lo, width: half, policy: self.policy },
            TrieCursor { v: r, lo: self.lo + half, width: half, policy: self.policy },
        ))
    }

    fn goes_right(&self, x: &u64) -> bool {
        *x >= self.lo + self.width / 2
    }

    fn leaf_key(&self) -> Option<u64> {
        Some(self.lo)
    }
}

impl<P: Augmentation, V> OrderedSnapshot<u64> for TrieSnapshot<P, V> {
    fn size(&self) -> u64 {
        query::size(&self.cursor())
    }

    fn find(&self, key: &u64) -> bool {
        query::find(self.cursor(), key)
    }

    fn select(&self, j: u64) -> Option<u64> {
        query::select(self.cursor(), j)
    }

    fn rank(&self, x: &u64) -> u64 {
        query::rank(self.cursor(), x)
    }

    fn predecessor(&self, x: &u64) -> Option<u64> {
        query::predecessor(self.cursor(), x)
    }

    fn successor(&self, x: &u64) -> Option<u64> {
        query::successor(self.cursor(), x)
    }

    fn minimum(&self) -> Option<u64> {
        query::select(self.cursor(), 1)
    }

    fn maximum(&self) -> Option<u64> {
        let n = self.policy.count(self.root.summary());
        query::select(self.cursor(), n)
    }

    fn range_count(&self, lo: &u64, hi: &u64) -> u64 {
        query::range_count(self.cursor(), lo, hi)
    }

    fn range_collect(&self, lo: &u64, hi: &u64) -> Vec<u64> {
        query::range_collect(self.cursor(), lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::MinMaxPolicy;

    #[test]
    fn new_rejects_bad_universe() {
        assert_eq!(SetTrie::new(3).unwrap_err(), TrieError::InvalidUniverse(3));
        assert_eq!(SetTrie::new(0).unwrap_err(), TrieError::InvalidUniverse(0));
        assert_eq!(SetTrie::new(1).unwrap_err(), TrieError::InvalidUniverse(1));
    }

    #[test]
    fn initial_shape() {
        let t = SetTrie::new(4).unwrap();
        assert_eq!(t.slot_count(), 7);
        let root = t.slot_value(1);
        assert_eq!(*root.summary(), 0);
        // internal Versions reference their children's initial Versions
        assert!(Arc::ptr_eq(root.left().unwrap(), &t.slot_value(2)));
        assert!(Arc::ptr_eq(root.right().unwrap(), &t.slot_value(3)));
        for leaf in 4..8 {
            assert_eq!(*t.slot_value(leaf).summary(), 0);
            assert!(t.slot_value(leaf).is_leaf());
        }
        t.verify().unwrap();

        let t2 = SetTrie::new(2).unwrap();
        assert_eq!(t2.slot_count(), 3);
        assert_eq!(t2.size(), 0);
    }

    #[test]
    fn insert_three_updates_right_spine() {
        let t = SetTrie::new(4).unwrap();
        assert!(t.insert(3).unwrap());
        assert_eq!(*t.slot_value(7).summary(), 1);
        assert_eq!(*t.slot_value(3).summary(), 1);
        assert_eq!(*t.slot_value(1).summary(), 1);
        assert_eq!(*t.slot_value(2).summary(), 0);
        assert!(!t.insert(3).unwrap());
        assert!(t.find(3).unwrap());
        assert!(!t.find(0).unwrap());
        assert!(t.delete(3).unwrap());
        assert!(!t.delete(3).unwrap());
        assert_eq!(t.size(), 0);
        t.verify().unwrap();
    }

    #[test]
    fn out_of_range_keys() {
        let t = SetTrie::new(4).unwrap();
        let err = TrieError::KeyOutOfRange { key: 4, universe: 4 };
        assert_eq!(t.insert(4).unwrap_err(), err);
        assert_eq!(t.delete(4).unwrap_err(), err);
        assert_eq!(t.find(4).unwrap_err(), err);
        assert_eq!(t.rank(4).unwrap_err(), err);
        assert_eq!(t.range_count(2, 1).unwrap_err(), TrieError::InvalidRange { lo: 2, hi: 1 });
    }

    #[test]
    fn queries_on_one_two_three() {
        let t = SetTrie::new(4).unwrap();
        for k in [1, 2, 3] {
            t.insert(k).unwrap();
        }
        assert_eq!(t.size(), 3);
        assert_eq!(t.select(1), Some(1));
        assert_eq!(t.select(3), Some(3));
        assert_eq!(t.select(4), None);
        assert_eq!(t.rank(2).unwrap(), 2);
        assert_eq!(t.minimum(), Some(1));
        assert_eq!(t.maximum(), Some(3));
        assert_eq!(t.range_count(1, 2).unwrap(), 2);
        assert_eq!(t.range_count(0, 3).unwrap(), 3);
        assert_eq!(t.predecessor(2).unwrap(), Some(1));
        assert_eq!(t.successor(3).unwrap(), None);
        assert_eq!(t.range_collect(0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn empty_queries() {
        let t = SetTrie::new(8).unwrap();
        assert_eq!(t.size(), 0);
        assert_eq!(t.select(1), None);
        assert_eq!(t.minimum(), None);
        assert_eq!(t.maximum(), None);
        assert_eq!(t.predecessor(5).unwrap(), None);
        assert_eq!(t.successor(0).unwrap(), None);
        assert_eq!(t.rank(7).unwrap(), 0);
    }

    #[test]
    fn multiset_counts() {
        let t = MultisetTrie::new(8).unwrap();
        assert!(!t.delete(5).unwrap());
        for _ in 0..3 {
            assert!(t.insert(5).unwrap());
        }
        assert_eq!(*t.slot_value(8 + 5).summary(), 3);
        assert_eq!(t.size(), 3);
        assert_eq!(t.count(5).unwrap(), 3);
        assert_eq!(t.select(2), Some(5));
        assert!(t.delete(5).unwrap());
        assert_eq!(t.size(), 2);
        t.verify().unwrap();
    }

    #[test]
    fn key_value_replace() {
        let t: KvTrie<&'static str> = KvTrie::new(8).unwrap();
        assert_eq!(t.replace(2, "a").unwrap(), None);
        assert_eq!(t.replace(2, "b").unwrap(), Some("a"));
        assert_eq!(t.get(2).unwrap(), Some("b"));
        t.assign(6, "z").unwrap();
        assert_eq!(t.get(6).unwrap(), Some("z"));
        assert_eq!(t.size(), 2);
        assert_eq!(t.remove(2).unwrap(), Some("b"));
        assert_eq!(t.get(2).unwrap(), None);
        assert_eq!(t.size(), 1);
    }

    #[test]
    fn min_max_augmentation() {
        let t: Trie<Augmented<MinMaxPolicy<u64>>> =
            Trie::with_repr(16, Augmented::new(MinMaxPolicy::new())).unwrap();
        for k in [9, 3, 12] {
            t.insert(k).unwrap();
        }
        let s = t.snapshot();
        assert_eq!(s.summary().min, Some(3));
        assert_eq!(s.summary().max, Some(12));
        assert_eq!(s.summary().count, 3);
        t.delete(3).unwrap();
        assert_eq!(t.snapshot().summary().min, Some(9));
        t.verify().unwrap();
    }

    #[test]
    fn fast_trie_basics() {
        let t = FastTrie::new(8).unwrap();
        for k in [3, 5, 6, 7] {
            assert!(t.insert(k).unwrap());
        }
        let s = t.snapshot();
        assert_eq!(s.keys(), vec![3, 5, 6, 7]);
        assert_eq!(t.select(2), Some(5));
        assert_eq!(t.rank(5).unwrap(), 2);
        assert!(t.delete(5).unwrap());
        assert_eq!(t.snapshot().keys(), vec![3, 6, 7]);
        t.verify().unwrap();
    }

    #[test]
    fn snapshot_is_stable() {
        let t = SetTrie::new(16).unwrap();
        t.insert(4).unwrap();
        let held = t.snapshot();
        for k in 0..16 {
            t.insert(k).unwrap();
        }
        assert_eq!(held.size(), 1);
        assert_eq!(held.entries(), vec![(4, 1)]);
        assert_eq!(t.size(), 16);
    }
}
