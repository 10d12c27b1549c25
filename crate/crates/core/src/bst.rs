//! Lock-free leaf-oriented BST augmented with Version trees.
//!
//! The Node tree and its coordination protocol follow Ellen, Fatourou,
//! Ruppert and van Breugel: an update flags the Node whose child pointer it
//! will change, a delete additionally marks the parent it removes, and any
//! operation that runs into a flag or mark helps the owner finish before
//! retrying. Retries backtrack along a per-operation stack of visited Nodes
//! instead of restarting at the root.
//!
//! Each Node also owns a version slot. After changing the Node tree an
//! update pops its stack and double-refreshes every Node on it, so the root's
//! Version tree always describes a consistent set. Queries read only that
//! Version tree.
//!
//! Memory: Nodes, Versions and coordination records are reference counted.
//! Coordination records point back at the Nodes they flag through `Weak`
//! references, and clearing a flag installs a fresh `Clean` word, so no
//! reference cycle outlives an operation. A record whose `Weak` Node has
//! gone away belongs to an operation that has already taken effect.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, Weak};

use arc_swap::{ArcSwap, ArcSwapOption, Guard};

use crate::query::{self, Cursor, OrderedSnapshot};
use crate::rbt::{self, Rbt};
use crate::sched::{point, Point};
use crate::stats;
use crate::trie::{Augmented, RbtRepr};
use crate::version::{LeafSummary, Version, VersionSlot};

/// A key of the Node tree: a real key or one of the two sentinels, which
/// compare above every real key (`Real(_) < Inf1 < Inf2`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BstKey<K> {
    Real(K),
    Inf1,
    Inf2,
}

impl<K> BstKey<K> {
    pub fn real(&self) -> Option<&K> {
        match self {
            BstKey::Real(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_sentinel(&self) -> bool {
        !matches!(self, BstKey::Real(_))
    }
}

/// `Real(x) >= key` without cloning `x`.
fn routes_right<K: Ord>(x: &K, key: &BstKey<K>) -> bool {
    match key {
        BstKey::Real(k) => x >= k,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BstError {
    #[error("empty range: lower bound exceeds upper bound")]
    InvalidRange,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BstViolation {
    #[error("leaves out of order or outside their routing interval")]
    Order,
    #[error("summary differs from the combination of its children")]
    Summary,
    #[error("sentinel structure damaged")]
    Sentinels,
    #[error("internal node without two children")]
    Shape,
    #[error("snapshot keys differ from the Node tree's leaves")]
    Stale,
    #[error(transparent)]
    Rbt(#[from] rbt::RbtViolation),
}

/// What a Node's version slot holds and how Refresh combines children.
pub trait BstRepr<K>: Send + Sync + 'static {
    type Version: Send + Sync + 'static;
    type Snapshot: OrderedSnapshot<K>;

    /// Fresh Version of a leaf. Sentinel leaves account for no keys.
    fn leaf(&self, key: &BstKey<K>) -> Arc<Self::Version>;

    /// Fresh Version of internal Node `key` over two child Versions.
    fn combine(&self, key: &BstKey<K>, left: &Arc<Self::Version>, right: &Arc<Self::Version>)
        -> Arc<Self::Version>;

    fn snapshot(&self, root: Arc<Self::Version>) -> Self::Snapshot;

    /// Real keys described by a Version, ascending.
    fn keys(&self, v: &Self::Version) -> Vec<K>;

    /// Structural check of one Version tree.
    fn verify(&self, v: &Self::Version) -> Result<(), BstViolation>;
}

pub type BstVersion<K, P> = Version<BstKey<K>, <P as crate::version::Augmentation>::Summary>;

impl<K, P> BstRepr<K> for Augmented<P>
where
    K: Ord + Clone + Send + Sync + 'static,
    P: LeafSummary<K> + Clone,
{
    type Version = BstVersion<K, P>;
    type Snapshot = BstSnapshot<K, P>;

    fn leaf(&self, key: &BstKey<K>) -> Arc<Self::Version> {
        match key {
            BstKey::Real(k) => Version::leaf(&self.policy, k, 1, key.clone(), None),
            _ => Version::empty_leaf(&self.policy, key.clone()),
        }
    }

    fn combine(&self, key: &BstKey<K>, left: &Arc<Self::Version>, right: &Arc<Self::Version>)
        -> Arc<Self::Version> {
        Version::internal(&self.policy, left.clone(), right.clone(), key.clone())
    }

    fn snapshot(&self, root: Arc<Self::Version>) -> BstSnapshot<K, P> {
        BstSnapshot {
            root,
            policy: self.policy.clone(),
        }
    }

    fn keys(&self, v: &Self::Version) -> Vec<K> {
        leaves(v).into_iter().filter_map(|l| l.key().real().cloned()).collect()
    }

    fn verify(&self, v: &Self::Version) -> Result<(), BstViolation> {
        // Summaries, with routing bounds [lo, hi) pushed down to each leaf.
        let mut stack: Vec<(&Self::Version, Option<&BstKey<K>>, Option<&BstKey<K>>)> = vec![(v, None, None)];
        while let Some((v, lo, hi)) = stack.pop() {
            match v.children() {
                None => {
                    let k = v.key();
                    if lo.is_some_and(|lo| k < lo) || hi.is_some_and(|hi| k >= hi) {
                        return Err(BstViolation::Order);
                    }
                    let expected = match k {
                        BstKey::Real(k) => self.policy.leaf(k, 1),
                        _ => self.policy.empty(),
                    };
                    if *v.summary() != expected {
                        return Err(BstViolation::Summary);
                    }
                }
                Some((l, r)) => {
                    if *v.summary() != self.policy.combine(l.summary(), r.summary()) {
                        return Err(BstViolation::Summary);
                    }
                    stack.push((l, lo, Some(v.key())));
                    stack.push((r, Some(v.key()), hi));
                }
            }
        }
        let keys: Vec<&BstKey<K>> = leaves(v).into_iter().map(|l| l.key()).collect();
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BstViolation::Order);
        }
        if keys.len() < 2 || keys[keys.len() - 2] != &BstKey::Inf1 || keys[keys.len() - 1] != &BstKey::Inf2 {
            return Err(BstViolation::Sentinels);
        }
        Ok(())
    }
}

/// Leaves of a Version tree in key order.
fn leaves<K, S, V>(v: &Version<K, S, V>) -> Vec<&Version<K, S, V>> {
    let mut out = Vec::new();
    let mut stack = vec![v];
    while let Some(v) = stack.pop() {
        match v.children() {
            None => out.push(v),
            Some((l, r)) => {
                stack.push(r);
                stack.push(l);
            }
        }
    }
    out
}

impl<K> BstRepr<K> for RbtRepr
where
    K: Ord + Clone + Send + Sync + 'static,
{
    type Version = Rbt<K>;
    type Snapshot = Rbt<K>;

    fn leaf(&self, key: &BstKey<K>) -> Arc<Rbt<K>> {
        Arc::new(match key {
            BstKey::Real(k) => Rbt::singleton(k.clone()),
            _ => Rbt::empty(),
        })
    }

    fn combine(&self, _key: &BstKey<K>, left: &Arc<Rbt<K>>, right: &Arc<Rbt<K>>) -> Arc<Rbt<K>> {
        rbt::fast_combine(left, right)
    }

    fn snapshot(&self, root: Arc<Rbt<K>>) -> Rbt<K> {
        (*root).clone()
    }

    fn keys(&self, v: &Rbt<K>) -> Vec<K> {
        v.keys()
    }

    fn verify(&self, v: &Rbt<K>) -> Result<(), BstViolation> {
        v.verify()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Clean,
    IFlag,
    DFlag,
    Mark,
}

/// Contents of a Node's update field. Words are never reused, so pointer
/// identity of the `Arc` stands in for value equality.
struct Word<K, V> {
    state: State,
    info: Option<Arc<Info<K, V>>>,
}

impl<K, V> Word<K, V> {
    fn clean() -> Arc<Self> {
        Arc::new(Word {
            state: State::Clean,
            info: None,
        })
    }

    fn owned_by(&self, info: &Arc<Info<K, V>>) -> bool {
        self.info.as_ref().is_some_and(|i| Arc::ptr_eq(i, info))
    }
}

enum Info<K, V> {
    Insert {
        p: Weak<Node<K, V>>,
        l: Arc<Node<K, V>>,
        new: Arc<Node<K, V>>,
    },
    Delete {
        gp: Weak<Node<K, V>>,
        p: Weak<Node<K, V>>,
        l: Arc<Node<K, V>>,
        pupdate: Arc<Word<K, V>>,
    },
}

struct Links<K, V> {
    left: ArcSwapOption<Node<K, V>>,
    right: ArcSwapOption<Node<K, V>>,
    update: ArcSwap<Word<K, V>>,
}

struct Node<K, V> {
    key: BstKey<K>,
    version: VersionSlot<V>,
    /// `None` for leaves.
    links: Option<Links<K, V>>,
}

type Frame<K, V> = (Arc<Node<K, V>>, Arc<Word<K, V>>);

impl<K, V> Node<K, V> {
    fn leaf(key: BstKey<K>, version: Arc<V>) -> Arc<Self> {
        Arc::new(Node {
            key,
            version: VersionSlot::new(version),
            links: None,
        })
    }

    fn internal(key: BstKey<K>, version: Arc<V>, left: Arc<Self>, right: Arc<Self>) -> Arc<Self> {
        Arc::new(Node {
            key,
            version: VersionSlot::new(version),
            links: Some(Links {
                left: ArcSwapOption::from(Some(left)),
                right: ArcSwapOption::from(Some(right)),
                update: ArcSwap::new(Word::clean()),
            }),
        })
    }

    fn is_leaf(&self) -> bool {
        self.links.is_none()
    }

    fn links(&self) -> &Links<K, V> {
        self.links.as_ref().expect("internal node")
    }

    fn child(&self, right: bool) -> Arc<Self> {
        stats::read();
        let links = self.links();
        let side = if right { &links.right } else { &links.left };
        side.load_full().expect("internal node has two children")
    }

    fn update(&self) -> Arc<Word<K, V>> {
        stats::read();
        self.links().update.load_full()
    }

    /// Peek at both children without counting (verification walks).
    fn children(&self) -> Option<(Arc<Self>, Arc<Self>)> {
        let links = self.links.as_ref()?;
        Some((links.left.load_full()?, links.right.load_full()?))
    }
}

impl<K, V> Drop for Node<K, V> {
    // A sequence of sorted inserts builds a path as deep as the set is large.
    fn drop(&mut self) {
        let Some(links) = &self.links else { return };
        let mut stack: Vec<Arc<Node<K, V>>> = Vec::new();
        stack.extend(links.left.swap(None));
        stack.extend(links.right.swap(None));
        while let Some(n) = stack.pop() {
            if let Ok(node) = Arc::try_unwrap(n) {
                if let Some(links) = &node.links {
                    stack.extend(links.left.swap(None));
                    stack.extend(links.right.swap(None));
                }
            }
        }
    }
}

struct Inner<K, R: BstRepr<K>> {
    root: Arc<Node<K, R::Version>>,
    repr: R,
}

/// Shared handle to a lock-free augmented BST. Cloning the handle does not
/// copy the tree.
pub struct Bst<K, R: BstRepr<K> = Augmented> {
    inner: Arc<Inner<K, R>>,
}

/// BST whose Versions are balanced RBTs, so queries run in `O(log |S|)`.
pub type FastBst<K> = Bst<K, RbtRepr>;

impl<K, R: BstRepr<K>> Clone for Bst<K, R> {
    fn clone(&self) -> Self {
        Bst {
            inner: self.inner.clone(),
        }
    }
}

impl<K, R: BstRepr<K>> fmt::Debug for Bst<K, R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bst").finish_non_exhaustive()
    }
}

impl<K, R> Default for Bst<K, R>
where
    K: Ord + Clone + Send + Sync + 'static,
    R: BstRepr<K> + Default,
{
    fn default() -> Self {
        Bst::with_repr(R::default())
    }
}

impl<K, R> Bst<K, R>
where
    K: Ord + Clone + Send + Sync + 'static,
    R: BstRepr<K> + Default,
{
    pub fn new() -> Self {
        Self::default()
    }
}

impl<K, R> Bst<K, R>
where
    K: Ord + Clone + Send + Sync + 'static,
    R: BstRepr<K>,
{
    /// Empty tree: an `Inf2` root over leaves `Inf1` and `Inf2`.
    pub fn with_repr(repr: R) -> Self {
        let l = Node::leaf(BstKey::Inf1, repr.leaf(&BstKey::Inf1));
        let r = Node::leaf(BstKey::Inf2, repr.leaf(&BstKey::Inf2));
        let v = repr.combine(&BstKey::Inf2, &l.version.peek(), &r.version.peek());
        let root = Node::internal(BstKey::Inf2, v, l, r);
        Bst {
            inner: Arc::new(Inner { root, repr }),
        }
    }

    fn repr(&self) -> &R {
        &self.inner.repr
    }

    /// Descends from the top of `stack` to a leaf, pushing each internal
    /// Node visited together with the update word read before its child.
    fn search(&self, key: &K, stack: &mut Vec<Frame<K, R::Version>>) -> Arc<Node<K, R::Version>> {
        let (mut cur, _) = stack.pop().expect("stack holds the root");
        loop {
            let word = cur.update();
            point(Point::ReadChild);
            let child = cur.child(routes_right(key, &cur.key));
            stack.push((cur, word));
            if child.is_leaf() {
                return child;
            }
            cur = child;
        }
    }

    /// Pops until a Node that is not marked, helping each marked Node's
    /// deletion on the way; that Node stays on top with a fresh word.
    fn backtrack(&self, stack: &mut Vec<Frame<K, R::Version>>) {
        loop {
            let (n, _) = stack.pop().expect("the root is never marked");
            let word = n.update();
            if word.state == State::Mark {
                self.help_marked(word.info.as_ref().unwrap());
            } else {
                stack.push((n, word));
                return;
            }
        }
    }

    /// Backtracking after a failure at the grandparent: the word saved for
    /// it is stale, so the search resumes at or above it.
    fn retry_from_gp(&self, stack: &mut Vec<Frame<K, R::Version>>) {
        stack.pop();
        self.backtrack(stack);
    }

    fn cas_update(
        &self,
        node: &Node<K, R::Version>,
        expected: &Arc<Word<K, R::Version>>,
        new: Arc<Word<K, R::Version>>,
    ) -> Result<(), Arc<Word<K, R::Version>>> {
        let prev = node.links().update.compare_and_swap(expected, new);
        let ok = Arc::ptr_eq(&prev, expected);
        stats::cas(ok);
        if ok {
            Ok(())
        } else {
            Err(Guard::into_inner(prev))
        }
    }

    fn cas_child(&self, parent: &Node<K, R::Version>, old: &Arc<Node<K, R::Version>>, new: Arc<Node<K, R::Version>>) {
        let links = parent.links();
        let side = if new.key < parent.key { &links.left } else { &links.right };
        let prev = side.compare_and_swap(Arc::as_ptr(old), Some(new));
        stats::cas(prev.as_ref().is_some_and(|p| Arc::ptr_eq(p, old)));
    }

    /// Clears `node`'s flag if it still belongs to `info`.
    fn unflag(&self, node: &Node<K, R::Version>, info: &Arc<Info<K, R::Version>>) {
        let cur = node.update();
        if matches!(cur.state, State::IFlag | State::DFlag) && cur.owned_by(info) {
            let _ = self.cas_update(node, &cur, Word::clean());
        }
    }

    fn help(&self, word: &Word<K, R::Version>) {
        let Some(info) = &word.info else { return };
        match word.state {
            State::Clean => {}
            State::IFlag => self.help_insert(info),
            State::DFlag => {
                self.help_delete(info);
            }
            State::Mark => self.help_marked(info),
        }
    }

    fn help_insert(&self, info: &Arc<Info<K, R::Version>>) {
        let Info::Insert { p, l, new } = &**info else { unreachable!() };
        // A flagged Node cannot leave the tree, so a dead `p` was unflagged.
        let Some(p) = p.upgrade() else { return };
        point(Point::ChildCas);
        self.cas_child(&p, l, new.clone());
        point(Point::Unflag);
        self.unflag(&p, info);
    }

    /// Tries to mark the parent; returns whether the deletion took effect.
    fn help_delete(&self, info: &Arc<Info<K, R::Version>>) -> bool {
        let Info::Delete { gp, p, pupdate, .. } = &**info else { unreachable!() };
        let Some(p_node) = p.upgrade() else {
            // While `gp` is flagged `p` stays its child, so `p` is gone only
            // if this deletion already removed it.
            if let Some(gp) = gp.upgrade() {
                self.unflag(&gp, info);
            }
            return true;
        };
        point(Point::Mark);
        let mark = Arc::new(Word {
            state: State::Mark,
            info: Some(info.clone()),
        });
        match self.cas_update(&p_node, pupdate, mark) {
            Ok(()) => {
                self.help_marked(info);
                true
            }
            Err(cur) if cur.state == State::Mark && cur.owned_by(info) => {
                self.help_marked(info);
                true
            }
            Err(cur) => {
                self.help(&cur);
                if let Some(gp) = gp.upgrade() {
                    point(Point::Unflag);
                    self.unflag(&gp, info);
                }
                false
            }
        }
    }

    /// Splices a marked parent out and clears the grandparent's flag.
    fn help_marked(&self, info: &Arc<Info<K, R::Version>>) {
        let Info::Delete { gp, p, l, .. } = &**info else { unreachable!() };
        let Some(gp) = gp.upgrade() else { return };
        if let Some(p) = p.upgrade() {
            let right = p.child(true);
            let other = if Arc::ptr_eq(&right, l) { p.child(false) } else { right };
            point(Point::ChildCas);
            self.cas_child(&gp, &p, other);
        }
        point(Point::Unflag);
        self.unflag(&gp, info);
    }

    /// One attempt to install a fresh Version at internal Node `x`, built
    /// from a consistent (child, child Version) pair on each side.
    fn refresh(&self, x: &Node<K, R::Version>) -> bool {
        let links = x.links();
        point(Point::BstReadOld);
        let old = x.version.load();
        let vl = loop {
            point(Point::ReadLeftChild);
            let xl = x.child(false);
            point(Point::ReadLeftVersion);
            let vl = xl.version.load();
            point(Point::RecheckLeft);
            stats::read();
            if links.left.load().as_ref().is_some_and(|c| Arc::ptr_eq(c, &xl)) {
                break vl;
            }
            stats::reread();
        };
        let vr = loop {
            point(Point::ReadRightChild);
            let xr = x.child(true);
            point(Point::ReadRightVersion);
            let vr = xr.version.load();
            point(Point::RecheckRight);
            stats::read();
            if links.right.load().as_ref().is_some_and(|c| Arc::ptr_eq(c, &xr)) {
                break vr;
            }
            stats::reread();
        };
        let new = self.repr().combine(&x.key, &vl, &vr);
        point(Point::BstCasRefresh);
        x.version.cas(&old, new)
    }

    /// Double refresh of every Node on the stack, top first.
    fn propagate(&self, mut stack: Vec<Frame<K, R::Version>>) {
        while let Some((x, _)) = stack.pop() {
            if !self.refresh(&x) {
                self.refresh(&x);
            }
        }
    }

    fn root_frame(&self) -> Vec<Frame<K, R::Version>> {
        let root = self.inner.root.clone();
        let word = root.update();
        vec![(root, word)]
    }

    /// Adds `key`; true iff it was absent.
    pub fn insert(&self, key: K) -> bool {
        let mut stack = self.root_frame();
        let mut first = true;
        loop {
            let leaf = self.search(&key, &mut stack);
            if std::mem::take(&mut first) {
                stats::search_depth(stack.len() as u64);
            }
            if leaf.key.real() == Some(&key) {
                self.propagate(stack);
                return false;
            }
            let (p, pupdate) = stack.last().cloned().unwrap();
            if pupdate.state != State::Clean {
                self.help(&pupdate);
                self.backtrack(&mut stack);
                continue;
            }
            let new = self.replacement(key.clone(), &leaf);
            let info = Arc::new(Info::Insert {
                p: Arc::downgrade(&p),
                l: leaf,
                new,
            });
            let flag = Arc::new(Word {
                state: State::IFlag,
                info: Some(info.clone()),
            });
            point(Point::Flag);
            match self.cas_update(&p, &pupdate, flag) {
                Ok(()) => {
                    point(Point::Flagged);
                    self.help_insert(&info);
                    self.propagate(stack);
                    return true;
                }
                Err(cur) => {
                    self.help(&cur);
                    self.backtrack(&mut stack);
                }
            }
        }
    }

    /// The three-Node subtree replacing `leaf` when `key` is inserted, with
    /// its Versions already built.
    fn replacement(&self, key: K, leaf: &Arc<Node<K, R::Version>>) -> Arc<Node<K, R::Version>> {
        let repr = self.repr();
        let key = BstKey::Real(key);
        let fresh = |k: &BstKey<K>| Node::leaf(k.clone(), repr.leaf(k));
        let (small, large) = match key.cmp(&leaf.key) {
            Ordering::Less => (fresh(&key), fresh(&leaf.key)),
            _ => (fresh(&leaf.key), fresh(&key)),
        };
        let top = large.key.clone();
        let v = repr.combine(&top, &small.version.peek(), &large.version.peek());
        Node::internal(top, v, small, large)
    }

    /// Removes `key`; true iff it was present.
    pub fn delete(&self, key: &K) -> bool {
        let mut stack = self.root_frame();
        let mut first = true;
        loop {
            let leaf = self.search(key, &mut stack);
            if std::mem::take(&mut first) {
                stats::search_depth(stack.len() as u64);
            }
            if leaf.key.real() != Some(key) {
                self.propagate(stack);
                return false;
            }
            // A real leaf is never a child of the root, so `gp` exists.
            let n = stack.len();
            let (p, pupdate) = stack[n - 1].clone();
            let (gp, gpupdate) = stack[n - 2].clone();
            if gpupdate.state != State::Clean {
                self.help(&gpupdate);
                self.retry_from_gp(&mut stack);
                continue;
            }
            if pupdate.state != State::Clean {
                self.help(&pupdate);
                self.backtrack(&mut stack);
                continue;
            }
            let info = Arc::new(Info::Delete {
                gp: Arc::downgrade(&gp),
                p: Arc::downgrade(&p),
                l: leaf,
                pupdate,
            });
            let flag = Arc::new(Word {
                state: State::DFlag,
                info: Some(info.clone()),
            });
            point(Point::Flag);
            match self.cas_update(&gp, &gpupdate, flag) {
                Ok(()) => {
                    point(Point::Flagged);
                    if self.help_delete(&info) {
                        stack.pop();
                        self.propagate(stack);
                        return true;
                    }
                    self.retry_from_gp(&mut stack);
                }
                Err(cur) => {
                    self.help(&cur);
                    self.retry_from_gp(&mut stack);
                }
            }
        }
    }

    /// Reads the root's version slot once.
    pub fn snapshot(&self) -> R::Snapshot {
        point(Point::ReadRoot);
        let v = self.inner.root.version.load();
        self.repr().snapshot(v)
    }

    pub fn size(&self) -> u64 {
        self.snapshot().size()
    }

    pub fn find(&self, key: &K) -> bool {
        self.snapshot().find(key)
    }

    pub fn select(&self, j: u64) -> Option<K> {
        self.snapshot().select(j)
    }

    pub fn rank(&self, x: &K) -> u64 {
        self.snapshot().rank(x)
    }

    pub fn predecessor(&self, x: &K) -> Option<K> {
        self.snapshot().predecessor(x)
    }

    pub fn successor(&self, x: &K) -> Option<K> {
        self.snapshot().successor(x)
    }

    pub fn minimum(&self) -> Option<K> {
        self.snapshot().minimum()
    }

    pub fn maximum(&self) -> Option<K> {
        self.snapshot().maximum()
    }

    pub fn range_count(&self, lo: &K, hi: &K) -> Result<u64, BstError> {
        if lo > hi {
            return Err(BstError::InvalidRange);
        }
        Ok(self.snapshot().range_count(lo, hi))
    }

    pub fn range_collect(&self, lo: &K, hi: &K) -> Result<Vec<K>, BstError> {
        if lo > hi {
            return Err(BstError::InvalidRange);
        }
        Ok(self.snapshot().range_collect(lo, hi))
    }

    /// Keys of the Node tree's leaves, sentinels included, in order. Only
    /// meaningful when no update is running.
    pub fn node_leaf_keys(&self) -> Vec<BstKey<K>> {
        let mut out = Vec::new();
        let mut stack = vec![self.inner.root.clone()];
        while let Some(n) = stack.pop() {
            match n.children() {
                None => out.push(n.key.clone()),
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out
    }

    /// Depth of the deepest leaf of the Node tree (the root's children have
    /// depth 1).
    pub fn node_height(&self) -> u64 {
        let mut best = 0;
        let mut stack = vec![(self.inner.root.clone(), 0u64)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            if let Some((l, r)) = n.children() {
                stack.push((l, d + 1));
                stack.push((r, d + 1));
            }
        }
        best
    }

    /// Checks the Node tree: the sentinel frame is intact, every internal
    /// Node has two children and leaves respect the routing keys above them.
    /// Safe to call concurrently, but only conclusive in a paused or
    /// quiescent state.
    pub fn verify_nodes(&self) -> Result<(), BstViolation> {
        let root = &self.inner.root;
        let Some((_, r)) = root.children() else {
            return Err(BstViolation::Shape);
        };
        if root.key != BstKey::Inf2 || !r.is_leaf() || r.key != BstKey::Inf2 {
            return Err(BstViolation::Sentinels);
        }
        let mut stack: Vec<(Arc<Node<K, R::Version>>, Option<BstKey<K>>, Option<BstKey<K>>)> =
            vec![(root.clone(), None, None)];
        while let Some((n, lo, hi)) = stack.pop() {
            if n.is_leaf() {
                if lo.as_ref().is_some_and(|lo| n.key < *lo) || hi.as_ref().is_some_and(|hi| n.key >= *hi) {
                    return Err(BstViolation::Order);
                }
                continue;
            }
            let (l, r) = n.children().ok_or(BstViolation::Shape)?;
            stack.push((l, lo, Some(n.key.clone())));
            stack.push((r, Some(n.key.clone()), hi));
        }
        let keys = self.node_leaf_keys();
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BstViolation::Order);
        }
        if keys.len() < 2 || keys[keys.len() - 2] != BstKey::Inf1 {
            return Err(BstViolation::Sentinels);
        }
        Ok(())
    }

    /// Checks the current root Version tree: routing order, summaries, and
    /// sentinel leaves contributing nothing.
    pub fn verify_snapshot(&self) -> Result<(), BstViolation> {
        let v = self.inner.root.version.peek();
        self.repr().verify(&v)
    }

    /// Both checks above plus agreement between the root Version and the
    /// Node tree. Call only when no update is running.
    pub fn verify_quiescent(&self) -> Result<(), BstViolation> {
        self.verify_nodes()?;
        self.verify_snapshot()?;
        let v = self.inner.root.version.peek();
        let snap = self.repr().keys(&v);
        let nodes: Vec<K> = self.node_leaf_keys().into_iter().filter_map(|k| k.real().cloned()).collect();
        if snap != nodes {
            return Err(BstViolation::Stale);
        }
        Ok(())
    }
}

/// Snapshot of an augmented BST: one root Version.
pub struct BstSnapshot<K, P: crate::version::Augmentation> {
    root: Arc<BstVersion<K, P>>,
    policy: P,
}

impl<K, P: crate::version::Augmentation + Clone> Clone for BstSnapshot<K, P> {
    fn clone(&self) -> Self {
        BstSnapshot {
            root: self.root.clone(),
            policy: self.policy.clone(),
        }
    }
}

impl<K: Clone, P: crate::version::Augmentation> BstSnapshot<K, P> {
    pub fn root(&self) -> &Arc<BstVersion<K, P>> {
        &self.root
    }

    pub fn summary(&self) -> &P::Summary {
        self.root.summary()
    }

    /// Real keys, ascending.
    pub fn keys(&self) -> Vec<K> {
        leaves(&*self.root).into_iter().filter_map(|l| l.key().real().cloned()).collect()
    }

    fn cursor(&self) -> BstCursor<'_, K, P> {
        BstCursor {
            v: &self.root,
            policy: &self.policy,
        }
    }
}

struct BstCursor<'a, K, P: crate::version::Augmentation> {
    v: &'a BstVersion<K, P>,
    policy: &'a P,
}

impl<K, P: crate::version::Augmentation> Clone for BstCursor<'_, K, P> {
    fn clone(&self) -> Self {
        BstCursor { ..*self }
    }
}

impl<K: Ord + Clone, P: crate::version::Augmentation> Cursor for BstCursor<'_, K, P> {
    type Key = K;

    fn count(&self) -> u64 {
        self.policy.count(self.v.summary())
    }

    fn children(&self) -> Option<(Self, Self)> {
        let (l, r) = self.v.children()?;
        Some((
            BstCursor { v: l, policy: self.policy },
            BstCursor { v: r, policy: self.policy },
        ))
    }

    fn goes_right(&self, x: &K) -> bool {
        routes_right(x, self.v.key())
    }

    fn leaf_key(&self) -> Option<K> {
        self.v.key().real().cloned()
    }
}

impl<K: Ord + Clone, P: crate::version::Augmentation> OrderedSnapshot<K> for BstSnapshot<K, P> {
    fn size(&self) -> u64 {
        query::size(&self.cursor())
    }

    fn find(&self, key: &K) -> bool {
        query::find(self.cursor(), key)
    }

    fn select(&self, j: u64) -> Option<K> {
        query::select(self.cursor(), j)
    }

    fn rank(&self, x: &K) -> u64 {
        query::rank(self.cursor(), x)
    }

    fn predecessor(&self, x: &K) -> Option<K> {
        query::predecessor(self.cursor(), x)
    }

    fn successor(&self, x: &K) -> Option<K> {
        query::successor(self.cursor(), x)
    }

    fn minimum(&self) -> Option<K> {
        query::select(self.cursor(), 1)
    }

    fn maximum(&self) -> Option<K> {
        query::select(self.cursor(), self.policy.count(self.root.summary()))
    }

    fn range_count(&self, lo: &K, hi: &K) -> u64 {
        query::range_count(self.cursor(), lo, hi)
    }

    fn range_collect(&self, lo: &K, hi: &K) -> Vec<K> {
        query::range_collect(self.cursor(), lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::MinMaxPolicy;

    #[test]
    fn sentinel_order() {
        assert!(BstKey::Real(u64::MAX) < BstKey::Inf1);
        assert!(BstKey::<u64>::Inf1 < BstKey::Inf2);
    }

    #[test]
    fn initial_shape() {
        let t: Bst<u64> = Bst::new();
        let root = &t.inner.root;
        assert_eq!(root.key, BstKey::Inf2);
        let (l, r) = root.children().unwrap();
        assert_eq!((l.key.clone(), r.key.clone()), (BstKey::Inf1, BstKey::Inf2));
        assert!(l.is_leaf() && r.is_leaf());
        assert_eq!(*l.version.peek().summary(), 0);
        assert_eq!(*r.version.peek().summary(), 0);
        assert_eq!(*root.version.peek().summary(), 0);
        assert_eq!(t.size(), 0);
        assert!(!t.find(&0));
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn insert_builds_three_node_replacement() {
        let t: Bst<u64> = Bst::new();
        assert!(t.insert(5));
        assert!(!t.insert(5));
        let (l, _) = t.inner.root.children().unwrap();
        // the Inf1 leaf became Inf1 over {5, Inf1}
        assert_eq!(l.key, BstKey::Inf1);
        let (a, b) = l.children().unwrap();
        assert_eq!((a.key.clone(), b.key.clone()), (BstKey::Real(5), BstKey::Inf1));
        assert_eq!(*a.version.peek().summary(), 1);
        assert_eq!(*b.version.peek().summary(), 0);
        assert_eq!(*l.version.peek().summary(), 1);
        assert_eq!(t.size(), 1);
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn insert_delete_round_trip() {
        let t: Bst<u64> = Bst::new();
        assert!(!t.delete(&9));
        assert!(t.insert(5));
        assert!(t.delete(&5));
        assert!(!t.delete(&5));
        assert_eq!(t.size(), 0);
        assert_eq!(t.node_leaf_keys(), vec![BstKey::Inf1, BstKey::Inf2]);
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn queries_after_3567() {
        let t: Bst<u64> = Bst::new();
        for k in [6, 3, 7, 5] {
            assert!(t.insert(k));
        }
        assert_eq!(t.size(), 4);
        assert_eq!(t.select(1), Some(3));
        assert_eq!(t.select(4), Some(7));
        assert_eq!(t.select(5), None);
        assert_eq!(t.rank(&5), 2);
        assert_eq!(t.rank(&4), 1);
        assert_eq!(t.predecessor(&6), Some(5));
        assert_eq!(t.successor(&7), None);
        assert_eq!(t.minimum(), Some(3));
        assert_eq!(t.maximum(), Some(7));
        assert_eq!(t.range_count(&4, &6).unwrap(), 2);
        assert_eq!(t.range_collect(&0, &100).unwrap(), vec![3, 5, 6, 7]);
        assert_eq!(t.range_count(&6, &4), Err(BstError::InvalidRange));
        assert_eq!(t.snapshot().keys(), vec![3, 5, 6, 7]);
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn fast_variant() {
        let t: FastBst<u64> = Bst::new();
        for k in [6, 3, 7, 5] {
            assert!(t.insert(k));
        }
        assert!(t.delete(&6));
        assert_eq!(t.snapshot().keys(), vec![3, 5, 7]);
        assert_eq!(t.select(2), Some(5));
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn min_max_policy() {
        let t: Bst<i64, Augmented<MinMaxPolicy<i64>>> = Bst::with_repr(Augmented::new(MinMaxPolicy::new()));
        for k in [4, -2, 9] {
            t.insert(k);
        }
        let s = t.snapshot();
        assert_eq!((s.summary().min, s.summary().max, s.summary().count), (Some(-2), Some(9), 3));
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn sorted_inserts_build_a_path() {
        let t: Bst<u64> = Bst::new();
        for k in 0..2_000 {
            t.insert(k);
        }
        assert!(t.node_height() >= 2_000);
        assert_eq!(t.size(), 2_000);
        assert_eq!(t.select(1_000), Some(999));
        t.verify_quiescent().unwrap();
    }

    #[test]
    fn deep_node_chain_drops_without_overflow() {
        let mut cur = Node::<u64, Rbt<u64>>::leaf(BstKey::Inf1, Arc::new(Rbt::empty()));
        for k in 0..300_000u64 {
            let leaf = Node::leaf(BstKey::Real(k), Arc::new(Rbt::empty()));
            cur = Node::internal(BstKey::Inf1, Arc::new(Rbt::empty()), leaf, cur);
        }
        drop(cur);
    }

    #[test]
    fn concurrent_disjoint_updates() {
        let t: Bst<u64> = Bst::new();
        std::thread::scope(|s| {
            for id in 0..4u64 {
                let t = t.clone();
                s.spawn(move || {
                    for i in 0..500 {
                        t.insert(i * 4 + id);
                    }
                    for i in 0..250 {
                        t.delete(&(i * 8 + id));
                    }
                });
            }
        });
        assert_eq!(t.size(), 1000);
        t.verify_quiescent().unwrap();
    }
}
