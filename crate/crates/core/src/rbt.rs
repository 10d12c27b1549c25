//! Immutable size-augmented red-black trees with a non-destructive join.
//!
//! These replace Version trees in the fast-query variants of the trie and the
//! BST: every slot holds the root of an RBT containing all keys of its
//! subtree, and a refresh joins the two child RBTs. Joins copy only the nodes
//! on the attachment spine; the input trees are never modified.
//!
//! Trees are node-oriented (every node holds a key). An empty tree has
//! `sum() == 0` and no nodes.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use crate::query::OrderedSnapshot;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Colour {
    Red,
    Black,
}

pub struct RbtNode<K> {
    left: Link<K>,
    right: Link<K>,
    sum: u64,
    key: K,
    colour: Colour,
}

type Link<K> = Option<Arc<RbtNode<K>>>;

impl<K> RbtNode<K> {
    pub fn key(&self) -> &K {
        &self.key
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    pub fn colour(&self) -> Colour {
        self.colour
    }

    pub fn left(&self) -> Option<&Arc<RbtNode<K>>> {
        self.left.as_ref()
    }

    pub fn right(&self) -> Option<&Arc<RbtNode<K>>> {
        self.right.as_ref()
    }
}

impl<K: fmt::Debug> fmt::Debug for RbtNode<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RbtNode")
            .field("key", &self.key)
            .field("sum", &self.sum)
            .field("colour", &self.colour)
            .field("left", &self.left)
            .field("right", &self.right)
            .finish()
    }
}

fn sum_of<K>(link: &Link<K>) -> u64 {
    link.as_ref().map_or(0, |n| n.sum)
}

fn is_red<K>(link: &Link<K>) -> bool {
    matches!(link, Some(n) if n.colour == Colour::Red)
}

fn black_bit<K>(link: &Link<K>) -> u32 {
    (!is_red(link)) as u32 * link.is_some() as u32
}

fn node<K>(left: Link<K>, key: K, colour: Colour, right: Link<K>) -> Arc<RbtNode<K>> {
    stats::rbt_node_created();
    Arc::new(RbtNode {
        sum: 1 + sum_of(&left) + sum_of(&right),
        left,
        right,
        key,
        colour,
    })
}

fn recolour<K: Clone>(n: &Arc<RbtNode<K>>, colour: Colour) -> Arc<RbtNode<K>> {
    node(n.left.clone(), n.key.clone(), colour, n.right.clone())
}

/// Black nodes on any root-to-empty path (the empty tree has 0).
fn black_height<K>(mut link: &Link<K>) -> u32 {
    let mut h = 0;
    while let Some(n) = link {
        if n.colour == Colour::Black {
            h += 1;
        }
        link = &n.left;
    }
    h
}

/// `tl` is at least as black-tall as `tr`; returns a tree of black height
/// `tl_bh` whose root may be red with a red right child (fixed by the caller).
fn join_right<K: Clone>(tl: &Link<K>, tl_bh: u32, key: K, tr: &Link<K>, tr_bh: u32) -> Arc<RbtNode<K>> {
    if !is_red(tl) && tl_bh == tr_bh {
        return node(tl.clone(), key, Colour::Red, tr.clone());
    }
    let t = tl.as_ref().expect("taller tree is non-empty");
    let child_bh = tl_bh - black_bit(tl);
    let new_right = join_right(&t.right, child_bh, key, tr, tr_bh);
    if t.colour == Colour::Black && new_right.colour == Colour::Red && is_red(&new_right.right) {
        let rr = new_right.right.as_ref().unwrap();
        let rr = recolour(rr, Colour::Black);
        let lower = node(t.left.clone(), t.key.clone(), Colour::Black, new_right.left.clone());
        return node(Some(lower), new_right.key.clone(), Colour::Red, Some(rr));
    }
    node(t.left.clone(), t.key.clone(), t.colour, Some(new_right))
}

fn join_left<K: Clone>(tl: &Link<K>, tl_bh: u32, key: K, tr: &Link<K>, tr_bh: u32) -> Arc<RbtNode<K>> {
    if !is_red(tr) && tl_bh == tr_bh {
        return node(tl.clone(), key, Colour::Red, tr.clone());
    }
    let t = tr.as_ref().expect("taller tree is non-empty");
    let child_bh = tr_bh - black_bit(tr);
    let new_left = join_left(tl, tl_bh, key, &t.left, child_bh);
    if t.colour == Colour::Black && new_left.colour == Colour::Red && is_red(&new_left.left) {
        let ll = new_left.left.as_ref().unwrap();
        let ll = recolour(ll, Colour::Black);
        let lower = node(new_left.right.clone(), t.key.clone(), Colour::Black, t.right.clone());
        return node(Some(ll), new_left.key.clone(), Colour::Red, Some(lower));
    }
    node(Some(new_left), t.key.clone(), t.colour, t.right.clone())
}

/// Join with a middle key: all of `tl` < `key` < all of `tr`.
/// Returns the new root and its black height.
fn join_with_key<K: Clone>(tl: &Link<K>, tl_bh: u32, key: K, tr: &Link<K>, tr_bh: u32) -> (Arc<RbtNode<K>>, u32) {
    match tl_bh.cmp(&tr_bh) {
        Ordering::Greater => {
            let t = join_right(tl, tl_bh, key, tr, tr_bh);
            if t.colour == Colour::Red && is_red(&t.right) {
                (recolour(&t, Colour::Black), tl_bh + 1)
            } else {
                (t, tl_bh)
            }
        }
        Ordering::Less => {
            let t = join_left(tl, tl_bh, key, tr, tr_bh);
            if t.colour == Colour::Red && is_red(&t.left) {
                (recolour(&t, Colour::Black), tr_bh + 1)
            } else {
                (t, tr_bh)
            }
        }
        Ordering::Equal => {
            if !is_red(tl) && !is_red(tr) {
                (node(tl.clone(), key, Colour::Red, tr.clone()), tl_bh)
            } else {
                (node(tl.clone(), key, Colour::Black, tr.clone()), tl_bh + 1)
            }
        }
    }
}

/// Removes the largest key: returns the remaining tree, its black height and
/// the removed key.
fn split_last<K: Clone>(t: &Arc<RbtNode<K>>, bh: u32) -> (Link<K>, u32, K) {
    let child_bh = bh - (t.colour == Colour::Black) as u32;
    match &t.right {
        None => (t.left.clone(), child_bh, t.key.clone()),
        Some(r) => {
            let (rest, rest_bh, last) = split_last(r, child_bh);
            let (joined, joined_bh) = join_with_key(&t.left, child_bh, t.key.clone(), &rest, rest_bh);
            (Some(joined), joined_bh, last)
        }
    }
}

/// Handle to an immutable RBT, possibly empty. Cloning is O(1).
pub struct Rbt<K> {
    root: Link<K>,
}

impl<K> Clone for Rbt<K> {
    fn clone(&self) -> Self {
        Rbt {
            root: self.root.clone(),
        }
    }
}

impl<K> Default for Rbt<K> {
    fn default() -> Self {
        Rbt::empty()
    }
}

impl<K: fmt::Debug> fmt::Debug for Rbt<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Rbt").field(&self.root).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RbtViolation {
    #[error("red node with a red child")]
    RedRed,
    #[error("unequal black heights ({0} vs {1})")]
    BlackHeight(u32, u32),
    #[error("sum field {found} but subtree holds {expected} keys")]
    Sum { found: u64, expected: u64 },
    #[error("keys out of order")]
    Order,
}

impl<K> Rbt<K> {
    /// The dummy tree: no keys, `sum() == 0`.
    pub fn empty() -> Self {
        Rbt { root: None }
    }

    pub fn root(&self) -> Option<&Arc<RbtNode<K>>> {
        self.root.as_ref()
    }

    pub fn sum(&self) -> u64 {
        sum_of(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn height(&self) -> u32 {
        fn go<K>(l: &Link<K>) -> u32 {
            l.as_ref().map_or(0, |n| 1 + go(&n.left).max(go(&n.right)))
        }
        go(&self.root)
    }

    /// True if both handles share the same root node (or are both empty).
    pub fn same_root(&self, other: &Rbt<K>) -> bool {
        match (&self.root, &other.root) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            (None, None) => true,
            _ => false,
        }
    }
}

impl<K: Clone> Rbt<K> {
    /// Black single-node tree.
    pub fn singleton(key: K) -> Self {
        Rbt {
            root: Some(node(None, key, Colour::Black, None)),
        }
    }

    /// Non-destructive join; every key of `left` must be smaller than every
    /// key of `right`. The result has a black root.
    pub fn join(left: &Rbt<K>, right: &Rbt<K>) -> Rbt<K> {
        let l = match (&left.root, &right.root) {
            (None, _) => return right.clone(),
            (_, None) => return left.clone(),
            (Some(l), Some(_)) => l,
        };
        let (rest, rest_bh, last) = split_last(l, black_height(&left.root));
        let (t, _) = join_with_key(&rest, rest_bh, last, &right.root, black_height(&right.root));
        let t = if t.colour == Colour::Red {
            recolour(&t, Colour::Black)
        } else {
            t
        };
        stats::join_size(t.sum);
        Rbt { root: Some(t) }
    }

    /// In-order key sequence.
    pub fn keys(&self) -> Vec<K> {
        let mut out = Vec::with_capacity(self.sum() as usize);
        let mut stack: Vec<&Arc<RbtNode<K>>> = Vec::new();
        let mut cur = self.root.as_ref();
        while cur.is_some() || !stack.is_empty() {
            while let Some(n) = cur {
                stack.push(n);
                cur = n.left.as_ref();
            }
            let n = stack.pop().unwrap();
            out.push(n.key.clone());
            cur = n.right.as_ref();
        }
        out
    }
}

impl<K: Ord + Clone> Rbt<K> {
    /// Checks colouring, black heights, sums and key order; returns the
    /// black height.
    pub fn verify(&self) -> Result<u32, RbtViolation> {
        fn go<K: Ord>(l: &Link<K>, lo: Option<&K>, hi: Option<&K>) -> Result<(u32, u64), RbtViolation> {
            let Some(n) = l else { return Ok((0, 0)) };
            if lo.is_some_and(|lo| n.key <= *lo) || hi.is_some_and(|hi| n.key >= *hi) {
                return Err(RbtViolation::Order);
            }
            if n.colour == Colour::Red && (is_red(&n.left) || is_red(&n.right)) {
                return Err(RbtViolation::RedRed);
            }
            let (lb, ls) = go(&n.left, lo, Some(&n.key))?;
            let (rb, rs) = go(&n.right, Some(&n.key), hi)?;
            if lb != rb {
                return Err(RbtViolation::BlackHeight(lb, rb));
            }
            if n.sum != 1 + ls + rs {
                return Err(RbtViolation::Sum {
                    found: n.sum,
                    expected: 1 + ls + rs,
                });
            }
            Ok((lb + (n.colour == Colour::Black) as u32, n.sum))
        }
        go(&self.root, None, None).map(|(bh, _)| bh)
    }
}

fn visit(depth: &mut u64) {
    stats::read();
    stats::visit();
    *depth += 1;
}

impl<K: Ord + Clone> Rbt<K> {
    fn rank_impl(&self, x: &K, inclusive: bool) -> u64 {
        let mut acc = 0;
        let mut depth = 0;
        let mut cur = self.root.as_ref();
        while let Some(n) = cur {
            visit(&mut depth);
            let goes_right = if inclusive { n.key <= *x } else { n.key < *x };
            if goes_right {
                acc += 1 + sum_of(&n.left);
                cur = n.right.as_ref();
            } else {
                cur = n.left.as_ref();
            }
        }
        stats::query_depth(depth);
        acc
    }

    fn collect_into(link: &Link<K>, lo: &K, hi: &K, out: &mut Vec<K>) {
        let Some(n) = link else { return };
        stats::read();
        stats::visit();
        if n.key > *lo {
            Self::collect_into(&n.left, lo, hi, out);
        }
        if *lo <= n.key && n.key <= *hi {
            out.push(n.key.clone());
        }
        if n.key < *hi {
            Self::collect_into(&n.right, lo, hi, out);
        }
    }
}

impl<K: Ord + Clone> OrderedSnapshot<K> for Rbt<K> {
    fn size(&self) -> u64 {
        stats::read();
        stats::visit();
        self.sum()
    }

    fn find(&self, key: &K) -> bool {
        let mut depth = 0;
        let mut cur = self.root.as_ref();
        let mut found = false;
        while let Some(n) = cur {
            visit(&mut depth);
            cur = match key.cmp(&n.key) {
                Ordering::Less => n.left.as_ref(),
                Ordering::Greater => n.right.as_ref(),
                Ordering::Equal => {
                    found = true;
                    break;
                }
            };
        }
        stats::query_depth(depth);
        found
    }

    fn select(&self, mut j: u64) -> Option<K> {
        if j == 0 || j > self.sum() {
            return None;
        }
        let mut depth = 0;
        let mut cur = self.root.as_ref();
        while let Some(n) = cur {
            visit(&mut depth);
            let in_left = sum_of(&n.left);
            if j <= in_left {
                cur = n.left.as_ref();
            } else if j == in_left + 1 {
                stats::query_depth(depth);
                return Some(n.key.clone());
            } else {
                j -= in_left + 1;
                cur = n.right.as_ref();
            }
        }
        unreachable!("sum fields guarantee the rank is present")
    }

    fn rank(&self, x: &K) -> u64 {
        self.rank_impl(x, true)
    }

    fn predecessor(&self, x: &K) -> Option<K> {
        match self.rank_impl(x, false) {
            0 => None,
            r => self.select(r),
        }
    }

    fn successor(&self, x: &K) -> Option<K> {
        let r = self.rank(x);
        if r >= self.sum() {
            None
        } else {
            self.select(r + 1)
        }
    }

    fn minimum(&self) -> Option<K> {
        self.select(1)
    }

    fn maximum(&self) -> Option<K> {
        self.select(self.sum())
    }

    fn range_count(&self, lo: &K, hi: &K) -> u64 {
        if lo > hi {
            return 0;
        }
        self.rank(hi) - self.rank_impl(lo, false)
    }

    fn range_collect(&self, lo: &K, hi: &K) -> Vec<K> {
        let mut out = Vec::new();
        if lo <= hi {
            Self::collect_into(&self.root, lo, hi, &mut out);
        }
        out
    }
}

/// Value a fast-variant refresh installs for two child trees: reuse one side
/// when the other is empty, otherwise join. The result is always a fresh
/// cell so a slot never receives a reference it has held before.
pub fn fast_combine<K: Clone>(left: &Rbt<K>, right: &Rbt<K>) -> Arc<Rbt<K>> {
    if left.sum() == 0 {
        Arc::new(right.clone())
    } else if right.sum() == 0 {
        Arc::new(left.clone())
    } else {
        Arc::new(Rbt::join(left, right))
    }
}
