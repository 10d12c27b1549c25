mod common;

use augtree::bst::{Bst, FastBst};
use augtree::lincheck::{check, Clock, History, Schedule, Step, Subject};
use augtree::oracle::{Mode, Op, Oracle};
use augtree::rbt::Rbt;
use augtree::sched::Point;
use augtree::trie::{FastTrie, KvTrie, MultisetTrie, SetTrie};
use proptest::prelude::*;

const UNIVERSE: u64 = 16;

fn op_strategy(mode: Mode, universe: u64) -> impl Strategy<Value = Op> {
    (0u8..20, 0..universe, 0..universe, 0u64..1000, 0..=universe + 1).prop_map(move |(kind, k, x, v, j)| {
        let (a, b) = (k.min(x), k.max(x));
        match (kind, mode) {
            (0..=4, Mode::Map) => Op::Replace(k, v),
            (5..=6, Mode::Map) => Op::Assign(k, v),
            (7..=8, Mode::Map) => Op::Remove(k),
            (9, Mode::Map) => Op::Get(k),
            (0..=4, _) => Op::Insert(k),
            (5..=9, _) => Op::Delete(k),
            (10, _) => Op::Find(k),
            (11, _) => Op::Select(j),
            (12, _) => Op::Rank(k),
            (13, _) => Op::Predecessor(k),
            (14, _) => Op::Successor(k),
            (15, _) => Op::Minimum,
            (16, _) => Op::Maximum,
            (17, _) => Op::RangeCount(a, b),
            (18, _) => Op::RangeCollect(a, b),
            _ => Op::Size,
        }
    })
}

fn ops(mode: Mode) -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(op_strategy(mode, UNIVERSE), 0..120)
}

/// Replays against the oracle, running `verify` after every operation.
fn replay_verified<S: Subject>(s: &S, ops: &[Op], verify: impl Fn(&S) -> Result<(), String>) -> Result<(), String> {
    let mut oracle = Oracle::new(s.mode());
    for op in ops {
        let (got, want) = (s.apply(op), oracle.apply(op));
        if got != want {
            return Err(format!("{op}: got {got}, oracle {want}"));
        }
        verify(s)?;
    }
    Ok(())
}

/// An RBT over `keys` (sorted) whose shape follows the random split points.
fn build_rbt(keys: &[u64], splits: &mut impl Iterator<Item = usize>) -> Rbt<u64> {
    match keys.len() {
        0 => Rbt::empty(),
        1 => Rbt::singleton(keys[0]),
        n => {
            let at = 1 + splits.next().unwrap_or(0) % (n - 1);
            let l = build_rbt(&keys[..at], splits);
            let r = build_rbt(&keys[at..], splits);
            Rbt::join(&l, &r)
        }
    }
}

/// Pre-order (key, sum, colour) listing, for detecting mutation.
fn fingerprint(t: &Rbt<u64>) -> Vec<(u64, u64, String)> {
    let mut out = Vec::new();
    let mut stack: Vec<_> = t.root().into_iter().collect();
    while let Some(n) = stack.pop() {
        out.push((*n.key(), n.sum(), format!("{:?}", n.colour())));
        stack.extend(n.right());
        stack.extend(n.left());
    }
    out
}

proptest! {
    #[test]
    fn set_trie_matches_oracle(ops in ops(Mode::Set)) {
        let t = SetTrie::new(UNIVERSE).unwrap();
        replay_verified(&t, &ops, |t| t.verify().map_err(|e| e.to_string())).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn fast_trie_matches_oracle(ops in ops(Mode::Set)) {
        let t = FastTrie::new(UNIVERSE).unwrap();
        replay_verified(&t, &ops, |t| t.verify().map_err(|e| e.to_string())).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn multiset_trie_matches_oracle(ops in ops(Mode::Multiset)) {
        let t = MultisetTrie::new(UNIVERSE).unwrap();
        replay_verified(&t, &ops, |t| t.verify().map_err(|e| e.to_string())).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn kv_trie_matches_oracle(ops in ops(Mode::Map)) {
        let t = KvTrie::<u64>::new(UNIVERSE).unwrap();
        replay_verified(&t, &ops, |t| t.verify().map_err(|e| e.to_string())).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn bst_matches_oracle(ops in ops(Mode::Set)) {
        let t: Bst<u64> = Bst::new();
        replay_verified(&t, &ops, |t| t.verify_quiescent().map_err(|e| e.to_string())).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn fast_bst_matches_oracle(ops in ops(Mode::Set)) {
        let t: FastBst<u64> = FastBst::new();
        replay_verified(&t, &ops, |t| t.verify_quiescent().map_err(|e| e.to_string())).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn rbt_join_matches_merge(
        nl in 0usize..=64,
        nr in 0usize..=64,
        gap in 1u64..5,
        splits in prop::collection::vec(any::<usize>(), 130),
    ) {
        let left_keys: Vec<u64> = (0..nl as u64).map(|i| i * gap).collect();
        let base = nl as u64 * gap + gap;
        let right_keys: Vec<u64> = (0..nr as u64).map(|i| base + i * gap).collect();
        let mut it = splits.into_iter();
        let l = build_rbt(&left_keys, &mut it);
        let r = build_rbt(&right_keys, &mut it);
        let (fl, fr) = (fingerprint(&l), fingerprint(&r));
        l.verify().unwrap();
        r.verify().unwrap();
        let j = Rbt::join(&l, &r);
        let mut expected = left_keys.clone();
        expected.extend(&right_keys);
        prop_assert_eq!(j.keys(), expected);
        prop_assert_eq!(j.sum(), (nl + nr) as u64);
        prop_assert!(j.verify().is_ok());
        prop_assert_eq!(fingerprint(&l), fl);
        prop_assert_eq!(fingerprint(&r), fr);
        // height bound for a red-black tree of n keys
        let n = (nl + nr) as f64;
        prop_assert!(f64::from(j.height()) <= 2.0 * (n + 1.0).log2());
    }

    #[test]
    fn checker_accepts_sequential_replay(
        ops in prop::collection::vec(op_strategy(Mode::Set, 4), 1..=10),
        threads in prop::collection::vec(0usize..3, 10),
    ) {
        // One operation at a time, spread over threads.
        let clock = Clock::new();
        let mut logs: Vec<_> = (0..3).map(|t| clock.log(t)).collect();
        let mut oracle = Oracle::new(Mode::Set);
        for (op, t) in ops.iter().zip(&threads) {
            logs[*t].record(*op, |op| oracle.apply(op));
        }
        let h = History::merge(logs);
        prop_assert!(check(&h, &Oracle::new(Mode::Set), Some(&oracle)).unwrap().is_accept());
        prop_assert_eq!(History::parse(&h.dump()).unwrap(), h);
    }

    #[test]
    fn schedule_text_round_trip(steps in prop::collection::vec((0usize..4, prop::option::of(0usize..Point::ALL.len())), 0..30)) {
        let s = Schedule::new(steps.into_iter().map(|(thread, p)| Step { thread, point: p.map(|i| Point::ALL[i]) }).collect());
        prop_assert_eq!(Schedule::parse(&s.dump()).unwrap(), s);
    }

    #[test]
    fn snapshots_are_immutable(before in ops(Mode::Set), after in ops(Mode::Set)) {
        let t = SetTrie::new(UNIVERSE).unwrap();
        for op in &before {
            t.apply(op);
        }
        let snap = t.snapshot();
        let keys = snap.entries();
        let sum = *snap.summary();
        for op in &after {
            t.apply(op);
        }
        prop_assert_eq!(snap.entries(), keys);
        prop_assert_eq!(*snap.summary(), sum);
    }
}

#[test]
fn common_replay_smoke() {
    use rand::{rngs::StdRng, SeedableRng};
    let mut rng = StdRng::seed_from_u64(7);
    let ops: Vec<Op> = (0..500).map(|_| common::random_op(&mut rng, Mode::Set, 8)).collect();
    common::replay(&SetTrie::new(8).unwrap(), &ops).unwrap();
}
