#![allow(dead_code)]

use augtree::lincheck::Subject;
use augtree::oracle::{Mode, Op, Oracle};
use rand::Rng;

/// A random operation valid for `mode` over keys `0..universe`.
pub fn random_op(rng: &mut impl Rng, mode: Mode, universe: u64) -> Op {
    let k = rng.random_range(0..universe);
    let (a, b) = {
        let x = rng.random_range(0..universe);
        (k.min(x), k.max(x))
    };
    let updates = match mode {
        Mode::Set | Mode::Multiset => {
            if rng.random_bool(0.5) {
                Op::Insert(k)
            } else {
                Op::Delete(k)
            }
        }
        Mode::Map => match rng.random_range(0..4) {
            0 => Op::Replace(k, rng.random_range(0..1000)),
            1 => Op::Assign(k, rng.random_range(0..1000)),
            2 => Op::Remove(k),
            _ => Op::Get(k),
        },
    };
    match rng.random_range(0..20) {
        0..=9 => updates,
        10 => Op::Find(k),
        11 => Op::Select(rng.random_range(0..=universe + 1)),
        12 => Op::Rank(k),
        13 => Op::Predecessor(k),
        14 => Op::Successor(k),
        15 => Op::Minimum,
        16 => Op::Maximum,
        17 => Op::RangeCount(a, b),
        18 => Op::RangeCollect(a, b),
        _ => Op::Size,
    }
}

/// Applies `ops` to both `subject` and a fresh oracle; returns the first
/// operation whose results differ.
pub fn replay<S: Subject>(subject: &S, ops: &[Op]) -> Result<(), String> {
    let mut oracle = Oracle::new(subject.mode());
    for (i, op) in ops.iter().enumerate() {
        let got = subject.apply(op);
        let want = oracle.apply(op);
        if got != want {
            return Err(format!("op {i} ({op}): got {got}, oracle {want}"));
        }
    }
    if subject.contents() != oracle {
        return Err("final contents differ".into());
    }
    Ok(())
}
