//! Sequential reference model.
//!
//! A `BTreeMap` from key to multiplicity (set and multiset modes) or to the
//! stored value (map mode), answering every operation by direct counting.
//! Conventions: `rank(x)` counts keys `<= x`, `predecessor(x)` is the largest
//! key `< x`, `successor(x)` the smallest key `> x`, ranks are 1-based and
//! multiset queries count multiplicity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Set,
    Multiset,
    Map,
}

/// An operation on any of the structures, with `u64` keys and values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Insert(u64),
    Delete(u64),
    Find(u64),
    Select(u64),
    Rank(u64),
    Predecessor(u64),
    Successor(u64),
    Minimum,
    Maximum,
    RangeCount(u64, u64),
    RangeCollect(u64, u64),
    Size,
    /// Map: store a value, returning the one it displaced.
    Replace(u64, u64),
    /// Map: store a value, returning nothing.
    Assign(u64, u64),
    /// Map: remove a key, returning its value.
    Remove(u64),
    Get(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OpResult {
    Bool(bool),
    Key(Option<u64>),
    Count(u64),
    Keys(Vec<u64>),
    Value(Option<u64>),
    Unit,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Insert(_) => "insert",
            Op::Delete(_) => "delete",
            Op::Find(_) => "find",
            Op::Select(_) => "select",
            Op::Rank(_) => "rank",
            Op::Predecessor(_) => "predecessor",
            Op::Successor(_) => "successor",
            Op::Minimum => "minimum",
            Op::Maximum => "maximum",
            Op::RangeCount(..) => "range-count",
            Op::RangeCollect(..) => "range-collect",
            Op::Size => "size",
            Op::Replace(..) => "replace",
            Op::Assign(..) => "assign",
            Op::Remove(_) => "remove",
            Op::Get(_) => "get",
        }
    }

    pub fn is_update(&self) -> bool {
        matches!(
            self,
            Op::Insert(_) | Op::Delete(_) | Op::Replace(..) | Op::Assign(..) | Op::Remove(_)
        )
    }

    fn args(&self) -> Vec<u64> {
        match *self {
            Op::Insert(a)
            | Op::Delete(a)
            | Op::Find(a)
            | Op::Select(a)
            | Op::Rank(a)
            | Op::Predecessor(a)
            | Op::Successor(a)
            | Op::Remove(a)
            | Op::Get(a) => vec![a],
            Op::RangeCount(a, b) | Op::RangeCollect(a, b) | Op::Replace(a, b) | Op::Assign(a, b) => vec![a, b],
            Op::Minimum | Op::Maximum | Op::Size => vec![],
        }
    }

    /// Parses the `op args` token pair of the history format.
    pub fn parse(name: &str, args: &str) -> Result<Op, ParseError> {
        let bad = || ParseError(format!("{name} {args}"));
        let nums: Vec<u64> = if args == "-" {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        let op = match (name, nums.as_slice()) {
            ("insert", &[a]) => Op::Insert(a),
            ("delete", &[a]) => Op::Delete(a),
            ("find", &[a]) => Op::Find(a),
            ("select", &[a]) => Op::Select(a),
            ("rank", &[a]) => Op::Rank(a),
            ("predecessor", &[a]) => Op::Predecessor(a),
            ("successor", &[a]) => Op::Successor(a),
            ("minimum", &[]) => Op::Minimum,
            ("maximum", &[]) => Op::Maximum,
            ("range-count", &[a, b]) => Op::RangeCount(a, b),
            ("range-collect", &[a, b]) => Op::RangeCollect(a, b),
            ("size", &[]) => Op::Size,
            ("replace", &[a, b]) => Op::Replace(a, b),
            ("assign", &[a, b]) => Op::Assign(a, b),
            ("remove", &[a]) => Op::Remove(a),
            ("get", &[a]) => Op::Get(a),
            _ => return Err(bad()),
        };
        Ok(op)
    }

    /// Parses a result token for this operation.
    pub fn parse_result(&self, token: &str) -> Result<OpResult, ParseError> {
        let bad = || ParseError(format!("{} result {token}", self.name()));
        let opt = |t: &str| -> Result<Option<u64>, ParseError> {
            if t == "none" {
                Ok(None)
            } else {
                t.parse().map(Some).map_err(|_| bad())
            }
        };
        Ok(match self {
            Op::Insert(_) | Op::Delete(_) | Op::Find(_) => match token {
                "true" => OpResult::Bool(true),
                "false" => OpResult::Bool(false),
                _ => return Err(bad()),
            },
            Op::Select(_) | Op::Predecessor(_) | Op::Successor(_) | Op::Minimum | Op::Maximum => {
                OpResult::Key(opt(token)?)
            }
            Op::Rank(_) | Op::RangeCount(..) | Op::Size => OpResult::Count(token.parse().map_err(|_| bad())?),
            Op::RangeCollect(..) => {
                let inner = token.strip_prefix('[').and_then(|t| t.strip_suffix(']')).ok_or_else(bad)?;
                let keys = if inner.is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|k| k.parse().map_err(|_| bad())).collect::<Result<_, _>>()?
                };
                OpResult::Keys(keys)
            }
            Op::Replace(..) | Op::Remove(_) | Op::Get(_) => OpResult::Value(opt(token)?),
            Op::Assign(..) => match token {
                "ok" => OpResult::Unit,
                _ => return Err(bad()),
            },
        })
    }
}

impl fmt::Display for Op {
    /// `name args`, args comma separated or `-` when there are none.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args = self.args();
        if args.is_empty() {
            write!(f, "{} -", self.name())
        } else {
            let args: Vec<String> = args.iter().map(u64::to_string).collect();
            write!(f, "{} {}", self.name(), args.join(","))
        }
    }
}

impl fmt::Display for OpResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |f: &mut fmt::Formatter<'_>, v: &Option<u64>| match v {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("none"),
        };
        match self {
            OpResult::Bool(b) => write!(f, "{b}"),
            OpResult::Key(k) | OpResult::Value(k) => opt(f, k),
            OpResult::Count(c) => write!(f, "{c}"),
            OpResult::Keys(ks) => {
                let ks: Vec<String> = ks.iter().map(u64::to_string).collect();
                write!(f, "[{}]", ks.join(","))
            }
            OpResult::Unit => f.write_str("ok"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}`")]
pub struct ParseError(pub String);

impl FromStr for Mode {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "set" => Ok(Mode::Set),
            "multiset" => Ok(Mode::Multiset),
            "map" => Ok(Mode::Map),
            _ => Err(ParseError(s.to_string())),
        }
    }
}

/// Sorted reference set, multiset or map.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Oracle {
    mode: Mode,
    /// Multiplicity (set, multiset) or value (map).
    entries: BTreeMap<u64, u64>,
}

impl Oracle {
    pub fn new(mode: Mode) -> Self {
        Oracle {
            mode,
            entries: BTreeMap::new(),
        }
    }

    /// Set or multiset holding `keys` (repeats count in multiset mode).
    pub fn from_keys(mode: Mode, keys: impl IntoIterator<Item = u64>) -> Self {
        let mut o = Oracle::new(mode);
        for k in keys {
            match mode {
                Mode::Set => {
                    o.entries.insert(k, 1);
                }
                Mode::Multiset => *o.entries.entry(k).or_insert(0) += 1,
                Mode::Map => panic!("use from_entries for maps"),
            }
        }
        o
    }

    /// Map holding `(key, value)` pairs, or multiset holding `(key, count)`.
    pub fn from_entries(mode: Mode, entries: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut o = Oracle::new(mode);
        o.entries.extend(entries.into_iter().filter(|&(_, v)| mode == Mode::Map || v > 0));
        o
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn entries(&self) -> &BTreeMap<u64, u64> {
        &self.entries
    }

    fn weight(&self, v: u64) -> u64 {
        match self.mode {
            Mode::Multiset => v,
            _ => 1,
        }
    }

    /// Keys with multiplicity, ascending.
    pub fn keys(&self) -> Vec<u64> {
        self.entries
            .iter()
            .flat_map(|(&k, &v)| std::iter::repeat_n(k, self.weight(v) as usize))
            .collect()
    }

    pub fn size(&self) -> u64 {
        self.entries.values().map(|&v| self.weight(v)).sum()
    }

    fn rank(&self, x: u64) -> u64 {
        self.entries.range(..=x).map(|(_, &v)| self.weight(v)).sum()
    }

    fn select(&self, j: u64) -> Option<u64> {
        if j == 0 {
            return None;
        }
        let mut seen = 0;
        for (&k, &v) in &self.entries {
            seen += self.weight(v);
            if seen >= j {
                return Some(k);
            }
        }
        None
    }

    /// Applies `op` and returns its sequential result.
    ///
    /// Panics on an operation that does not belong to the oracle's mode.
    pub fn apply(&mut self, op: &Op) -> OpResult {
        use OpResult::*;
        let mode = self.mode;
        let unsupported = || panic!("{} is not a {mode:?} operation", op.name());
        match *op {
            Op::Insert(k) => match mode {
                Mode::Set => Bool(self.entries.insert(k, 1).is_none()),
                Mode::Multiset => {
                    *self.entries.entry(k).or_insert(0) += 1;
                    Bool(true)
                }
                Mode::Map => unsupported(),
            },
            Op::Delete(k) => match mode {
                Mode::Set => Bool(self.entries.remove(&k).is_some()),
                Mode::Multiset => match self.entries.get_mut(&k) {
                    Some(c) if *c > 1 => {
                        *c -= 1;
                        Bool(true)
                    }
                    Some(_) => {
                        self.entries.remove(&k);
                        Bool(true)
                    }
                    None => Bool(false),
                },
                Mode::Map => unsupported(),
            },
            Op::Find(k) => Bool(self.entries.contains_key(&k)),
            Op::Select(j) => Key(self.select(j)),
            Op::Rank(x) => Count(self.rank(x)),
            Op::Predecessor(x) => Key(self.entries.range(..x).next_back().map(|(&k, _)| k)),
            Op::Successor(x) => Key(x.checked_add(1).and_then(|lo| self.entries.range(lo..).next().map(|(&k, _)| k))),
            Op::Minimum => Key(self.entries.keys().next().copied()),
            Op::Maximum => Key(self.entries.keys().next_back().copied()),
            Op::RangeCount(lo, hi) => Count(if lo > hi {
                0
            } else {
                self.entries.range(lo..=hi).map(|(_, &v)| self.weight(v)).sum()
            }),
            Op::RangeCollect(lo, hi) => Keys(if lo > hi {
                Vec::new()
            } else {
                self.entries
                    .range(lo..=hi)
                    .flat_map(|(&k, &v)| std::iter::repeat_n(k, self.weight(v) as usize))
                    .collect()
            }),
            Op::Size => Count(self.size()),
            Op::Replace(k, v) if mode == Mode::Map => Value(self.entries.insert(k, v)),
            Op::Assign(k, v) if mode == Mode::Map => {
                self.entries.insert(k, v);
                Unit
            }
            Op::Remove(k) if mode == Mode::Map => Value(self.entries.remove(&k)),
            Op::Get(k) if mode == Mode::Map => Value(self.entries.get(&k).copied()),
            Op::Replace(..) | Op::Assign(..) | Op::Remove(_) | Op::Get(_) => unsupported(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_basics() {
        let mut o = Oracle::new(Mode::Set);
        assert_eq!(o.apply(&Op::Insert(3)), OpResult::Bool(true));
        assert_eq!(o.apply(&Op::Insert(3)), OpResult::Bool(false));
        let mut o = Oracle::from_keys(Mode::Set, [1, 2, 3]);
        assert_eq!(o.apply(&Op::Rank(2)), OpResult::Count(2));
        assert_eq!(o.apply(&Op::Select(4)), OpResult::Key(None));
        assert_eq!(o.apply(&Op::Predecessor(2)), OpResult::Key(Some(1)));
        assert_eq!(o.apply(&Op::Successor(2)), OpResult::Key(Some(3)));
        assert_eq!(o.apply(&Op::Successor(3)), OpResult::Key(None));
        assert_eq!(o.apply(&Op::RangeCollect(2, 9)), OpResult::Keys(vec![2, 3]));
        assert_eq!(o.apply(&Op::RangeCount(3, 2)), OpResult::Count(0));
    }

    #[test]
    fn multiset_counts_multiplicity() {
        let mut o = Oracle::from_keys(Mode::Multiset, [5, 5, 7]);
        assert_eq!(o.apply(&Op::Size), OpResult::Count(3));
        assert_eq!(o.apply(&Op::Select(2)), OpResult::Key(Some(5)));
        assert_eq!(o.apply(&Op::Rank(5)), OpResult::Count(2));
        assert_eq!(o.apply(&Op::Delete(5)), OpResult::Bool(true));
        assert_eq!(o.apply(&Op::RangeCollect(0, 9)), OpResult::Keys(vec![5, 7]));
        assert_eq!(o.apply(&Op::Delete(5)), OpResult::Bool(true));
        assert_eq!(o.apply(&Op::Delete(5)), OpResult::Bool(false));
        assert_eq!(o, Oracle::from_keys(Mode::Multiset, [7]));
    }

    #[test]
    fn map_replace() {
        let mut o = Oracle::new(Mode::Map);
        assert_eq!(o.apply(&Op::Replace(1, 10)), OpResult::Value(None));
        assert_eq!(o.apply(&Op::Replace(1, 11)), OpResult::Value(Some(10)));
        assert_eq!(o.apply(&Op::Assign(2, 20)), OpResult::Unit);
        assert_eq!(o.apply(&Op::Get(1)), OpResult::Value(Some(11)));
        assert_eq!(o.apply(&Op::Size), OpResult::Count(2));
        assert_eq!(o.apply(&Op::Remove(1)), OpResult::Value(Some(11)));
        assert_eq!(o.apply(&Op::Get(1)), OpResult::Value(None));
    }

    #[test]
    fn text_round_trip() {
        let ops = [
            Op::Insert(4),
            Op::Size,
            Op::RangeCollect(1, 9),
            Op::Replace(3, 30),
            Op::Minimum,
        ];
        for op in ops {
            let text = op.to_string();
            let (name, args) = text.split_once(' ').unwrap();
            assert_eq!(Op::parse(name, args).unwrap(), op);
        }
        let r = OpResult::Keys(vec![1, 2]);
        assert_eq!(Op::RangeCollect(0, 5).parse_result(&r.to_string()).unwrap(), r);
        assert_eq!(Op::Select(1).parse_result("none").unwrap(), OpResult::Key(None));
        assert!(Op::Insert(1).parse_result("7").is_err());
    }
}
