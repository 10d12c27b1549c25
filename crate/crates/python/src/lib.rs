//! Python bindings for the tries, the BST, their fast-query variants,
//! snapshots and the linearizability checker. Keys and values are `u64`.

use augtree::bst::{Bst as CoreBst, FastBst as CoreFastBst};
use augtree::lincheck::{check, History};
use augtree::oracle::{Mode, Oracle};
use augtree::query::OrderedSnapshot;
use augtree::trie::{FastTrie as CoreFastTrie, KvTrie as CoreKvTrie, MultisetTrie as CoreMultisetTrie, SetTrie};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Immutable view of a structure at one instant. Later updates never
/// change what a snapshot reports.
#[pyclass(frozen, module = "augtree_py")]
pub struct Snapshot {
    inner: Box<dyn OrderedSnapshot<u64> + Send + Sync>,
}

impl Snapshot {
    fn new(s: impl OrderedSnapshot<u64> + Send + Sync + 'static) -> Self {
        Snapshot { inner: Box::new(s) }
    }
}

#[pymethods]
impl Snapshot {
    fn size(&self) -> u64 {
        self.inner.size()
    }

    fn __len__(&self) -> usize {
        self.inner.size() as usize
    }

    fn __contains__(&self, key: u64) -> bool {
        self.inner.find(&key)
    }

    fn find(&self, key: u64) -> bool {
        self.inner.find(&key)
    }

    /// The `j`-th smallest key (1-based), or None.
    fn select(&self, j: u64) -> Option<u64> {
        self.inner.select(j)
    }

    /// Number of keys `<= x`.
    fn rank(&self, x: u64) -> u64 {
        self.inner.rank(&x)
    }

    fn predecessor(&self, x: u64) -> Option<u64> {
        self.inner.predecessor(&x)
    }

    fn successor(&self, x: u64) -> Option<u64> {
        self.inner.successor(&x)
    }

    fn minimum(&self) -> Option<u64> {
        self.inner.minimum()
    }

    fn maximum(&self) -> Option<u64> {
        self.inner.maximum()
    }

    fn range_count(&self, lo: u64, hi: u64) -> u64 {
        self.inner.range_count(&lo, &hi)
    }

    fn range_collect(&self, lo: u64, hi: u64) -> Vec<u64> {
        self.inner.range_collect(&lo, &hi)
    }

    /// All keys in ascending order.
    fn keys(&self) -> Vec<u64> {
        self.inner.range_collect(&0, &u64::MAX)
    }
}

/// A trie class: constructor, key-range checked queries, snapshot and
/// verify, plus the update methods given in the macro body.
macro_rules! trie_class {
    ($(#[$doc:meta])* $name:ident, $core:ty, { $($updates:tt)* }) => {
        $(#[$doc])*
        #[pyclass(frozen, module = "augtree_py")]
        pub struct $name {
            inner: $core,
        }

        #[pymethods]
        impl $name {
            /// `universe` must be a power of two; keys are `0..universe`.
            #[new]
            fn new(universe: u64) -> PyResult<Self> {
                Ok($name {
                    inner: <$core>::new(universe).map_err(value_err)?,
                })
            }

            #[getter]
            fn universe(&self) -> u64 {
                self.inner.universe()
            }

            $($updates)*

            fn find(&self, key: u64) -> PyResult<bool> {
                self.inner.find(key).map_err(value_err)
            }

            fn __contains__(&self, key: u64) -> bool {
                self.inner.find(key).unwrap_or(false)
            }

            fn size(&self) -> u64 {
                self.inner.size()
            }

            fn __len__(&self) -> usize {
                self.inner.size() as usize
            }

            fn select(&self, j: u64) -> Option<u64> {
                self.inner.select(j)
            }

            fn rank(&self, x: u64) -> PyResult<u64> {
                self.inner.rank(x).map_err(value_err)
            }

            fn predecessor(&self, x: u64) -> PyResult<Option<u64>> {
                self.inner.predecessor(x).map_err(value_err)
            }

            fn successor(&self, x: u64) -> PyResult<Option<u64>> {
                self.inner.successor(x).map_err(value_err)
            }

            fn minimum(&self) -> Option<u64> {
                self.inner.minimum()
            }

            fn maximum(&self) -> Option<u64> {
                self.inner.maximum()
            }

            fn range_count(&self, lo: u64, hi: u64) -> PyResult<u64> {
                self.inner.range_count(lo, hi).map_err(value_err)
            }

            fn range_collect(&self, lo: u64, hi: u64) -> PyResult<Vec<u64>> {
                self.inner.range_collect(lo, hi).map_err(value_err)
            }

            fn snapshot(&self) -> Snapshot {
                Snapshot::new(self.inner.snapshot())
            }

            /// Raises ValueError if any slot breaks the shape or summary
            /// invariants.
            fn verify(&self) -> PyResult<()> {
                self.inner.verify().map_err(value_err)
            }
        }
    };
}

trie_class!(
    /// Wait-free set over `0..universe` with O(1) size and O(log N)
    /// order-statistic queries.
    Trie,
    SetTrie,
    {
        /// True iff the key was absent.
        fn insert(&self, key: u64) -> PyResult<bool> {
            self.inner.insert(key).map_err(value_err)
        }

        /// True iff the key was present.
        fn delete(&self, key: u64) -> PyResult<bool> {
            self.inner.delete(key).map_err(value_err)
        }
    }
);

trie_class!(
    /// Set trie whose snapshots are balanced trees, for O(log n) queries.
    FastTrie,
    CoreFastTrie,
    {
        fn insert(&self, key: u64) -> PyResult<bool> {
            self.inner.insert(key).map_err(value_err)
        }

        fn delete(&self, key: u64) -> PyResult<bool> {
            self.inner.delete(key).map_err(value_err)
        }
    }
);

trie_class!(
    /// Lock-free multiset; queries count multiplicity.
    MultisetTrie,
    CoreMultisetTrie,
    {
        fn insert(&self, key: u64) -> PyResult<bool> {
            self.inner.insert(key).map_err(value_err)
        }

        /// Removes one copy; False if none was present.
        fn delete(&self, key: u64) -> PyResult<bool> {
            self.inner.delete(key).map_err(value_err)
        }

        fn count(&self, key: u64) -> PyResult<u64> {
            self.inner.count(key).map_err(value_err)
        }
    }
);

trie_class!(
    /// Key-value map over `0..universe` with integer values.
    KvTrie,
    CoreKvTrie<u64>,
    {
        /// Stores `value`, returning the value it displaced.
        fn replace(&self, key: u64, value: u64) -> PyResult<Option<u64>> {
            self.inner.replace(key, value).map_err(value_err)
        }

        /// Stores `value` with a single atomic step.
        fn assign(&self, key: u64, value: u64) -> PyResult<()> {
            self.inner.assign(key, value).map_err(value_err)
        }

        fn remove(&self, key: u64) -> PyResult<Option<u64>> {
            self.inner.remove(key).map_err(value_err)
        }

        fn get(&self, key: u64) -> PyResult<Option<u64>> {
            self.inner.get(key).map_err(value_err)
        }

        /// `(key, value)` pairs of one snapshot, ascending by key.
        fn items(&self) -> Vec<(u64, u64)> {
            let snap = self.inner.snapshot();
            snap.entries().into_iter().filter_map(|(k, _)| snap.get(k).map(|v| (k, *v))).collect()
        }
    }
);

macro_rules! bst_class {
    ($(#[$doc:meta])* $name:ident, $core:ty) => {
        $(#[$doc])*
        #[pyclass(frozen, module = "augtree_py")]
        pub struct $name {
            inner: $core,
        }

        #[pymethods]
        impl $name {
            #[new]
            fn new() -> Self {
                $name { inner: <$core>::new() }
            }

            fn insert(&self, key: u64) -> bool {
                self.inner.insert(key)
            }

            fn delete(&self, key: u64) -> bool {
                self.inner.delete(&key)
            }

            fn find(&self, key: u64) -> bool {
                self.inner.find(&key)
            }

            fn __contains__(&self, key: u64) -> bool {
                self.inner.find(&key)
            }

            fn size(&self) -> u64 {
                self.inner.size()
            }

            fn __len__(&self) -> usize {
                self.inner.size() as usize
            }

            fn select(&self, j: u64) -> Option<u64> {
                self.inner.select(j)
            }

            fn rank(&self, x: u64) -> u64 {
                self.inner.rank(&x)
            }

            fn predecessor(&self, x: u64) -> Option<u64> {
                self.inner.predecessor(&x)
            }

            fn successor(&self, x: u64) -> Option<u64> {
                self.inner.successor(&x)
            }

            fn minimum(&self) -> Option<u64> {
                self.inner.minimum()
            }

            fn maximum(&self) -> Option<u64> {
                self.inner.maximum()
            }

            fn range_count(&self, lo: u64, hi: u64) -> PyResult<u64> {
                self.inner.range_count(&lo, &hi).map_err(value_err)
            }

            fn range_collect(&self, lo: u64, hi: u64) -> PyResult<Vec<u64>> {
                self.inner.range_collect(&lo, &hi).map_err(value_err)
            }

            /// Height of the (unbalanced) node tree.
            fn height(&self) -> u64 {
                self.inner.node_height()
            }

            fn snapshot(&self) -> Snapshot {
                Snapshot::new(self.inner.snapshot())
            }

            /// Checks the node tree and the current snapshot; call only
            /// while no update is running.
            fn verify(&self) -> PyResult<()> {
                self.inner.verify_quiescent().map_err(value_err)
            }
        }
    };
}

bst_class!(
    /// Lock-free leaf-oriented BST with wait-free snapshot queries.
    Bst,
    CoreBst<u64>
);

bst_class!(
    /// BST whose snapshots are balanced trees.
    FastBst,
    CoreFastBst<u64>
);

/// Checks a history dump (one `seq thread kind op args result` line per
/// event) for linearizability against a sequential model in `mode`
/// ("set", "multiset" or "map") starting from `initial` keys.
#[pyfunction]
#[pyo3(signature = (history, mode = "set", initial = Vec::new()))]
fn check_history(history: &str, mode: &str, initial: Vec<u64>) -> PyResult<bool> {
    let mode: Mode = mode.parse().map_err(value_err)?;
    if mode == Mode::Map && !initial.is_empty() {
        return Err(value_err("initial keys are not supported in map mode"));
    }
    let h = History::parse(history).map_err(value_err)?;
    let initial = Oracle::from_keys(mode, initial);
    Ok(check(&h, &initial, None).map_err(value_err)?.is_accept())
}

#[pymodule]
pub fn augtree_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Snapshot>()?;
    m.add_class::<Trie>()?;
    m.add_class::<FastTrie>()?;
    m.add_class::<MultisetTrie>()?;
    m.add_class::<KvTrie>()?;
    m.add_class::<Bst>()?;
    m.add_class::<FastBst>()?;
    m.add_function(wrap_pyfunction!(check_history, m)?)?;
    Ok(())
}
