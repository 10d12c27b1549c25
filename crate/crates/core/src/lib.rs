pub mod bst;
pub mod lincheck;
pub mod oracle;
pub mod query;
pub mod rbt;
pub mod sched;
pub mod stats;
pub mod trie;
pub mod version;
