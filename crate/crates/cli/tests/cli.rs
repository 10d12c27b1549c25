use std::collections::BTreeMap;
use std::process::{Command, Output};

use augtree::lincheck::{check, History};
use augtree::oracle::{Mode, Oracle};

fn stress(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augtree-stress")).args(args).output().unwrap()
}

fn metrics(out: &Output) -> BTreeMap<String, String> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap_or_else(|| panic!("not key=value: {l}"));
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn without_timing(m: BTreeMap<String, String>) -> BTreeMap<String, String> {
    m.into_iter().filter(|(k, _)| !k.ends_with("_ms") && !k.ends_with("_per_sec")).collect()
}

#[test]
fn sequential_trie_with_sweeps() {
    let out = stress(&["--structure", "trie", "--threads", "1", "--ops", "1000", "--check", "invariants"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = metrics(&out);
    assert_eq!(m["ops"], "1000");
    // one sweep per 100 operations plus the final one
    assert_eq!(m["invariant_sweeps"], "11");
    assert_eq!(m["invariant_violations"], "0");
    assert_eq!(m["result"], "pass");
}

#[test]
fn timed_bst_run_with_sweeps() {
    let out = stress(&["--structure", "bst", "--threads", "8", "--duration", "2s", "--check", "invariants"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = metrics(&out);
    assert_eq!(m["invariant_violations"], "0");
    assert!(m["ops"].parse::<u64>().unwrap() > 0);
}

#[test]
fn small_linearizability_check_and_history_dump() {
    let dir = std::env::temp_dir().join(format!("augtree-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("history.txt");
    let out = stress(&[
        "--structure",
        "trie",
        "--threads",
        "2",
        "--ops",
        "8",
        "--universe",
        "4",
        "--check",
        "linearizability",
        "--history-out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = metrics(&out);
    assert_eq!(m["lin_check"], "full");
    assert_eq!(m["lin_result"], "accept");
    let h = History::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(h.operations().unwrap().len(), 8);
    // the dump alone is enough to re-check the run
    assert!(check(&h, &Oracle::new(Mode::Set), None).unwrap().is_accept());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn large_runs_fall_back_to_net_effect_check() {
    for structure in ["bst-fast", "multiset", "kv"] {
        let out = stress(&[
            "--structure",
            structure,
            "--threads",
            "4",
            "--ops",
            "4000",
            "--universe",
            "64",
            "--check",
            "linearizability",
        ]);
        assert!(out.status.success(), "{structure}: {}", String::from_utf8_lossy(&out.stderr));
        let m = metrics(&out);
        assert_eq!(m["lin_check"], "net-effect");
        assert_eq!(m["lin_result"], "accept");
    }
}

#[test]
fn same_seed_single_thread_same_metrics() {
    for structure in ["trie", "trie-fast", "bst", "bst-fast", "multiset", "kv"] {
        let args = ["--structure", structure, "--ops", "3000", "--universe", "256", "--seed", "42"];
        let a = without_timing(metrics(&stress(&args)));
        let b = without_timing(metrics(&stress(&args)));
        assert_eq!(a, b, "{structure}");
        assert!(a["cas_attempts"].parse::<u64>().unwrap() > 0);
    }
    let fast = metrics(&stress(&["--structure", "trie-fast", "--ops", "500", "--universe", "64"]));
    assert!(fast.contains_key("max_join_size"));
}

#[test]
fn rejects_bad_configuration() {
    let cases: [&[&str]; 5] = [
        &["--structure", "trie", "--universe", "1000"],
        &["--structure", "trie", "--mix", "50:50:10:0:0"],
        &["--structure", "trie", "--threads", "0"],
        &["--structure", "trie", "--check", "linearizability", "--duration", "1s"],
        &["--structure", "heap"],
    ];
    for args in cases {
        let out = stress(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}
