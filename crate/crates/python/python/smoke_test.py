"""Smoke test for the augtree_py extension module."""

import threading

import augtree_py as a


def concurrent_inserts():
    t = a.Trie(1024)
    wins = []

    def work(tid):
        wins.append(sum(t.insert(k) for k in range(1024) if k % 3 != tid))

    threads = [threading.Thread(target=work, args=(i,)) for i in range(3)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert sum(wins) == 1024 == len(t)
    t.verify()


def queries():
    for make in (lambda: a.Trie(64), lambda: a.FastTrie(64), a.Bst, a.FastBst):
        s = make()
        for k in (5, 17, 33, 60):
            s.insert(k)
        snap = s.snapshot()
        s.delete(17)
        assert snap.keys() == [5, 17, 33, 60]
        assert s.range_collect(0, 63) == [5, 33, 60]
        assert s.select(2) == 33 and s.rank(40) == 2
        assert s.predecessor(33) == 5 and s.successor(60) is None
        s.verify()


def maps():
    kv = a.KvTrie(16)
    kv.assign(4, 40)
    assert kv.replace(4, 41) == 40 and kv.remove(4) == 41 and len(kv) == 0
    m = a.MultisetTrie(16)
    for _ in range(3):
        m.insert(7)
    assert m.count(7) == 3 and m.rank(7) == 3


def history():
    h = "0 0 invoke insert 1 -\n1 1 invoke find 1 -\n2 1 respond find 1 true\n3 0 respond insert 1 true\n"
    assert a.check_history(h)
    assert not a.check_history(h, initial=[1])


if __name__ == "__main__":
    concurrent_inserts()
    queries()
    maps()
    history()
    print("smoke test passed")
