"""The six per-function concurrency metrics computed over a CCFG."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ccfg import Ccfg

SVD_SEGMENT_CAP = 10_000  # max enumerated segments per access pair


@dataclass(frozen=True)
class ConMetricRecord:
    SPC: int  # synchronization primitive calls
    SVC: int  # shared-variable access nodes
    CSC: int  # conditional regions touching sync or shared state
    CEC: int  # incident cross-thread edges
    CCC: int  # cyclomatic complexity of the pruned thread-relevant graph
    SVD: float  # trimmed-mean path distance between shared accesses
    ccc_degenerate: bool = False  # function had no statement nodes
    svd_estimated: bool = False  # segment enumeration hit the cap

    def as_dict(self) -> dict:
        return {
            "SPC": self.SPC, "SVC": self.SVC, "CSC": self.CSC,
            "CEC": self.CEC, "CCC": self.CCC, "SVD": self.SVD,
        }


def spc(c: Ccfg, function: str) -> int:
    return sum(1 for n in c.nodes_of(function) if n.is_sync)


def svc(c: Ccfg, function: str) -> int:
    return sum(1 for n in c.nodes_of(function) if n.is_sv)


def csc(c: Ccfg, function: str) -> int:
    relevant = {n.id for n in c.nodes_of(function) if n.is_sv or n.is_sync}
    return sum(
        1
        for r in c.regions
        if r.function == function and any(nid in relevant for nid in r.nodes)
    )


def cec(c: Ccfg, function: str) -> int:
    mine = {n.id for n in c.nodes_of(function)}
    return sum(
        1 for e in c.cross_edges if e.src in mine or e.dst in mine
    )


def _pruned_graph(c: Ccfg, function: str) -> tuple[set, set]:
    """(kept node ids, deduplicated local edges) after removing nodes
    that sit only inside conditional regions irrelevant to concurrency."""
    nodes = c.nodes_of(function)
    ids = {n.id for n in nodes}
    relevant_nodes = {n.id for n in nodes if n.is_sv or n.is_sync}
    cross_endpoints = set()
    for e in c.cross_edges:
        cross_endpoints.update(x for x in (e.src, e.dst) if x in ids)
    keep_always = set(relevant_nodes) | cross_endpoints
    entry = c.entry_of.get(function)
    if entry is not None:
        keep_always.add(entry)
    keep_always.update(c.exits_of.get(function, ()))

    regions = [r for r in c.regions if r.function == function]
    in_any_region = set().union(*(set(r.nodes) for r in regions)) if regions else set()
    in_relevant_region = set().union(
        *(set(r.nodes) for r in regions if any(n in relevant_nodes for n in r.nodes))
    ) if regions else set()

    # Prune nodes that appear only inside regions with no sync or
    # shared-variable activity, unless structurally required.
    pruned = {
        nid
        for nid in in_any_region
        if nid not in in_relevant_region and nid not in keep_always
    }

    kept = ids - pruned
    edges = {
        (u, v)
        for (u, v) in c.local_edges
        if u in ids and v in ids
    }
    # Bridge around pruned nodes one at a time.
    for p in sorted(pruned):
        preds = {u for (u, v) in edges if v == p and u != p}
        succs = {v for (u, v) in edges if u == p and v != p}
        edges = {(u, v) for (u, v) in edges if u != p and v != p}
        edges.update((u, v) for u in preds for v in succs)
    return kept, edges


def ccc(c: Ccfg, function: str) -> tuple[int, bool]:
    kept, edges = _pruned_graph(c, function)
    mine = {n.id for n in c.nodes_of(function)}
    cross = sum(1 for e in c.cross_edges if e.src in mine or e.dst in mine)
    if not kept:
        return 2, True
    return len(edges) + cross - len(kept) + 2, False


def _segments(
    succ: dict, blockers: set, a: int, b: int, cap: int
) -> tuple[list, bool]:
    """Node-simple paths a -> b along local edges whose interior nodes
    are not shared-variable accesses.  Lengths are counted excluding the
    first node and including the last."""
    lengths: list[int] = []
    capped = False
    # Iterative DFS with explicit path stack.
    stack = [(a, iter(succ.get(a, ())))]
    on_path = {a}

    while stack:
        node, it = stack[-1]
        advanced = False
        for v in it:
            if v == b:
                lengths.append(len(stack))
                if len(lengths) >= cap:
                    return lengths, True
                continue
            if v in on_path or v in blockers:
                continue
            stack.append((v, iter(succ.get(v, ()))))
            on_path.add(v)
            advanced = True
            break
        if not advanced:
            stack.pop()
            on_path.discard(node)
    return lengths, capped


def svd(c: Ccfg, function: str, node_weight: int = 1) -> tuple[float, bool]:
    nodes = c.nodes_of(function)
    ids = {n.id for n in nodes}
    sv_nodes = sorted(n.id for n in nodes if n.is_sv)
    if len(sv_nodes) < 2:
        return 0.0, False
    succ: dict = {}
    for (u, v) in c.local_edges:
        if u in ids and v in ids:
            succ.setdefault(u, []).append(v)
    for u in succ:
        succ[u] = sorted(set(succ[u]))
    blockers = set(sv_nodes)
    distances: list[float] = []
    estimated = False
    for a in sv_nodes:
        for b in sv_nodes:
            if a == b:
                continue
            lengths, capped = _segments(
                succ, blockers - {a, b}, a, b, SVD_SEGMENT_CAP
            )
            estimated = estimated or capped
            distances.extend(node_weight * n for n in lengths)
    if not distances:
        return 0.0, False
    distances.sort()
    trim = math.floor(0.1 * len(distances))
    kept = distances[trim: len(distances) - trim]
    return sum(kept) / len(kept), estimated


def concurrency_metrics(
    c: Ccfg, function: str, node_weight: int = 1
) -> ConMetricRecord:
    ccc_value, degenerate = ccc(c, function)
    svd_value, estimated = svd(c, function, node_weight)
    return ConMetricRecord(
        SPC=spc(c, function),
        SVC=svc(c, function),
        CSC=csc(c, function),
        CEC=cec(c, function),
        CCC=ccc_value,
        SVD=svd_value,
        ccc_degenerate=degenerate,
        svd_estimated=estimated,
    )
