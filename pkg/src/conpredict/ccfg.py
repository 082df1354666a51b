"""Program-wide concurrency control flow graph (CCFG).

Per-function statement nodes plus three kinds of cross-thread edges:
fork (spawn site -> spawned function's entry), join (spawned function's
exit -> join site), and comm (shared-variable write -> cross-thread read).

Synthetic CFG entry/exit nodes are dropped: a function's entry is its
first statement node and its exits are its return nodes (or the final
fall-through statements).  This matches the statement-only node counts
of the worked example the metrics are validated against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .frontend.astnodes import (
    Assign,
    Call,
    Decl,
    DoWhile,
    If,
    SourceUnit,
    SpawnInit,
    SYNC_BUILTINS,
    Var,
    While,
    walk_expr,
    walk_statements,
)
from .frontend.cfg import lower_to_cfg


class CcfgError(ValueError):
    pass


@dataclass
class CcfgNode:
    id: int
    function: str
    kind: str
    uid: int = -1
    weight: int = 1
    reads: tuple = ()  # shared variables read at this node
    writes: tuple = ()  # shared variables written at this node
    sync: str | None = None  # sync builtin name, if any

    @property
    def is_sv(self) -> bool:
        return bool(self.reads or self.writes)

    @property
    def is_sync(self) -> bool:
        return self.sync in SYNC_BUILTINS


@dataclass(frozen=True)
class CrossEdge:
    src: int
    dst: int
    kind: str  # fork | join | comm
    var: str = ""  # shared variable, for comm edges


@dataclass
class Region:
    """A conditional region: the branch node plus every node in its
    bodies (nested statements included)."""

    function: str
    kind: str  # if | while | do-while
    nodes: tuple


@dataclass
class Ccfg:
    functions: tuple  # function names
    nodes: list  # CcfgNode
    local_edges: list  # (u, v)
    back_edges: set
    cross_edges: list  # CrossEdge
    shared_vars: tuple  # (name, type)
    entry_of: dict  # function -> node id (or None for empty functions)
    exits_of: dict  # function -> tuple of node ids
    regions: list  # Region
    spawn_sites: list = field(default_factory=list)  # (node id, target fn)
    diagnostics: list = field(default_factory=list)

    def node(self, node_id: int) -> CcfgNode:
        return self._index()[node_id]

    def _index(self) -> dict:
        if not hasattr(self, "_node_index"):
            self._node_index = {n.id: n for n in self.nodes}
        return self._node_index

    def nodes_of(self, function: str) -> list:
        if function not in self.functions:
            raise CcfgError(f"unknown function: {function}")
        return [n for n in self.nodes if n.function == function]


@dataclass
class SharedVarSet:
    entries: tuple  # (name, type) sorted by name
    accesses: dict  # function -> list of (uid, variable, "read"/"write")

    @property
    def names(self) -> frozenset:
        return frozenset(name for name, _ in self.entries)


# --------------------------------------------------------------------------
# Shared-variable identification
# --------------------------------------------------------------------------


def _expr_reads(e, names) -> list:
    return [s.name for s in walk_expr(e) if isinstance(s, Var) and s.name in names]


def _stmt_accesses(st, names) -> tuple[list, list]:
    """(reads, writes) of shared variables at one statement node."""
    reads: list = []
    writes: list = []
    if isinstance(st, Decl):
        if isinstance(st.init, SpawnInit):
            for a in st.init.args:
                reads += _expr_reads(a, names)
        elif st.init is not None:
            reads += _expr_reads(st.init, names)
    elif isinstance(st, Assign):
        reads += _expr_reads(st.expr, names)
        if st.op in ("|=", "&="):
            if st.name in names:
                reads.append(st.name)
        if st.name in names:
            writes.append(st.name)
    elif isinstance(st, Call):
        if st.name == "spawn":
            args = st.args[1:]
        elif st.name == "join":
            args = ()
        else:
            args = st.args
        for a in args:
            reads += _expr_reads(a, names)
    elif isinstance(st, (If, While, DoWhile)):
        reads += _expr_reads(st.cond, names)
    return reads, writes


def _reachable_functions(u: SourceUnit) -> set:
    """Functions reachable from main or from any spawn target."""
    from .frontend.seqmetrics import _callees

    roots = set()
    if any(f.name == "main" for f in u.functions):
        roots.add("main")
    for f in u.functions:
        for st in walk_statements(f.body):
            if isinstance(st, Decl) and isinstance(st.init, SpawnInit):
                roots.add(st.init.target)
            elif isinstance(st, Call) and st.name == "spawn" and st.args:
                roots.add(st.args[0].name)
    seen = set()
    work = list(roots)
    fn_by_name = {f.name: f for f in u.functions}
    while work:
        name = work.pop()
        if name in seen or name not in fn_by_name:
            continue
        seen.add(name)
        work.extend(_callees(fn_by_name[name]))
    return seen


def identify_shared(u: SourceUnit) -> SharedVarSet:
    """int/bool globals referenced by any function reachable from main or
    a spawn target; mutex/cond globals are excluded (lock objects)."""
    candidates = {g.name for g in u.globals if g.type in ("int", "bool")}
    reachable = _reachable_functions(u)
    referenced = set()
    for f in u.functions:
        if f.name not in reachable:
            continue
        for st in walk_statements(f.body):
            r, w = _stmt_accesses(st, candidates)
            referenced.update(r)
            referenced.update(w)
    entries = tuple(
        sorted((g.name, g.type) for g in u.globals if g.name in referenced)
    )
    names = {name for name, _ in entries}
    accesses: dict = {}
    for f in u.functions:
        acc = []
        for st in walk_statements(f.body):
            r, w = _stmt_accesses(st, names)
            for v in sorted(set(r)):
                acc.append((st.uid, v, "read"))
            for v in sorted(set(w)):
                acc.append((st.uid, v, "write"))
        accesses[f.name] = acc
    return SharedVarSet(entries, accesses)


# --------------------------------------------------------------------------
# CCFG construction
# --------------------------------------------------------------------------


def _collect_regions(f, uid_to_node: dict) -> list:
    regions = []

    def region_nodes(sts) -> list:
        out = []
        for st in walk_statements(sts):
            if st.uid in uid_to_node:
                out.append(uid_to_node[st.uid])
        return out

    def visit(body):
        for st in body:
            if isinstance(st, If):
                nodes = [uid_to_node[st.uid]] + region_nodes(st.then_body) + region_nodes(st.else_body)
                regions.append(Region(f.name, "if", tuple(sorted(nodes))))
                visit(st.then_body)
                visit(st.else_body)
            elif isinstance(st, (While, DoWhile)):
                kind = "while" if isinstance(st, While) else "do-while"
                nodes = [uid_to_node[st.uid]] + region_nodes(st.body)
                regions.append(Region(f.name, kind, tuple(sorted(nodes))))
                visit(st.body)

    visit(f.body)
    return regions


def _plain_callees(f) -> set:
    """User functions invoked by ordinary calls (spawn targets excluded:
    a spawned function runs in its own context, not the spawner's)."""
    from .frontend.astnodes import BUILTINS

    return {
        st.name
        for st in walk_statements(f.body)
        if isinstance(st, Call) and st.name not in BUILTINS
    }


def _thread_contexts(u: SourceUnit, spawn_sites) -> dict:
    """function -> frozenset of context labels ("main" or spawn site id)."""
    fn_by_name = {f.name: f for f in u.functions}
    ctx: dict = {name: set() for name in fn_by_name}

    def flood(root: str, label):
        work = [root]
        while work:
            name = work.pop()
            if name not in fn_by_name or label in ctx[name]:
                continue
            ctx[name].add(label)
            for callee in sorted(_plain_callees(fn_by_name[name])):
                work.append(callee)

    if "main" in fn_by_name:
        flood("main", "main")
    for site_id, target in spawn_sites:
        flood(target, site_id)
    return {name: frozenset(labels) for name, labels in ctx.items()}


def build_ccfg(u: SourceUnit) -> Ccfg:
    shared = identify_shared(u)
    names = shared.names
    nodes: list[CcfgNode] = []
    local_edges: list = []
    back_edges: set = set()
    entry_of: dict = {}
    exits_of: dict = {}
    regions: list = []
    uid_to_node: dict = {}
    diagnostics: list = []

    next_id = 1
    for f in u.functions:
        cfg = lower_to_cfg(f)
        id_map: dict = {}
        for n in cfg.nodes:
            if n.kind in ("entry", "exit"):
                continue
            gid = next_id
            next_id += 1
            id_map[n.id] = gid
            st = n.stmt
            reads, writes = _stmt_accesses(st, names) if st is not None else ([], [])
            sync = None
            if isinstance(st, Call) and st.name in SYNC_BUILTINS:
                sync = st.name
            node = CcfgNode(
                id=gid,
                function=f.name,
                kind=n.kind,
                uid=n.uid,
                reads=tuple(sorted(set(reads))),
                writes=tuple(sorted(set(writes))),
                sync=sync,
            )
            nodes.append(node)
            uid_to_node[n.uid] = gid
        entry_candidates = [
            id_map[v] for v in cfg.successors(cfg.entry) if v in id_map
        ]
        entry_of[f.name] = entry_candidates[0] if entry_candidates else None
        exits_of[f.name] = tuple(
            sorted(id_map[v] for v in set(cfg.predecessors(cfg.exit)) if v in id_map)
        )
        for (a, b) in cfg.edges:
            if a in id_map and b in id_map:
                local_edges.append((id_map[a], id_map[b]))
                if (a, b) in cfg.back_edges:
                    back_edges.add((id_map[a], id_map[b]))
        regions.extend(_collect_regions(f, uid_to_node))

    # Spawn sites and join sites.
    spawn_sites: list = []
    join_edges: list = []
    fork_edges: list = []
    fn_names = {f.name for f in u.functions}
    for f in u.functions:
        handle_targets: dict = {}
        for st in walk_statements(f.body):
            if isinstance(st, Decl) and isinstance(st.init, SpawnInit):
                site = uid_to_node[st.uid]
                spawn_sites.append((site, st.init.target))
                handle_targets.setdefault(st.name, []).append(
                    (site, st.init.target)
                )
            elif isinstance(st, Call) and st.name == "spawn":
                site = uid_to_node[st.uid]
                spawn_sites.append((site, st.args[0].name))
            elif isinstance(st, Call) and st.name == "join":
                handle = st.args[0].name
                join_node = uid_to_node[st.uid]
                if handle not in handle_targets:
                    diagnostics.append(
                        f"{f.name}: join of never-spawned handle {handle!r}"
                    )
                    continue
                for _site, target in handle_targets[handle]:
                    if target not in fn_names:
                        continue
                    for exit_node in exits_of.get(target, ()):
                        join_edges.append((exit_node, join_node))

    for site, target in spawn_sites:
        if target not in fn_names:
            raise CcfgError(f"spawn of unknown function {target!r}")
        entry = entry_of.get(target)
        if entry is not None:
            fork_edges.append((site, entry))

    # Communication edges: shared write -> cross-thread shared read.
    contexts = _thread_contexts(u, spawn_sites)
    comm_edges: list = []
    node_fn = {n.id: n.function for n in nodes}
    writers = [(n.id, v) for n in nodes for v in n.writes]
    readers = [(n.id, v) for n in nodes for v in n.reads]
    for (w, wv) in writers:
        for (r, rv) in readers:
            if wv != rv:
                continue
            cw = contexts.get(node_fn[w], frozenset())
            cr = contexts.get(node_fn[r], frozenset())
            # Edge iff the write and read can run in different contexts.
            if any(a != b for a in cw for b in cr):
                comm_edges.append((w, r, wv))

    cross: list = []
    for (a, b) in sorted(set(fork_edges)):
        cross.append(CrossEdge(a, b, "fork"))
    for (a, b) in sorted(set(join_edges)):
        cross.append(CrossEdge(a, b, "join"))
    for (a, b, v) in sorted(set(comm_edges)):
        cross.append(CrossEdge(a, b, "comm", v))

    return Ccfg(
        functions=tuple(f.name for f in u.functions),
        nodes=nodes,
        local_edges=sorted(local_edges),
        back_edges=back_edges,
        cross_edges=cross,
        shared_vars=shared.entries,
        entry_of=entry_of,
        exits_of=exits_of,
        regions=regions,
        spawn_sites=sorted(set(spawn_sites)),
        diagnostics=diagnostics,
    )


# --------------------------------------------------------------------------
# Interchange format
# --------------------------------------------------------------------------


def dump_ccfg(c: Ccfg) -> str:
    doc = {
        "functions": [
            {
                "name": fn,
                "entry": c.entry_of.get(fn),
                "exits": list(c.exits_of.get(fn, ())),
            }
            for fn in c.functions
        ],
        "shared_vars": [
            {"name": name, "type": ty} for name, ty in c.shared_vars
        ],
        "nodes": [
            {
                "id": n.id,
                "function": n.function,
                "kind": n.kind,
                "uid": n.uid,
                "weight": n.weight,
                "reads": list(n.reads),
                "writes": list(n.writes),
                "sync": n.sync,
            }
            for n in sorted(c.nodes, key=lambda n: n.id)
        ],
        "local_edges": sorted([u, v] for (u, v) in c.local_edges),
        "back_edges": sorted([u, v] for (u, v) in c.back_edges),
        "cross_edges": [
            {"from": e.src, "to": e.dst, "kind": e.kind, "var": e.var}
            for e in sorted(
                c.cross_edges, key=lambda e: (e.kind, e.src, e.dst, e.var)
            )
        ],
        "regions": [
            {"function": r.function, "kind": r.kind, "nodes": list(r.nodes)}
            for r in c.regions
        ],
        "spawn_sites": sorted([s, t] for (s, t) in c.spawn_sites),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_ccfg(text: str) -> Ccfg:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CcfgError(f"malformed interchange document: {e}") from e
    try:
        nodes = [
            CcfgNode(
                id=int(nd["id"]),
                function=nd["function"],
                kind=nd.get("kind", "call"),
                uid=int(nd.get("uid", -1)),
                weight=int(nd.get("weight", 1)),
                reads=tuple(nd.get("reads", ())),
                writes=tuple(nd.get("writes", ())),
                sync=nd.get("sync"),
            )
            for nd in doc["nodes"]
        ]
        ids = {n.id for n in nodes}
        if len(ids) != len(nodes):
            raise CcfgError("duplicate node ids")

        def check(nid):
            if nid not in ids:
                raise CcfgError(f"dangling node reference: {nid}")
            return nid

        local_edges = [
            (check(u), check(v)) for u, v in doc.get("local_edges", [])
        ]
        back_edges = {
            (check(u), check(v)) for u, v in doc.get("back_edges", [])
        }
        cross = [
            CrossEdge(
                check(e["from"]), check(e["to"]), e["kind"], e.get("var", "")
            )
            for e in doc.get("cross_edges", [])
        ]
        for e in cross:
            if e.kind not in ("fork", "join", "comm"):
                raise CcfgError(f"unknown cross-edge kind: {e.kind}")
        functions = tuple(f["name"] for f in doc["functions"])
        entry_of = {
            f["name"]: (check(f["entry"]) if f.get("entry") is not None else None)
            for f in doc["functions"]
        }
        exits_of = {
            f["name"]: tuple(check(x) for x in f.get("exits", ()))
            for f in doc["functions"]
        }
        regions = [
            Region(r["function"], r.get("kind", "if"), tuple(check(n) for n in r["nodes"]))
            for r in doc.get("regions", [])
        ]
        shared_vars = tuple(
            (s["name"], s.get("type", "int")) for s in doc.get("shared_vars", [])
        )
        spawn_sites = [
            (check(s), t) for s, t in doc.get("spawn_sites", [])
        ]
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CcfgError):
            raise
        raise CcfgError(f"malformed interchange document: {e}") from e
    return Ccfg(
        functions=functions,
        nodes=sorted(nodes, key=lambda n: n.id),
        local_edges=sorted(local_edges),
        back_edges=back_edges,
        cross_edges=cross,
        shared_vars=shared_vars,
        entry_of=entry_of,
        exits_of=exits_of,
        regions=regions,
        spawn_sites=spawn_sites,
    )
