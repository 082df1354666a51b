"""Lowering of MiniCC functions to statement-level control flow graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

from .astnodes import (
    Assign,
    Call,
    Decl,
    DoWhile,
    FunctionDecl,
    If,
    Return,
    Skip,
    While,
)

_EXIT = -2  # sentinel edge target patched to the real exit id


@dataclass
class CfgNode:
    id: int
    kind: str  # entry | exit | decl | assign | call | branch | return | skip
    uid: int  # statement uid, -1 for synthetic nodes
    stmt: object = None  # the AST statement (branch nodes hold If/While/DoWhile)
    weight: int = 1


@dataclass
class Cfg:
    function: str
    nodes: list = field(default_factory=list)  # CfgNode, indexed by id
    edges: list = field(default_factory=list)  # (from, to), duplicates allowed
    back_edges: set = field(default_factory=set)
    entry: int = 0
    exit: int = 0

    def successors(self, node_id: int):
        return [v for (u, v) in self.edges if u == node_id]

    def predecessors(self, node_id: int):
        return [u for (u, v) in self.edges if v == node_id]


class _Builder:
    def __init__(self, name: str):
        self.cfg = Cfg(function=name)
        self._add_node("entry", -1, None)

    def _add_node(self, kind: str, uid: int, stmt) -> int:
        nid = len(self.cfg.nodes)
        self.cfg.nodes.append(CfgNode(nid, kind, uid, stmt))
        return nid

    def edge(self, u: int, v: int, back: bool = False):
        self.cfg.edges.append((u, v))
        if back:
            self.cfg.back_edges.add((u, v))

    def lower_body(self, body: list) -> tuple[int | None, list[int]]:
        """Returns (head node id or None for an empty body, fall-through
        tail node ids)."""
        head: int | None = None
        tails: list[int] = []
        for st in body:
            h, t = self.lower_stmt(st)
            if head is None:
                head = h
            for tail in tails:
                self.edge(tail, h)
            tails = t
        return head, tails

    def lower_stmt(self, st) -> tuple[int, list[int]]:
        if isinstance(st, (Decl, Assign, Call, Skip)):
            kind = {
                Decl: "decl",
                Assign: "assign",
                Call: "call",
                Skip: "skip",
            }[type(st)]
            nid = self._add_node(kind, st.uid, st)
            return nid, [nid]
        if isinstance(st, Return):
            nid = self._add_node("return", st.uid, st)
            self.edge(nid, _EXIT)
            return nid, []
        if isinstance(st, If):
            b = self._add_node("branch", st.uid, st)
            tails: list[int] = []
            th, tt = self.lower_body(st.then_body)
            if th is None:
                tails.append(b)
            else:
                self.edge(b, th)
                tails.extend(tt)
            eh, et = self.lower_body(st.else_body)
            if eh is None:
                tails.append(b)
            else:
                self.edge(b, eh)
                tails.extend(et)
            return b, tails
        if isinstance(st, While):
            b = self._add_node("branch", st.uid, st)
            h, t = self.lower_body(st.body)
            if h is None:
                self.edge(b, b, back=True)
            else:
                self.edge(b, h)
                for tail in t:
                    self.edge(tail, b, back=True)
            return b, [b]
        if isinstance(st, DoWhile):
            # Body first; condition branch loops back to the body head.
            h, t = self.lower_body(st.body)
            b = self._add_node("branch", st.uid, st)
            if h is None:
                h = b
                self.edge(b, b, back=True)
            else:
                for tail in t:
                    self.edge(tail, b)
                self.edge(b, h, back=True)
            return h, [b]
        raise TypeError(f"not a statement: {st!r}")


class CfgError(ValueError):
    pass


def lower_to_cfg(f: FunctionDecl) -> Cfg:
    """One node per executable statement plus synthetic entry/exit;
    if/while/do-while produce branch nodes with two successors."""
    b = _Builder(f.name)
    head, tails = b.lower_body(f.body)
    if head is None:
        b.edge(b.cfg.entry, _EXIT)
    else:
        b.edge(b.cfg.entry, head)
        for tail in tails:
            b.edge(tail, _EXIT)  # implicit return
    exit_id = b._add_node("exit", -1, None)
    b.cfg.exit = exit_id
    b.cfg.edges = [
        (u if u != _EXIT else exit_id, v if v != _EXIT else exit_id)
        for (u, v) in b.cfg.edges
    ]
    cfg = b.cfg

    # Validate the structural invariants (guaranteed for parsed input).
    seen = {cfg.entry}
    stack = [cfg.entry]
    succ: dict[int, list[int]] = {}
    for u, v in cfg.edges:
        succ.setdefault(u, []).append(v)
    while stack:
        u = stack.pop()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if len(seen) != len(cfg.nodes):
        raise CfgError(f"unreachable nodes in {f.name}: parser must reject this")
    return cfg
