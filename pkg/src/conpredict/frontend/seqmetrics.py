"""The nine baseline sequential code metrics per function."""

from __future__ import annotations

from dataclasses import dataclass

from .astnodes import (
    BUILTINS,
    Call,
    Decl,
    DoWhile,
    FunctionDecl,
    If,
    SourceUnit,
    SpawnInit,
    While,
    walk_statements,
)
from .cfg import Cfg, lower_to_cfg

CP_CAP = 2**31 - 1


@dataclass(frozen=True)
class SeqMetricRecord:
    CN: int  # functions calling this one
    CM: int  # distinct functions this one calls
    CL: int  # local declarations
    CPA: int  # parameters
    CTC: float  # comment-to-code ratio
    CP: int  # acyclic entry->exit paths (back edges used at most once)
    CC: int  # cyclomatic complexity E - N + 2
    ES: int  # executable statements
    MN: int  # max control-structure nesting depth
    cp_saturated: bool = False

    def as_dict(self) -> dict:
        return {
            "CN": self.CN, "CM": self.CM, "CL": self.CL, "CPA": self.CPA,
            "CTC": self.CTC, "CP": self.CP, "CC": self.CC, "ES": self.ES,
            "MN": self.MN,
        }


def _callees(f: FunctionDecl) -> set[str]:
    """User functions invoked by f (calls and spawn targets)."""
    out: set[str] = set()
    for st in walk_statements(f.body):
        if isinstance(st, Call) and st.name not in BUILTINS:
            out.add(st.name)
        if isinstance(st, Call) and st.name == "spawn" and st.args:
            out.add(st.args[0].name)
        if isinstance(st, Decl) and isinstance(st.init, SpawnInit):
            out.add(st.init.target)
    return out


def count_paths(cfg: Cfg) -> tuple[int, bool]:
    """Entry-to-exit path count; each back edge is usable at most once
    per path.  Saturates at 2^31 - 1."""
    back_list = sorted(cfg.back_edges)
    back_bit = {e: 1 << i for i, e in enumerate(back_list)}
    succ: dict[int, list[int]] = {}
    for u, v in cfg.edges:
        succ.setdefault(u, []).append(v)
    memo: dict[tuple[int, int], int] = {}
    saturated = False

    def rec(node: int, mask: int) -> int:
        nonlocal saturated
        if node == cfg.exit:
            return 1
        key = (node, mask)
        if key in memo:
            return memo[key]
        total = 0
        for v in succ.get(node, ()):  # noqa: B023
            e = (node, v)
            bit = back_bit.get(e, 0)
            if bit:
                if mask & bit:
                    continue
                total += rec(v, mask | bit)
            else:
                total += rec(v, mask)
            if total >= CP_CAP:
                saturated = True
                total = CP_CAP
                break
        memo[key] = total
        return total

    return rec(cfg.entry, 0), saturated


def _max_nesting(body: list, depth: int = 0) -> int:
    best = depth
    for st in body:
        if isinstance(st, If):
            best = max(
                best,
                _max_nesting(st.then_body, depth + 1),
                _max_nesting(st.else_body, depth + 1),
            )
        elif isinstance(st, (While, DoWhile)):
            best = max(best, _max_nesting(st.body, depth + 1))
    return best


def sequential_metrics(
    u: SourceUnit, name: str, cfg: Cfg | None = None
) -> SeqMetricRecord:
    f = u.function(name)
    if cfg is None:
        cfg = lower_to_cfg(f)
    cn = sum(
        1 for g in u.functions if g.name != name and name in _callees(g)
    )
    callees = _callees(f)
    callees.discard(name)  # self-recursion is not an external call
    cl = sum(1 for st in walk_statements(f.body) if isinstance(st, Decl))
    es = sum(
        1 for n in cfg.nodes if n.kind in ("decl", "assign", "call", "branch", "return")
    )
    cc = len(cfg.edges) - len(cfg.nodes) + 2
    cp, saturated = count_paths(cfg)
    return SeqMetricRecord(
        CN=cn,
        CM=len(callees),
        CL=cl,
        CPA=len(f.params),
        CTC=f.comment_lines / f.nloc,
        CP=cp,
        CC=cc,
        ES=es,
        MN=_max_nesting(f.body),
        cp_saturated=saturated,
    )
