"""Mutation operators: 6 sequential and 6 concurrency operators, site
enumeration, mutant generation, and the static per-function mutant
counts (MuS)."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .frontend.astnodes import (
    Assign,
    Binary,
    Call,
    Decl,
    DoWhile,
    If,
    OTHER_BUILTINS,
    Return,
    Skip,
    SourceUnit,
    SpawnInit,
    SYNC_BUILTINS,
    Unary,
    Var,
    While,
    walk_statements,
)
from .frontend.parser import ParseError, parse, _terminates
from .frontend.printer import pretty_print

SEQUENTIAL_OPERATORS = ("ssdl", "swdd", "oasn", "oeba", "olng", "orrn")
CONCURRENCY_OPERATORS = (
    "rmlock", "rmwait", "rmsig", "rmjoinyld", "shfecs", "spltecs",
)
ALL_OPERATORS = SEQUENTIAL_OPERATORS + CONCURRENCY_OPERATORS

_ARITH = ("+", "-", "*", "/", "%")
_REL = ("<", "<=", ">", ">=", "==", "!=")


class MutationError(RuntimeError):
    """A transformation produced an invalid unit (must not occur)."""


@dataclass(frozen=True)
class Site:
    operator: str
    function: str
    uids: tuple  # statement uids touched
    detail: str = ""  # operator-specific descriptor (occurrence index, mutex, ...)


@dataclass
class Mutant:
    id: str
    operator: str
    function: str
    site: tuple  # uids touched
    description: str
    unit: SourceUnit


# --------------------------------------------------------------------------
# Helpers
# --------------------------------------------------------------------------


def _stmt_exprs(st) -> list:
    """Expressions of a statement in a fixed left-to-right order."""
    if isinstance(st, Decl):
        if isinstance(st.init, SpawnInit):
            return list(st.init.args)
        return [st.init] if st.init is not None else []
    if isinstance(st, Assign):
        return [st.expr]
    if isinstance(st, Call):
        return list(st.args)
    if isinstance(st, (If, While, DoWhile)):
        return [st.cond]
    return []


def _count_binary(e, ops) -> int:
    if isinstance(e, Binary):
        own = 1 if e.op in ops else 0
        return own + _count_binary(e.left, ops) + _count_binary(e.right, ops)
    if isinstance(e, Unary):
        return _count_binary(e.operand, ops)
    return 0


def _replace_binary(e, ops, target: int, new_op: str, counter: list):
    """Rebuild e with the target-th (pre-order) operator in ops replaced."""
    if isinstance(e, Binary):
        op = e.op
        if op in ops:
            if counter[0] == target:
                op = new_op
            counter[0] += 1
        left = _replace_binary(e.left, ops, target, new_op, counter)
        right = _replace_binary(e.right, ops, target, new_op, counter)
        return Binary(op, left, right)
    if isinstance(e, Unary):
        return Unary(e.op, _replace_binary(e.operand, ops, target, new_op, counter))
    return e


def _var_types(u: SourceUnit, f) -> dict:
    types = {g.name: g.type for g in u.globals}
    types.update({name: ty for name, ty in f.params})
    for st in walk_statements(f.body):
        if isinstance(st, Decl):
            types[st.name] = st.type
    return types


def _blocks(f) -> list:
    """All statement lists of a function body, outermost first."""
    out = [f.body]
    for st in walk_statements(f.body):
        if isinstance(st, If):
            out.append(st.then_body)
            out.append(st.else_body)
        elif isinstance(st, (While, DoWhile)):
            out.append(st.body)
    return out


def _is_sync_call(st, name: str) -> bool:
    return isinstance(st, Call) and st.name == name


def _lock_pairs_source_order(f) -> list:
    """Matched lock/unlock pairs (innermost first on ties) over the
    source-order statement walk, keyed by mutex variable name."""
    stacks: dict = {}
    pairs = []
    for st in walk_statements(f.body):
        if _is_sync_call(st, "lock"):
            stacks.setdefault(st.args[0].name, []).append(st.uid)
        elif _is_sync_call(st, "unlock"):
            stack = stacks.get(st.args[0].name, [])
            if stack:
                pairs.append((stack.pop(), st.uid, st.args[0].name))
    return sorted(pairs, key=lambda p: p[0])


def _block_sections(f) -> list:
    """Critical sections whose lock and unlock sit in the same block:
    (block, lock index, unlock index, mutex name)."""
    sections = []
    for block in _blocks(f):
        stacks: dict = {}
        for i, st in enumerate(block):
            if _is_sync_call(st, "lock"):
                stacks.setdefault(st.args[0].name, []).append(i)
            elif _is_sync_call(st, "unlock"):
                stack = stacks.get(st.args[0].name, [])
                if stack:
                    sections.append((block, stack.pop(), i, st.args[0].name))
    sections.sort(key=lambda s: block_uid(s[0], s[1]))
    return sections


def block_uid(block, i):
    return block[i].uid


def unmatched_locks(u: SourceUnit) -> list:
    """(function, uid) of lock/unlock calls with no matching partner;
    these are skipped by rmlock/shfecs/spltecs."""
    out = []
    for f in u.functions:
        matched = set()
        for a, b, _m in _lock_pairs_source_order(f):
            matched.update((a, b))
        for st in walk_statements(f.body):
            if (_is_sync_call(st, "lock") or _is_sync_call(st, "unlock")) and (
                st.uid not in matched
            ):
                out.append((f.name, st.uid))
    return out


# --------------------------------------------------------------------------
# Site enumeration
# --------------------------------------------------------------------------


def enumerate_sites(u: SourceUnit, op: str) -> list:
    if op not in ALL_OPERATORS:
        raise ValueError(f"unknown mutation operator: {op}")
    sites: list = []
    for f in u.functions:
        if op == "ssdl":
            # Deletable plain statements: assignments and calls whose
            # removal cannot break name resolution or thread plumbing.
            for st in walk_statements(f.body):
                if isinstance(st, Assign):
                    sites.append(Site(op, f.name, (st.uid,)))
                elif isinstance(st, Call) and (
                    st.name in ("print", "assert")
                    or st.name not in SYNC_BUILTINS + OTHER_BUILTINS
                ):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op == "swdd":
            for st in walk_statements(f.body):
                if isinstance(st, While) and not (
                    st.body and _terminates(st.body[-1])
                ):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op in ("oasn", "orrn"):
            ops = _ARITH if op == "oasn" else _REL
            for st in walk_statements(f.body):
                n = sum(_count_binary(e, ops) for e in _stmt_exprs(st))
                for k in range(n):
                    sites.append(Site(op, f.name, (st.uid,), detail=str(k)))
        elif op == "oeba":
            types = _var_types(u, f)
            for st in walk_statements(f.body):
                if (
                    isinstance(st, Assign)
                    and st.op == "="
                    and types.get(st.name) == "int"
                ):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op == "olng":
            for st in walk_statements(f.body):
                if isinstance(st, (If, While, DoWhile)):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op == "rmlock":
            for a, b, m in _lock_pairs_source_order(f):
                sites.append(Site(op, f.name, (a, b), detail=m))
        elif op == "rmwait":
            for st in walk_statements(f.body):
                if isinstance(st, Call) and st.name in ("wait", "timedwait"):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op == "rmsig":
            for st in walk_statements(f.body):
                if isinstance(st, Call) and st.name in ("signal", "broadcast"):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op == "rmjoinyld":
            for st in walk_statements(f.body):
                if isinstance(st, Call) and st.name in ("join", "yield"):
                    sites.append(Site(op, f.name, (st.uid,)))
        elif op in ("shfecs", "spltecs"):
            for block, i, j, m in _block_sections(f):
                if j - i - 1 >= 2:
                    sites.append(
                        Site(op, f.name, (block[i].uid, block[j].uid), detail=m)
                    )
    return sites


# --------------------------------------------------------------------------
# Mutant generation
# --------------------------------------------------------------------------


def _index_unit(u: SourceUnit) -> tuple[dict, dict, int]:
    """(uid -> statement, uid -> (block, index), max uid)."""
    stmts: dict = {}
    slots: dict = {}
    max_uid = 0
    for f in u.functions:
        for block in _blocks(f):
            for i, st in enumerate(block):
                slots[st.uid] = (block, i)
        for st in walk_statements(f.body):
            stmts[st.uid] = st
            max_uid = max(max_uid, st.uid)
    return stmts, slots, max_uid


def _delete(u: SourceUnit, uid: int):
    stmts, slots, _ = _index_unit(u)
    st = stmts[uid]
    block, i = slots[uid]
    block[i] = Skip(uid=uid, line=st.line)


def _expand_site(u: SourceUnit, site: Site) -> list[tuple[str, SourceUnit]]:
    """(variant label, transformed unit) list for one site."""
    op = site.operator
    out: list = []

    def fresh() -> tuple[SourceUnit, dict, dict, int]:
        clone = copy.deepcopy(u)
        stmts, slots, max_uid = _index_unit(clone)
        return clone, stmts, slots, max_uid

    if op in ("ssdl", "rmwait", "rmsig", "rmjoinyld"):
        clone, _, _, _ = fresh()
        _delete(clone, site.uids[0])
        out.append(("", clone))
    elif op == "rmlock":
        clone, _, _, _ = fresh()
        for uid in site.uids:
            _delete(clone, uid)
        out.append(("", clone))
    elif op == "swdd":
        clone, stmts, slots, _ = fresh()
        st = stmts[site.uids[0]]
        block, i = slots[site.uids[0]]
        block[i] = DoWhile(
            cond=st.cond, body=st.body, uid=st.uid, line=st.line
        )
        out.append(("", clone))
    elif op == "olng":
        clone, stmts, _, _ = fresh()
        st = stmts[site.uids[0]]
        st.cond = Unary("!", st.cond)
        out.append(("", clone))
    elif op == "oeba":
        clone, stmts, _, _ = fresh()
        stmts[site.uids[0]].op = "|="
        out.append(("", clone))
    elif op in ("oasn", "orrn"):
        ops = _ARITH if op == "oasn" else _REL
        target = int(site.detail)
        # Identify the original operator at the target occurrence.
        base_stmts = _index_unit(u)[0]
        st0 = base_stmts[site.uids[0]]
        seen = []

        def collect(e):
            if isinstance(e, Binary):
                if e.op in ops:
                    seen.append(e.op)
                collect(e.left)
                collect(e.right)
            elif isinstance(e, Unary):
                collect(e.operand)

        for e in _stmt_exprs(st0):
            collect(e)
        original = seen[target]
        replacements = ("<<", ">>") if op == "oasn" else tuple(
            r for r in _REL if r != original
        )
        for new_op in replacements:
            clone, stmts, _, _ = fresh()
            st = stmts[site.uids[0]]
            exprs = _stmt_exprs(st)
            counter = [0]
            new_exprs = [
                _replace_binary(e, ops, target, new_op, counter) for e in exprs
            ]
            _set_stmt_exprs(st, new_exprs)
            out.append((new_op, clone))
    elif op == "spltecs":
        clone, stmts, slots, max_uid = fresh()
        lock_uid, unlock_uid = site.uids
        block, i = slots[lock_uid]
        _, j = slots[unlock_uid]
        k = j - i - 1
        pos = i + (k // 2)  # the floor(k/2)-th enclosed statement
        line = block[pos].line
        mutex = Var(site.detail)
        block[pos + 1: pos + 1] = [
            Call("unlock", (mutex,), uid=max_uid + 1, line=line),
            Call("lock", (mutex,), uid=max_uid + 2, line=line),
        ]
        out.append(("", clone))
    elif op == "shfecs":
        lock_uid, unlock_uid = site.uids
        for direction in ("later", "earlier"):
            clone, stmts, slots, _ = fresh()
            block, i = slots[lock_uid]
            _, j = slots[unlock_uid]
            if direction == "later":
                if j + 1 >= len(block):
                    continue
                block[i], block[i + 1] = block[i + 1], block[i]
                block[j], block[j + 1] = block[j + 1], block[j]
            else:
                if i == 0:
                    continue
                block[i - 1], block[i] = block[i], block[i - 1]
                block[j - 1], block[j] = block[j], block[j - 1]
            out.append((direction, clone))
    else:  # pragma: no cover
        raise ValueError(op)
    return out


def _set_stmt_exprs(st, exprs: list):
    if isinstance(st, Decl):
        if isinstance(st.init, SpawnInit):
            st.init = SpawnInit(st.init.target, tuple(exprs))
        elif st.init is not None:
            st.init = exprs[0]
    elif isinstance(st, Assign):
        st.expr = exprs[0]
    elif isinstance(st, Call):
        st.args = tuple(exprs)
    elif isinstance(st, (If, While, DoWhile)):
        st.cond = exprs[0]


def generate_mutants(u: SourceUnit, ops=None, validate: bool = True) -> list:
    """All mutants for the requested operators, deterministically ordered
    and stably identified."""
    if ops is None:
        ops = ALL_OPERATORS
    unknown = set(ops) - set(ALL_OPERATORS)
    if unknown:
        raise ValueError(f"unknown mutation operators: {sorted(unknown)}")
    mutants: list = []
    for op in ALL_OPERATORS:
        if op not in ops:
            continue
        for idx, site in enumerate(enumerate_sites(u, op)):
            for label, unit in _expand_site(u, site):
                mid = f"{op}-{idx:03d}" + (f"-{label}" if label else "")
                if validate:
                    try:
                        parse(pretty_print(unit))
                    except ParseError as e:  # pragma: no cover
                        raise MutationError(
                            f"mutant {mid} does not re-parse: {e}"
                        ) from e
                desc = f"{op} at uids {site.uids}"
                if label:
                    desc += f" [{label}]"
                mutants.append(
                    Mutant(mid, op, site.function, site.uids, desc, unit)
                )
    return mutants


# --------------------------------------------------------------------------
# Static metrics
# --------------------------------------------------------------------------


@dataclass
class MuSRecord:
    function: str
    counts: dict = field(default_factory=dict)  # op -> mutant count

    def as_dict(self) -> dict:
        return {f"MuS_{op}": self.counts.get(op, 0) for op in ALL_OPERATORS}


def static_mutation_metrics(mutants: list, function: str) -> MuSRecord:
    counts = {op: 0 for op in ALL_OPERATORS}
    for m in mutants:
        if m.function == function:
            counts[m.operator] += 1
    return MuSRecord(function, counts)
