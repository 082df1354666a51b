"""Seeded cooperative interpreter for MiniCC and the dynamic mutation
metrics (MuDuE / MuDuK).

Concurrency is simulated: threads are Python generators that yield one
descriptor per atomic micro-step, and a seeded scheduler picks uniformly
among the runnable threads at every step.  Identical (program, test,
seed) triples replay identical traces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .frontend.astnodes import (
    Assign,
    Binary,
    BoolLit,
    Call,
    Decl,
    DoWhile,
    If,
    IntLit,
    Return,
    Skip,
    SourceUnit,
    SpawnInit,
    Unary,
    Var,
    While,
)
from .mutation import ALL_OPERATORS, Mutant

DEFAULT_STEP_LIMIT = 100_000
DEFAULT_SEEDS = 100

_I64_MIN = -(2**63)
_I64_MOD = 2**64


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest test class despite the name

    entry: str
    args: tuple = ()
    observables: tuple = ()  # global names included in the observable

    @property
    def key(self) -> str:
        return f"{self.entry}({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class RunOutcome:
    observable: tuple  # (status, prints, ((global, value), ...))
    covered: frozenset  # statement uids executed
    trace: tuple  # (step, thread id, uid)

    @property
    def status(self) -> str:
        return self.observable[0]


class _ReturnSignal(Exception):
    pass


class _Fault(Exception):
    def __init__(self, status: str):
        self.status = status


def _wrap(v: int) -> int:
    return (v - _I64_MIN) % _I64_MOD + _I64_MIN


def _apply_binary(op: str, a, b):
    if op == "+":
        return _wrap(a + b)
    if op == "-":
        return _wrap(a - b)
    if op == "*":
        return _wrap(a * b)
    if op in ("/", "%"):
        if b == 0:
            raise _Fault("assertion-failure")
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        if op == "/":
            return _wrap(q)
        return _wrap(a - q * b)
    if op == "<<":
        return _wrap(a << (b & 63))
    if op == ">>":
        return _wrap(a >> (b & 63))
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "|":
        return (a | b) if not isinstance(a, bool) else (a or b)
    if op == "&":
        return (a & b) if not isinstance(a, bool) else (a and b)
    raise AssertionError(op)


class _Thread:
    def __init__(self, tid: int, gen):
        self.tid = tid
        self.gen = gen
        self.pending = None  # next action descriptor
        self.done = False

    def prime(self):
        try:
            self.pending = next(self.gen)
        except StopIteration:
            self.done = True
            self.pending = None


class _Interp:
    def __init__(self, unit: SourceUnit, test: TestCase, step_limit: int):
        self.unit = unit
        self.test = test
        self.step_limit = step_limit
        self.globals: dict = {}
        for g in unit.globals:
            if g.init is None:
                self.globals[g.name] = False if g.type == "bool" else 0
            elif isinstance(g.init, IntLit):
                self.globals[g.name] = g.init.value
            elif isinstance(g.init, BoolLit):
                self.globals[g.name] = g.init.value
        self.mutex_owner: dict = {}  # mutex name -> tid or None
        self.waiting: dict = {}  # cond name -> {tid: wake_at_step}
        self.threads: list = []
        self.output: list = []
        self.covered: set = set()
        self.trace: list = []
        self.step = 0
        self.status = "ok"

    # -- threads ----------------------------------------------------------

    def spawn(self, fname: str, args: tuple) -> int:
        tid = len(self.threads)
        t = _Thread(tid, self._run_function(fname, args, tid))
        self.threads.append(t)
        t.prime()
        return tid

    def _run_function(self, fname: str, args: tuple, tid: int):
        f = self.unit.function(fname)
        env = {name: val for (name, _ty), val in zip(f.params, args)}
        try:
            yield from self._body(f.body, env, tid)
        except _ReturnSignal:
            pass

    def _body(self, body: list, env: dict, tid: int):
        for st in body:
            yield from self._stmt(st, env, tid)

    # -- expression evaluation (atomic within one micro-step) -------------

    def eval(self, e, env):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Var):
            if e.name in env:
                return env[e.name]
            return self.globals[e.name]
        if isinstance(e, Unary):
            v = self.eval(e.operand, env)
            if e.op == "!":
                return not v
            return _wrap(-v)
        if isinstance(e, Binary):
            if e.op == "&&":
                return bool(self.eval(e.left, env)) and bool(
                    self.eval(e.right, env)
                )
            if e.op == "||":
                return bool(self.eval(e.left, env)) or bool(
                    self.eval(e.right, env)
                )
            return _apply_binary(
                e.op, self.eval(e.left, env), self.eval(e.right, env)
            )
        raise AssertionError(e)

    # -- statements --------------------------------------------------------

    def _stmt(self, st, env: dict, tid: int):
        uid = st.uid
        if isinstance(st, Skip):
            yield ("step", uid)
        elif isinstance(st, Decl):
            if isinstance(st.init, SpawnInit):
                yield ("step", uid)
                args = tuple(self.eval(a, env) for a in st.init.args)
                env[st.name] = self.spawn(st.init.target, args)
            else:
                yield ("step", uid)
                if st.init is not None:
                    env[st.name] = self.eval(st.init, env)
                else:
                    env[st.name] = False if st.type == "bool" else 0
        elif isinstance(st, Assign):
            if st.name in env:
                yield ("step", uid)
                val = self.eval(st.expr, env)
                if st.op != "=":
                    val = _apply_binary(st.op[0], env[st.name], val)
                env[st.name] = val
            else:
                # Global write: separate read/eval and write micro-steps.
                yield ("step", uid)
                val = self.eval(st.expr, env)
                if st.op != "=":
                    val = _apply_binary(st.op[0], self.globals[st.name], val)
                yield ("step", uid)
                self.globals[st.name] = val
        elif isinstance(st, Call):
            yield from self._call(st, env, tid)
        elif isinstance(st, If):
            yield ("step", uid)
            if self.eval(st.cond, env):
                yield from self._body(st.then_body, env, tid)
            else:
                yield from self._body(st.else_body, env, tid)
        elif isinstance(st, While):
            while True:
                yield ("step", uid)
                if not self.eval(st.cond, env):
                    break
                yield from self._body(st.body, env, tid)
        elif isinstance(st, DoWhile):
            while True:
                yield from self._body(st.body, env, tid)
                yield ("step", uid)
                if not self.eval(st.cond, env):
                    break
        elif isinstance(st, Return):
            yield ("step", uid)
            raise _ReturnSignal()
        else:
            raise AssertionError(st)

    def _call(self, st: Call, env: dict, tid: int):
        uid = st.uid
        name = st.name
        if name == "lock":
            m = st.args[0].name
            yield ("lock", uid, m)
            self.mutex_owner[m] = tid
        elif name == "unlock":
            m = st.args[0].name
            yield ("step", uid)
            if self.mutex_owner.get(m) == tid:
                self.mutex_owner[m] = None
        elif name in ("wait", "timedwait"):
            cv = st.args[0].name
            m = st.args[1].name
            yield ("step", uid)  # release + enter the wait set
            budget = (
                self.eval(st.args[2], env) if name == "timedwait" else None
            )
            if self.mutex_owner.get(m) == tid:
                self.mutex_owner[m] = None
            wake_at = self.step + budget if budget is not None else None
            self.waiting.setdefault(cv, {})[tid] = wake_at
            yield ("reacquire", uid, m, cv)
            self.waiting.get(cv, {}).pop(tid, None)
            self.mutex_owner[m] = tid
        elif name in ("signal", "broadcast"):
            cv = st.args[0].name
            yield ("step", uid)
            waiters = self.waiting.get(cv, {})
            if waiters:
                if name == "signal":
                    first = next(iter(waiters))
                    del waiters[first]
                else:
                    waiters.clear()
        elif name == "spawn":
            yield ("step", uid)
            args = tuple(self.eval(a, env) for a in st.args[1:])
            self.spawn(st.args[0].name, args)
        elif name == "join":
            handle = st.args[0].name
            target = env.get(handle)
            yield ("join", uid, target)
        elif name == "yield":
            yield ("step", uid)
        elif name == "print":
            yield ("step", uid)
            v = self.eval(st.args[0], env)
            self.output.append(int(v) if isinstance(v, bool) else v)
        elif name == "assert":
            yield ("step", uid)
            if not self.eval(st.args[0], env):
                raise _Fault("assertion-failure")
        else:
            yield ("step", uid)
            args = tuple(self.eval(a, env) for a in st.args)
            yield from self._run_function(name, args, tid)

    # -- scheduling ---------------------------------------------------------

    def _enabled(self, t: _Thread) -> bool:
        kind = t.pending[0]
        if kind in ("step",):
            return True
        if kind == "lock":
            return self.mutex_owner.get(t.pending[2]) is None
        if kind == "join":
            target = t.pending[2]
            if target is None or not (0 <= target < len(self.threads)):
                return True  # joining a never-spawned handle is a no-op
            return self.threads[target].done
        if kind == "reacquire":
            _, _uid, m, cv = t.pending
            waiters = self.waiting.get(cv, {})
            if t.tid in waiters:
                wake_at = waiters[t.tid]
                if wake_at is None or self.step < wake_at:
                    return False
            return self.mutex_owner.get(m) is None
        raise AssertionError(t.pending)

    def _advance(self, t: _Thread):
        uid = t.pending[1]
        self.covered.add(uid)
        self.trace.append((self.step, t.tid, uid))
        self.step += 1
        try:
            t.pending = next(t.gen)
        except StopIteration:
            t.done = True
            t.pending = None

    def run(self, choose) -> RunOutcome:
        try:
            self.spawn(self.test.entry, tuple(self.test.args))
            while True:
                live = [t for t in self.threads if not t.done]
                if not live:
                    break
                runnable = [t for t in live if self._enabled(t)]
                if not runnable:
                    # Fast-forward to the earliest timed wakeup, if any.
                    wakes = [
                        w
                        for t in live
                        if t.pending[0] == "reacquire"
                        for w in [
                            self.waiting.get(t.pending[3], {}).get(t.tid)
                        ]
                        if w is not None
                    ]
                    if wakes:
                        self.step = max(self.step, min(wakes))
                        continue
                    raise _Fault("deadlock")
                if self.step >= self.step_limit:
                    raise _Fault("step-limit")
                self._advance(choose(runnable))
        except _Fault as e:
            self.status = e.status
        finals = tuple(
            (name, self.globals.get(name)) for name in self.test.observables
        )
        observable = (self.status, tuple(self.output), finals)
        return RunOutcome(observable, frozenset(self.covered), tuple(self.trace))


def run(
    unit: SourceUnit,
    test: TestCase,
    seed: int,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> RunOutcome:
    rng = random.Random(seed)
    interp = _Interp(unit, test, step_limit)

    def choose(runnable):
        return runnable[rng.randrange(len(runnable))]

    return interp.run(choose)


def reference_set(
    unit: SourceUnit,
    test: TestCase,
    seeds: int = DEFAULT_SEEDS,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> frozenset:
    return frozenset(
        run(unit, test, seed, step_limit).observable
        for seed in range(1, seeds + 1)
    )


# --------------------------------------------------------------------------
# Exhaustive interleaving enumeration (small programs)
# --------------------------------------------------------------------------


class ExhaustiveBoundError(RuntimeError):
    pass


def enumerate_observables(
    unit: SourceUnit,
    test: TestCase,
    max_decisions: int = 12,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> frozenset:
    """Observables over every interleaving; a decision is a step where
    more than one thread is runnable."""
    observables = set()
    pending = [()]
    while pending:
        prefix = pending.pop()
        branch: list = []

        def choose(runnable):
            if len(runnable) == 1:
                return runnable[0]
            depth = len(branch)
            branch.append(len(runnable))
            if depth < len(prefix):
                return runnable[prefix[depth]]
            if depth >= max_decisions:
                raise ExhaustiveBoundError(
                    f"more than {max_decisions} scheduling decisions"
                )
            return runnable[0]

        outcome = _Interp(unit, test, step_limit).run(choose)
        observables.add(outcome.observable)
        # Beyond the forced prefix this path always took choice 0; queue
        # every sibling choice at each of those decision points.
        for depth in range(len(prefix), len(branch)):
            taken = prefix + (0,) * (depth - len(prefix))
            for i in range(1, branch[depth]):
                pending.append(taken + (i,))
    return frozenset(observables)


# --------------------------------------------------------------------------
# Mutant judging and dynamic metrics
# --------------------------------------------------------------------------


@dataclass
class KillMatrix:
    mutants: list  # Mutant
    tests: list  # TestCase
    cells: dict = field(default_factory=dict)  # (mutant id, test key) -> (executed, killed)

    def cell(self, mutant_id: str, test_key: str) -> tuple:
        return self.cells[(mutant_id, test_key)]


def judge_mutant(
    mutant: Mutant,
    test: TestCase,
    reference: frozenset,
    seeds: int = DEFAULT_SEEDS,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> tuple[bool, bool]:
    executed = False
    killed = False
    site = set(mutant.site)
    for seed in range(1, seeds + 1):
        outcome = run(mutant.unit, test, seed, step_limit)
        reached = bool(site & outcome.covered)
        executed = executed or reached
        if reached and outcome.observable not in reference:
            killed = True
    return executed, killed


def build_kill_matrix(
    unit: SourceUnit,
    mutants: list,
    tests: list,
    seeds: int = DEFAULT_SEEDS,
    step_limit: int = DEFAULT_STEP_LIMIT,
) -> KillMatrix:
    matrix = KillMatrix(mutants, tests)
    for test in tests:
        reference = reference_set(unit, test, seeds, step_limit)
        for m in mutants:
            matrix.cells[(m.id, test.key)] = judge_mutant(
                m, test, reference, seeds, step_limit
            )
    return matrix


@dataclass
class DynMetricRecord:
    function: str
    mudue: dict  # op -> percentage
    muduk: dict  # op -> percentage

    def as_dict(self) -> dict:
        out = {}
        for op in ALL_OPERATORS:
            out[f"MuDuE_{op}"] = self.mudue.get(op, 0.0)
            out[f"MuDuK_{op}"] = self.muduk.get(op, 0.0)
        return out


def dynamic_metrics(
    matrix: KillMatrix, mutants: list, function: str
) -> DynMetricRecord:
    mudue = {}
    muduk = {}
    test_keys = [t.key for t in matrix.tests]
    for op in ALL_OPERATORS:
        mine = [m for m in mutants if m.function == function and m.operator == op]
        if not mine:
            mudue[op] = 0.0
            muduk[op] = 0.0
            continue
        n_exec = 0
        n_kill = 0
        for m in mine:
            cells = [matrix.cells[(m.id, k)] for k in test_keys]
            if any(e for e, _ in cells):
                n_exec += 1
            if any(k for _, k in cells):
                n_kill += 1
        mudue[op] = 100.0 * n_exec / len(mine)
        muduk[op] = 100.0 * n_kill / len(mine)
    return DynMetricRecord(function, mudue, muduk)
