"""AST node definitions for MiniCC.

Every statement carries a stable uid assigned in parse order; uids are
preserved by program transformations (mutation) so that coverage and
site descriptors stay meaningful across variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

TYPES = ("int", "bool", "mutex", "cond", "thread")

# Builtin call surface.  SYNC_BUILTINS are the operations counted by SPC.
SYNC_BUILTINS = ("lock", "unlock", "wait", "timedwait", "signal", "broadcast")
OTHER_BUILTINS = ("spawn", "join", "yield", "print", "assert")
BUILTINS = SYNC_BUILTINS + OTHER_BUILTINS

ARITH_OPS = ("+", "-", "*", "/", "%")
SHIFT_OPS = ("<<", ">>")
REL_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGIC_OPS = ("&&", "||")
BIT_OPS = ("|", "&")
BINARY_OPS = ARITH_OPS + SHIFT_OPS + REL_OPS + LOGIC_OPS + BIT_OPS
ASSIGN_OPS = ("=", "|=", "&=")


# --------------------------------------------------------------------------
# Expressions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


Expr = (IntLit, BoolLit, Var, Unary, Binary)


# --------------------------------------------------------------------------
# Statements (mutable uid-carrying tree nodes)
# --------------------------------------------------------------------------


@dataclass
class Stmt:
    uid: int = field(default=-1, kw_only=True)
    line: int = field(default=0, kw_only=True)


@dataclass
class Decl(Stmt):
    type: str = ""
    name: str = ""
    init: object = None  # Expr, SpawnInit, or None


@dataclass
class SpawnInit:
    """spawn(target, args...) used as a thread-declaration initializer."""

    target: str = ""
    args: tuple = ()


@dataclass
class Assign(Stmt):
    name: str = ""
    op: str = "="
    expr: object = None


@dataclass
class Call(Stmt):
    """A builtin or user function call statement."""

    name: str = ""
    args: tuple = ()


@dataclass
class If(Stmt):
    cond: object = None
    then_body: list = field(default_factory=list)
    else_body: list = field(default_factory=list)


@dataclass
class While(Stmt):
    cond: object = None
    body: list = field(default_factory=list)


@dataclass
class DoWhile(Stmt):
    cond: object = None
    body: list = field(default_factory=list)


@dataclass
class Return(Stmt):
    pass


@dataclass
class Skip(Stmt):
    """A deleted statement; keeps its uid so mutants stay traceable."""

    pass


@dataclass
class GlobalDecl:
    name: str
    type: str
    init: object  # IntLit/BoolLit or None
    line: int


@dataclass
class FunctionDecl:
    name: str
    params: tuple  # of (name, type)
    body: list
    line: int
    nloc: int = 1
    comment_lines: int = 0


@dataclass
class SourceUnit:
    globals: list
    functions: list
    source_text: str

    def function(self, name: str) -> FunctionDecl:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(f"unknown function: {name}")

    def global_decl(self, name: str):
        for g in self.globals:
            if g.name == name:
                return g
        return None


def walk_statements(body: list):
    """Yield every statement in a body, depth-first, in source order."""
    for st in body:
        yield st
        if isinstance(st, If):
            yield from walk_statements(st.then_body)
            yield from walk_statements(st.else_body)
        elif isinstance(st, (While, DoWhile)):
            yield from walk_statements(st.body)


def walk_expr(e):
    """Yield every sub-expression of e (including e itself)."""
    if e is None:
        return
    yield e
    if isinstance(e, Unary):
        yield from walk_expr(e.operand)
    elif isinstance(e, Binary):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
