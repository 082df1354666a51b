"""Shared fixtures: canonical programs and small program generators."""

from __future__ import annotations

import pytest
from hypothesis import strategies as st

from conpredict.frontend.parser import parse

COUNTER_SRC = """
int g;
mutex m;

fn inc() {
    lock(m);
    g = g + 1;
    unlock(m);
}

fn main() {
    thread a = spawn(inc);
    thread b = spawn(inc);
    join(a);
    join(b);
    print(g);
}
"""

DEADLOCK_SRC = """
mutex m1;
mutex m2;

fn a() {
    lock(m1);
    yield();
    lock(m2);
    unlock(m2);
    unlock(m1);
}

fn b() {
    lock(m2);
    yield();
    lock(m1);
    unlock(m1);
    unlock(m2);
}

fn main() {
    thread x = spawn(a);
    thread y = spawn(b);
    join(x);
    join(y);
}
"""

WORKER_SRC = """
int g;
mutex m;
cond cv;

fn worker() {
    lock(m);
    int t = g;
    t = t + 1;
    g = t;
    if (t >= 2) {
        signal(cv);
    }
    unlock(m);
    yield();
}

fn main() {
    thread t1 = spawn(worker);
    thread t2 = spawn(worker);
    lock(m);
    while (g < 2) {
        wait(cv, m);
    }
    unlock(m);
    join(t1);
    join(t2);
    print(g);
}
"""


@pytest.fixture
def counter_unit():
    return parse(COUNTER_SRC)


@pytest.fixture
def deadlock_unit():
    return parse(DEADLOCK_SRC)


@pytest.fixture
def worker_unit():
    return parse(WORKER_SRC)


# --------------------------------------------------------------------------
# Random program generation (hypothesis)
# --------------------------------------------------------------------------

_INT_VARS = ("a", "b", "c")


def int_expr(depth: int = 2) -> st.SearchStrategy[str]:
    leaf = st.one_of(
        st.integers(min_value=0, max_value=9).map(str),
        st.sampled_from(_INT_VARS),
    )
    if depth == 0:
        return leaf
    sub = int_expr(depth - 1)
    return st.one_of(
        leaf,
        st.tuples(sub, st.sampled_from("+-*"), sub).map(
            lambda t: f"({t[0]} {t[1]} {t[2]})"
        ),
    )


def bool_expr() -> st.SearchStrategy[str]:
    return st.tuples(
        int_expr(1), st.sampled_from(["<", "<=", ">", ">=", "==", "!="]), int_expr(1)
    ).map(lambda t: f"{t[0]} {t[1]} {t[2]}")


@st.composite
def statements(draw, depth: int = 2, allow_loops: bool = True) -> list:
    """Statement lines for a straight-line/branching MiniCC body."""
    n = draw(st.integers(min_value=1, max_value=4))
    out = []
    for _ in range(n):
        kinds = ["assign", "print", "if"]
        if depth > 0:
            kinds.append("if_else")
            if allow_loops:
                kinds.append("while")
        kind = draw(st.sampled_from(kinds))
        if kind == "assign":
            v = draw(st.sampled_from(_INT_VARS))
            out.append(f"{v} = {draw(int_expr())};")
        elif kind == "print":
            out.append(f"print({draw(int_expr())});")
        elif kind == "if":
            body = draw(statements(depth=depth - 1, allow_loops=allow_loops)) if depth else ["a = 1;"]
            out.append(f"if ({draw(bool_expr())}) {{")
            out.extend("    " + line for line in body)
            out.append("}")
        elif kind == "if_else":
            body1 = draw(statements(depth=depth - 1, allow_loops=allow_loops))
            body2 = draw(statements(depth=depth - 1, allow_loops=allow_loops))
            out.append(f"if ({draw(bool_expr())}) {{")
            out.extend("    " + line for line in body1)
            out.append("} else {")
            out.extend("    " + line for line in body2)
            out.append("}")
        else:  # bounded while: at most 3 iterations via a fresh counter
            body = draw(statements(depth=depth - 1, allow_loops=False))
            out.append(f"while (a < {draw(st.integers(1, 3))}) {{")
            out.append("    a = a + 1;")
            out.extend("    " + line for line in body)
            out.append("}")
    return out


@st.composite
def program_source(draw) -> str:
    body = draw(statements())
    lines = ["fn main() {"]
    lines.append("    int a = 0;")
    lines.append("    int b = 1;")
    lines.append("    int c = 2;")
    lines.extend("    " + line for line in body)
    lines.append("}")
    return "\n".join(lines) + "\n"
