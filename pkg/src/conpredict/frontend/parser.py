"""Lexer and recursive-descent parser for MiniCC.

The grammar (statements end with ';', blocks use braces):

    unit      := (global | function)*
    global    := type IDENT ('=' literal)? ';'
    function  := 'fn' IDENT '(' params? ')' block
    params    := type IDENT (',' type IDENT)*
    block     := '{' statement* '}'
    statement := decl | assign | call ';' | if | while | do-while
               | return ';' | ';'
    decl      := type IDENT ('=' (expr | spawn))? ';'
    assign    := IDENT ('='|'|='|'&=') expr ';'
    spawn     := 'spawn' '(' IDENT (',' expr)* ')'
    if        := 'if' '(' expr ')' block ('else' block)?
    while     := 'while' '(' expr ')' block
    do-while  := 'do' block 'while' '(' expr ')' ';'

Expressions use C-like precedence: || < && < |, & < relational <
shifts < additive < multiplicative < unary.
"""

from __future__ import annotations

from dataclasses import dataclass

from .astnodes import (
    ASSIGN_OPS,
    BUILTINS,
    Assign,
    Binary,
    BoolLit,
    Call,
    Decl,
    DoWhile,
    FunctionDecl,
    GlobalDecl,
    If,
    IntLit,
    Return,
    Skip,
    SourceUnit,
    SpawnInit,
    TYPES,
    Unary,
    Var,
    While,
)

KEYWORDS = {
    "fn", "if", "else", "while", "do", "return", "true", "false",
    *TYPES,
}

_PUNCT = [
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "|=", "&=",
    "(", ")", "{", "}", ";", ",", "=", "<", ">", "+", "-", "*", "/",
    "%", "!", "|", "&",
]


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "int", "keyword", "punct", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.next_uid = 0

    # -- token helpers ------------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def check(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("punct", "keyword") and tok.text == text

    def accept(self, text: str) -> bool:
        if self.check(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if not self.check(text):
            raise ParseError(
                f"expected {text!r}, found {tok.text or 'end of input'!r}",
                tok.line,
                tok.col,
            )
        return self.advance()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident":
            raise ParseError(
                f"expected identifier, found {tok.text or 'end of input'!r}",
                tok.line,
                tok.col,
            )
        return self.advance()

    def uid(self) -> int:
        u = self.next_uid
        self.next_uid += 1
        return u

    # -- grammar ------------------------------------------------------------

    def parse_unit(self) -> SourceUnit:
        globals_: list[GlobalDecl] = []
        functions: list[FunctionDecl] = []
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "keyword" and tok.text == "fn":
                functions.append(self.parse_function())
            elif tok.kind == "keyword" and tok.text in TYPES:
                globals_.append(self.parse_global())
            else:
                raise ParseError(
                    f"expected declaration, found {tok.text!r}",
                    tok.line,
                    tok.col,
                )
        return SourceUnit(globals_, functions, self.text)

    def parse_global(self) -> GlobalDecl:
        ty = self.advance()
        if ty.text == "thread":
            raise ParseError("thread variables must be function-local", ty.line, ty.col)
        name = self.expect_ident()
        init = None
        if self.accept("="):
            init = self.parse_literal()
        self.expect(";")
        return GlobalDecl(name.text, ty.text, init, ty.line)

    def parse_literal(self):
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text))
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true")
        if self.check("-"):
            self.advance()
            num = self.peek()
            if num.kind == "int":
                self.advance()
                return IntLit(-int(num.text))
        raise ParseError("expected literal initializer", tok.line, tok.col)

    def parse_function(self) -> FunctionDecl:
        fn = self.expect("fn")
        name = self.expect_ident()
        self.expect("(")
        params = []
        if not self.check(")"):
            while True:
                ty = self.peek()
                if not (ty.kind == "keyword" and ty.text in TYPES):
                    raise ParseError("expected parameter type", ty.line, ty.col)
                self.advance()
                pname = self.expect_ident()
                params.append((pname.text, ty.text))
                if not self.accept(","):
                    break
        self.expect(")")
        body = self.parse_block()
        return FunctionDecl(name.text, tuple(params), body, fn.line)

    def parse_block(self) -> list:
        self.expect("{")
        body = []
        while not self.check("}"):
            if self.peek().kind == "eof":
                tok = self.peek()
                raise ParseError("unexpected end of input in block", tok.line, tok.col)
            body.append(self.parse_statement())
        self.expect("}")
        return body

    def parse_statement(self):
        tok = self.peek()
        if tok.kind == "keyword":
            if tok.text in TYPES:
                return self.parse_decl()
            if tok.text == "if":
                return self.parse_if()
            if tok.text == "while":
                return self.parse_while()
            if tok.text == "do":
                return self.parse_do_while()
            if tok.text == "return":
                self.advance()
                self.expect(";")
                return Return(uid=self.uid(), line=tok.line)
            raise ParseError(f"unexpected keyword {tok.text!r}", tok.line, tok.col)
        if self.check(";"):
            self.advance()
            return Skip(uid=self.uid(), line=tok.line)
        if tok.kind == "ident":
            nxt = self.tokens[self.pos + 1]
            if nxt.kind == "punct" and nxt.text in ASSIGN_OPS:
                return self.parse_assign()
            if nxt.kind == "punct" and nxt.text == "(":
                return self.parse_call_stmt()
            raise ParseError(
                f"expected assignment or call after {tok.text!r}",
                tok.line,
                tok.col,
            )
        raise ParseError(f"expected statement, found {tok.text!r}", tok.line, tok.col)

    def parse_if(self) -> If:
        tok = self.expect("if")
        uid = self.uid()
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then_body = self.parse_block()
        else_body = []
        if self.accept("else"):
            else_body = self.parse_block()
        return If(cond=cond, then_body=then_body, else_body=else_body,
                  uid=uid, line=tok.line)

    def parse_while(self) -> While:
        tok = self.expect("while")
        uid = self.uid()
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        body = self.parse_block()
        return While(cond=cond, body=body, uid=uid, line=tok.line)

    def parse_do_while(self) -> DoWhile:
        tok = self.expect("do")
        uid = self.uid()
        body = self.parse_block()
        self.expect("while")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        self.expect(";")
        return DoWhile(cond=cond, body=body, uid=uid, line=tok.line)

    def parse_decl(self) -> Decl:
        ty = self.advance()
        name = self.expect_ident()
        init = None
        if self.accept("="):
            nxt = self.peek()
            if nxt.kind == "ident" and nxt.text == "spawn":
                init = self.parse_spawn()
            else:
                init = self.parse_expr()
        self.expect(";")
        return Decl(type=ty.text, name=name.text, init=init, uid=self.uid(), line=ty.line)

    def parse_spawn(self) -> SpawnInit:
        tok = self.expect_ident()  # "spawn"
        self.expect("(")
        target = self.expect_ident()
        args = []
        while self.accept(","):
            args.append(self.parse_expr())
        self.expect(")")
        del tok
        return SpawnInit(target.text, tuple(args))

    def parse_assign(self) -> Assign:
        name = self.expect_ident()
        op = self.advance()
        expr = self.parse_expr()
        self.expect(";")
        return Assign(name=name.text, op=op.text, expr=expr, uid=self.uid(), line=name.line)

    def parse_call_stmt(self) -> Call:
        name = self.expect_ident()
        self.expect("(")
        args = []
        if not self.check(")"):
            first = self.peek()
            if name.text in ("spawn", "join") and first.kind == "ident":
                # spawn/join take a function or handle name first.
                args.append(Var(self.advance().text))
            else:
                args.append(self.parse_expr())
            while self.accept(","):
                args.append(self.parse_expr())
        self.expect(")")
        self.expect(";")
        return Call(name=name.text, args=tuple(args), uid=self.uid(), line=name.line)

    # -- expressions ---------------------------------------------------------

    def parse_expr(self):
        return self.parse_or()

    def _binary_level(self, sub, ops):
        e = sub()
        while True:
            tok = self.peek()
            if tok.kind == "punct" and tok.text in ops:
                self.advance()
                e = Binary(tok.text, e, sub())
            else:
                return e

    def parse_or(self):
        return self._binary_level(self.parse_and, ("||",))

    def parse_and(self):
        return self._binary_level(self.parse_bit, ("&&",))

    def parse_bit(self):
        return self._binary_level(self.parse_rel, ("|", "&"))

    def parse_rel(self):
        return self._binary_level(self.parse_shift, ("<", "<=", ">", ">=", "==", "!="))

    def parse_shift(self):
        return self._binary_level(self.parse_add, ("<<", ">>"))

    def parse_add(self):
        return self._binary_level(self.parse_mul, ("+", "-"))

    def parse_mul(self):
        return self._binary_level(self.parse_unary, ("*", "/", "%"))

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.text in ("!", "-"):
            self.advance()
            return Unary(tok.text, self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text))
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true")
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if self.accept("("):
            e = self.parse_expr()
            self.expect(")")
            return e
        raise ParseError(
            f"expected expression, found {tok.text or 'end of input'!r}",
            tok.line,
            tok.col,
        )


# --------------------------------------------------------------------------
# Resolution and validation
# --------------------------------------------------------------------------


def _line_metrics(text: str, functions: list[FunctionDecl]):
    """Fill nloc/comment_lines per function from its source line span."""
    lines = text.split("\n")
    # Function spans: from the 'fn' line to the line before the next one.
    starts = [f.line for f in functions]
    for i, f in enumerate(functions):
        end = starts[i + 1] - 1 if i + 1 < len(functions) else len(lines)
        nloc = 0
        comments = 0
        for ln in lines[f.line - 1 : end]:
            stripped = ln.strip()
            if not stripped:
                continue
            if "//" in ln:
                comments += 1
            code = ln.split("//", 1)[0].strip()
            if code:
                nloc += 1
        f.nloc = max(nloc, 1)
        f.comment_lines = comments


def _resolve_function(u: SourceUnit, f: FunctionDecl):
    fnames = {fn.name for fn in u.functions}
    gtypes = {g.name: g.type for g in u.globals}

    def err(msg, st):
        raise ParseError(msg, st.line, 1)

    def check_expr(e, scope, st):
        from .astnodes import walk_expr

        for sub in walk_expr(e):
            if isinstance(sub, Var):
                if sub.name not in scope and sub.name not in gtypes:
                    err(f"unresolved identifier {sub.name!r}", st)

    def check_body(body, scope):
        for st in body:
            if isinstance(st, Decl):
                if st.name in scope or st.name in gtypes:
                    err(f"duplicate declaration of {st.name!r}", st)
                if isinstance(st.init, SpawnInit):
                    if st.type != "thread":
                        err("spawn initializer requires a thread variable", st)
                    if st.init.target not in fnames:
                        err(f"spawn of unknown function {st.init.target!r}", st)
                    for a in st.init.args:
                        check_expr(a, scope, st)
                elif st.init is not None:
                    check_expr(st.init, scope, st)
                scope[st.name] = st.type
            elif isinstance(st, Assign):
                if st.name not in scope and st.name not in gtypes:
                    err(f"unresolved identifier {st.name!r}", st)
                check_expr(st.expr, scope, st)
            elif isinstance(st, Call):
                if st.name in BUILTINS:
                    _check_builtin_call(st, scope, gtypes, fnames, err, check_expr)
                elif st.name in fnames:
                    for a in st.args:
                        check_expr(a, scope, st)
                else:
                    err(f"call to unknown function or builtin {st.name!r}", st)
            elif isinstance(st, If):
                check_expr(st.cond, scope, st)
                check_body(st.then_body, dict(scope))
                check_body(st.else_body, dict(scope))
            elif isinstance(st, (While, DoWhile)):
                check_expr(st.cond, scope, st)
                check_body(st.body, dict(scope))

    scope = {name: ty for name, ty in f.params}
    check_body(f.body, scope)


def _check_builtin_call(st, scope, gtypes, fnames, err, check_expr):
    name = st.name

    def var_type(arg):
        if not isinstance(arg, Var):
            return None
        return scope.get(arg.name) or gtypes.get(arg.name)

    if name in ("lock", "unlock"):
        if len(st.args) != 1 or var_type(st.args[0]) != "mutex":
            err(f"{name} expects one mutex argument", st)
    elif name in ("signal", "broadcast"):
        if len(st.args) != 1 or var_type(st.args[0]) != "cond":
            err(f"{name} expects one cond argument", st)
    elif name == "wait":
        if (
            len(st.args) != 2
            or var_type(st.args[0]) != "cond"
            or var_type(st.args[1]) != "mutex"
        ):
            err("wait expects (cond, mutex)", st)
    elif name == "timedwait":
        if (
            len(st.args) != 3
            or var_type(st.args[0]) != "cond"
            or var_type(st.args[1]) != "mutex"
        ):
            err("timedwait expects (cond, mutex, budget)", st)
        check_expr(st.args[2], scope, st)
    elif name == "spawn":
        if len(st.args) < 1 or not isinstance(st.args[0], Var):
            err("spawn expects a function name", st)
        if st.args[0].name not in fnames:
            err(f"spawn of unknown function {st.args[0].name!r}", st)
        for a in st.args[1:]:
            check_expr(a, scope, st)
    elif name == "join":
        if len(st.args) != 1 or not isinstance(st.args[0], Var):
            err("join expects a thread handle", st)
        if var_type(st.args[0]) != "thread":
            err("join expects a thread handle", st)
    elif name == "yield":
        if st.args:
            err("yield takes no arguments", st)
    elif name in ("print", "assert"):
        if len(st.args) != 1:
            err(f"{name} expects one argument", st)
        check_expr(st.args[0], scope, st)


def _terminates(st) -> bool:
    if isinstance(st, Return):
        return True
    if isinstance(st, If):
        return (
            bool(st.then_body)
            and bool(st.else_body)
            and _terminates(st.then_body[-1])
            and _terminates(st.else_body[-1])
        )
    return False


def _check_reachable(f: FunctionDecl):
    """Reject statements that could never execute, so every CFG node is
    reachable and reaches the exit."""

    def check(body):
        for i, st in enumerate(body):
            if _terminates(st) and i != len(body) - 1:
                nxt = body[i + 1]
                raise ParseError("unreachable statement", nxt.line, 1)
            if isinstance(st, If):
                check(st.then_body)
                check(st.else_body)
            elif isinstance(st, While):
                check(st.body)
            elif isinstance(st, DoWhile):
                check(st.body)
                if st.body and _terminates(st.body[-1]):
                    raise ParseError(
                        "do-while condition is unreachable", st.line, 1
                    )

    check(f.body)


def parse(text: str) -> SourceUnit:
    """Parse and resolve MiniCC source; raises ParseError on any
    diagnostic (syntax error, unresolved identifier, duplicate
    declaration, unknown builtin)."""
    unit = _Parser(text).parse_unit()
    names = [f.name for f in unit.functions]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})[0]
        raise ParseError(f"duplicate function {dup!r}", 1, 1)
    gnames = [g.name for g in unit.globals]
    if len(set(gnames)) != len(gnames):
        dup = sorted({n for n in gnames if gnames.count(n) > 1})[0]
        raise ParseError(f"duplicate global {dup!r}", 1, 1)
    for f in unit.functions:
        _resolve_function(unit, f)
        _check_reachable(f)
    _line_metrics(unit.source_text, unit.functions)
    return unit
