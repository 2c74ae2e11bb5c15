"""Lexer and recursive-descent parser for gadget sources (.gdl files).

The concrete grammar (also published in docs/grammar.md):

    gadget     = { header } { stmt } return ;
    header     = "gadget" IDENT ";"
               | "order" "t" "=" NUM ";"
               | "param" IDENT "=" NUM ";"
               | "shares" IDENT dims ";"
               | "unshared" IDENT [ dims ] ";"
    dims       = "[" dim "]" { "[" dim "]" }
    dim        = iexpr | iexpr ".." iexpr
    stmt       = varref "<-" "unif" ";"
               | varref "<-" expr ";"
               | "for" IDENT "in" iexpr ".." iexpr [ "acc" IDENT "init" expr ]
                 "{" { stmt } [ "yield" expr ";" ] "}"
    return     = "return" ( "(" [ expr { "," expr } ] ")" | expr ) ";"
    expr       = or ; or = and { "||" and } ; and = cmp { "&&" cmp }
    cmp        = add [ ("==" | "!=") add ]
    add        = mul { ("+" | "-") mul } ; mul = unary { "*" unary }
    unary      = "-" unary | postfix ; postfix = primary { "." NUM }
    primary    = NUM | "T" | "F" | varref
               | "(" [ expr { "," expr } ] ")"
               | "if" expr "then" expr "else" expr
    varref     = IDENT { "[" iexpr "]" }
    iexpr      = static integer arithmetic over NUM, loop indices, "t", params

Comments run from "#" to end of line. Files are UTF-8 with LF newlines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    BinOp,
    Bind,
    BoolConst,
    Const,
    Decl,
    Expr,
    ForLoop,
    GadgetSyntaxError,
    IBin,
    IExpr,
    INum,
    IVar,
    Ite,
    Program,
    Proj,
    Sample,
    ShareFamily,
    ShareStructure,
    Span,
    Stmt,
    TupleExpr,
    UnrollError,
    Var,
    eval_index,
    walk_exprs,
)
from .names import flat_name

KEYWORDS = frozenset(
    "gadget order param shares unshared for in acc init yield return unif "
    "if then else T F".split()
)

_TOKEN_RE = re.compile(
    r"[ \t\r]+"
    r"|\#[^\n]*"
    r"|(?P<num>\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><-|\.\.|==|!=|&&|\|\||[-+*=;,{}()\[\].])"
    r"|(?P<nl>\n)"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "op", "kw", "eof"
    text: str
    span: Span


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise GadgetSyntaxError(
                f"unexpected character {source[pos]!r}", (line, pos - line_start + 1)
            )
        span = (line, m.start() - line_start + 1)
        if m.lastgroup == "num":
            tokens.append(Token("num", m.group(), span))
        elif m.lastgroup == "ident":
            text = m.group()
            kind = "kw" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, span))
        elif m.lastgroup == "op":
            tokens.append(Token("op", m.group(), span))
        elif m.lastgroup == "nl":
            line += 1
            line_start = m.end()
        pos = m.end()
    tokens.append(Token("eof", "", (line, len(source) - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.cur
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        if self.at(kind, text):
            return self.advance()
        want = what or (text if text is not None else kind)
        got = self.cur.text or "end of input"
        raise GadgetSyntaxError(f"expected {want!r}, found {got!r}", self.cur.span)

    # -- static index expressions ---------------------------------------

    def iexpr(self) -> IExpr:
        node = self.imul()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.advance().text
            node = IBin(op, node, self.imul())
        return node

    def imul(self) -> IExpr:
        node = self.iatom()
        while self.at("op", "*"):
            self.advance()
            node = IBin("*", node, self.iatom())
        return node

    def iatom(self) -> IExpr:
        if self.at("num"):
            return INum(int(self.advance().text))
        if self.at("ident"):
            return IVar(self.advance().text)
        if self.accept("op", "-"):
            return IBin("-", INum(0), self.iatom())
        if self.accept("op", "("):
            node = self.iexpr()
            self.expect("op", ")")
            return node
        raise GadgetSyntaxError(
            f"expected index expression, found {self.cur.text!r}", self.cur.span
        )

    # -- header ----------------------------------------------------------

    def dims(self, optional: bool = False) -> list[tuple[IExpr, IExpr | None]]:
        """Parse ``[dim]...``; each dim is a count N or an inclusive range a..b."""
        dims = []
        while self.at("op", "["):
            self.advance()
            first = self.iexpr()
            if self.accept("op", ".."):
                dims.append((first, self.iexpr()))
            else:
                dims.append((first, None))
            self.expect("op", "]")
        if not dims and not optional:
            raise GadgetSyntaxError("expected '[' after name", self.cur.span)
        return dims

    # -- runtime expressions ----------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        node = self.and_expr()
        while self.at("op", "||"):
            tok = self.advance()
            node = BinOp("||", node, self.and_expr(), span=tok.span)
        return node

    def and_expr(self) -> Expr:
        node = self.cmp_expr()
        while self.at("op", "&&"):
            tok = self.advance()
            node = BinOp("&&", node, self.cmp_expr(), span=tok.span)
        return node

    def cmp_expr(self) -> Expr:
        node = self.add_expr()
        if self.at("op", "==") or self.at("op", "!="):
            tok = self.advance()
            node = BinOp(tok.text, node, self.add_expr(), span=tok.span)
        return node

    def add_expr(self) -> Expr:
        node = self.mul_expr()
        while self.at("op", "+") or self.at("op", "-"):
            tok = self.advance()
            node = BinOp(tok.text, node, self.mul_expr(), span=tok.span)
        return node

    def mul_expr(self) -> Expr:
        node = self.unary_expr()
        while self.at("op", "*"):
            tok = self.advance()
            node = BinOp("*", node, self.unary_expr(), span=tok.span)
        return node

    def unary_expr(self) -> Expr:
        if self.at("op", "-"):
            tok = self.advance()
            return BinOp("-", Const(0, span=tok.span), self.unary_expr(), span=tok.span)
        return self.postfix_expr()

    def postfix_expr(self) -> Expr:
        node = self.primary_expr()
        while self.at("op", "."):
            tok = self.advance()
            num = self.expect("num", what="projection index")
            node = Proj(int(num.text), node, span=tok.span)
        return node

    def primary_expr(self) -> Expr:
        tok = self.cur
        if self.at("num"):
            self.advance()
            return Const(int(tok.text), span=tok.span)
        if self.at("kw", "T"):
            self.advance()
            return BoolConst(True, span=tok.span)
        if self.at("kw", "F"):
            self.advance()
            return BoolConst(False, span=tok.span)
        if self.at("kw", "if"):
            self.advance()
            cond = self.expr()
            self.expect("kw", "then")
            then = self.expr()
            self.expect("kw", "else")
            orelse = self.expr()
            return Ite(cond, then, orelse, span=tok.span)
        if self.at("op", "("):
            self.advance()
            if self.accept("op", ")"):
                return TupleExpr((), span=tok.span)
            first = self.expr()
            if self.at("op", ","):
                items = [first]
                while self.accept("op", ","):
                    items.append(self.expr())
                self.expect("op", ")")
                return TupleExpr(tuple(items), span=tok.span)
            self.expect("op", ")")
            return first
        if self.at("ident"):
            return self.varref()
        raise GadgetSyntaxError(
            f"expected expression, found {tok.text or 'end of input'!r}", tok.span
        )

    def varref(self) -> Var:
        tok = self.expect("ident", what="variable name")
        indices = []
        while self.at("op", "["):
            self.advance()
            indices.append(self.iexpr())
            self.expect("op", "]")
        return Var(tok.text, tuple(indices), span=tok.span)

    # -- statements --------------------------------------------------------

    def stmt(self) -> Stmt:
        if self.at("kw", "for"):
            return self.for_stmt()
        target = self.varref()
        self.expect("op", "<-")
        if self.at("kw", "unif"):
            tok = self.advance()
            self.expect("op", ";")
            return Sample(target, span=tok.span)
        expr = self.expr()
        self.expect("op", ";")
        return Bind(target, expr, span=target.span)

    def for_stmt(self) -> ForLoop:
        tok = self.expect("kw", "for")
        var = self.expect("ident", what="loop index").text
        self.expect("kw", "in")
        lo = self.iexpr()
        self.expect("op", "..")
        hi = self.iexpr()
        acc = init = None
        if self.accept("kw", "acc"):
            acc = self.expect("ident", what="accumulator name").text
            self.expect("kw", "init")
            init = self.expr()
        self.expect("op", "{")
        body: list[Stmt] = []
        yield_expr = None
        while not self.at("op", "}"):
            if self.at("kw", "yield"):
                ytok = self.advance()
                if acc is None:
                    raise GadgetSyntaxError(
                        "'yield' is only allowed in a loop with an accumulator",
                        ytok.span,
                    )
                yield_expr = self.expr()
                self.expect("op", ";")
                break
            body.append(self.stmt())
        self.expect("op", "}")
        if acc is not None and yield_expr is None:
            raise GadgetSyntaxError(
                f"loop with accumulator '{acc}' must end with a 'yield'", tok.span
            )
        return ForLoop(var, lo, hi, tuple(body), acc, init, yield_expr, span=tok.span)

    # -- whole gadget -------------------------------------------------------

    def gadget(self, default_name: str | None) -> Program:
        name = default_name
        order: int | None = None
        params: list[tuple[str, int]] = []
        share_decls: list[tuple[str, list, Span]] = []
        unshared_decls: list[tuple[str, list, Span]] = []
        decls: list[Decl] = []

        while True:
            if self.accept("kw", "gadget"):
                name = self.expect("ident", what="gadget name").text
                self.expect("op", ";")
            elif self.at("kw", "order"):
                tok = self.advance()
                ident = self.expect("ident", what="'t'")
                if ident.text != "t":
                    raise GadgetSyntaxError(
                        "the masking order is always declared as 'order t = N'",
                        ident.span,
                    )
                self.expect("op", "=")
                if order is not None:
                    raise GadgetSyntaxError("duplicate 'order' declaration", tok.span)
                order = int(self.expect("num", what="order value").text)
                self.expect("op", ";")
            elif self.accept("kw", "param"):
                pname = self.expect("ident", what="param name").text
                self.expect("op", "=")
                value = int(self.expect("num", what="param value").text)
                self.expect("op", ";")
                params.append((pname, value))
            elif self.at("kw", "shares"):
                tok = self.advance()
                base = self.expect("ident", what="family name").text
                dims = self.dims()
                share_decls.append((base, dims, tok.span))
                decls.append(Decl("shares", base, tuple(dims)))
                self.expect("op", ";")
            elif self.at("kw", "unshared"):
                tok = self.advance()
                base = self.expect("ident", what="input name").text
                dims = self.dims(optional=True)
                unshared_decls.append((base, dims, tok.span))
                decls.append(Decl("unshared", base, tuple(dims)))
                self.expect("op", ";")
            else:
                break

        order = 0 if order is None else order
        env = dict(params)
        env["t"] = order

        def expand(dims, span) -> list[tuple[int, ...]]:
            """All concrete index tuples of a declaration, in natural order.

            A bare [N] dimension means N entries indexed 0..N-1; [a..b] is an
            inclusive range.
            """
            try:
                ranges = []
                for first, second in dims:
                    if second is None:
                        ranges.append(range(eval_index(first, env, span)))
                    else:
                        lo = eval_index(first, env, span)
                        hi = eval_index(second, env, span)
                        ranges.append(range(lo, hi + 1))
            except UnrollError:
                raise GadgetSyntaxError(
                    "declaration sizes must be static (numbers, 't', params)", span
                ) from None
            tuples: list[tuple[int, ...]] = [()]
            for r in ranges:
                tuples = [tup + (i,) for tup in tuples for i in r]
            return tuples

        families: list[ShareFamily] = []
        for base, dims, span in share_decls:
            if not dims:
                raise GadgetSyntaxError(
                    f"share declaration '{base}' needs a share count, e.g. {base}[t+1]",
                    span,
                )
            lead, last = dims[:-1], dims[-1]
            for famidx in expand(lead, span) if lead else [()]:
                members = tuple(
                    flat_name(base, famidx + sidx) for sidx in expand([last], span)
                )
                families.append(ShareFamily(flat_name(base, famidx), members))

        unshared: list[str] = []
        for base, dims, span in unshared_decls:
            if not dims:
                unshared.append(base)
            else:
                unshared.extend(flat_name(base, ix) for ix in expand(dims, span))

        shares = ShareStructure(order, tuple(families), tuple(unshared))

        body: list[Stmt] = []
        while not self.at("kw", "return"):
            if self.at("eof"):
                raise GadgetSyntaxError("gadget has no 'return'", self.cur.span)
            body.append(self.stmt())

        self.expect("kw", "return")
        outputs: list[Expr]
        if self.accept("op", "("):
            outputs = []
            if not self.at("op", ")"):
                outputs.append(self.expr())
                while self.accept("op", ","):
                    outputs.append(self.expr())
            self.expect("op", ")")
        else:
            outputs = [self.expr()]
        self.expect("op", ";")
        self.expect("eof", what="end of file")

        return Program(
            name=name,
            shares=shares,
            params=tuple(params),
            body=tuple(body),
            outputs=tuple(outputs),
            decls=tuple(decls),
        )


def _defined_bases(stmts: tuple[Stmt, ...]) -> set[str]:
    bases: set[str] = set()
    for stmt in stmts:
        if isinstance(stmt, (Sample, Bind)):
            bases.add(stmt.target.base)
        elif isinstance(stmt, ForLoop):
            bases |= _defined_bases(stmt.body)
            if stmt.acc is not None:
                bases.add(stmt.acc)
    return bases


def _check_unbound(program: Program) -> None:
    """Reject variables that are never bound anywhere in the gadget.

    This is a name-level check (order-insensitive, so it works on loops);
    use-before-binding ordering is enforced after unrolling.
    """
    defined = {d.base for d in program.decls} | _defined_bases(program.body)

    def check_expr(expr: Expr, loop_vars: frozenset[str]) -> None:
        for sub in walk_exprs(expr):
            if isinstance(sub, Var):
                if sub.base in loop_vars:
                    raise GadgetSyntaxError(
                        f"loop index '{sub.base}' cannot be used as a value",
                        sub.span,
                    )
                if sub.base not in defined:
                    raise GadgetSyntaxError(
                        f"unbound variable '{sub.base}'", sub.span
                    )

    def check_stmts(stmts, loop_vars: frozenset[str]) -> None:
        for stmt in stmts:
            if isinstance(stmt, Bind):
                check_expr(stmt.expr, loop_vars)
            elif isinstance(stmt, ForLoop):
                if stmt.init is not None:
                    check_expr(stmt.init, loop_vars)
                inner = loop_vars | {stmt.var}
                check_stmts(stmt.body, inner)
                if stmt.yield_expr is not None:
                    check_expr(stmt.yield_expr, inner)

    check_stmts(program.body, frozenset())
    for out in program.outputs:
        check_expr(out, frozenset())


def parse_gadget(source: str, name: str | None = None) -> Program:
    """Parse a gadget source text into a Program.

    Share and unshared declarations are flattened to concrete input names
    immediately (their sizes only involve 't' and declared params); indexed
    names in the body stay symbolic until unroll.
    """
    program = _Parser(tokenize(source)).gadget(name)
    _check_unbound(program)
    return program
