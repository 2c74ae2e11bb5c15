"""Program transformations: loop unrolling, internal-wire exposure, printing.

`unroll` flattens every for-loop using its static bounds, resolves all index
expressions to literals, and gives accumulator states fresh versioned names
(`S@0` for the init, `S@k` after iteration k). The result is re-typechecked
strictly, which enforces single assignment and definition-before-use.

`expose_internals` extends the output tuple so that every defined wire is
observable: internal wires first (in binding order), then the original
outputs. A wire the gadget returns counts as an output wire, not an internal
one. Anonymous output expressions are bound to fresh `out@k` names first.

`pretty` renders a parsed program back to canonical source; on never-unrolled
programs it round-trips through `parse_gadget` up to whitespace.
"""

from __future__ import annotations

from .ast import (
    BinOp,
    Bind,
    BoolConst,
    Const,
    Expr,
    ForLoop,
    IBin,
    IExpr,
    INum,
    IVar,
    Ite,
    Program,
    Proj,
    Sample,
    Stmt,
    TupleExpr,
    TypedProgram,
    UnrollError,
    Var,
    eval_index,
)
from .names import GENERATED_SEP
from .typecheck import typecheck


def var_named(name: str) -> Var:
    """A variable reference for an already-flat name like ``C[0][1]``."""
    return Var(name, ())


# ---------------------------------------------------------------------------
# Unrolling


def unroll(p: TypedProgram) -> TypedProgram:
    """Flatten loops and indices; returns a strict-typed, unrolled program."""
    program = p.program
    out_stmts: list[Stmt] = []
    subst: dict[str, str] = {}  # accumulator name -> current version name
    used_acc: set[str] = set()

    def conc_var(v: Var, ienv) -> Var:
        if v.base in subst:
            if v.indices:
                raise UnrollError(
                    f"accumulator '{v.base}' is a scalar and cannot be indexed",
                    v.span,
                )
            return Var(subst[v.base], (), span=v.span)
        idx = tuple(INum(eval_index(ix, ienv, v.span)) for ix in v.indices)
        return Var(v.base, idx, span=v.span)

    def conc_expr(e: Expr, ienv) -> Expr:
        if isinstance(e, Var):
            return conc_var(e, ienv)
        if isinstance(e, (Const, BoolConst)):
            return e
        if isinstance(e, BinOp):
            return BinOp(e.op, conc_expr(e.lhs, ienv), conc_expr(e.rhs, ienv), span=e.span)
        if isinstance(e, Ite):
            return Ite(
                conc_expr(e.cond, ienv),
                conc_expr(e.then, ienv),
                conc_expr(e.orelse, ienv),
                span=e.span,
            )
        if isinstance(e, TupleExpr):
            return TupleExpr(tuple(conc_expr(i, ienv) for i in e.items), span=e.span)
        if isinstance(e, Proj):
            return Proj(e.index, conc_expr(e.expr, ienv), span=e.span)
        raise AssertionError(f"unhandled expression {e!r}")

    def do_stmts(stmts, ienv) -> None:
        for stmt in stmts:
            if isinstance(stmt, Sample):
                out_stmts.append(Sample(conc_var(stmt.target, ienv), span=stmt.span))
            elif isinstance(stmt, Bind):
                out_stmts.append(
                    Bind(conc_var(stmt.target, ienv), conc_expr(stmt.expr, ienv), span=stmt.span)
                )
            else:
                lo = eval_index(stmt.lo, ienv, stmt.span)
                hi = eval_index(stmt.hi, ienv, stmt.span)
                if stmt.acc is None:
                    for k in range(lo, hi + 1):
                        do_stmts(stmt.body, {**ienv, stmt.var: k})
                else:
                    acc = stmt.acc
                    if acc in used_acc:
                        raise UnrollError(
                            f"accumulator name '{acc}' is reused; accumulators "
                            "must be unique per gadget",
                            stmt.span,
                        )
                    used_acc.add(acc)
                    v0 = f"{acc}{GENERATED_SEP}0"
                    out_stmts.append(
                        Bind(var_named(v0), conc_expr(stmt.init, ienv), span=stmt.span)
                    )
                    subst[acc] = v0
                    for n, k in enumerate(range(lo, hi + 1), start=1):
                        inner = {**ienv, stmt.var: k}
                        do_stmts(stmt.body, inner)
                        vn = f"{acc}{GENERATED_SEP}{n}"
                        out_stmts.append(
                            Bind(var_named(vn), conc_expr(stmt.yield_expr, inner), span=stmt.span)
                        )
                        subst[acc] = vn
                    # After the loop, the accumulator name denotes its final
                    # version, so later statements keep working via subst.

    base_env = program.param_env
    do_stmts(program.body, base_env)
    outputs = tuple(conc_expr(e, base_env) for e in program.outputs)
    flat = program.with_body(out_stmts, outputs=outputs)
    typed = typecheck(flat)
    if not typed.unrolled:
        raise AssertionError("unroll produced a non-concrete program")
    return typed


# ---------------------------------------------------------------------------
# Exposing internal wires


def expose_internals(p: TypedProgram) -> TypedProgram:
    """Make every defined wire an output; records the split in `exposure`."""
    from .ast import ExposureInfo  # local to keep the import list short

    if not p.unrolled:
        raise UnrollError("expose_internals needs an unrolled program")
    program = p.program
    body = list(program.body)
    defined = [stmt.target.name for stmt in body]

    out_names: list[str] = []
    fresh = 0
    for out in program.outputs:
        if isinstance(out, Var):
            out_names.append(out.name)
        else:
            fresh += 1
            name = f"out{GENERATED_SEP}{fresh}"
            body.append(Bind(var_named(name), out))
            defined.append(name)
            out_names.append(name)

    out_set = set(out_names)
    internal = [n for n in defined if n not in out_set]
    dedup_out: list[str] = []
    for n in out_names:
        if n not in dedup_out:
            dedup_out.append(n)

    exposure = ExposureInfo(tuple(internal), tuple(out_names))
    outputs = tuple(var_named(n) for n in internal + dedup_out)
    return typecheck(program.with_body(body, outputs=outputs, exposure=exposure))


# ---------------------------------------------------------------------------
# Pretty-printing (canonical source form)

_IPREC = {"+": 1, "-": 1, "*": 2}


def render_iexpr(e: IExpr, min_prec: int = 0) -> str:
    if isinstance(e, INum):
        return str(e.value)
    if isinstance(e, IVar):
        return e.name
    prec = _IPREC[e.op]
    lhs = render_iexpr(e.lhs, prec)
    rhs = render_iexpr(e.rhs, prec + 1)
    text = f"{lhs} {e.op} {rhs}"
    return f"({text})" if prec < min_prec else text


_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "+": 4, "-": 4, "*": 5}


def render_expr(e: Expr, min_prec: int = 0) -> str:
    if isinstance(e, Var):
        return e.base + "".join(f"[{render_iexpr(ix)}]" for ix in e.indices)
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, BoolConst):
        return "T" if e.value else "F"
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        text = f"{render_expr(e.lhs, prec)} {e.op} {render_expr(e.rhs, prec + 1)}"
        return f"({text})" if prec < min_prec else text
    if isinstance(e, Ite):
        text = (
            f"if {render_expr(e.cond)} then {render_expr(e.then)} "
            f"else {render_expr(e.orelse)}"
        )
        return f"({text})" if min_prec > 0 else text
    if isinstance(e, TupleExpr):
        return "(" + ", ".join(render_expr(i) for i in e.items) + ")"
    if isinstance(e, Proj):
        return f"{render_expr(e.expr, 7)}.{e.index}"
    raise AssertionError(f"unhandled expression {e!r}")


def _render_stmt(stmt: Stmt, indent: str, lines: list[str]) -> None:
    if isinstance(stmt, Sample):
        lines.append(f"{indent}{render_expr(stmt.target)} <- unif;")
    elif isinstance(stmt, Bind):
        lines.append(f"{indent}{render_expr(stmt.target)} <- {render_expr(stmt.expr)};")
    else:
        head = f"{indent}for {stmt.var} in {render_iexpr(stmt.lo)}..{render_iexpr(stmt.hi)}"
        if stmt.acc is not None:
            head += f" acc {stmt.acc} init {render_expr(stmt.init)}"
        lines.append(head + " {")
        for sub in stmt.body:
            _render_stmt(sub, indent + "  ", lines)
        if stmt.yield_expr is not None:
            lines.append(f"{indent}  yield {render_expr(stmt.yield_expr)};")
        lines.append(indent + "}")


def pretty(program: Program) -> str:
    """Canonical source text for a parsed program."""
    lines: list[str] = []
    if program.name is not None:
        lines.append(f"gadget {program.name};")
    lines.append(f"order t = {program.shares.order};")
    for name, value in program.params:
        lines.append(f"param {name} = {value};")
    decls = program.decls or _reconstruct_decls(program)
    for d in decls:
        dims = "".join(
            f"[{render_iexpr(lo)}..{render_iexpr(hi)}]" if hi is not None else f"[{render_iexpr(lo)}]"
            for lo, hi in d.dims
        )
        lines.append(f"{d.kind} {d.base}{dims};")
    lines.append("")
    for stmt in program.body:
        _render_stmt(stmt, "", lines)
    lines.append("return (" + ", ".join(render_expr(e) for e in program.outputs) + ");")
    return "\n".join(lines) + "\n"


def _reconstruct_decls(program: Program):
    """Best-effort header for programmatically built programs."""
    from .ast import Decl

    decls = []
    t1 = program.shares.order + 1
    for fam in program.shares.families:
        expect = tuple(f"{fam.name}[{j}]" for j in range(t1))
        if fam.members != expect or "[" in fam.name:
            raise ValueError(
                f"cannot reconstruct a header declaration for family {fam.name}"
            )
        decls.append(Decl("shares", fam.name, ((IBin("+", IVar("t"), INum(1)), None),)))
    for name in program.shares.unshared:
        if "[" in name:
            raise ValueError(f"cannot reconstruct a header declaration for {name}")
        decls.append(Decl("unshared", name, ()))
    return decls
