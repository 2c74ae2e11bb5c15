"""Type reconstruction for gadget programs.

Two modes share one set of rules:

* **strict** — the body is loop-free and fully indexed-out (the normal state
  after `unroll`). Every statement is walked in order against an environment
  of concrete names, which also enforces single assignment and
  use-before-definition.
* **lenient** — the body still has loops, so indexed names cannot be
  resolved. Types are tracked per base name (each declared array is
  homogeneous) and unknown types unify with anything; definite mismatches
  like `T + 1` are still rejected.

`typecheck` picks the mode automatically: strict when the program is
loop-free with concrete indices everywhere, lenient otherwise.
"""

from __future__ import annotations

from .ast import (
    BOOL,
    BOOL_OPS,
    BinOp,
    Bind,
    BoolConst,
    CMP_OPS,
    Const,
    Expr,
    ForLoop,
    GadgetTypeError,
    Ite,
    Program,
    Proj,
    RING,
    RING_OPS,
    Sample,
    Span,
    TupleExpr,
    Type,
    TypedProgram,
    Var,
    render_type,
    walk_exprs,
)


def _is_concrete_program(program: Program) -> bool:
    """True when the body is loop-free and every variable index is literal."""

    def stmts_ok(stmts) -> bool:
        for stmt in stmts:
            if isinstance(stmt, ForLoop):
                return False
            if isinstance(stmt, Sample):
                if not stmt.target.is_concrete:
                    return False
            else:
                if not stmt.target.is_concrete:
                    return False
                if not expr_ok(stmt.expr):
                    return False
        return True

    def expr_ok(expr: Expr) -> bool:
        return all(
            sub.is_concrete for sub in walk_exprs(expr) if isinstance(sub, Var)
        )

    return stmts_ok(program.body) and all(expr_ok(e) for e in program.outputs)


# ---------------------------------------------------------------------------
# Strict mode


def _strict_type_of(expr: Expr, env: dict[str, Type]) -> Type:
    if isinstance(expr, Var):
        name = expr.name
        if name not in env:
            raise GadgetTypeError(
                f"unbound variable '{name}' (used before it is defined)", expr.span
            )
        return env[name]
    if isinstance(expr, Const):
        return RING
    if isinstance(expr, BoolConst):
        return BOOL
    if isinstance(expr, BinOp):
        lt = _strict_type_of(expr.lhs, env)
        rt = _strict_type_of(expr.rhs, env)
        return _binop_type(expr.op, lt, rt, expr.span)
    if isinstance(expr, Ite):
        ct = _strict_type_of(expr.cond, env)
        if ct != BOOL:
            raise GadgetTypeError(
                f"'if' condition must be bool, got {render_type(ct)}", expr.span
            )
        tt = _strict_type_of(expr.then, env)
        et = _strict_type_of(expr.orelse, env)
        if tt != et:
            raise GadgetTypeError(
                f"'if' branches have different types: {render_type(tt)} vs "
                f"{render_type(et)}",
                expr.span,
            )
        return tt
    if isinstance(expr, TupleExpr):
        return tuple(_strict_type_of(item, env) for item in expr.items)
    if isinstance(expr, Proj):
        it = _strict_type_of(expr.expr, env)
        return _proj_type(expr.index, it, expr.span)
    raise AssertionError(f"unhandled expression {expr!r}")


def _binop_type(op: str, lt: Type, rt: Type, span: Span | None) -> Type:
    if op in RING_OPS:
        if lt != RING or rt != RING:
            raise GadgetTypeError(
                f"operator '{op}' needs ring operands, got {render_type(lt)} "
                f"and {render_type(rt)}",
                span,
            )
        return RING
    if op in BOOL_OPS:
        if lt != BOOL or rt != BOOL:
            raise GadgetTypeError(
                f"operator '{op}' needs bool operands, got {render_type(lt)} "
                f"and {render_type(rt)}",
                span,
            )
        return BOOL
    if op in CMP_OPS:
        if lt != rt:
            raise GadgetTypeError(
                f"'{op}' compares values of different types: {render_type(lt)} "
                f"vs {render_type(rt)}",
                span,
            )
        return BOOL
    raise AssertionError(f"unknown operator {op!r}")


def _proj_type(index: int, ty: Type, span: Span | None) -> Type:
    if not isinstance(ty, tuple):
        raise GadgetTypeError(
            f"projection .{index} applied to non-tuple {render_type(ty)}", span
        )
    if not 1 <= index <= len(ty):
        raise GadgetTypeError(
            f"projection .{index} out of range for {render_type(ty)}", span
        )
    return ty[index - 1]


def _strict_check(program: Program) -> TypedProgram:
    env: dict[str, Type] = {name: RING for name in program.shares.inputs}
    for stmt in program.body:
        if isinstance(stmt, ForLoop):
            raise GadgetTypeError(
                "strict typecheck expects a loop-free body; unroll first",
                stmt.span,
            )
        name = stmt.target.name
        if name in env:
            raise GadgetTypeError(f"'{name}' is already defined", stmt.span)
        if isinstance(stmt, Sample):
            env[name] = RING
        else:
            env[name] = _strict_type_of(stmt.expr, env)
    output_type = tuple(_strict_type_of(e, env) for e in program.outputs)
    return TypedProgram(program, env, output_type, unrolled=True)


# ---------------------------------------------------------------------------
# Lenient mode

_Unknown = None  # a type we cannot pin down yet


def _unify(a, b, span: Span | None, what: str):
    if a is _Unknown:
        return b
    if b is _Unknown:
        return a
    if a == b:
        return a
    if isinstance(a, tuple) and isinstance(b, tuple) and len(a) == len(b):
        return tuple(_unify(x, y, span, what) for x, y in zip(a, b))
    raise GadgetTypeError(
        f"{what}: {render_type(a)} vs {render_type(b)}", span
    )


def _lenient_check(program: Program) -> TypedProgram:
    env: dict = {name.split("[", 1)[0]: RING for name in program.shares.inputs}

    def type_of(expr: Expr):
        if isinstance(expr, Var):
            return env.get(expr.base, _Unknown)
        if isinstance(expr, Const):
            return RING
        if isinstance(expr, BoolConst):
            return BOOL
        if isinstance(expr, BinOp):
            lt, rt = type_of(expr.lhs), type_of(expr.rhs)
            if expr.op in RING_OPS:
                _unify(lt, RING, expr.span, f"operand of '{expr.op}'")
                _unify(rt, RING, expr.span, f"operand of '{expr.op}'")
                return RING
            if expr.op in BOOL_OPS:
                _unify(lt, BOOL, expr.span, f"operand of '{expr.op}'")
                _unify(rt, BOOL, expr.span, f"operand of '{expr.op}'")
                return BOOL
            _unify(lt, rt, expr.span, f"operands of '{expr.op}'")
            return BOOL
        if isinstance(expr, Ite):
            _unify(type_of(expr.cond), BOOL, expr.span, "'if' condition")
            return _unify(
                type_of(expr.then), type_of(expr.orelse), expr.span, "'if' branches"
            )
        if isinstance(expr, TupleExpr):
            return tuple(type_of(item) for item in expr.items)
        if isinstance(expr, Proj):
            it = type_of(expr.expr)
            if it is _Unknown:
                return _Unknown
            return _proj_type(expr.index, it, expr.span)
        raise AssertionError(f"unhandled expression {expr!r}")

    def bind(base: str, ty, span: Span | None) -> None:
        env[base] = _unify(env.get(base, _Unknown), ty, span, f"'{base}' bound at")

    def walk(stmts) -> None:
        for stmt in stmts:
            if isinstance(stmt, Sample):
                bind(stmt.target.base, RING, stmt.span)
            elif isinstance(stmt, Bind):
                bind(stmt.target.base, type_of(stmt.expr), stmt.span)
            else:
                if stmt.acc is not None:
                    bind(stmt.acc, type_of(stmt.init), stmt.span)
                walk(stmt.body)
                if stmt.yield_expr is not None:
                    bind(stmt.acc, type_of(stmt.yield_expr), stmt.span)

    walk(program.body)
    output_type = tuple(type_of(e) for e in program.outputs)
    var_types = {k: v for k, v in env.items() if v is not _Unknown}
    return TypedProgram(program, var_types, output_type, unrolled=False)


def typecheck(program: Program) -> TypedProgram:
    """Assign types to a parsed program.

    Loop-free programs with literal indices get the strict treatment
    (which also enforces single assignment and definition-before-use);
    anything else is checked leniently and re-checked strictly after
    `unroll`.
    """
    if _is_concrete_program(program):
        return _strict_check(program)
    return _lenient_check(program)
