"""Exact distribution semantics of unrolled gadget programs over Z_q.

A program with n `unif` samples denotes, for each total input assignment, the
mixture of its deterministic runs over all q^n sample vectors, each with
weight 1/q^n. Enumeration order over sample vectors is lexicographic, so a
run is reproducible bit for bit. Ring values are ints reduced into [0, q);
bools are Python bools and are never encoded into the ring.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Callable, Mapping

from ..dsl.ast import (
    BinOp,
    Bind,
    BoolConst,
    Const,
    Expr,
    Ite,
    MaskcheckError,
    Proj,
    Sample,
    TupleExpr,
    TypedProgram,
    Var,
)
from .distribution import FiniteDistribution

__all__ = [
    "DEFAULT_ENUMERATION_CAP",
    "EnumerationCapExceeded",
    "CompiledProgram",
    "compile_program",
    "eval_expr",
    "interpret",
]

DEFAULT_ENUMERATION_CAP = 2**24


class EnumerationCapExceeded(MaskcheckError):
    """The exact enumeration would visit more states than the configured cap."""


def eval_expr(e: Expr, env: Mapping, q: int):
    """Deterministic value of an expression under a total environment."""
    return _compile_expr(e)(env, q)


_EvalFn = Callable[[Mapping, int], object]


def _compile_expr(e: Expr) -> _EvalFn:
    """Build a closure evaluating `e`; avoids re-walking the AST per run."""
    if isinstance(e, Var):
        name = e.name
        return lambda env, q: env[name]
    if isinstance(e, Const):
        v = e.value
        return lambda env, q: v % q
    if isinstance(e, BoolConst):
        v = e.value
        return lambda env, q: v
    if isinstance(e, BinOp):
        lf, rf = _compile_expr(e.lhs), _compile_expr(e.rhs)
        op = e.op
        if op == "+":
            return lambda env, q: (lf(env, q) + rf(env, q)) % q
        if op == "-":
            return lambda env, q: (lf(env, q) - rf(env, q)) % q
        if op == "*":
            return lambda env, q: (lf(env, q) * rf(env, q)) % q
        if op == "&&":
            return lambda env, q: lf(env, q) and rf(env, q)
        if op == "||":
            return lambda env, q: lf(env, q) or rf(env, q)
        if op == "==":
            return lambda env, q: lf(env, q) == rf(env, q)
        if op == "!=":
            return lambda env, q: lf(env, q) != rf(env, q)
        raise AssertionError(f"unknown operator {op!r}")
    if isinstance(e, Ite):
        cf, tf, ef = _compile_expr(e.cond), _compile_expr(e.then), _compile_expr(e.orelse)
        return lambda env, q: tf(env, q) if cf(env, q) else ef(env, q)
    if isinstance(e, TupleExpr):
        fns = tuple(_compile_expr(item) for item in e.items)
        return lambda env, q: tuple(f(env, q) for f in fns)
    if isinstance(e, Proj):
        f = _compile_expr(e.expr)
        k = e.index - 1
        return lambda env, q: f(env, q)[k]
    raise AssertionError(f"unhandled expression {e!r}")


class CompiledProgram:
    """An unrolled program lowered to closures, ready for repeated runs."""

    __slots__ = ("inputs", "sample_names", "steps", "output_fn")

    def __init__(self, p: TypedProgram):
        if not p.unrolled:
            raise ValueError("interpretation requires an unrolled program")
        self.inputs = p.shares.inputs
        self.sample_names: list[str] = []
        self.steps: list[tuple[str, _EvalFn]] = []
        for stmt in p.body:
            if isinstance(stmt, Sample):
                self.sample_names.append(stmt.target.name)
                self.steps.append((stmt.target.name, None))
            else:
                self.steps.append((stmt.target.name, _compile_expr(stmt.expr)))
        out_fns = tuple(_compile_expr(e) for e in p.outputs)
        self.output_fn = lambda env, q: tuple(f(env, q) for f in out_fns)

    def run(self, env: dict, samples: tuple[int, ...], q: int) -> tuple:
        """One deterministic pass; `env` is mutated with every bound wire."""
        it = iter(samples)
        for name, fn in self.steps:
            env[name] = next(it) if fn is None else fn(env, q)
        return self.output_fn(env, q)


def compile_program(p: TypedProgram) -> CompiledProgram:
    return CompiledProgram(p)


def interpret(
    p: TypedProgram | CompiledProgram,
    assignment: Mapping[str, int],
    q: int = 2,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> FiniteDistribution:
    """Exact output distribution of `p` under a total input assignment."""
    cp = p if isinstance(p, CompiledProgram) else CompiledProgram(p)
    missing = [name for name in cp.inputs if name not in assignment]
    if missing:
        raise ValueError(f"assignment misses inputs: {', '.join(missing)}")
    base = {name: assignment[name] % q for name in cp.inputs}
    n = len(cp.sample_names)
    if q**n > cap:
        raise EnumerationCapExceeded(
            f"{q}^{n} sample vectors exceed the enumeration cap {cap}"
        )
    weight = Fraction(1, q**n)
    probs: dict[tuple, Fraction] = {}
    for combo in product(range(q), repeat=n):
        out = cp.run(dict(base), combo, q)
        probs[out] = probs.get(out, Fraction(0)) + weight
    return FiniteDistribution(probs)
