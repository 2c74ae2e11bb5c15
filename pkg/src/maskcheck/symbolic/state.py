"""Symbolic normal forms for unrolled gadget bodies.

Every wire of an unrolled program denotes a function of the gadget inputs
and the uniform samples. This module computes, for each wire, a normal form

    const + c_1 * term_1 + ... + c_k * term_k   (mod q)

where each term is either an *atom* (an input wire or a uniform sample) or
an *opaque* subterm (a product, comparison, boolean combination, or
conditional) that the linear layer never looks inside, beyond knowing its
free atoms. Coefficients live in Z_q, so ring-specific cancellation (for
example a doubled random at q = 2) happens during normalization rather
than in a later analysis pass.

Atoms come in three kinds: ``in`` (a gadget input), ``rnd`` (a uniform
sample, named after its wire), and ``fresh`` (a uniform introduced by a
rewrite, never originating from the program text). The latter two are
jointly the *masking* atoms: each is uniform and independent of everything
sampled before it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from ..dsl.ast import (
    BinOp,
    Bind,
    BoolConst,
    Const,
    Expr,
    Ite,
    Proj,
    Sample,
    TupleExpr,
    TypedProgram,
    Var,
)
from ..dsl.names import natural_key, natural_sorted

__all__ = [
    "Atom",
    "IN",
    "RND",
    "FRESH",
    "Opaque",
    "Ring",
    "Tup",
    "NF",
    "SymbolicState",
    "eval_nf",
    "free_atoms",
    "input_names",
    "masking_atoms",
    "nf_key",
    "render_atom",
    "render_nf",
    "ring_atom",
    "ring_const",
    "term_key",
    "to_symbolic",
]

IN = "in"
RND = "rnd"
FRESH = "fresh"

# (kind, name); kind is one of IN / RND / FRESH.
Atom = tuple[str, str]

_KIND_ORDER = {IN: 0, RND: 1, FRESH: 2}


@dataclass(frozen=True)
class Opaque:
    """A subterm the linear layer treats as a black box.

    ``op`` is one of ``mul``, ``eq``, ``ne``, ``and``, ``or``, ``ite``;
    ``args`` are child normal forms. Symmetric operators store their
    arguments in canonical key order, so structurally equal values compare
    equal regardless of how the source spelled them.
    """

    op: str
    args: tuple["NF", ...]
    key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "key", ("opq", self.op, tuple(nf_key(a) for a in self.args))
        )


@dataclass(frozen=True)
class Ring:
    """``const + sum(coeff * term) mod q`` with terms in canonical order."""

    const: int
    terms: tuple[tuple[Union[Atom, Opaque], int], ...] = ()

    @property
    def is_atom(self) -> bool:
        """True when the value is exactly one atom with coefficient 1."""
        if self.const != 0 or len(self.terms) != 1:
            return False
        term, coeff = self.terms[0]
        return coeff == 1 and not isinstance(term, Opaque)


@dataclass(frozen=True)
class Tup:
    items: tuple["NF", ...]


# Boolean values are either literal `bool`s or boolean-valued Opaque nodes.
NF = Union[Ring, Opaque, Tup, bool]


def term_key(term: Union[Atom, Opaque]) -> tuple:
    if isinstance(term, Opaque):
        return (1, term.key)
    kind, name = term
    return (0, _KIND_ORDER[kind], natural_key(name))


def nf_key(nf: NF) -> tuple:
    if isinstance(nf, bool):
        return ("bool", int(nf))
    if isinstance(nf, Ring):
        return ("ring", nf.const, tuple((term_key(t), c) for t, c in nf.terms))
    if isinstance(nf, Opaque):
        return nf.key
    return ("tup", tuple(nf_key(item) for item in nf.items))


def free_atoms(nf: NF) -> frozenset[Atom]:
    if isinstance(nf, bool):
        return frozenset()
    if isinstance(nf, Ring):
        out: set[Atom] = set()
        for term, _ in nf.terms:
            if isinstance(term, Opaque):
                out |= free_atoms(term)
            else:
                out.add(term)
        return frozenset(out)
    if isinstance(nf, Opaque):
        result: frozenset[Atom] = frozenset()
        for arg in nf.args:
            result |= free_atoms(arg)
        return result
    result = frozenset()
    for item in nf.items:
        result |= free_atoms(item)
    return result


def input_names(nf: NF) -> tuple[str, ...]:
    """Input wires the value depends on, naturally sorted."""
    return natural_sorted(name for kind, name in free_atoms(nf) if kind == IN)


def masking_atoms(nf: NF) -> frozenset[Atom]:
    return frozenset(a for a in free_atoms(nf) if a[0] != IN)


# ---------------------------------------------------------------------------
# Construction


def ring_const(value: int, q: int) -> Ring:
    return Ring(value % q)


def ring_atom(atom: Atom) -> Ring:
    return Ring(0, ((atom, 1),))


def _ring_from_counts(const: int, counts: dict, q: int) -> Ring:
    terms = tuple(
        (term, coeff % q)
        for term, coeff in sorted(counts.items(), key=lambda tc: term_key(tc[0]))
        if coeff % q != 0
    )
    return Ring(const % q, terms)


def ring_add(lhs: Ring, rhs: Ring, q: int, sign: int = 1) -> Ring:
    counts = dict(lhs.terms)
    for term, coeff in rhs.terms:
        counts[term] = counts.get(term, 0) + sign * coeff
    return _ring_from_counts(lhs.const + sign * rhs.const, counts, q)


def ring_scale(nf: Ring, factor: int, q: int) -> Ring:
    counts = {term: coeff * factor for term, coeff in nf.terms}
    return _ring_from_counts(nf.const * factor, counts, q)


def ring_mul(lhs: Ring, rhs: Ring, q: int) -> Ring:
    if not lhs.terms:
        return ring_scale(rhs, lhs.const, q)
    if not rhs.terms:
        return ring_scale(lhs, rhs.const, q)
    args = tuple(sorted((lhs, rhs), key=nf_key))
    return Ring(0, ((Opaque("mul", args), 1),))


def _bool_op(op: str, lhs: NF, rhs: NF) -> NF:
    if op == "and":
        if lhs is True:
            return rhs
        if rhs is True:
            return lhs
        if lhs is False or rhs is False:
            return False
    else:
        if lhs is False:
            return rhs
        if rhs is False:
            return lhs
        if lhs is True or rhs is True:
            return True
    return Opaque(op, tuple(sorted((lhs, rhs), key=nf_key)))


def _compare(op: str, lhs: NF, rhs: NF) -> NF:
    if lhs == rhs and type(lhs) is type(rhs):
        return op == "eq"
    if isinstance(lhs, bool) and isinstance(rhs, bool):
        return (lhs == rhs) == (op == "eq")
    return Opaque(op, tuple(sorted((lhs, rhs), key=nf_key)))


def _ite(cond: NF, then: NF, orelse: NF) -> NF:
    if isinstance(cond, bool):
        return then if cond else orelse
    if then == orelse and type(then) is type(orelse):
        return then
    if isinstance(then, Tup) and isinstance(orelse, Tup):
        pairs = zip(then.items, orelse.items)
        return Tup(tuple(_ite(cond, a, b) for a, b in pairs))
    node = Opaque("ite", (cond, then, orelse))
    if isinstance(then, Ring):
        return Ring(0, ((node, 1),))
    return node


def sym_eval(expr: Expr, env: Mapping[str, NF], q: int) -> NF:
    """Normal form of an index-free expression under wire normal forms."""
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Const):
        return ring_const(expr.value, q)
    if isinstance(expr, BoolConst):
        return expr.value
    if isinstance(expr, BinOp):
        lhs = sym_eval(expr.lhs, env, q)
        rhs = sym_eval(expr.rhs, env, q)
        if expr.op == "+":
            return ring_add(lhs, rhs, q)
        if expr.op == "-":
            return ring_add(lhs, rhs, q, sign=-1)
        if expr.op == "*":
            return ring_mul(lhs, rhs, q)
        if expr.op == "&&":
            return _bool_op("and", lhs, rhs)
        if expr.op == "||":
            return _bool_op("or", lhs, rhs)
        if expr.op == "==":
            return _compare("eq", lhs, rhs)
        if expr.op == "!=":
            return _compare("ne", lhs, rhs)
        raise AssertionError(f"unknown operator {expr.op!r}")
    if isinstance(expr, Ite):
        return _ite(
            sym_eval(expr.cond, env, q),
            sym_eval(expr.then, env, q),
            sym_eval(expr.orelse, env, q),
        )
    if isinstance(expr, TupleExpr):
        return Tup(tuple(sym_eval(item, env, q) for item in expr.items))
    if isinstance(expr, Proj):
        inner = sym_eval(expr.expr, env, q)
        if not isinstance(inner, Tup):
            raise ValueError("projection from a non-tuple value")
        return inner.items[expr.index - 1]
    raise AssertionError(f"unknown expression {expr!r}")


# ---------------------------------------------------------------------------
# Whole-program state


@dataclass(frozen=True)
class SymbolicState:
    """One normal form per program variable of an unrolled gadget.

    ``env`` covers every input, every sampled wire, and every bound wire.
    ``fresh_count`` numbers the rewrite-introduced uniforms so that a
    sequence of rewrites names its atoms deterministically.
    """

    q: int
    env: Mapping[str, NF]
    inputs: frozenset[str]
    fresh_count: int = 0

    def nf(self, wire: str) -> NF:
        if wire not in self.env:
            raise KeyError(f"unknown wire {wire!r}")
        return self.env[wire]

    def rebind(self, wire: str, nf: NF, fresh_count: int) -> "SymbolicState":
        env = dict(self.env)
        env[wire] = nf
        return replace(self, env=env, fresh_count=fresh_count)


def to_symbolic(program: TypedProgram, q: int = 2) -> SymbolicState:
    """Symbolically execute an unrolled program into per-wire normal forms."""
    if not program.unrolled:
        raise ValueError("symbolic execution requires an unrolled program")
    if q < 2:
        raise ValueError(f"modulus must be >= 2, got {q}")
    env: dict[str, NF] = {}
    inputs = program.shares.inputs
    for name in inputs:
        env[name] = ring_atom((IN, name))
    for stmt in program.body:
        if isinstance(stmt, Sample):
            env[stmt.target.name] = ring_atom((RND, stmt.target.name))
        elif isinstance(stmt, Bind):
            env[stmt.target.name] = sym_eval(stmt.expr, env, q)
        else:
            raise ValueError("symbolic execution requires an unrolled program")
    return SymbolicState(q=q, env=env, inputs=frozenset(inputs))


# ---------------------------------------------------------------------------
# Evaluation and rendering


def eval_nf(nf: NF, atoms: Mapping[Atom, object], q: int):
    """Concrete value of a normal form under a total atom assignment.

    This grounds the symbolic layer in the interpreter's semantics: for
    any assignment of ring values to input/sample atoms, the normal form
    of a wire evaluates to exactly what interpretation computes.
    """
    if isinstance(nf, bool):
        return nf
    if isinstance(nf, Ring):
        total = nf.const
        for term, coeff in nf.terms:
            value = eval_nf(term, atoms, q) if isinstance(term, Opaque) else atoms[term]
            total += coeff * value
        return total % q
    if isinstance(nf, Opaque):
        if nf.op == "mul":
            lhs, rhs = (eval_nf(a, atoms, q) for a in nf.args)
            return (lhs * rhs) % q
        if nf.op == "eq":
            lhs, rhs = (eval_nf(a, atoms, q) for a in nf.args)
            return lhs == rhs
        if nf.op == "ne":
            lhs, rhs = (eval_nf(a, atoms, q) for a in nf.args)
            return lhs != rhs
        if nf.op == "and":
            lhs, rhs = (eval_nf(a, atoms, q) for a in nf.args)
            return lhs and rhs
        if nf.op == "or":
            lhs, rhs = (eval_nf(a, atoms, q) for a in nf.args)
            return lhs or rhs
        if nf.op == "ite":
            cond, then, orelse = nf.args
            branch = then if eval_nf(cond, atoms, q) else orelse
            return eval_nf(branch, atoms, q)
        raise AssertionError(f"unknown opaque op {nf.op!r}")
    return tuple(eval_nf(item, atoms, q) for item in nf.items)


def render_atom(atom: Atom) -> str:
    kind, name = atom
    return name if kind == IN else f"${name}"


def _render_term(term: Union[Atom, Opaque], q: int) -> str:
    if isinstance(term, Opaque):
        return render_nf(term, q)
    return render_atom(term)


def render_nf(nf: NF, q: int) -> str:
    if isinstance(nf, bool):
        return "T" if nf else "F"
    if isinstance(nf, Ring):
        pieces: list[str] = []
        for term, coeff in nf.terms:
            body = _render_term(term, q)
            if coeff == 1:
                pieces.append(("+ " if pieces else "") + body)
            elif coeff == q - 1 and q > 2:
                pieces.append(("- " if pieces else "-") + body)
            else:
                pieces.append(("+ " if pieces else "") + f"{coeff}*{body}")
        if nf.const != 0 or not pieces:
            pieces.append(("+ " if pieces else "") + str(nf.const))
        return " ".join(pieces)
    if isinstance(nf, Opaque):
        rendered = [render_nf(a, q) for a in nf.args]
        if nf.op == "mul":
            return " * ".join(f"({r})" for r in rendered)
        if nf.op == "ite":
            cond, then, orelse = rendered
            return f"(if {cond} then {then} else {orelse})"
        symbol = {"eq": "==", "ne": "!=", "and": "&&", "or": "||"}[nf.op]
        return f"({rendered[0]} {symbol} {rendered[1]})"
    return "(" + ", ".join(render_nf(item, q) for item in nf.items) + ")"
