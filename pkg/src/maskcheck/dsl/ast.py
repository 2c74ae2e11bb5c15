"""Abstract syntax for the gadget language.

A gadget is a header (masking order, static params, share families,
unshared inputs) followed by a straight-line body of uniform samples and
deterministic bindings, optionally grouped into statically-bounded for
loops, and a final return tuple. Scalar values are ring elements (Z_q,
with q fixed per run, not per gadget) or booleans; tuples of scalars are
first-class expression values.

Index expressions (the ``i+1`` in ``C[i][j+1]`` or in loop bounds) form a
separate static sub-language evaluated entirely at unroll time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Union

from .names import flat_name, natural_key

Span = tuple[int, int]  # 1-based (line, column)


class MaskcheckError(Exception):
    """Base class for all user-facing errors raised by this package."""

    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span
        super().__init__(self.render())

    def render(self) -> str:
        if self.span is not None:
            line, col = self.span
            return f"{line}:{col}: {self.message}"
        return self.message


class GadgetSyntaxError(MaskcheckError):
    pass


class GadgetTypeError(MaskcheckError):
    pass


class UnrollError(MaskcheckError):
    pass


# ---------------------------------------------------------------------------
# Static index expressions


@dataclass(frozen=True)
class INum:
    value: int


@dataclass(frozen=True)
class IVar:
    name: str


@dataclass(frozen=True)
class IBin:
    op: str  # "+", "-", "*"
    lhs: "IExpr"
    rhs: "IExpr"


IExpr = Union[INum, IVar, IBin]


def eval_index(expr: IExpr, env: Mapping[str, int], span: Span | None = None) -> int:
    """Evaluate a static index expression; unknown names are an error."""
    if isinstance(expr, INum):
        return expr.value
    if isinstance(expr, IVar):
        if expr.name not in env:
            raise UnrollError(
                f"index expression uses '{expr.name}', which is not a static "
                f"constant here (loop indices, 't' and declared params only)",
                span,
            )
        return env[expr.name]
    lhs = eval_index(expr.lhs, env, span)
    rhs = eval_index(expr.rhs, env, span)
    if expr.op == "+":
        return lhs + rhs
    if expr.op == "-":
        return lhs - rhs
    if expr.op == "*":
        return lhs * rhs
    raise AssertionError(f"unknown index operator {expr.op!r}")


def index_names(expr: IExpr) -> frozenset[str]:
    if isinstance(expr, INum):
        return frozenset()
    if isinstance(expr, IVar):
        return frozenset((expr.name,))
    return index_names(expr.lhs) | index_names(expr.rhs)


# ---------------------------------------------------------------------------
# Scalar and product types

RING = "ring"
BOOL = "bool"

# A Type is RING, BOOL, or a tuple of Types (products; () is unit).
Type = Union[str, tuple]


def render_type(ty: Type) -> str:
    if ty == RING:
        return "ring"
    if ty == BOOL:
        return "bool"
    return "(" + ", ".join(render_type(t) for t in ty) + ")"


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Var:
    base: str
    indices: tuple[IExpr, ...] = ()
    span: Span | None = field(default=None, compare=False)

    @property
    def is_concrete(self) -> bool:
        return all(isinstance(ix, INum) for ix in self.indices)

    @property
    def name(self) -> str:
        """Flat name; only meaningful once all indices are literal."""
        if not self.is_concrete:
            raise ValueError(f"variable {self.base} still has symbolic indices")
        return flat_name(self.base, tuple(ix.value for ix in self.indices))


@dataclass(frozen=True)
class Const:
    value: int
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class BoolConst:
    value: bool
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # "+", "-", "*", "&&", "||", "==", "!="
    lhs: "Expr"
    rhs: "Expr"
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Ite:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TupleExpr:
    items: tuple["Expr", ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Proj:
    index: int  # 1-based
    expr: "Expr"
    span: Span | None = field(default=None, compare=False)


Expr = Union[Var, Const, BoolConst, BinOp, Ite, TupleExpr, Proj]

RING_OPS = ("+", "-", "*")
BOOL_OPS = ("&&", "||")
CMP_OPS = ("==", "!=")


def walk_exprs(expr: Expr) -> Iterator[Expr]:
    """Yield expr and every sub-expression, outermost first."""
    yield expr
    if isinstance(expr, BinOp):
        yield from walk_exprs(expr.lhs)
        yield from walk_exprs(expr.rhs)
    elif isinstance(expr, Ite):
        yield from walk_exprs(expr.cond)
        yield from walk_exprs(expr.then)
        yield from walk_exprs(expr.orelse)
    elif isinstance(expr, TupleExpr):
        for item in expr.items:
            yield from walk_exprs(item)
    elif isinstance(expr, Proj):
        yield from walk_exprs(expr.expr)


def free_inputs(expr: Expr) -> tuple[str, ...]:
    """Free variable names of a concrete expression, naturally sorted.

    The expression must be index-free (post-unroll). The name reflects the
    common use: on a gadget body in single-assignment form, the free names
    of an expression are exactly the inputs it can depend on once every
    bound variable has been substituted away.
    """
    seen = set()
    for sub in walk_exprs(expr):
        if isinstance(sub, Var):
            seen.add(sub.name)
    return tuple(sorted(seen, key=natural_key))


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Sample:
    target: Var
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Bind:
    target: Var
    expr: Expr
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ForLoop:
    var: str
    lo: IExpr
    hi: IExpr  # inclusive
    body: tuple["Stmt", ...]
    acc: str | None = None
    init: Expr | None = None
    yield_expr: Expr | None = None
    span: Span | None = field(default=None, compare=False)


Stmt = Union[Sample, Bind, ForLoop]


# ---------------------------------------------------------------------------
# Share structure and programs


@dataclass(frozen=True)
class ShareFamily:
    name: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class ShareStructure:
    """How a gadget's inputs split into share families and unshared inputs.

    Every input belongs to exactly one family (as one of its ``order+1``
    shares) or to the unshared pool.
    """

    order: int
    families: tuple[ShareFamily, ...] = ()
    unshared: tuple[str, ...] = ()

    def __post_init__(self):
        if self.order < 0:
            raise GadgetTypeError(f"masking order must be >= 0, got {self.order}")
        seen: set[str] = set()
        for fam in self.families:
            if len(fam.members) != self.order + 1:
                raise GadgetTypeError(
                    f"share family {fam.name} has {len(fam.members)} members, "
                    f"expected order+1 = {self.order + 1}"
                )
            for m in fam.members:
                if m in seen:
                    raise GadgetTypeError(f"duplicate input name {m}")
                seen.add(m)
        for u in self.unshared:
            if u in seen:
                raise GadgetTypeError(f"duplicate input name {u}")
            seen.add(u)

    @property
    def inputs(self) -> tuple[str, ...]:
        """All input names in natural order."""
        names = [m for fam in self.families for m in fam.members]
        names.extend(self.unshared)
        return tuple(sorted(names, key=natural_key))

    def family_of(self, name: str) -> str | None:
        for fam in self.families:
            if name in fam.members:
                return fam.name
        return None


@dataclass(frozen=True)
class Decl:
    """A `shares` or `unshared` header declaration as written in the source.

    Kept on the Program so the pretty-printer can reproduce the header
    exactly; each dim is (count, None) for `[N]` or (lo, hi) for `[a..b]`.
    """

    kind: str  # "shares" | "unshared"
    base: str
    dims: tuple[tuple[IExpr, "IExpr | None"], ...]


@dataclass(frozen=True)
class ExposureInfo:
    """Records how an exposed program's output tuple was assembled.

    The exposed output layout is: every defined name that is *not* an
    original output, in binding order (``internal_names``), followed by the
    original output names with duplicates dropped (first occurrence wins).
    A wire returned by the gadget is an output wire, never an internal one,
    which is why internal_names excludes the original outputs.
    """

    internal_names: tuple[str, ...]
    original_output_names: tuple[str, ...]

    @property
    def internal_positions(self) -> tuple[int, ...]:
        return tuple(range(len(self.internal_names)))

    @property
    def original_positions(self) -> tuple[int, ...]:
        """Exposed-tuple position of each original output slot, in order."""
        dedup: list[str] = []
        for name in self.original_output_names:
            if name not in dedup:
                dedup.append(name)
        n = len(self.internal_names)
        return tuple(n + dedup.index(name) for name in self.original_output_names)


@dataclass(frozen=True)
class Program:
    name: str | None
    shares: ShareStructure
    params: tuple[tuple[str, int], ...]
    body: tuple[Stmt, ...]
    outputs: tuple[Expr, ...]
    exposure: ExposureInfo | None = None
    decls: tuple[Decl, ...] = ()

    @property
    def order(self) -> int:
        return self.shares.order

    @property
    def param_env(self) -> dict[str, int]:
        env = {name: value for name, value in self.params}
        env["t"] = self.order
        return env

    @property
    def output_names(self) -> tuple[str, ...]:
        """Flat names of the output positions (outputs must be plain vars)."""
        names = []
        for i, out in enumerate(self.outputs):
            if not isinstance(out, Var) or not out.is_concrete:
                raise ValueError(f"output position {i} is not a concrete variable")
            names.append(out.name)
        return tuple(names)

    def with_body(self, body, outputs=None, exposure=None) -> "Program":
        return replace(
            self,
            body=tuple(body),
            outputs=self.outputs if outputs is None else tuple(outputs),
            exposure=self.exposure if exposure is None else exposure,
        )


@dataclass(frozen=True)
class TypedProgram:
    """A program plus the types the checker assigned.

    ``var_types`` maps concrete bound names (and, before unrolling, indexed
    family bases) to their scalar/product type. ``unrolled`` records whether
    the body is loop-free single-assignment form.
    """

    program: Program
    var_types: Mapping[str, Type]
    output_type: tuple
    unrolled: bool = False

    @property
    def shares(self) -> ShareStructure:
        return self.program.shares

    @property
    def body(self) -> tuple[Stmt, ...]:
        return self.program.body

    @property
    def outputs(self) -> tuple[Expr, ...]:
        return self.program.outputs

    @property
    def exposure(self) -> ExposureInfo | None:
        return self.program.exposure

    @property
    def output_names(self) -> tuple[str, ...]:
        return self.program.output_names
