"""Exact probability semantics for unrolled gadgets."""

from .distribution import (
    FiniteDistribution,
    UndefinedConditional,
    value_from_jsonable,
    value_to_jsonable,
)
from .interp import (
    DEFAULT_ENUMERATION_CAP,
    CompiledProgram,
    EnumerationCapExceeded,
    compile_program,
    eval_expr,
    interpret,
)

__all__ = [
    "DEFAULT_ENUMERATION_CAP",
    "CompiledProgram",
    "EnumerationCapExceeded",
    "FiniteDistribution",
    "UndefinedConditional",
    "compile_program",
    "eval_expr",
    "interpret",
    "value_from_jsonable",
    "value_to_jsonable",
]
