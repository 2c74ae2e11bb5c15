"""Gadget description language: AST, parser, typechecker, transformations."""

from .ast import (
    BOOL,
    BinOp,
    Bind,
    BoolConst,
    Const,
    Decl,
    ExposureInfo,
    Expr,
    ForLoop,
    GadgetSyntaxError,
    GadgetTypeError,
    IBin,
    INum,
    IVar,
    Ite,
    MaskcheckError,
    Program,
    Proj,
    RING,
    Sample,
    ShareFamily,
    ShareStructure,
    Stmt,
    TupleExpr,
    TypedProgram,
    UnrollError,
    Var,
    eval_index,
    free_inputs,
    render_type,
    walk_exprs,
)
from .names import GENERATED_SEP, flat_name, natural_key, natural_sorted
from .parser import parse_gadget, tokenize
from .transform import expose_internals, pretty, render_expr, unroll, var_named
from .typecheck import typecheck

__all__ = [
    "BOOL",
    "BinOp",
    "Bind",
    "BoolConst",
    "Const",
    "Decl",
    "ExposureInfo",
    "Expr",
    "ForLoop",
    "GENERATED_SEP",
    "GadgetSyntaxError",
    "GadgetTypeError",
    "IBin",
    "INum",
    "IVar",
    "Ite",
    "MaskcheckError",
    "Program",
    "Proj",
    "RING",
    "Sample",
    "ShareFamily",
    "ShareStructure",
    "Stmt",
    "TupleExpr",
    "TypedProgram",
    "UnrollError",
    "Var",
    "eval_index",
    "expose_internals",
    "flat_name",
    "free_inputs",
    "natural_key",
    "natural_sorted",
    "parse_gadget",
    "pretty",
    "render_expr",
    "render_type",
    "tokenize",
    "typecheck",
    "unroll",
    "var_named",
]
