"""Symbolic probe-simulation engine: normal forms, rewrites, composition."""

from .compose import (
    CompositionError,
    LoopResult,
    NISummary,
    compose_loop,
    compose_sequential,
    weaken,
)
from .engine import (
    RULE_NAMES,
    Certificate,
    CertificateError,
    CertStep,
    Missed,
    SymbolicVerdict,
    UniformizeResult,
    needed_inputs,
    replay_certificate,
    uniformize,
    verify_io_ni_symbolic,
)
from .state import (
    FRESH,
    IN,
    RND,
    Atom,
    Opaque,
    Ring,
    SymbolicState,
    Tup,
    eval_nf,
    free_atoms,
    input_names,
    render_atom,
    render_nf,
    to_symbolic,
)

__all__ = [
    "Atom",
    "CertStep",
    "Certificate",
    "CertificateError",
    "CompositionError",
    "FRESH",
    "IN",
    "LoopResult",
    "Missed",
    "NISummary",
    "Opaque",
    "RND",
    "RULE_NAMES",
    "Ring",
    "SymbolicState",
    "SymbolicVerdict",
    "Tup",
    "UniformizeResult",
    "compose_loop",
    "compose_sequential",
    "eval_nf",
    "free_atoms",
    "input_names",
    "needed_inputs",
    "render_atom",
    "render_nf",
    "replay_certificate",
    "to_symbolic",
    "uniformize",
    "verify_io_ni_symbolic",
    "weaken",
]
