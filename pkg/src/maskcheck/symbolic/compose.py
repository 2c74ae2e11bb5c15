"""Composition of noninterference summaries.

A summary "(I, O)-NI" for a gadget says: the joint distribution of the
probe set O is reproducible by a simulator reading only the inputs I.
Summaries compose without re-running any engine:

* sequentially — if M is (I_M, O_M)-NI, N is (I_N, O_N)-NI, and M's
  summary covers every M-output N's simulator needs (O_M contains
  I_N intersected with M's outputs), then running N on M's outputs is
  (I_M union (I_N restricted to the ambient context), O_N)-NI;
* around a for-loop — fold the sequential rule across the unrolled
  iterations, with carried-wire sets as the iteration boundaries and a
  side condition that the initial accumulator expressions read only the
  ambient inputs;
* by weakening — wires that pass through a gadget untouched may be added
  to both sides of a summary at once.

These operations check their premises and raise on a mismatch; they never
manufacture a summary the premises do not support. The loop rule's init
side condition is the one soft spot: a violation is not a usage error but
an honest "cannot conclude", so it degrades to an unknown result naming
the offending wire.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..dsl.ast import MaskcheckError
from ..dsl.names import natural_sorted
from .engine import CertStep

__all__ = [
    "CompositionError",
    "LoopResult",
    "NISummary",
    "compose_loop",
    "compose_sequential",
    "weaken",
]


class CompositionError(MaskcheckError):
    """The premises handed to a composition rule do not fit together."""


def _fmt(names: Iterable[str]) -> str:
    return "{" + ", ".join(natural_sorted(names)) + "}"


@dataclass(frozen=True)
class NISummary:
    """An (I, O)-NI claim about one gadget (or one composite)."""

    gadget: str
    i_set: frozenset[str]
    o_set: frozenset[str]

    def render(self) -> str:
        return f"{self.gadget}: ({_fmt(self.i_set)}, {_fmt(self.o_set)})-NI"

    def to_jsonable(self) -> dict:
        return {
            "gadget": self.gadget,
            "i_set": natural_sorted(self.i_set),
            "o_set": natural_sorted(self.o_set),
        }


@dataclass(frozen=True)
class LoopResult:
    status: str  # "verified" | "unknown"
    summary: NISummary | None
    offending_index: str | None = None
    reason: str | None = None


def weaken(
    summary: NISummary,
    passthrough: Iterable[str],
    *,
    record: list[CertStep] | None = None,
) -> NISummary:
    """Add pass-through wires to both sides of a summary.

    The wires must flow past the gadget untouched (the caller's
    obligation): the simulator for the extended claim reads each such wire
    as an input and emits it as a probe unchanged, so any subset of them
    joins I and O simultaneously. An empty set is a no-op.
    """
    extra = frozenset(passthrough)
    if not extra:
        return summary
    out = NISummary(
        gadget=summary.gadget,
        i_set=summary.i_set | extra,
        o_set=summary.o_set | extra,
    )
    if record is not None:
        record.append(
            CertStep(
                rule="Weakening",
                variables=tuple(natural_sorted(extra)),
                before=summary.render(),
                after=out.render(),
            )
        )
    return out


def compose_sequential(
    m: NISummary,
    n: NISummary,
    *,
    m_outputs: Iterable[str],
    context: Iterable[str] = (),
    gadget: str | None = None,
    record: list[CertStep] | None = None,
) -> NISummary:
    """Chain two summaries across ``X <- M; N``.

    ``m_outputs`` is X, the set of M-output wires visible to N; ``context``
    is the ambient environment both stages may read. N's simulator needs
    the wires ``n.i_set & X`` reproduced for it, so M's summary must cover
    them as probes; everything else N needs must come from the context and
    is charged to the composite's input set. The composite's probes are
    N's probes — carry M-side probes through :func:`weaken` on N first if
    the composite claim must keep them.
    """
    x = frozenset(m_outputs)
    delta = frozenset(context)
    stray = n.i_set - x - delta
    if stray:
        raise CompositionError(
            f"inputs of {n.gadget} are neither outputs of {m.gadget} nor "
            f"ambient context: {_fmt(stray)}"
        )
    need = n.i_set & x
    if not need <= m.o_set:
        raise CompositionError(
            f"summary of {m.gadget} does not cover the probes "
            f"{_fmt(need - m.o_set)} that {n.gadget}'s simulator reads"
        )
    out = NISummary(
        gadget=gadget or f"{m.gadget};{n.gadget}",
        i_set=m.i_set | (n.i_set & delta),
        o_set=n.o_set,
    )
    if record is not None:
        record.append(
            CertStep(
                rule="Seq-Compose",
                variables=tuple(natural_sorted(need)),
                before=f"{m.render()} and {n.render()}",
                after=out.render(),
            )
        )
    return out


def compose_loop(
    stages: Sequence[NISummary],
    boundaries: Sequence[Iterable[str]],
    *,
    ambient: Iterable[str] = (),
    init_free: Mapping[str, Iterable[str]] | None = None,
    gadget: str | None = None,
    record: list[CertStep] | None = None,
) -> LoopResult:
    """Fold the sequential rule across unrolled loop iterations.

    ``boundaries`` has one entry more than ``stages``: entry k is the set
    of carried accumulator wires stage k consumes, entry k+1 the set it
    must cover as probes. Every stage may additionally read the ambient
    inputs, and the loop's conclusion is (ambient, final boundary)-NI.

    ``init_free`` maps each wire of the first boundary to the free inputs
    of its initializer; an initializer reaching outside the ambient set is
    reported as unknown with that wire, not raised — the loop may well be
    secure, this rule just cannot show it.
    """
    bounds = [frozenset(b) for b in boundaries]
    amb = frozenset(ambient)
    if len(bounds) != len(stages) + 1:
        raise CompositionError(
            f"{len(stages)} iteration summaries need {len(stages) + 1} "
            f"boundary sets, got {len(bounds)}"
        )
    init_free = dict(init_free or {})
    for wire in natural_sorted(bounds[0]):
        if wire not in init_free:
            raise CompositionError(f"no initializer recorded for {wire}")
        outside = frozenset(init_free[wire]) - amb
        if outside:
            return LoopResult(
                status="unknown",
                summary=None,
                offending_index=wire,
                reason=f"initializer of {wire} reads {_fmt(outside)} "
                f"outside the ambient inputs {_fmt(amb)}",
            )
    for k, stage in enumerate(stages):
        if not stage.i_set <= amb | bounds[k]:
            raise CompositionError(
                f"iteration {k} summary reads "
                f"{_fmt(stage.i_set - amb - bounds[k])} beyond its "
                f"boundary and the ambient inputs"
            )
        if not bounds[k + 1] <= stage.o_set:
            raise CompositionError(
                f"iteration {k} summary does not cover the carried wires "
                f"{_fmt(bounds[k + 1] - stage.o_set)}"
            )
    name = gadget or (
        f"loop[{stages[0].gadget}..{stages[-1].gadget}]" if stages else "loop[]"
    )
    current = NISummary(gadget=name, i_set=amb, o_set=bounds[0])
    for k, stage in enumerate(stages):
        current = compose_sequential(
            current,
            stage,
            m_outputs=bounds[k],
            context=amb,
            gadget=name,
            record=record,
        )
    summary = NISummary(gadget=name, i_set=amb, o_set=bounds[-1])
    if record is not None:
        record.append(
            CertStep(
                rule="Loop-Compose",
                variables=tuple(natural_sorted(bounds[-1])),
                before=f"{len(stages)} iteration summaries over boundaries "
                + " -> ".join(_fmt(b) for b in bounds),
                after=summary.render(),
            )
        )
    return LoopResult(status="verified", summary=summary)
