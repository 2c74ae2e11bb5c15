"""Sound-but-incomplete probe simulation via uniform-masking rewrites.

The engine decides "(I, O)-NI holds" syntactically: take the normal forms
of the probed wires, repeatedly replace a probe that is perfectly masked
by a one-shot uniform with a fresh uniform atom (rule ``Unif-Bijection``),
and finally read off the inputs still mentioned. If those inputs are
contained in I, the probes are deterministic functions of I and of
uniforms nothing else observes, so a simulator exists. When the inclusion
fails the engine answers *unknown* — never refuted; refutation is the
oracle's job.

Every run yields a :class:`Certificate`: the ordered rule applications
(with before/after snapshots) plus the rewrite candidates that were
declined and why. Replaying a certificate against a fresh symbolic state
reproduces the final state exactly, which makes certificates checkable by
a much simpler routine than the engine that found them.

The rule vocabulary is fixed: ``Unif-Bijection``, ``Gen-Weak-Union``,
``Monotonicity``, ``Seq-Compose``, ``Loop-Compose``, ``Weakening``,
``Transfer-Own``. The first is the only state-changing rewrite; the next
three justify the final simulator construction; the last three live in
:mod:`maskcheck.symbolic.compose`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Iterable, Sequence

from ..dsl.ast import MaskcheckError, TypedProgram
from ..dsl.names import natural_sorted
from .state import (
    FRESH,
    IN,
    Atom,
    Opaque,
    Ring,
    SymbolicState,
    free_atoms,
    render_atom,
    render_nf,
    ring_atom,
    to_symbolic,
)

__all__ = [
    "RULE_NAMES",
    "CertStep",
    "Certificate",
    "CertificateError",
    "Missed",
    "SymbolicVerdict",
    "UniformizeResult",
    "needed_inputs",
    "replay_certificate",
    "uniformize",
    "verify_io_ni_symbolic",
]

RULE_NAMES = (
    "Unif-Bijection",
    "Gen-Weak-Union",
    "Monotonicity",
    "Seq-Compose",
    "Loop-Compose",
    "Weakening",
    "Transfer-Own",
)


class CertificateError(MaskcheckError):
    """A certificate does not replay against the state it claims to rewrite."""


@dataclass(frozen=True)
class CertStep:
    """One rule application: what fired, on which wires, and the summaries."""

    rule: str
    variables: tuple[str, ...]
    before: str
    after: str
    data: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.rule not in RULE_NAMES:
            raise ValueError(f"unknown rule {self.rule!r}")

    def to_jsonable(self) -> dict:
        return {
            "rule": self.rule,
            "variables": list(self.variables),
            "before": self.before,
            "after": self.after,
            "data": dict(self.data),
        }


@dataclass(frozen=True)
class Missed:
    """A rewrite candidate the syntactic criterion declined."""

    atom: str
    probe: str
    reason: str

    def to_jsonable(self) -> dict:
        return {"atom": self.atom, "probe": self.probe, "reason": self.reason}


@dataclass(frozen=True)
class Certificate:
    steps: tuple[CertStep, ...] = ()
    missed: tuple[Missed, ...] = ()

    def to_jsonable(self) -> dict:
        return {
            "steps": [step.to_jsonable() for step in self.steps],
            "missed": [miss.to_jsonable() for miss in self.missed],
        }


@dataclass(frozen=True)
class UniformizeResult:
    state: SymbolicState
    steps: tuple[CertStep, ...]
    missed: tuple[Missed, ...]


@dataclass(frozen=True)
class SymbolicVerdict:
    status: str  # "verified" | "unknown"
    i_set: tuple[str, ...]
    probes: tuple[str, ...]
    needed: tuple[str, ...]
    certificate: Certificate
    reason: str | None = None

    def to_jsonable(self) -> dict:
        return {
            "status": self.status,
            "i_set": list(self.i_set),
            "probes": list(self.probes),
            "needed": list(self.needed),
            "reason": self.reason,
            "certificate": self.certificate.to_jsonable(),
        }


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _render_set(names: Iterable[str]) -> str:
    return "{" + ", ".join(natural_sorted(names)) + "}"


def _opaque_atoms(nf: Ring) -> frozenset[Atom]:
    out: frozenset[Atom] = frozenset()
    for term, _ in nf.terms:
        if isinstance(term, Opaque):
            out |= free_atoms(term)
    return out


def _is_unit(coeff: int, q: int, allow_units: bool) -> bool:
    if coeff == 1 or coeff == q - 1:
        return True
    return allow_units and _is_prime(q) and gcd(coeff, q) == 1


def _find_rewrite(
    state: SymbolicState, probes: Sequence[str], allow_units: bool
) -> tuple[str, Atom] | None:
    """First (probe, atom) pair the one-shot-mask criterion accepts.

    The criterion: the atom is a uniform (sample or fresh), appears with a
    unit coefficient in the linear part of this probe, appears nowhere
    else among the probes — not even inside an opaque subterm of this one
    — and the probe is not already a bare uniform atom. Replacing such a
    probe with a fresh uniform preserves the joint distribution of the
    probe tuple: with every other atom fixed, the probe is a bijection of
    the one-shot uniform.
    """
    for wire in probes:
        nf = state.nf(wire)
        if not isinstance(nf, Ring) or nf.is_atom:
            continue
        own_opaque = _opaque_atoms(nf)
        for term, coeff in nf.terms:
            if isinstance(term, Opaque) or term[0] == IN:
                continue
            if not _is_unit(coeff, state.q, allow_units):
                continue
            if term in own_opaque:
                continue
            if any(
                term in free_atoms(state.nf(other))
                for other in probes
                if other != wire
            ):
                continue
            return wire, term
    return None


def _missed_candidates(
    state: SymbolicState, probes: Sequence[str], allow_units: bool
) -> tuple[Missed, ...]:
    """Atoms confined to a single probe that the criterion still declined."""
    homes: dict[Atom, list[str]] = {}
    for wire in probes:
        for atom in free_atoms(state.nf(wire)):
            if atom[0] != IN:
                homes.setdefault(atom, []).append(wire)
    missed = []
    for atom, wires in homes.items():
        if len(wires) != 1:
            continue
        wire = wires[0]
        nf = state.nf(wire)
        if not isinstance(nf, Ring):
            missed.append(Missed(render_atom(atom), wire, "probe is not ring-valued"))
            continue
        if nf.is_atom:
            continue  # already a bare uniform; nothing left to rewrite
        coeff = dict(nf.terms).get(atom)
        if coeff is None:
            reason = "occurs only inside opaque subterms"
        elif atom in _opaque_atoms(nf):
            reason = "also occurs inside an opaque subterm of the same probe"
        elif not _is_unit(coeff, state.q, allow_units):
            reason = f"coefficient {coeff} is not a unit mod {state.q}"
        else:  # pragma: no cover - such a candidate would have fired
            continue
        missed.append(Missed(render_atom(atom), wire, reason))
    return tuple(sorted(missed, key=lambda m: (m.probe, m.atom)))


def uniformize(
    state: SymbolicState,
    probes: Iterable[str],
    *,
    allow_units: bool = False,
) -> UniformizeResult:
    """Rewrite perfectly-masked probes to fresh uniforms, to a fixpoint.

    Each rewrite replaces one probe's normal form with a bare fresh atom,
    so a probe fires at most once and the loop terminates after at most
    ``len(probes)`` rewrites. Rewriting one probe can unblock another (the
    replaced expression no longer mentions the shared uniform), which is
    why the scan restarts from the first probe after every application.

    With ``allow_units`` set and a prime modulus, any nonzero linear
    coefficient is accepted in place of the default +-1 — every nonzero
    element of a prime field is invertible, so the bijection argument is
    unchanged. Declined candidates are reported, not silently dropped.
    """
    probe_list = natural_sorted(dict.fromkeys(probes))
    for wire in probe_list:
        state.nf(wire)  # raise early on unknown wires
    steps: list[CertStep] = []
    while True:
        found = _find_rewrite(state, probe_list, allow_units)
        if found is None:
            break
        wire, atom = found
        fresh_name = f"u{state.fresh_count + 1}"
        replacement = ring_atom((FRESH, fresh_name))
        before = render_nf(state.nf(wire), state.q)
        state = state.rebind(wire, replacement, state.fresh_count + 1)
        after = render_nf(replacement, state.q)
        steps.append(
            CertStep(
                rule="Unif-Bijection",
                variables=(wire,),
                before=f"{wire} = {before}",
                after=f"{wire} = {after}",
                data=(
                    ("probe", wire),
                    ("atom", render_atom(atom)),
                    ("fresh", fresh_name),
                ),
            )
        )
    missed = _missed_candidates(state, probe_list, allow_units)
    return UniformizeResult(state=state, steps=tuple(steps), missed=missed)


def needed_inputs(state: SymbolicState, probes: Iterable[str]) -> tuple[str, ...]:
    """Input wires still free in the probes' normal forms, naturally sorted."""
    names: set[str] = set()
    for wire in probes:
        names.update(name for kind, name in free_atoms(state.nf(wire)) if kind == IN)
    return tuple(natural_sorted(names))


def verify_io_ni_symbolic(
    program: TypedProgram,
    i_set: Iterable[str],
    probes: Iterable[str],
    q: int = 2,
    *,
    allow_units: bool = False,
) -> SymbolicVerdict:
    """Try to certify (I, O)-NI by rewriting; never refute.

    Verified means: after uniformization every probe is a deterministic
    function of inputs in I and of fresh uniforms no other probe shares,
    so the simulator samples the uniforms and evaluates. Anything short of
    that is unknown — in particular any dependence hidden inside opaque
    products, which this engine does not expand.
    """
    i_names = tuple(natural_sorted(dict.fromkeys(i_set)))
    probe_names = tuple(natural_sorted(dict.fromkeys(probes)))
    state = to_symbolic(program, q)
    result = uniformize(state, probe_names, allow_units=allow_units)
    needed = needed_inputs(result.state, probe_names)
    steps = list(result.steps)
    if set(needed) <= set(i_names):
        residual = _render_set(needed)
        probe_set = _render_set(probe_names)
        steps.append(
            CertStep(
                rule="Gen-Weak-Union",
                variables=needed,
                before=f"probes {probe_set} are functions of "
                f"{residual} and fresh uniforms",
                after=f"conditioned on {residual}, probes {probe_set} are "
                f"functions of the condition and fresh uniforms",
            )
        )
        steps.append(
            CertStep(
                rule="Transfer-Own",
                variables=probe_names,
                before=f"conditioned on {residual}, the fresh uniforms are "
                f"independent of the remaining inputs",
                after=f"({residual}, {probe_set})-NI",
            )
        )
        if set(needed) != set(i_names):
            steps.append(
                CertStep(
                    rule="Monotonicity",
                    variables=tuple(natural_sorted(set(i_names) - set(needed))),
                    before=f"({residual}, {probe_set})-NI",
                    after=f"({_render_set(i_names)}, {probe_set})-NI",
                )
            )
        return SymbolicVerdict(
            status="verified",
            i_set=i_names,
            probes=probe_names,
            needed=needed,
            certificate=Certificate(tuple(steps), result.missed),
        )
    missing = natural_sorted(set(needed) - set(i_names))
    return SymbolicVerdict(
        status="unknown",
        i_set=i_names,
        probes=probe_names,
        needed=needed,
        certificate=Certificate(tuple(steps), result.missed),
        reason="probes still depend on inputs outside I after "
        f"uniformization: {_render_set(missing)}",
    )


def replay_certificate(
    certificate: Certificate,
    state: SymbolicState,
    probes: Iterable[str] = (),
) -> SymbolicState:
    """Re-apply a certificate's rewrites, checking every snapshot.

    Only ``Unif-Bijection`` steps change the state; the summary-level
    rules are validated for well-formedness and skipped. A snapshot
    mismatch means the certificate was produced from a different state
    (or tampered with) and raises :class:`CertificateError`.
    """
    del probes  # the certificate itself names every wire it touches
    for step in certificate.steps:
        if step.rule != "Unif-Bijection":
            continue
        data = dict(step.data)
        wire, fresh_name = data["probe"], data["fresh"]
        try:
            current = state.nf(wire)
        except KeyError as exc:
            raise CertificateError(str(exc)) from None
        rendered = f"{wire} = {render_nf(current, state.q)}"
        if rendered != step.before:
            raise CertificateError(
                f"certificate expects {step.before!r} but the state has "
                f"{rendered!r}"
            )
        if not fresh_name.startswith("u") or not fresh_name[1:].isdigit():
            raise CertificateError(f"malformed fresh atom name {fresh_name!r}")
        replacement = ring_atom((FRESH, fresh_name))
        after = f"{wire} = {render_nf(replacement, state.q)}"
        if after != step.after:
            raise CertificateError(
                f"certificate records {step.after!r} but replay computes "
                f"{after!r}"
            )
        count = max(state.fresh_count, int(fresh_name[1:]))
        state = state.rebind(wire, replacement, count)
    return state
