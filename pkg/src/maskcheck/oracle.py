"""Exact decision procedures for simulator-based noninterference.

The central question: given a gadget, a set I of its inputs and a set O of
its observable wires, does a simulator exist that reproduces the joint
distribution of O from the values of I alone? On finite rings this has an
exact characterization: the O-marginal must be identical for every pair of
total input assignments that agree on I. `check_io_ni` decides exactly that
by enumeration, so a "verified" answer is a proof and a "refuted" answer
comes with a concrete distinguishing pair of assignments.

The probing-security properties are quantified versions of the same
question. For every probe set O up to the budget t, a witness input set I
must exist subject to cardinality caps:

    t-NI    per shared family |I ∩ family| ≤ |O|;      no unshared inputs
    t-SNI   per shared family |I ∩ family| ≤ |O_int|;  no unshared inputs
    t-NIU   as t-NI, plus an unshared set of size ≤ |O|
    t-SNIU  as t-SNI, plus an unshared set of size ≤ |O_int| (or ≤ |O|,
            selectable), where |O_int| counts probes on non-output wires

A wire the gadget returns is an output wire; probing it never counts toward
the internal budget. Probe sets are enumerated in colex order, sizes
ascending, the empty set first, and results are reported per probe set so
runs can be parallelized and resumed deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from .dsl.ast import TypedProgram
from .dsl.names import natural_key
from .semantics.distribution import FiniteDistribution, value_to_jsonable
from .semantics.interp import (
    DEFAULT_ENUMERATION_CAP,
    CompiledProgram,
    EnumerationCapExceeded,
    interpret,
)

__all__ = [
    "Counterexample",
    "NIQuery",
    "OracleContext",
    "ProbeResult",
    "Verdict",
    "check_cond_indep",
    "check_io_ni",
    "check_t_ni",
    "check_t_niu",
    "check_t_sni",
    "check_t_sniu",
    "enumerate_probe_sets",
    "probe_bounds",
    "search_i",
]

PROPERTIES = ("t-ni", "t-sni", "t-niu", "t-sniu")


# ---------------------------------------------------------------------------
# Result types


@dataclass(frozen=True)
class Counterexample:
    """Two assignments agreeing on I whose O-marginals differ."""

    i_set: tuple[str, ...]
    probes: tuple[str, ...]
    assignment_a: tuple[tuple[str, int], ...]
    assignment_b: tuple[tuple[str, int], ...]
    marginal_a: FiniteDistribution
    marginal_b: FiniteDistribution

    def to_jsonable(self) -> dict:
        return {
            "i_set": list(self.i_set),
            "probes": list(self.probes),
            "assignment_a": {k: value_to_jsonable(v) for k, v in self.assignment_a},
            "assignment_b": {k: value_to_jsonable(v) for k, v in self.assignment_b},
            "marginal_a": self.marginal_a.to_jsonable(),
            "marginal_b": self.marginal_b.to_jsonable(),
        }


@dataclass(frozen=True)
class ProbeResult:
    """Outcome for a single probe set."""

    probes: tuple[str, ...]
    status: str  # "verified" | "refuted" | "unknown"
    witness: tuple[str, ...] | None = None
    counterexample: Counterexample | None = None
    reason: str | None = None
    engine: str = "oracle"

    def to_jsonable(self) -> dict:
        out: dict = {
            "probes": list(self.probes),
            "status": self.status,
            "engine": self.engine,
        }
        if self.witness is not None:
            out["witness"] = list(self.witness)
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.to_jsonable()
        if self.reason is not None:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class Verdict:
    """Aggregated outcome of a property check."""

    status: str  # "verified" | "refuted" | "unknown"
    prop: str
    q: int
    t: int | None = None
    probe_results: tuple[ProbeResult, ...] = ()
    unchecked: tuple[tuple[str, ...], ...] = ()
    reason: str | None = None

    @property
    def counterexample(self) -> Counterexample | None:
        for r in self.probe_results:
            if r.counterexample is not None:
                return r.counterexample
        return None

    def to_jsonable(self) -> dict:
        out: dict = {
            "status": self.status,
            "property": self.prop,
            "q": self.q,
        }
        if self.t is not None:
            out["t"] = self.t
        out["probe_results"] = [r.to_jsonable() for r in self.probe_results]
        if self.unchecked:
            out["unchecked"] = [list(s) for s in self.unchecked]
        if self.reason is not None:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class NIQuery:
    """One (I, O)-noninterference question about an exposed program."""

    program: TypedProgram
    i_set: frozenset[str] = frozenset()
    probes: frozenset[str] = frozenset()
    q: int = 2
    cap: int = DEFAULT_ENUMERATION_CAP


# ---------------------------------------------------------------------------
# Oracle context: caches joints and marginals for one (program, q) pair


class OracleContext:
    """Exact-enumeration workspace for repeated queries on one gadget.

    The full-output joint for each input assignment is computed once; every
    marginal a query needs is derived from it and memoized, so scanning many
    candidate I-sets or probe sets never re-runs the interpreter.
    """

    def __init__(
        self,
        program: TypedProgram,
        q: int = 2,
        cap: int = DEFAULT_ENUMERATION_CAP,
    ):
        if not program.unrolled:
            raise ValueError("the oracle needs an unrolled program")
        self.program = program
        self.q = q
        self.cap = cap
        self.compiled = CompiledProgram(program)
        self.inputs: tuple[str, ...] = program.shares.inputs
        self.outputs: tuple[str, ...] = program.output_names
        self._opos = {name: i for i, name in enumerate(self.outputs)}
        n_states = q ** len(self.inputs)
        if n_states > cap:
            raise EnumerationCapExceeded(
                f"{q}^{len(self.inputs)} input assignments exceed the cap {cap}"
            )
        self._joints: dict[tuple[int, ...], FiniteDistribution] = {}
        self._margs: dict[tuple[tuple[int, ...], tuple[int, ...]], FiniteDistribution] = {}
        self._io_joints: dict[tuple[int, ...], FiniteDistribution] = {}

    # -- plumbing -------------------------------------------------------

    def assignments(self) -> Iterable[tuple[int, ...]]:
        """All total input assignments, first input varying fastest.

        The order fixes which distinguishing pair a refutation reports:
        the earliest assignment in this order whose probe marginal differs
        from the first representative of its I-class.
        """
        for a in product(range(self.q), repeat=len(self.inputs)):
            yield a[::-1]

    def as_dict(self, akey: tuple[int, ...]) -> dict[str, int]:
        return dict(zip(self.inputs, akey))

    def positions(self, probes: Iterable[str]) -> tuple[int, ...]:
        pos = []
        for name in sorted(set(probes), key=natural_key):
            if name not in self._opos:
                raise KeyError(f"{name!r} is not an observable wire of this gadget")
            pos.append(self._opos[name])
        return tuple(pos)

    def joint(self, akey: tuple[int, ...]) -> FiniteDistribution:
        d = self._joints.get(akey)
        if d is None:
            d = interpret(self.compiled, self.as_dict(akey), self.q, self.cap)
            self._joints[akey] = d
        return d

    def marginal(self, akey: tuple[int, ...], opos: tuple[int, ...]) -> FiniteDistribution:
        key = (akey, opos)
        d = self._margs.get(key)
        if d is None:
            d = self.joint(akey).marginal(opos)
            self._margs[key] = d
        return d

    def io_joint(self, probes: Iterable[str]) -> FiniteDistribution:
        """Joint of (inputs ++ probes) under uniformly distributed inputs.

        Positions 0..#inputs-1 are the inputs in natural order; the probe
        positions follow, also in natural order.
        """
        opos = self.positions(probes)
        cached = self._io_joints.get(opos)
        if cached is not None:
            return cached
        w = Fraction(1, self.q ** len(self.inputs))
        probs: dict[tuple, Fraction] = {}
        for akey in self.assignments():
            for ov, p in self.marginal(akey, opos).items():
                probs[akey + ov] = probs.get(akey + ov, Fraction(0)) + w * p
        d = FiniteDistribution(probs)
        self._io_joints[opos] = d
        return d

    # -- core decision ----------------------------------------------------

    def io_ni(
        self, i_set: Iterable[str], probes: Iterable[str]
    ) -> Counterexample | None:
        """None when (I, O)-NI holds; otherwise a distinguishing pair."""
        i_names = tuple(sorted(set(i_set), key=natural_key))
        probe_names = tuple(sorted(set(probes), key=natural_key))
        for name in i_names:
            if name not in self.inputs:
                raise KeyError(f"{name!r} is not an input of this gadget")
        opos = self.positions(probe_names)
        ipos = tuple(self.inputs.index(n) for n in i_names)
        groups: dict[tuple[int, ...], tuple[tuple[int, ...], FiniteDistribution]] = {}
        for akey in self.assignments():
            m = self.marginal(akey, opos)
            gkey = tuple(akey[i] for i in ipos)
            seen = groups.get(gkey)
            if seen is None:
                groups[gkey] = (akey, m)
            elif seen[1] != m:
                a0, m0 = seen
                return Counterexample(
                    i_set=i_names,
                    probes=probe_names,
                    assignment_a=tuple(zip(self.inputs, a0)),
                    assignment_b=tuple(zip(self.inputs, akey)),
                    marginal_a=m0,
                    marginal_b=m,
                )
        return None


# ---------------------------------------------------------------------------
# Public operations


def check_io_ni(query: NIQuery) -> Verdict:
    """Decide (I, O)-noninterference exactly."""
    try:
        ctx = OracleContext(query.program, query.q, query.cap)
        ce = ctx.io_ni(query.i_set, query.probes)
    except EnumerationCapExceeded as exc:
        return Verdict(
            status="unknown", prop="io-ni", q=query.q, reason=str(exc)
        )
    probes = tuple(sorted(query.probes, key=natural_key))
    i_names = tuple(sorted(query.i_set, key=natural_key))
    if ce is None:
        pr = ProbeResult(probes=probes, status="verified", witness=i_names)
        return Verdict("verified", "io-ni", query.q, probe_results=(pr,))
    pr = ProbeResult(probes=probes, status="refuted", counterexample=ce)
    return Verdict("refuted", "io-ni", query.q, probe_results=(pr,))


def check_cond_indep(
    joint: FiniteDistribution,
    a_pos: Sequence[int],
    b_pos: Sequence[int],
    c_pos: Sequence[int],
) -> bool:
    """Exact conditional independence A ⫫ B | C on a finite joint.

    True iff for every value c of the C positions with positive probability,
    the conditional joint over A and B factorizes into the product of its
    marginals.
    """
    a, b, c = tuple(a_pos), tuple(b_pos), tuple(c_pos)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("position sets must be disjoint")

    def factorizes(d: FiniteDistribution, ap, bp) -> bool:
        return d.marginal(ap + bp) == FiniteDistribution.product(
            d.marginal(ap), d.marginal(bp)
        )

    if not c:
        return factorizes(joint, a, b)
    keep = [i for i in range(joint.arity) if i not in set(c)]
    remap = {orig: k for k, orig in enumerate(keep)}
    a2 = tuple(remap[i] for i in a)
    b2 = tuple(remap[i] for i in b)
    for cval in joint.marginal(c).support():
        if not factorizes(joint.condition(c, cval), a2, b2):
            return False
    return True


def _candidate_sets(
    ctx: OracleContext,
    shared_bound: int | Mapping[str, int],
    unshared_bound: int,
) -> Iterable[tuple[str, ...]]:
    """All admissible I-sets: sizes ascending, then lexicographic."""
    shares = ctx.program.shares
    fam_of = {m: f.name for f in shares.families for m in f.members}
    unshared = set(shares.unshared)

    def cap_of(fam: str) -> int:
        if isinstance(shared_bound, Mapping):
            return shared_bound.get(fam, 0)
        return shared_bound

    allowed = [
        n
        for n in ctx.inputs
        if (n in unshared and unshared_bound > 0)
        or (n in fam_of and cap_of(fam_of[n]) > 0)
    ]

    def admissible(combo: tuple[str, ...]) -> bool:
        fam_counts: dict[str, int] = {}
        u_count = 0
        for n in combo:
            if n in unshared:
                u_count += 1
                if u_count > unshared_bound:
                    return False
            else:
                f = fam_of[n]
                fam_counts[f] = fam_counts.get(f, 0) + 1
                if fam_counts[f] > cap_of(f):
                    return False
        return True

    for size in range(len(allowed) + 1):
        for combo in combinations(allowed, size):
            if admissible(combo):
                yield combo


def search_i(
    ctx: OracleContext,
    probes: Iterable[str],
    shared_bound: int | Mapping[str, int],
    unshared_bound: int = 0,
) -> tuple[tuple[str, ...] | None, Counterexample | None]:
    """Smallest admissible witness I for (I, O)-NI, or the last failure.

    The search visits candidate I-sets by increasing cardinality and then
    lexicographically, so the returned witness is canonical. When no
    candidate works, the counterexample of the final (largest) candidate is
    returned as the refutation evidence.
    """
    last_ce: Counterexample | None = None
    for combo in _candidate_sets(ctx, shared_bound, unshared_bound):
        ce = ctx.io_ni(combo, probes)
        if ce is None:
            return combo, None
        last_ce = ce
    return None, last_ce


def enumerate_probe_sets(
    outputs: Sequence[str], t: int
) -> list[tuple[str, ...]]:
    """All probe sets of size ≤ t in colex order, the empty set first."""
    sets: list[tuple[str, ...]] = [()]
    n = len(outputs)
    for size in range(1, min(t, n) + 1):
        combos = sorted(
            combinations(range(n), size), key=lambda c: tuple(reversed(c))
        )
        sets.extend(tuple(outputs[i] for i in c) for c in combos)
    return sets


def probe_bounds(
    prop: str,
    probes: Sequence[str],
    internal_names: Iterable[str],
    unshared_mode: str = "internal",
) -> tuple[int, int]:
    """(shared cap, unshared cap) for one probe set under a property.

    `unshared_mode` selects the budget for unshared inputs under t-sniu:
    "internal" counts only internal probes, "total" counts all probes.
    """
    total = len(probes)
    internal = sum(1 for p in probes if p in set(internal_names))
    if prop == "t-ni":
        return total, 0
    if prop == "t-sni":
        return internal, 0
    if prop == "t-niu":
        return total, total
    if prop == "t-sniu":
        return internal, internal if unshared_mode == "internal" else total
    raise ValueError(f"unknown property {prop!r}")


def check_probe_set(
    ctx: OracleContext,
    prop: str,
    probes: tuple[str, ...],
    unshared_mode: str = "internal",
) -> ProbeResult:
    """Run the witness search for one probe set of one property."""
    exposure = ctx.program.exposure
    if exposure is None:
        raise ValueError("property checks need a program with exposed internals")
    shared_bound, unshared_bound = probe_bounds(
        prop, probes, exposure.internal_names, unshared_mode
    )
    try:
        witness, ce = search_i(ctx, probes, shared_bound, unshared_bound)
    except EnumerationCapExceeded as exc:
        return ProbeResult(probes=probes, status="unknown", reason=str(exc))
    if witness is not None:
        return ProbeResult(probes=probes, status="verified", witness=witness)
    return ProbeResult(probes=probes, status="refuted", counterexample=ce)


def _check_property(
    program: TypedProgram,
    prop: str,
    t: int | None,
    q: int,
    cap: int,
    probe_cap: int | None,
    unshared_mode: str,
    context: OracleContext | None,
) -> Verdict:
    budget = program.shares.order if t is None else t
    sets = enumerate_probe_sets(program.output_names, budget)
    try:
        ctx = context or OracleContext(program, q, cap)
    except EnumerationCapExceeded as exc:
        return Verdict(
            status="unknown",
            prop=prop,
            q=q,
            t=budget,
            unchecked=tuple(sets),
            reason=str(exc),
        )
    unchecked: tuple[tuple[str, ...], ...] = ()
    if probe_cap is not None and len(sets) > probe_cap:
        sets, unchecked = sets[:probe_cap], tuple(sets[probe_cap:])
    results = tuple(
        check_probe_set(ctx, prop, probes, unshared_mode) for probes in sets
    )
    return Verdict(
        status=aggregate_status(results, unchecked),
        prop=prop,
        q=q,
        t=budget,
        probe_results=results,
        unchecked=unchecked,
        reason=f"{len(unchecked)} probe sets beyond the cap" if unchecked else None,
    )


def aggregate_status(
    results: Iterable[ProbeResult], unchecked: Sequence = ()
) -> str:
    statuses = [r.status for r in results]
    if "refuted" in statuses:
        return "refuted"
    if "unknown" in statuses or unchecked:
        return "unknown"
    return "verified"


def check_t_ni(
    program: TypedProgram,
    t: int | None = None,
    q: int = 2,
    cap: int = DEFAULT_ENUMERATION_CAP,
    probe_cap: int | None = None,
    context: OracleContext | None = None,
) -> Verdict:
    return _check_property(program, "t-ni", t, q, cap, probe_cap, "internal", context)


def check_t_sni(
    program: TypedProgram,
    t: int | None = None,
    q: int = 2,
    cap: int = DEFAULT_ENUMERATION_CAP,
    probe_cap: int | None = None,
    context: OracleContext | None = None,
) -> Verdict:
    return _check_property(program, "t-sni", t, q, cap, probe_cap, "internal", context)


def check_t_niu(
    program: TypedProgram,
    t: int | None = None,
    q: int = 2,
    cap: int = DEFAULT_ENUMERATION_CAP,
    probe_cap: int | None = None,
    context: OracleContext | None = None,
) -> Verdict:
    return _check_property(program, "t-niu", t, q, cap, probe_cap, "internal", context)


def check_t_sniu(
    program: TypedProgram,
    t: int | None = None,
    q: int = 2,
    cap: int = DEFAULT_ENUMERATION_CAP,
    probe_cap: int | None = None,
    unshared_mode: str = "internal",
    context: OracleContext | None = None,
) -> Verdict:
    return _check_property(
        program, "t-sniu", t, q, cap, probe_cap, unshared_mode, context
    )
