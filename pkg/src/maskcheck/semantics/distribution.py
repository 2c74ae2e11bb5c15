"""Exact finite distributions over value tuples.

Probabilities are `fractions.Fraction` throughout — verdicts about
distribution equality must be exact, so floats never appear. A distribution
maps value tuples (ints in [0, q), bools, or nested tuples of those) to
positive rationals summing to exactly 1; zero-probability entries are never
stored.

Within one distribution every support tuple has the same type shape (the
gadget typechecker fixes one scalar type per position), so Python's
bool/int hash overlap cannot merge two logically distinct support points.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "FiniteDistribution",
    "UndefinedConditional",
    "value_from_jsonable",
    "value_to_jsonable",
]


class UndefinedConditional(Exception):
    """Conditioning on a zero-probability event; callers skip such values."""


class FiniteDistribution:
    """An immutable exact probability distribution over value tuples."""

    __slots__ = ("_probs", "_arity")

    def __init__(self, probs: Mapping[tuple, Fraction | int]):
        clean: dict[tuple, Fraction] = {}
        total = Fraction(0)
        arity: int | None = None
        for value, p in probs.items():
            p = Fraction(p)
            if p < 0:
                raise ValueError(f"negative probability {p} for {value!r}")
            if p == 0:
                continue
            if not isinstance(value, tuple):
                raise TypeError(f"support points must be tuples, got {value!r}")
            if arity is None:
                arity = len(value)
            elif len(value) != arity:
                raise ValueError("support points have inconsistent arity")
            clean[value] = p
            total += p
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, expected exactly 1")
        self._probs = clean
        self._arity = len(next(iter(clean))) if arity is None else arity

    # -- constructors --------------------------------------------------

    @staticmethod
    def point_mass(value: tuple) -> "FiniteDistribution":
        return FiniteDistribution({value: Fraction(1)})

    @staticmethod
    def uniform(values: Iterable[tuple]) -> "FiniteDistribution":
        vals = list(values)
        if not vals:
            raise ValueError("uniform distribution needs a nonempty support")
        w = Fraction(1, len(vals))
        probs: dict[tuple, Fraction] = {}
        for v in vals:
            probs[v] = probs.get(v, Fraction(0)) + w
        return FiniteDistribution(probs)

    @staticmethod
    def mixture(
        weighted: Iterable[tuple[Fraction, "FiniteDistribution"]],
    ) -> "FiniteDistribution":
        """Exact convex combination; weights must sum to 1."""
        probs: dict[tuple, Fraction] = {}
        for w, d in weighted:
            for v, p in d.items():
                probs[v] = probs.get(v, Fraction(0)) + w * p
        return FiniteDistribution(probs)

    @staticmethod
    def product(a: "FiniteDistribution", b: "FiniteDistribution") -> "FiniteDistribution":
        """Independent product, concatenating value tuples."""
        probs = {
            va + vb: pa * pb for va, pa in a.items() for vb, pb in b.items()
        }
        return FiniteDistribution(probs)

    # -- basic queries ---------------------------------------------------

    @property
    def arity(self) -> int:
        return self._arity

    def prob(self, value: tuple) -> Fraction:
        return self._probs.get(value, Fraction(0))

    def items(self) -> Iterator[tuple[tuple, Fraction]]:
        return iter(self._probs.items())

    def support(self) -> Iterator[tuple]:
        return iter(self._probs)

    def __len__(self) -> int:
        return len(self._probs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return self._probs == other._probs

    def __hash__(self):
        return hash(frozenset(self._probs.items()))

    def __repr__(self) -> str:
        entries = ", ".join(f"{v!r}: {p}" for v, p in sorted(self._probs.items()))
        return f"FiniteDistribution({{{entries}}})"

    # -- transforms -----------------------------------------------------

    def marginal(self, positions: Sequence[int]) -> "FiniteDistribution":
        """Pushforward along projection to the given positions, in order."""
        pos = tuple(positions)
        for i in pos:
            if not 0 <= i < self._arity:
                raise IndexError(f"position {i} out of range for arity {self._arity}")
        probs: dict[tuple, Fraction] = {}
        for v, p in self._probs.items():
            key = tuple(v[i] for i in pos)
            probs[key] = probs.get(key, Fraction(0)) + p
        return FiniteDistribution(probs)

    def condition(
        self, positions: Sequence[int], values: Sequence
    ) -> "FiniteDistribution":
        """Renormalized restriction to {tuple[pos] == val}, dropping those
        positions from the result.

        Raises UndefinedConditional when the event has probability zero.
        """
        pos = tuple(positions)
        vals = tuple(values)
        if len(pos) != len(vals):
            raise ValueError("positions and values must have equal length")
        keep = [i for i in range(self._arity) if i not in set(pos)]
        sel = dict(zip(pos, vals))
        probs: dict[tuple, Fraction] = {}
        total = Fraction(0)
        for v, p in self._probs.items():
            if all(v[i] == x for i, x in sel.items()):
                key = tuple(v[i] for i in keep)
                probs[key] = probs.get(key, Fraction(0)) + p
                total += p
        if total == 0:
            raise UndefinedConditional(f"event {sel!r} has probability zero")
        return FiniteDistribution({v: p / total for v, p in probs.items()})

    # -- serialization -----------------------------------------------------

    def to_jsonable(self) -> list[dict]:
        """Sorted support entries with bit-exact probabilities."""
        return [
            {"value": value_to_jsonable(v), "prob": f"{p.numerator}/{p.denominator}"}
            for v, p in sorted(self._probs.items())
        ]

    @staticmethod
    def from_jsonable(entries: list[dict]) -> "FiniteDistribution":
        probs = {}
        for e in entries:
            num, den = e["prob"].split("/")
            probs[value_from_jsonable(e["value"])] = Fraction(int(num), int(den))
        return FiniteDistribution(probs)


def value_to_jsonable(v):
    """Tuples become lists; bools and ints pass through (JSON keeps them apart)."""
    if isinstance(v, tuple):
        return [value_to_jsonable(x) for x in v]
    return v


def value_from_jsonable(v):
    if isinstance(v, list):
        return tuple(value_from_jsonable(x) for x in v)
    return v
