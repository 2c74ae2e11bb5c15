"""Built-in gadget corpus: sources, expected verdicts, and I-set formulas.

Each entry carries a canonical DSL source at a configured (t, q) scale, the
property it is expected to satisfy (or violate), and — where a closed-form
description of the witness input sets exists — the name of a formula that
maps a probe set to input wires. Formulas relate to the oracle's found
witnesses in one of two ways, recorded per entry:

    equal      the minimal witness is exactly formula(O) for every probe set
    superset   formula(O) is itself a verified witness and the minimal
               witness is contained in it

The broken variants are deliberately faulty implementations used as negative
controls: broken-Refresh zeroes its masking random, and broken-SecMult
reuses one masking random for two share pairs, which cancels mod 2 and puts
a raw product on an output wire.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .dsl import TypedProgram, expose_internals, parse_gadget, typecheck, unroll

__all__ = [
    "CORPUS",
    "CorpusEntry",
    "FORMULAS",
    "add_rep_noise_source",
    "broken_refresh_source",
    "broken_secmult_source",
    "build",
    "corpus_entry",
    "i_arn",
    "i_marn",
    "i_marn_shared",
    "i_marn_unshared",
    "i_masked_add",
    "i_refresh",
    "i_secmult",
    "marn_source",
    "masked_add_source",
    "otp_source",
    "refresh_source",
    "secmult_source",
]


# ---------------------------------------------------------------------------
# Sources. Return tuples are spelled out because output arity is static.


def _shares_tuple(base: str, n: int, *prefix: object) -> str:
    pre = "".join(f"[{p}]" for p in prefix)
    return ", ".join(f"{base}{pre}[{j}]" for j in range(n))


def otp_source() -> str:
    return """\
gadget OTP;
order t = 0;
unshared M;

K <- unif;
C <- M + K;
return (C);
"""


def masked_add_source(t: int) -> str:
    return f"""\
gadget MaskedAdd;
order t = {t};
shares X[t + 1];
shares Y[t + 1];

for i in 0..t {{
  Z[i] <- X[i] + Y[i];
}}
return ({_shares_tuple("Z", t + 1)});
"""


def marn_source(t: int) -> str:
    return f"""\
gadget MiniAddRepNoise;
order t = {t};
shares V[t + 1];
unshared rho[0..t];

for j in 0..t {{
  X[j] <- V[j] + rho[j];
}}
return ({_shares_tuple("X", t + 1)});
"""


def refresh_source(t: int) -> str:
    return f"""\
gadget Refresh;
order t = {t};
shares A[t + 1];

for i in 0..t {{
  C[i][0] <- A[i];
}}
for i in 0..t {{
  for j in i + 1..t {{
    R[i][j] <- unif;
    C[i][j] <- C[i][j - 1] + R[i][j];
    C[j][i + 1] <- C[j][i] - R[i][j];
  }}
}}
return ({", ".join(f"C[{i}][t]" for i in range(t + 1))});
"""


def secmult_source(t: int) -> str:
    return f"""\
gadget SecMult;
order t = {t};
shares A[t + 1];
shares B[t + 1];

for i in 0..t {{
  for j in 0..t {{
    P[i][j] <- A[i] * B[j];
  }}
}}
for i in 0..t {{
  C[i][0] <- P[i][i];
}}
for i in 0..t {{
  for j in i + 1..t {{
    Q[i][j] <- unif;
    C[i][j] <- C[i][j - 1] - Q[i][j];
    R[i][j] <- Q[i][j] + P[i][j];
    S[i][j] <- R[i][j] + P[j][i];
    C[j][i + 1] <- C[j][i] + S[i][j];
  }}
}}
return ({", ".join(f"C[{i}][t]" for i in range(t + 1))});
"""


def add_rep_noise_source(l: int, r: int, t: int) -> str:
    """Noise addition with explicit randomness: r rounds of mask-then-refresh
    per lane, each round adding one externally supplied noise word per share."""
    outs = ", ".join(f"X[{i}][r][{j}]" for i in range(1, l + 1) for j in range(t + 1))
    return f"""\
gadget AddRepNoiseER;
order t = {t};
param l = {l};
param r = {r};
shares V[1..l][t + 1];
unshared rho[1..l][1..r][0..t];

for i in 1..l {{
  for j in 0..t {{
    X[i][0][j] <- V[i][j];
  }}
}}
for i in 1..l {{
  for k in 1..r {{
    # add one noise word to every share
    for j in 0..t {{
      Y[i][k][j] <- X[i][k - 1][j] + rho[i][k][j];
    }}
    # refresh the noised sharing
    for j in 0..t {{
      C[i][k][j][0] <- Y[i][k][j];
    }}
    for a in 0..t {{
      for b in a + 1..t {{
        R[i][k][a][b] <- unif;
        C[i][k][a][b] <- C[i][k][a][b - 1] + R[i][k][a][b];
        C[i][k][b][a + 1] <- C[i][k][b][a] - R[i][k][a][b];
      }}
    }}
    for j in 0..t {{
      X[i][k][j] <- C[i][k][j][t];
    }}
  }}
}}
return ({outs});
"""


def broken_refresh_source(t: int = 1) -> str:
    """Refresh with its masking randomness removed: output shares copy inputs."""
    return refresh_source(t).replace(
        "gadget Refresh;", "gadget BrokenRefresh;"
    ).replace("R[i][j] <- unif;", "R[i][j] <- 0;")


def broken_secmult_source() -> str:
    """Three-share multiplication where the (0,2) pair reuses Q[0][1].

    The chain entry C[0][2] becomes P[0][0] - 2*Q[0][1], and mod 2 the
    doubled random cancels: an output wire carries A[0]*B[0] in the clear.
    """
    return """\
gadget BrokenSecMult;
order t = 2;
shares A[t + 1];
shares B[t + 1];

for i in 0..t {
  for j in 0..t {
    P[i][j] <- A[i] * B[j];
  }
}
for i in 0..t {
  C[i][0] <- P[i][i];
}
Q[0][1] <- unif;
C[0][1] <- C[0][0] - Q[0][1];
R[0][1] <- Q[0][1] + P[0][1];
S[0][1] <- R[0][1] + P[1][0];
C[1][1] <- C[1][0] + S[0][1];
# pair (0, 2) reuses Q[0][1] instead of sampling a fresh random
C[0][2] <- C[0][1] - Q[0][1];
R[0][2] <- Q[0][1] + P[0][2];
S[0][2] <- R[0][2] + P[2][0];
C[2][1] <- C[2][0] + S[0][2];
Q[1][2] <- unif;
C[1][2] <- C[1][1] - Q[1][2];
R[1][2] <- Q[1][2] + P[1][2];
S[1][2] <- R[1][2] + P[2][1];
C[2][2] <- C[2][1] + S[1][2];
return (C[0][2], C[1][2], C[2][2]);
"""


# ---------------------------------------------------------------------------
# Wire-name parsing shared by the formulas


_NAME_RE = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)((?:\[\d+\])*)$")


def _parse_wire(name: str) -> tuple[str, tuple[int, ...]]:
    m = _NAME_RE.match(name)
    if m is None:
        raise ValueError(f"unparseable wire name {name!r}")
    base, idx = m.group(1), m.group(2)
    return base, tuple(int(s) for s in re.findall(r"\d+", idx))


# ---------------------------------------------------------------------------
# I-set formulas. Each takes the probe set and the instance sizes and
# returns the input wires the closed-form witness consists of.


def i_otp(probes: Iterable[str], **_: int) -> frozenset[str]:
    """Every wire of the one-time pad is simulatable from nothing."""
    return frozenset()


def i_masked_add(probes: Iterable[str], **_: int) -> frozenset[str]:
    """Share i of the sum needs exactly share i of each addend."""
    need: set[str] = set()
    for name in probes:
        base, idx = _parse_wire(name)
        if base == "Z":
            need.add(f"X[{idx[0]}]")
            need.add(f"Y[{idx[0]}]")
    return frozenset(need)


def i_marn_shared(probes: Iterable[str], **_: int) -> frozenset[str]:
    return frozenset(
        f"V[{_parse_wire(n)[1][0]}]" for n in probes if _parse_wire(n)[0] == "X"
    )


def i_marn_unshared(probes: Iterable[str], **_: int) -> frozenset[str]:
    return frozenset(
        f"rho[{_parse_wire(n)[1][0]}]" for n in probes if _parse_wire(n)[0] == "X"
    )


def i_marn(probes: Iterable[str], **kw: int) -> frozenset[str]:
    return i_marn_shared(probes, **kw) | i_marn_unshared(probes, **kw)


def i_refresh(probes: Iterable[str], *, t: int, **_: int) -> frozenset[str]:
    """A^i is needed when some R[i][j] or some non-output C[i][j] is probed."""
    need: set[int] = set()
    for name in probes:
        base, idx = _parse_wire(name)
        if base == "R":
            need.add(idx[0])
        elif base == "C" and idx[1] < t:
            need.add(idx[0])
    return frozenset(f"A[{i}]" for i in need)


def _add_pairs(
    i_set: set[int], j_set: set[int], pairs: Iterable[tuple[int, int]]
) -> tuple[set[int], set[int]]:
    """Close (I, J) under a set of probed share pairs.

    For each pair, the side already charged keeps its index and the other
    side gets charged; membership is tested against the original sets.
    """
    i0, j0 = frozenset(i_set), frozenset(j_set)
    i_new, j_new = set(i_set), set(j_set)
    for (i, j) in pairs:
        i_new.add(j if i in i0 else i)
        j_new.add(i if j in j0 else j)
    return i_new, j_new


def i_secmult(probes: Iterable[str], *, t: int, **_: int) -> frozenset[str]:
    i_set: set[int] = set()
    j_set: set[int] = set()
    qr_pairs: set[tuple[int, int]] = set()
    s_pairs: set[tuple[int, int]] = set()
    for name in probes:
        base, idx = _parse_wire(name)
        if base == "P":
            i_set.add(idx[0])
            j_set.add(idx[1])
        elif base == "C" and idx[1] < t:
            i_set.add(idx[0])
            j_set.add(idx[0])
        elif base in ("Q", "R"):
            qr_pairs.add((idx[0], idx[1]))
        elif base == "S":
            s_pairs.add((idx[0], idx[1]))
    i_set, j_set = _add_pairs(i_set, j_set, sorted(qr_pairs))
    i_set, j_set = _add_pairs(i_set, j_set, sorted(s_pairs))
    return frozenset(f"A[{i}]" for i in i_set) | frozenset(f"B[{j}]" for j in j_set)


def i_arn(probes: Iterable[str], *, l: int, r: int, t: int, **_: int) -> frozenset[str]:
    """Backward per-lane recursion through the mask-then-refresh rounds.

    Walking rounds last to first: needs on a round's refresh outputs are
    absorbed by its randomness; internal refresh probes charge the round's
    noised shares, which in turn charge the previous round's outputs and
    the round's noise words. What survives at round 0 charges V.
    """
    need: set[str] = set()
    for lane in range(1, l + 1):
        marn_probed: dict[int, set[int]] = {k: set() for k in range(1, r + 1)}
        ref_internal: dict[int, set[int]] = {k: set() for k in range(1, r + 1)}
        copy_probed: set[int] = set()
        for name in probes:
            base, idx = _parse_wire(name)
            if not idx or idx[0] != lane:
                continue
            if base == "X" and idx[1] == 0:
                copy_probed.add(idx[2])
            elif base == "Y":
                marn_probed[idx[1]].add(idx[2])
            elif base == "R":
                ref_internal[idx[1]].add(idx[2])
            elif base == "C" and idx[3] < t:
                ref_internal[idx[1]].add(idx[2])
            # probes on C[lane][k][a][t] and X[lane][k][a] (k >= 1) are
            # refresh-output probes: the round's randomness absorbs them
        shared_next: set[int] = set()
        for k in range(r, 0, -1):
            # needs on this round's outputs contribute nothing further;
            # only internal refresh probes charge the noised shares
            charged = ref_internal[k] | marn_probed[k]
            need.update(f"rho[{lane}][{k}][{j}]" for j in charged)
            shared_next = charged
        for j in shared_next | copy_probed:
            need.add(f"V[{lane}][{j}]")
    return frozenset(need)


FORMULAS: Mapping[str, Callable[..., frozenset[str]]] = {
    "I_OTP": i_otp,
    "I_MaskedAdd": i_masked_add,
    "I_MARN": i_marn,
    "I_Refresh": i_refresh,
    "I_SecMult": i_secmult,
    "I_ARN": i_arn,
}


# ---------------------------------------------------------------------------
# The corpus


@dataclass(frozen=True)
class CorpusEntry:
    """One shipped gadget with its configured check."""

    name: str
    source: str
    prop: str
    t: int
    q: int
    expected: str  # "verified" | "refuted"
    formula: str | None = None
    formula_relation: str | None = None  # "equal" | "superset"
    params: Mapping[str, int] = field(default_factory=dict)
    notes: str = ""

    def formula_i(self, probes: Iterable[str]) -> frozenset[str]:
        if self.formula is None:
            raise ValueError(f"corpus entry {self.name!r} has no formula")
        return FORMULAS[self.formula](probes, **dict(self.params))


CORPUS: tuple[CorpusEntry, ...] = (
    CorpusEntry(
        name="OTP",
        source=otp_source(),
        prop="t-ni",
        t=1,
        q=2,
        expected="verified",
        formula="I_OTP",
        formula_relation="equal",
        params={},
        notes="one-time pad: every observable wire is independent of the message",
    ),
    CorpusEntry(
        name="MaskedAdd",
        source=masked_add_source(1),
        prop="t-ni",
        t=1,
        q=2,
        expected="verified",
        formula="I_MaskedAdd",
        formula_relation="equal",
        params={"t": 1},
        notes="sharewise addition; not t-SNI since outputs expose one share of each input",
    ),
    CorpusEntry(
        name="MiniAddRepNoise",
        source=marn_source(2),
        prop="t-niu",
        t=2,
        q=2,
        expected="verified",
        formula="I_MARN",
        formula_relation="equal",
        params={"t": 2},
        notes="noise addition; needs the unshared budget, hence t-NIU rather than t-NI",
    ),
    CorpusEntry(
        name="Refresh",
        source=refresh_source(2),
        prop="t-sni",
        t=2,
        q=2,
        expected="verified",
        formula="I_Refresh",
        formula_relation="superset",
        params={"t": 2},
    ),
    CorpusEntry(
        name="SecMult",
        source=secmult_source(2),
        prop="t-sni",
        t=2,
        q=2,
        expected="verified",
        formula="I_SecMult",
        formula_relation="superset",
        params={"t": 2},
    ),
    CorpusEntry(
        name="AddRepNoiseER",
        source=add_rep_noise_source(1, 2, 1),
        prop="t-sniu",
        t=1,
        q=2,
        expected="verified",
        formula="I_ARN",
        formula_relation="superset",
        params={"l": 1, "r": 2, "t": 1},
    ),
    CorpusEntry(
        name="broken-Refresh",
        source=broken_refresh_source(1),
        prop="t-sni",
        t=1,
        q=2,
        expected="refuted",
        notes="masking random replaced by 0; C[0][1] carries A[0] verbatim",
    ),
    CorpusEntry(
        name="broken-SecMult",
        source=broken_secmult_source(),
        prop="t-sni",
        t=1,
        q=2,
        expected="refuted",
        notes="randomness reuse cancels mod 2; C[0][2] carries A[0]*B[0]",
    ),
)


def corpus_entry(name: str) -> CorpusEntry:
    for entry in CORPUS:
        if entry.name == name:
            return entry
    raise KeyError(f"no corpus entry named {name!r}")


def build(entry: CorpusEntry) -> TypedProgram:
    """Parse, check, unroll, and expose one corpus gadget."""
    return expose_internals(unroll(typecheck(parse_gadget(entry.source))))


def gadget_filename(name: str) -> str:
    """Snake-case file name for a corpus entry, e.g. broken_sec_mult.gdl."""
    s = re.sub(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])", "_", name)
    return s.replace("-", "_").lower() + ".gdl"


def write_gadget_files(directory: str) -> list[str]:
    """Write every corpus source as a .gdl file; returns the paths written."""
    import os

    os.makedirs(directory, exist_ok=True)
    paths = []
    for entry in CORPUS:
        path = os.path.join(directory, gadget_filename(entry.name))
        with open(path, "w") as fh:
            fh.write(entry.source)
        paths.append(path)
    return paths
