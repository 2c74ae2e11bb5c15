"""Compositional verification of the noise-then-refresh pipeline.

This helper rebuilds the pipeline's (I, O)-NI summary for an arbitrary
probe set out of per-instance summaries — one per noise layer, one per
refresh, one copy layer — chained with the real composition operations.
The leaf summaries come from the closed-form witness formulas (each
oracle-validated per instance shape by the corpus tests); every premise
inclusion along the way is re-checked by the compose layer itself, so a
bookkeeping mistake here raises instead of producing a wrong summary.

Per lane, the rounds fold through ``compose_loop``: boundary k carries the
round-k outputs the next round's simulator needs, plus every probe of
rounds up to k (kept alive via ``weaken``). The loop's init side condition
lands exactly on the copy layer — initializers read the lane's shared
input, so the ambient set must contain the V shares the recursion
charges. Lanes never exchange wires, so the cross-lane fold is the
sequential rule over an empty interface with earlier probes weakened
through.
"""

from __future__ import annotations

import re

from maskcheck.symbolic import (
    NISummary,
    compose_loop,
    compose_sequential,
    weaken,
)

_WIRE = re.compile(r"^([A-Za-z]+)((?:\[\d+\])*)$")


def _parse(name: str) -> tuple[str, tuple[int, ...]]:
    m = _WIRE.match(name)
    if m is None:
        raise ValueError(f"unparseable wire name {name!r}")
    base, idx = m.groups()
    return base, tuple(int(s) for s in re.findall(r"\d+", idx))


def lane_wires(lane: int, r: int, t: int) -> frozenset[str]:
    ws = {f"X[{lane}][0][{j}]" for j in range(t + 1)}
    for k in range(1, r + 1):
        ws |= {f"Y[{lane}][{k}][{j}]" for j in range(t + 1)}
        ws |= {
            f"C[{lane}][{k}][{a}][{b}]"
            for a in range(t + 1)
            for b in range(t + 1)
        }
        ws |= {
            f"R[{lane}][{k}][{a}][{b}]"
            for a in range(t + 1)
            for b in range(a + 1, t + 1)
        }
        ws |= {f"X[{lane}][{k}][{j}]" for j in range(t + 1)}
    return frozenset(ws)


def lane_inputs(lane: int, r: int, t: int) -> frozenset[str]:
    return frozenset(
        {f"V[{lane}][{j}]" for j in range(t + 1)}
        | {
            f"rho[{lane}][{k}][{j}]"
            for k in range(1, r + 1)
            for j in range(t + 1)
        }
    )


def _lane_summary(
    probes: frozenset[str],
    lane: int,
    r: int,
    t: int,
    record: list | None,
) -> NISummary:
    copy_probed: set[int] = set()
    marn_probed: dict[int, set[int]] = {k: set() for k in range(1, r + 1)}
    ref_internal: dict[int, set[int]] = {k: set() for k in range(1, r + 1)}
    round_names: dict[int, set[str]] = {k: set() for k in range(1, r + 1)}
    copy_names: set[str] = set()
    for name in probes:
        base, idx = _parse(name)
        if not idx or idx[0] != lane:
            continue
        if base == "X" and idx[1] == 0:
            copy_probed.add(idx[2])
            copy_names.add(name)
            continue
        round_names[idx[1]].add(name)
        if base == "Y":
            marn_probed[idx[1]].add(idx[2])
        elif base == "R" or (base == "C" and idx[3] < t):
            ref_internal[idx[1]].add(idx[2])
    charged = {k: ref_internal[k] | marn_probed[k] for k in range(1, r + 1)}

    ambient = {
        f"rho[{lane}][{k}][{j}]" for k in range(1, r + 1) for j in charged[k]
    }
    ambient |= {f"V[{lane}][{j}]" for j in charged.get(1, set()) | copy_probed}

    def carried(k: int) -> frozenset[str]:
        if k >= r:
            return frozenset()
        return frozenset(f"X[{lane}][{k}][{j}]" for j in charged[k + 1])

    bounds: list[frozenset[str]] = [
        frozenset(f"X[{lane}][0][{j}]" for j in charged.get(1, set()))
        | frozenset(copy_names)
    ]
    stages: list[NISummary] = []
    cum = frozenset(copy_names)
    for k in range(1, r + 1):
        ref_i = frozenset(f"Y[{lane}][{k}][{a}]" for a in ref_internal[k])
        ref_o = frozenset(n for n in round_names[k] if _parse(n)[0] != "Y")
        refresh = NISummary(f"Refresh[{lane},{k}]", ref_i, ref_o | carried(k))
        y_probed = frozenset(f"Y[{lane}][{k}][{j}]" for j in marn_probed[k])
        refresh = weaken(refresh, y_probed, record=record)
        marn = NISummary(
            f"Noise[{lane},{k}]",
            frozenset(f"X[{lane}][{k - 1}][{j}]" for j in charged[k])
            | frozenset(f"rho[{lane}][{k}][{j}]" for j in charged[k]),
            y_probed | ref_i,
        )
        stage = compose_sequential(
            marn,
            refresh,
            m_outputs=frozenset(f"Y[{lane}][{k}][{j}]" for j in range(t + 1)),
            gadget=f"Round[{lane},{k}]",
            record=record,
        )
        stage = weaken(stage, cum, record=record)
        cum |= round_names[k]
        bounds.append(cum | carried(k))
        stages.append(stage)

    init_free = {
        f"X[{lane}][0][{j}]": (f"V[{lane}][{j}]",) for j in range(t + 1)
    }
    result = compose_loop(
        stages,
        bounds,
        ambient=ambient,
        init_free=init_free,
        gadget=f"Lane[{lane}]",
        record=record,
    )
    if result.status != "verified":
        raise AssertionError(
            f"lane {lane} composition unexpectedly {result.status}: "
            f"{result.reason}"
        )
    return result.summary


def verify_arn_composed(
    probes,
    *,
    l: int,
    r: int,
    t: int,
    record: list | None = None,
) -> NISummary:
    """Summary of the full pipeline for one probe set, built by composition.

    Returns an (I, O)-NI summary whose I is exactly what the closed-form
    recursion charges and whose O covers every wire in ``probes``.
    """
    probe_set = frozenset(probes)
    total: NISummary | None = None
    earlier: frozenset[str] = frozenset()
    for lane in range(1, l + 1):
        summary = _lane_summary(probe_set, lane, r, t, record)
        if total is None:
            total = summary
        else:
            carried_over = weaken(summary, total.o_set, record=record)
            total = compose_sequential(
                total,
                carried_over,
                m_outputs=earlier,
                context=lane_inputs(lane, r, t),
                gadget="AddRepNoiseER",
                record=record,
            )
        earlier |= lane_wires(lane, r, t)
    assert total is not None
    return total
