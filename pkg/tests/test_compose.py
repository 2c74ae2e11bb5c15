"""Composition rules: summary algebra, guard rails, and oracle agreement.

The unit tests pin the bookkeeping (which premises raise, which are
reported unknown, what the composite claim says). The integration tests
then check the only thing that matters: claims produced purely by
composition hold under the exact oracle on the physically combined
circuit — for a two-stage refresh chain and for the full noise pipeline
at two shapes.
"""

from itertools import product

import pytest

from arn_compose import lane_wires, verify_arn_composed

from maskcheck import corpus
from maskcheck.dsl import expose_internals, parse_gadget, typecheck, unroll
from maskcheck.oracle import OracleContext, enumerate_probe_sets
from maskcheck.symbolic import (
    CompositionError,
    NISummary,
    compose_loop,
    compose_sequential,
    verify_io_ni_symbolic,
    weaken,
)


def prep(source: str):
    return expose_internals(unroll(typecheck(parse_gadget(source))))


def s(gadget, i_set, o_set):
    return NISummary(gadget, frozenset(i_set), frozenset(o_set))


# ---------------------------------------------------------------------------
# Sequential rule


def test_sequential_charges_context_reads():
    m = s("M", {"a"}, {"x"})
    n = s("N", {"x", "b"}, {"p"})
    out = compose_sequential(m, n, m_outputs={"x", "y"}, context={"b"})
    assert out.i_set == {"a", "b"} and out.o_set == {"p"}
    assert out.gadget == "M;N"


def test_sequential_when_n_ignores_m():
    m = s("M", {"a"}, set())
    n = s("N", {"b"}, {"p"})
    out = compose_sequential(m, n, m_outputs={"x"}, context={"b"}, gadget="MN")
    assert out.i_set == {"a", "b"} and out.gadget == "MN"


def test_sequential_rejects_unaccounted_wires():
    m = s("M", set(), {"x"})
    n = s("N", {"ghost"}, {"p"})
    with pytest.raises(CompositionError, match="neither outputs"):
        compose_sequential(m, n, m_outputs={"x"}, context=())


def test_sequential_rejects_uncovered_probes():
    m = s("M", set(), set())  # M's summary says nothing about x
    n = s("N", {"x"}, {"p"})
    with pytest.raises(CompositionError, match="does not cover the probes"):
        compose_sequential(m, n, m_outputs={"x"}, context=())


def test_sequential_records_step():
    rec = []
    compose_sequential(
        s("M", set(), {"x"}), s("N", {"x"}, {"p"}), m_outputs={"x"}, record=rec
    )
    assert [c.rule for c in rec] == ["Seq-Compose"]
    assert rec[0].variables == ("x",)
    assert rec[0].after == "M;N: ({}, {p})-NI"


# ---------------------------------------------------------------------------
# Weakening

PASSTHROUGH = """\
gadget PassThrough;
order t = 0;
shares A[t + 1];
shares Z[t + 1];

R <- unif;
B <- A[0] + R;
W <- Z[0];
return (B, W);
"""


def test_weaken_empty_is_identity():
    base = s("G", set(), {"B"})
    assert weaken(base, ()) is base


def test_weaken_moves_wires_to_both_sides():
    rec = []
    out = weaken(s("G", set(), {"B"}), ["Z[0]"], record=rec)
    assert out.i_set == {"Z[0]"} and out.o_set == {"B", "Z[0]"}
    assert [c.rule for c in rec] == ["Weakening"]


def test_weaken_sound_for_dependent_passthrough():
    # The weakened claim needs no independence between the pass-through
    # wire and the gadget's own input: W copies the input share Z[0], and
    # ({Z[0]}, {B, W})-NI still holds exactly.
    ctx = OracleContext(prep(PASSTHROUGH), q=2)
    assert ctx.io_ni(["Z[0]"], ["B", "W"]) is None
    # ... while without Z[0] in I the claim would overreach for W, so the
    # weakened I-side is genuinely load-bearing:
    assert ctx.io_ni([], ["W"]) is not None


# ---------------------------------------------------------------------------
# Loop rule


def test_loop_with_no_iterations_is_the_initializer_claim():
    res = compose_loop([], [{"P"}], ambient={"x"}, init_free={"P": ["x"]})
    assert res.status == "verified"
    assert res.summary.i_set == {"x"} and res.summary.o_set == {"P"}
    assert res.summary.gadget == "loop[]"


def test_loop_reports_leaky_initializer_as_unknown():
    res = compose_loop([], [{"P"}], ambient=set(), init_free={"P": ["x"]})
    assert res.status == "unknown" and res.summary is None
    assert res.offending_index == "P"
    assert "outside the ambient inputs" in res.reason


def test_loop_requires_every_initializer():
    with pytest.raises(CompositionError, match="no initializer"):
        compose_loop([], [{"P"}], ambient={"x"}, init_free={})


def test_loop_boundary_count_mismatch():
    stage = s("it", set(), {"P1"})
    with pytest.raises(CompositionError, match="boundary sets"):
        compose_loop([stage], [{"P0"}], ambient=set(), init_free={"P0": []})


def test_loop_rejects_stage_reading_past_boundary():
    stage = s("it", {"Q"}, {"P1"})
    with pytest.raises(CompositionError, match="beyond its boundary"):
        compose_loop(
            [stage], [{"P0"}, {"P1"}], ambient=set(), init_free={"P0": []}
        )


def test_loop_rejects_uncovered_carried_wires():
    stage = s("it", {"P0"}, set())
    with pytest.raises(CompositionError, match="carried wires"):
        compose_loop(
            [stage], [{"P0"}, {"P1"}], ambient=set(), init_free={"P0": []}
        )


def test_loop_folds_iterations_and_records():
    rec = []
    stages = [s("it0", {"x", "P0"}, {"P1"}), s("it1", {"P1"}, {"P2"})]
    res = compose_loop(
        stages,
        [{"P0"}, {"P1"}, {"P2"}],
        ambient={"x"},
        init_free={"P0": ["x"]},
        gadget="L",
        record=rec,
    )
    assert res.status == "verified"
    assert res.summary == s("L", {"x"}, {"P2"})
    assert [c.rule for c in rec] == ["Seq-Compose", "Seq-Compose", "Loop-Compose"]
    assert "{P0} -> {P1} -> {P2}" in rec[-1].before


# ---------------------------------------------------------------------------
# Two chained refreshes: compose symbolic stage summaries, then ask the
# exact oracle about the combined circuit.

DOUBLE_REFRESH = """\
gadget DoubleRefresh;
order t = 1;
shares A[t + 1];

R[0][1] <- unif;
C[0][1] <- A[0] + R[0][1];
C[1][1] <- A[1] - R[0][1];
S[0][1] <- unif;
D[0][1] <- C[0][1] + S[0][1];
D[1][1] <- C[1][1] - S[0][1];
return (D[0][1], D[1][1]);
"""


@pytest.fixture(scope="module")
def double_refresh_ctx():
    return OracleContext(prep(DOUBLE_REFRESH), q=2)


@pytest.fixture(scope="module")
def refresh1():
    return prep(corpus.refresh_source(1))


def test_chained_refresh_probe_in_second_stage(refresh1, double_refresh_ctx):
    # Stage premises, established symbolically on a single refresh (the
    # second stage is the same circuit with A -> C[.][1], R -> S, C -> D).
    assert verify_io_ni_symbolic(refresh1, [], ["C[0][1]"], 2).status == "verified"
    m = s("Refresh1", set(), set())
    n = s("Refresh2", set(), {"D[0][1]"})
    out = compose_sequential(m, n, m_outputs={"C[0][1]", "C[1][1]"})
    assert out.i_set == set()
    assert double_refresh_ctx.io_ni([], ["D[0][1]"]) is None


def test_chained_refresh_random_and_output_probed(refresh1, double_refresh_ctx):
    # Probing the second stage's random pins it, so its simulator reads
    # the carried share C[1][1]; the first stage covers that probe for
    # free, leaving an empty composite I.
    v_n = verify_io_ni_symbolic(refresh1, ["A[1]"], ["R[0][1]", "C[1][1]"], 2)
    v_m = verify_io_ni_symbolic(refresh1, [], ["C[1][1]"], 2)
    assert v_n.status == "verified" and v_m.status == "verified"
    m = s("Refresh1", set(), {"C[1][1]"})
    n = s("Refresh2", {"C[1][1]"}, {"S[0][1]", "D[1][1]"})
    rec = []
    out = compose_sequential(
        m, n, m_outputs={"C[0][1]", "C[1][1]"}, record=rec
    )
    assert out.i_set == set() and out.o_set == {"S[0][1]", "D[1][1]"}
    assert rec[0].variables == ("C[1][1]",)
    assert double_refresh_ctx.io_ni([], ["S[0][1]", "D[1][1]"]) is None


def test_chained_refresh_probes_in_both_stages(refresh1, double_refresh_ctx):
    # A probe on each stage: the first-stage probes pass through the
    # second stage (weakening), so the first stage must cover them, and
    # they join X, the M-produced wires visible downstream.
    v_m = verify_io_ni_symbolic(refresh1, ["A[0]"], ["R[0][1]", "C[0][1]"], 2)
    assert v_m.status == "verified"
    m = s("Refresh1", {"A[0]"}, {"R[0][1]", "C[0][1]"})
    n = weaken(s("Refresh2", set(), {"D[1][1]"}), ["R[0][1]", "C[0][1]"])
    out = compose_sequential(
        m, n, m_outputs={"C[0][1]", "C[1][1]", "R[0][1]"}
    )
    assert out.i_set == {"A[0]"}
    assert out.o_set == {"R[0][1]", "C[0][1]", "D[1][1]"}
    assert (
        double_refresh_ctx.io_ni(["A[0]"], ["R[0][1]", "C[0][1]", "D[1][1]"])
        is None
    )


# ---------------------------------------------------------------------------
# The full pipeline, two shapes: every composed claim oracle-checked and
# (for the witness sets) formula-exact.


def test_pipeline_composition_matches_formula_and_oracle():
    l, r, t = 1, 2, 1
    tp = prep(corpus.add_rep_noise_source(l, r, t))
    ctx = OracleContext(tp, q=2)
    sets = enumerate_probe_sets(tp.output_names, t)
    assert len(sets) == 21
    saw_rules = set()
    for probes in sets:
        rec = []
        summary = verify_arn_composed(probes, l=l, r=r, t=t, record=rec)
        assert summary.i_set == corpus.i_arn(probes, l=l, r=r, t=t), probes
        assert set(probes) <= summary.o_set
        assert ctx.io_ni(summary.i_set, probes) is None, probes
        saw_rules.update(c.rule for c in rec)
    assert {"Seq-Compose", "Loop-Compose", "Weakening"} <= saw_rules


def test_pipeline_composition_across_lanes():
    l, r, t = 2, 1, 1
    tp = prep(corpus.add_rep_noise_source(l, r, t))
    ctx = OracleContext(tp, q=2)
    singles = enumerate_probe_sets(tp.output_names, t)
    lane1 = sorted(lane_wires(1, r, t))
    lane2 = sorted(lane_wires(2, r, t))
    pairs = [(a, b) for a, b in product(lane1, lane2)]
    sets = singles + pairs
    assert len(sets) == 144
    for probes in sets:
        summary = verify_arn_composed(probes, l=l, r=r, t=t)
        assert summary.i_set == corpus.i_arn(probes, l=l, r=r, t=t), probes
        assert ctx.io_ni(summary.i_set, probes) is None, probes
