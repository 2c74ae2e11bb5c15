"""Distribution and interpreter tests: exact semantics over Z_q."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from maskcheck.dsl import ShareStructure, parse_gadget, typecheck, unroll
from maskcheck.semantics import (
    EnumerationCapExceeded,
    FiniteDistribution,
    UndefinedConditional,
    eval_expr,
    interpret,
)

OTP = """\
gadget OTP;
order t = 0;
unshared M;

K <- unif;
C <- M + K;
return (C);
"""

MASKED_ADD = """\
gadget MaskedAdd;
order t = 1;
shares A[t + 1];
shares B[t + 1];

for i in 0..t {
  Z[i] <- A[i] + B[i];
}
return (Z[0], Z[1]);
"""


def prepared(src):
    return unroll(typecheck(parse_gadget(src)))


def expr_of(src: str):
    return parse_gadget(f"return ({src});").outputs[0]


# ---------------------------------------------------------------------------
# eval_expr


def test_ring_addition_wraps():
    assert eval_expr(expr_of("1 + 1"), {}, q=2) == 0
    assert eval_expr(expr_of("1 + 1"), {}, q=3) == 2
    assert eval_expr(expr_of("0 - 1"), {}, q=5) == 4


def test_if_then_else():
    assert eval_expr(expr_of("if T then 1 else 0"), {}, q=2) == 1


def test_projection():
    assert eval_expr(expr_of("(3, 5).2"), {}, q=7) == 5


def test_bools_stay_bools():
    v = eval_expr(expr_of("(1 == 1, 1)"), {}, q=2)
    assert v == (True, 1)
    assert isinstance(v[0], bool) and not isinstance(v[1], bool)


# ---------------------------------------------------------------------------
# interpret


def test_otp_output_is_uniform():
    p = prepared(OTP)
    d = interpret(p, {"M": 1}, q=2)
    assert d == FiniteDistribution.uniform([(0,), (1,)])
    assert interpret(p, {"M": 0}, q=2) == d


def test_return_of_constant_is_point_mass():
    p = prepared("X <- 3;\nreturn (X);")
    assert interpret(p, {}, q=5) == FiniteDistribution.point_mass((3,))


def test_masked_add_deterministic_run():
    p = prepared(MASKED_ADD)
    a = {"A[0]": 1, "A[1]": 0, "B[0]": 1, "B[1]": 1}
    assert interpret(p, a, q=2) == FiniteDistribution.point_mass((0, 1))


def test_enumeration_cap_is_enforced():
    p = prepared("X <- unif;\nY <- unif;\nZ <- unif;\nreturn (X + Y + Z);")
    with pytest.raises(EnumerationCapExceeded):
        interpret(p, {}, q=2, cap=4)
    assert len(interpret(p, {}, q=2)) == 2


def test_missing_input_is_rejected():
    p = prepared(OTP)
    with pytest.raises(ValueError, match="M"):
        interpret(p, {}, q=2)


def test_kernel_compositionality_on_refresh():
    """Splitting a body at any point gives the same mixture semantics."""
    src = (
        "order t = 1;\nshares A[t + 1];\n"
        "R <- unif;\nC0 <- A[0] + R;\nC1 <- A[1] - R;\n"
        "return (C0, C1);"
    )
    full = prepared(src)
    a = {"A[0]": 1, "A[1]": 1}
    for cut in range(1, 3):
        prefix_body = full.body[:cut]
        wires = [s.target.name for s in prefix_body]
        prefix = typecheck(
            full.program.with_body(
                prefix_body, outputs=[s.target for s in prefix_body]
            )
        )
        rest_shares = ShareStructure(
            full.shares.order,
            full.shares.families,
            full.shares.unshared + tuple(wires),
        )
        import dataclasses

        rest = typecheck(
            dataclasses.replace(
                full.program, shares=rest_shares, body=full.body[cut:]
            )
        )
        d_prefix = interpret(prefix, a, q=2)
        mix = FiniteDistribution.mixture(
            (p, interpret(rest, {**a, **dict(zip(wires, v))}, q=2))
            for v, p in d_prefix.items()
        )
        assert mix == interpret(full, a, q=2)


# ---------------------------------------------------------------------------
# FiniteDistribution algebra


def test_distribution_validation():
    with pytest.raises(ValueError, match="sum"):
        FiniteDistribution({(0,): Fraction(1, 2)})
    with pytest.raises(ValueError, match="negative"):
        FiniteDistribution({(0,): Fraction(3, 2), (1,): Fraction(-1, 2)})
    d = FiniteDistribution({(0,): Fraction(1), (1,): Fraction(0)})
    assert len(d) == 1 and d.prob((1,)) == 0


def test_marginal_examples():
    u2 = FiniteDistribution.uniform([(0, 0), (0, 1), (1, 0), (1, 1)])
    assert u2.marginal([0]) == FiniteDistribution.uniform([(0,), (1,)])
    pm = FiniteDistribution.point_mass((0, 1))
    assert pm.marginal([1]) == FiniteDistribution.point_mass((1,))
    half = FiniteDistribution({(0, 0): Fraction(1, 2), (1, 0): Fraction(1, 2)})
    assert half.marginal([1]) == FiniteDistribution.point_mass((0,))


def test_marginal_over_all_positions_is_identity():
    d = FiniteDistribution(
        {(0, 1, 0): Fraction(1, 3), (1, 1, 0): Fraction(2, 3)}
    )
    assert d.marginal([0, 1, 2]) == d


def test_condition_examples():
    u2 = FiniteDistribution.uniform([(0, 0), (0, 1), (1, 0), (1, 1)])
    assert u2.condition([0], [0]) == FiniteDistribution.uniform([(0,), (1,)])
    pm = FiniteDistribution.point_mass((1, 1))
    with pytest.raises(UndefinedConditional):
        pm.condition([0], [0])
    d = FiniteDistribution.uniform([(0, 0), (0, 1), (1, 0)])
    got = d.condition([0], [0])
    assert got == FiniteDistribution.uniform([(0,), (1,)])


def test_product_and_mixture():
    u = FiniteDistribution.uniform([(0,), (1,)])
    prod = FiniteDistribution.product(u, u)
    assert prod == FiniteDistribution.uniform([(0, 0), (0, 1), (1, 0), (1, 1)])
    mix = FiniteDistribution.mixture(
        [(Fraction(1, 2), FiniteDistribution.point_mass((0,))), (Fraction(1, 2), u)]
    )
    assert mix == FiniteDistribution({(0,): Fraction(3, 4), (1,): Fraction(1, 4)})


def test_json_round_trip_is_bit_exact():
    d = FiniteDistribution(
        {(0, (True, 2)): Fraction(1, 3), (1, (False, 0)): Fraction(2, 3)}
    )
    blob = d.to_jsonable()
    assert blob[0]["prob"] == "1/3"
    import json

    assert FiniteDistribution.from_jsonable(json.loads(json.dumps(blob))) == d


# ---------------------------------------------------------------------------
# Property tests


@st.composite
def joints(draw, arity=3, domain=(0, 1)):
    n = len(domain) ** arity
    from itertools import product as iproduct

    space = list(iproduct(domain, repeat=arity))
    weights = draw(
        st.lists(st.integers(0, 8), min_size=n, max_size=n).filter(
            lambda w: sum(w) > 0
        )
    )
    total = sum(weights)
    return FiniteDistribution(
        {v: Fraction(w, total) for v, w in zip(space, weights) if w}
    )


@given(joints())
def test_projection_identity_property(d):
    assert d.marginal(range(d.arity)) == d


@given(joints(), st.integers(0, 2))
def test_chain_rule_matches_direct_summation(d, pos):
    for value in {v[pos] for v in d.support()}:
        cond = d.condition([pos], [value])
        keep = [i for i in range(d.arity) if i != pos]
        total = sum(p for v, p in d.items() if v[pos] == value)
        direct = {}
        for v, p in d.items():
            if v[pos] == value:
                key = tuple(v[i] for i in keep)
                direct[key] = direct.get(key, Fraction(0)) + p / total
        assert cond == FiniteDistribution(direct)
