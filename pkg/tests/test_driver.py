"""Run orchestration: config validation, engine policy, determinism,
checkpointing, and report schema conformance."""

import json
from pathlib import Path

import jsonschema
import pytest

from maskcheck import corpus
from maskcheck.driver import (
    RunConfig,
    UsageError,
    corpus_verify,
    oracle_ci,
    report_human,
    report_json,
    run,
)
from maskcheck.oracle import OracleContext
from maskcheck.semantics import interpret

ROOT = Path(__file__).resolve().parent.parent
GADGETS = ROOT / "gadgets"
SCHEMA = json.loads((ROOT / "docs" / "report.schema.json").read_text())
VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def body(report: dict) -> str:
    """The deterministic part of a rendered report."""
    stripped = dict(report)
    stripped.pop("generated_at")
    return json.dumps(stripped, sort_keys=True)


def write_gadget(tmp_path, source: str) -> Path:
    path = tmp_path / "g.gdl"
    path.write_text(source)
    return path


# ---------------------------------------------------------------------------
# Config validation


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        ({"prop": "t-robust"}, "unknown property"),
        ({"engine": "quantum"}, "unknown engine"),
        ({"format": "xml"}, "unknown format"),
        ({"t": -1}, "t must be >= 0"),
        ({"q": 1}, "q must be >= 2"),
        ({"cap": 0}, "cap must be positive"),
        ({"probe_cap": 0}, "probe cap must be positive"),
        ({"jobs": 0}, "jobs must be >= 1"),
        ({"unshared_mode": "both"}, "unshared mode"),
        ({"prop": "io-ni"}, "explicit probe set"),
        ({"probes": ("C[0][1]",)}, "io-ni only"),
    ],
)
def test_config_rejects(kwargs, fragment):
    with pytest.raises(UsageError, match=fragment):
        RunConfig(gadget="x.gdl", **kwargs).validated()


def test_missing_file_is_usage():
    with pytest.raises(UsageError, match="cannot read"):
        run(RunConfig(gadget="no/such/file.gdl"))


def test_parse_error_is_usage(tmp_path):
    path = write_gadget(tmp_path, "gadget Broken\nreturn;")
    with pytest.raises(UsageError):
        run(RunConfig(gadget=path))


# ---------------------------------------------------------------------------
# Single-gadget runs


def test_refresh_t1_verifies_and_validates():
    code, report = run(
        RunConfig(gadget=GADGETS / "refresh.gdl", prop="t-sni", t=1, q=2)
    )
    assert code == 0 and report["status"] == "verified"
    VALIDATOR.validate(report)
    assert report["summary"]["by_engine"] == {"symbolic": 13}
    for r in report["probe_results"]:
        assert r["status"] == "verified"
        rules = [s["rule"] for s in r["certificate"]["steps"]]
        assert rules.count("Gen-Weak-Union") == 1
        assert rules.count("Transfer-Own") == 1


def test_broken_refresh_refuted_with_replayable_counterexample():
    code, report = run(
        RunConfig(gadget=GADGETS / "broken_refresh.gdl", prop="t-sni", t=1)
    )
    assert code == 1 and report["status"] == "refuted"
    VALIDATOR.validate(report)
    refuted = [r for r in report["probe_results"] if r["status"] == "refuted"]
    assert refuted and all(r["engine"] == "oracle" for r in refuted)
    # the counterexample is machine-checkable: re-interpreting the program
    # under the two recorded assignments reproduces the unequal marginals
    ce = refuted[0]["counterexample"]
    source = (GADGETS / "broken_refresh.gdl").read_text()
    from maskcheck.driver import prepare

    program = prepare(source)
    ctx = OracleContext(program, q=2)
    pos = ctx.positions(tuple(ce["probes"]))
    for key, raw in (("assignment_a", "marginal_a"), ("assignment_b", "marginal_b")):
        dist = interpret(program, ce[key], 2).marginal(pos)
        assert dist.to_jsonable() == ce[raw]
    assert ce["marginal_a"] != ce["marginal_b"]


def test_symbolic_engine_reports_unknown_not_refuted():
    code, report = run(
        RunConfig(
            gadget=GADGETS / "broken_refresh.gdl",
            prop="t-sni",
            t=1,
            engine="symbolic",
        )
    )
    assert code == 2 and report["status"] == "unknown"
    VALIDATOR.validate(report)
    unknowns = [r for r in report["probe_results"] if r["status"] == "unknown"]
    assert unknowns and all(r["engine"] == "symbolic" for r in unknowns)
    assert all("refut" not in r["status"] for r in report["probe_results"])


def test_oracle_engine_never_emits_symbolic_results():
    code, report = run(
        RunConfig(gadget=GADGETS / "refresh.gdl", prop="t-sni", t=1, engine="oracle")
    )
    assert code == 0
    assert set(report["summary"]["by_engine"]) == {"oracle"}


def test_t_zero_has_only_the_empty_probe_set():
    code, report = run(
        RunConfig(gadget=GADGETS / "masked_add.gdl", prop="t-ni", t=0)
    )
    assert code == 0
    assert report["summary"]["probe_sets"] == 1
    assert report["probe_results"][0]["probes"] == []


def test_probe_cap_truncates_and_degrades_to_unknown():
    code, report = run(
        RunConfig(gadget=GADGETS / "refresh.gdl", prop="t-sni", probe_cap=10)
    )
    assert code == 2 and report["status"] == "unknown"
    assert len(report["probe_results"]) == 10
    assert len(report["unchecked"]) == 69
    VALIDATOR.validate(report)


# ---------------------------------------------------------------------------
# io-ni runs


def test_io_ni_symbolic_and_oracle_paths():
    cfg = RunConfig(
        gadget=GADGETS / "refresh.gdl",
        prop="io-ni",
        i_set=("A[0]",),
        probes=("R[0][1]", "C[0][1]"),
    )
    code, report = run(cfg)
    assert code == 0 and report["result"]["engine"] == "symbolic"
    assert report["result"]["needed"] == ["A[0]"]
    VALIDATOR.validate(report)

    code, report = oracle_ci(cfg)
    assert code == 0 and report["result"]["engine"] == "oracle"
    assert report["check"]["engine"] == "oracle"
    VALIDATOR.validate(report)


def test_io_ni_refuted_pair():
    code, report = run(
        RunConfig(
            gadget=GADGETS / "refresh.gdl",
            prop="io-ni",
            engine="oracle",
            probes=("C[0][0]",),
        )
    )
    assert code == 1 and report["status"] == "refuted"
    VALIDATOR.validate(report)
    assert report["result"]["probe_results"][0]["counterexample"]


def test_io_ni_unknown_wire_is_usage():
    with pytest.raises(UsageError, match="unknown wire"):
        run(
            RunConfig(
                gadget=GADGETS / "refresh.gdl", prop="io-ni", probes=("Z[9]",)
            )
        )


# ---------------------------------------------------------------------------
# Determinism and checkpointing


def test_reports_identical_across_parallelism():
    base = dict(gadget=GADGETS / "sec_mult.gdl", prop="t-sni", q=2)
    _, serial = run(RunConfig(jobs=1, **base))
    _, parallel = run(RunConfig(jobs=3, **base))
    assert body(serial) == body(parallel)
    assert serial["summary"]["probe_sets"] == 379


def test_double_run_is_byte_identical_modulo_timestamp():
    cfg = RunConfig(gadget=GADGETS / "refresh.gdl", prop="t-sni", t=1)
    _, a = run(cfg)
    _, b = run(cfg)
    assert body(a) == body(b)


def test_checkpoint_resume_matches_single_run(tmp_path):
    ck = tmp_path / "ck.json"
    base = dict(gadget=GADGETS / "refresh.gdl", prop="t-sni", engine="oracle")
    _, single = run(RunConfig(**base))
    code, partial = run(RunConfig(probe_cap=30, checkpoint=ck, **base))
    assert code == 2
    data = json.loads(ck.read_text())
    assert data["version"] == 1 and len(data["completed"]) == 30
    _, resumed = run(RunConfig(checkpoint=ck, **base))
    assert body(resumed) == body(single)
    assert len(json.loads(ck.read_text())["completed"]) == 79


def test_stale_checkpoint_is_ignored(tmp_path):
    ck = tmp_path / "ck.json"
    cfg = RunConfig(gadget=GADGETS / "refresh.gdl", prop="t-sni", t=1, checkpoint=ck)
    _, first = run(cfg)
    # wrong fingerprint (different engine) and corrupt JSON both restart
    _, other = run(
        RunConfig(
            gadget=GADGETS / "refresh.gdl",
            prop="t-sni",
            t=1,
            engine="oracle",
            checkpoint=ck,
        )
    )
    assert body(first) != body(other)  # engines differ in the report
    ck.write_text("{not json")
    _, again = run(cfg)
    assert body(again) == body(first)


def test_checkpoint_poisoning_cannot_change_fresh_runs(tmp_path):
    # a checkpoint only ever feeds runs with the same fingerprint; a
    # tampered result is trusted within that run (it is a cache), but any
    # config change invalidates it
    ck = tmp_path / "ck.json"
    cfg = RunConfig(gadget=GADGETS / "refresh.gdl", prop="t-sni", t=1, checkpoint=ck)
    run(cfg)
    data = json.loads(ck.read_text())
    data["fingerprint"] = "0" * 64
    ck.write_text(json.dumps(data))
    _, report = run(cfg)
    assert report["status"] == "verified"


# ---------------------------------------------------------------------------
# Corpus verification


def test_corpus_verify_everything_as_expected():
    code, report = corpus_verify()
    assert code == 0 and report["status"] == "verified"
    VALIDATOR.validate(report)
    by_name = {row["name"]: row for row in report["corpus"]}
    assert set(by_name) == {e.name for e in corpus.CORPUS}
    assert all(row["as_expected"] for row in report["corpus"])
    for row in report["corpus"]:
        agreement = row.get("formula_agreement")
        if agreement is not None:
            assert agreement["mismatches"] == 0
            assert agreement["checked"] > 0
    assert by_name["broken-Refresh"]["status"] == "refuted"
    assert by_name["SecMult"]["by_engine"] == {"symbolic": 379}


# ---------------------------------------------------------------------------
# Rendering


def test_human_rendering_has_table_and_counterexample():
    _, report = run(
        RunConfig(gadget=GADGETS / "broken_refresh.gdl", prop="t-sni", t=1)
    )
    text = report_human(report)
    assert "probe set" in text and "I witness" in text
    assert "counterexample for" in text
    assert "assignment a:" in text and "marginal b:" in text


def test_json_rendering_round_trips():
    _, report = run(RunConfig(gadget=GADGETS / "otp.gdl", prop="t-ni"))
    again = json.loads(report_json(report))
    assert body(again) == body(report)
