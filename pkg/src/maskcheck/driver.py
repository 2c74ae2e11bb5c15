"""Run orchestration: engine policy, probe-sweep parallelism, reports.

A run loads one gadget, enumerates the probe sets its property quantifies
over, sends each set through the configured engine, and assembles a JSON-
serializable report. The symbolic engine is tried first under the hybrid
policy and the exact oracle only decides what rewriting could not, so the
report records per probe set which engine produced the answer.

Reports are deterministic: for a fixed config the JSON body is byte-
identical across runs and across parallelism degrees, except for the
``generated_at`` timestamp. Workers are pure functions of (source,
config, probe set); the parent merges their results in enumeration order.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import CORPUS
from .dsl import (
    MaskcheckError,
    TypedProgram,
    expose_internals,
    parse_gadget,
    typecheck,
    unroll,
)
from .oracle import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapExceeded,
    NIQuery,
    OracleContext,
    PROPERTIES,
    check_io_ni,
    check_probe_set,
    enumerate_probe_sets,
    probe_bounds,
)
from .symbolic import needed_inputs, to_symbolic, uniformize, verify_io_ni_symbolic

SCHEMA = "maskcheck-report/1"
CHECKPOINT_VERSION = 1
ENGINES = ("oracle", "symbolic", "hybrid")
FORMATS = ("human", "json")
RUN_PROPERTIES = ("io-ni",) + PROPERTIES

EXIT_VERIFIED = 0
EXIT_REFUTED = 1
EXIT_UNKNOWN = 2
EXIT_USAGE = 3

_EXIT_BY_STATUS = {
    "verified": EXIT_VERIFIED,
    "refuted": EXIT_REFUTED,
    "unknown": EXIT_UNKNOWN,
}

_CHECKPOINT_FLUSH_EVERY = 16


class UsageError(MaskcheckError):
    """Bad configuration or unreadable/unparsable input (exit code 3)."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one verification run depends on.

    ``t`` defaults to the gadget's declared masking order. ``probes`` and
    ``i_set`` apply to the single-pair ``io-ni`` property only; the
    quantified properties enumerate probe sets themselves.
    """

    gadget: str | Path
    prop: str = "t-sni"
    t: int | None = None
    q: int = 2
    engine: str = "hybrid"
    jobs: int = 1
    cap: int = DEFAULT_ENUMERATION_CAP
    probe_cap: int | None = None
    format: str = "human"
    checkpoint: str | Path | None = None
    i_set: tuple[str, ...] = ()
    probes: tuple[str, ...] = ()
    allow_units: bool = False
    unshared_mode: str = "internal"

    def validated(self) -> "RunConfig":
        if self.prop not in RUN_PROPERTIES:
            raise UsageError(
                f"unknown property {self.prop!r}; expected one of "
                f"{', '.join(RUN_PROPERTIES)}"
            )
        if self.engine not in ENGINES:
            raise UsageError(
                f"unknown engine {self.engine!r}; expected one of "
                f"{', '.join(ENGINES)}"
            )
        if self.format not in FORMATS:
            raise UsageError(
                f"unknown format {self.format!r}; expected one of "
                f"{', '.join(FORMATS)}"
            )
        if self.t is not None and self.t < 0:
            raise UsageError(f"t must be >= 0, got {self.t}")
        if self.q < 2:
            raise UsageError(f"q must be >= 2, got {self.q}")
        if self.cap <= 0:
            raise UsageError(f"enumeration cap must be positive, got {self.cap}")
        if self.probe_cap is not None and self.probe_cap <= 0:
            raise UsageError(
                f"probe cap must be positive, got {self.probe_cap}"
            )
        if self.jobs < 1:
            raise UsageError(f"jobs must be >= 1, got {self.jobs}")
        if self.unshared_mode not in ("internal", "total"):
            raise UsageError(
                f"unshared mode must be 'internal' or 'total', got "
                f"{self.unshared_mode!r}"
            )
        if self.prop == "io-ni" and not self.probes:
            raise UsageError("io-ni needs an explicit probe set (-o/--probes)")
        if self.prop != "io-ni" and (self.probes or self.i_set):
            raise UsageError(
                f"{self.prop} enumerates probe sets itself; -i/-o apply "
                "to io-ni only"
            )
        return self


def load_gadget(path: str | Path) -> tuple[str, TypedProgram]:
    """Read, parse, check, unroll, and expose one .gdl file."""
    try:
        source = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read gadget file: {exc}") from None
    return source, prepare(source)


def prepare(source: str) -> TypedProgram:
    try:
        return expose_internals(unroll(typecheck(parse_gadget(source))))
    except MaskcheckError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# Engine policy


class Checker:
    """Per-process checking state: one program, lazy engines.

    The symbolic state is immutable and shared across probe sets; the
    oracle context is built only when some probe set actually needs
    exhaustive enumeration, so purely symbolic runs never pay for it.
    """

    def __init__(self, program: TypedProgram, cfg: RunConfig):
        self.program = program
        self.cfg = cfg
        self._state = None
        self._ctx: OracleContext | None = None
        exposure = program.exposure
        if exposure is None:
            raise UsageError("property checks need a program with exposed internals")
        self._internal = frozenset(exposure.internal_names)
        self._families = program.shares.families
        self._unshared = frozenset(program.shares.unshared)

    def state(self):
        if self._state is None:
            self._state = to_symbolic(self.program, self.cfg.q)
        return self._state

    def ctx(self) -> OracleContext:
        if self._ctx is None:
            self._ctx = OracleContext(self.program, self.cfg.q, self.cfg.cap)
        return self._ctx

    def _fits_bounds(self, needed: Iterable[str], probes: tuple[str, ...]) -> bool:
        shared_cap, unshared_cap = probe_bounds(
            self.cfg.prop, probes, self._internal, self.cfg.unshared_mode
        )
        need = set(needed)
        if len(need & self._unshared) > unshared_cap:
            return False
        return all(
            len(need & set(fam.members)) <= shared_cap for fam in self._families
        )

    def _symbolic(self, probes: tuple[str, ...]) -> dict | None:
        """Probe-set result from rewriting alone, or None if inconclusive."""
        res = uniformize(self.state(), probes, allow_units=self.cfg.allow_units)
        needed = needed_inputs(res.state, probes)
        if self._fits_bounds(needed, probes):
            verdict = verify_io_ni_symbolic(
                self.program,
                needed,
                probes,
                self.cfg.q,
                allow_units=self.cfg.allow_units,
            )
            return {
                "probes": list(probes),
                "status": "verified",
                "engine": "symbolic",
                "witness": list(needed),
                "certificate": verdict.certificate.to_jsonable(),
            }
        return None

    def _symbolic_unknown(self, probes: tuple[str, ...]) -> dict:
        res = uniformize(self.state(), probes, allow_units=self.cfg.allow_units)
        needed = needed_inputs(res.state, probes)
        return {
            "probes": list(probes),
            "status": "unknown",
            "engine": "symbolic",
            "reason": (
                "rewriting leaves the probes dependent on "
                f"{{{', '.join(needed)}}}, beyond the property's bounds"
            ),
            "missed": [m.to_jsonable() for m in res.missed],
        }

    def probe_set_result(self, probes: tuple[str, ...]) -> dict:
        if self.cfg.engine in ("symbolic", "hybrid"):
            result = self._symbolic(probes)
            if result is not None:
                return result
            if self.cfg.engine == "symbolic":
                return self._symbolic_unknown(probes)
        try:
            return check_probe_set(
                self.ctx(), self.cfg.prop, probes, self.cfg.unshared_mode
            ).to_jsonable()
        except EnumerationCapExceeded as exc:
            return {
                "probes": list(probes),
                "status": "unknown",
                "engine": "oracle",
                "reason": str(exc),
            }

    def io_ni_result(self) -> dict:
        i_set, probes = self.cfg.i_set, self.cfg.probes
        if self.cfg.engine in ("symbolic", "hybrid"):
            verdict = verify_io_ni_symbolic(
                self.program,
                i_set,
                probes,
                self.cfg.q,
                allow_units=self.cfg.allow_units,
            )
            if verdict.status == "verified":
                out = verdict.to_jsonable()
                out["engine"] = "symbolic"
                return out
            if self.cfg.engine == "symbolic":
                out = verdict.to_jsonable()
                out["engine"] = "symbolic"
                return out
        verdict = check_io_ni(
            NIQuery(
                program=self.program,
                i_set=frozenset(i_set),
                probes=frozenset(probes),
                q=self.cfg.q,
                cap=self.cfg.cap,
            )
        )
        out = verdict.to_jsonable()
        out["engine"] = "oracle"
        return out


# ---------------------------------------------------------------------------
# Worker pool plumbing. Workers rebuild the checker from plain data once
# per process and then answer (index, probe set) queries.

_WORKER_CHECKER: Checker | None = None


def _init_worker(source: str, cfg: RunConfig) -> None:
    global _WORKER_CHECKER
    _WORKER_CHECKER = Checker(prepare(source), cfg)


def _work_one(task: tuple[int, tuple[str, ...]]) -> tuple[int, dict]:
    idx, probes = task
    assert _WORKER_CHECKER is not None
    return idx, _WORKER_CHECKER.probe_set_result(probes)


# ---------------------------------------------------------------------------
# Checkpoints


def _fingerprint(source: str, cfg: RunConfig) -> str:
    """Hash of everything that determines per-probe-set results.

    ``t`` and ``probe_cap`` only select which sets get enumerated, not
    what any one set's result is, so they stay out: a capped or
    low-budget partial run seeds a later full one.
    """
    payload = json.dumps(
        {
            "source": source,
            "property": cfg.prop,
            "q": cfg.q,
            "engine": cfg.engine,
            "cap": cfg.cap,
            "allow_units": cfg.allow_units,
            "unshared_mode": cfg.unshared_mode,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _load_checkpoint(path: Path, fingerprint: str) -> dict[str, dict]:
    """Completed results keyed by probe set, or empty on any mismatch."""
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return {}
    if (
        data.get("version") != CHECKPOINT_VERSION
        or data.get("fingerprint") != fingerprint
    ):
        return {}
    completed = data.get("completed")
    return dict(completed) if isinstance(completed, dict) else {}


def _save_checkpoint(path: Path, fingerprint: str, completed: Mapping[str, dict]):
    payload = {
        "version": CHECKPOINT_VERSION,
        "fingerprint": fingerprint,
        "completed": dict(completed),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True))
    os.replace(tmp, path)


def _probe_key(probes: tuple[str, ...]) -> str:
    return json.dumps(list(probes))


# ---------------------------------------------------------------------------
# Runs


def _aggregate(results: list[dict], unchecked: list) -> str:
    statuses = {r["status"] for r in results}
    if "refuted" in statuses:
        return "refuted"
    if "unknown" in statuses or unchecked:
        return "unknown"
    return "verified"


def _summarize(results: list[dict]) -> dict:
    by_status = {"verified": 0, "refuted": 0, "unknown": 0}
    by_engine: dict[str, int] = {}
    for r in results:
        by_status[r["status"]] += 1
        by_engine[r["engine"]] = by_engine.get(r["engine"], 0) + 1
    return {
        "probe_sets": len(results),
        **by_status,
        "by_engine": dict(sorted(by_engine.items())),
    }


def _base_report(cfg: RunConfig, source: str, program: TypedProgram) -> dict:
    check: dict = {
        "property": cfg.prop,
        "q": cfg.q,
        "engine": cfg.engine,
        "cap": cfg.cap,
        "allow_units": cfg.allow_units,
    }
    if cfg.prop == "io-ni":
        check["i_set"] = list(cfg.i_set)
        check["probes"] = list(cfg.probes)
    else:
        check["t"] = cfg.t if cfg.t is not None else program.shares.order
        check["probe_cap"] = cfg.probe_cap
        check["unshared_mode"] = cfg.unshared_mode
    return {
        "schema": SCHEMA,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "gadget": {
            "name": program.program.name,
            "path": str(cfg.gadget),
            "source_sha256": hashlib.sha256(source.encode()).hexdigest(),
        },
        "check": check,
    }


def _run_io_ni(cfg: RunConfig, source: str, program: TypedProgram) -> dict:
    report = _base_report(cfg, source, program)
    checker = Checker(program, cfg)
    try:
        verdict = checker.io_ni_result()
    except KeyError as exc:
        raise UsageError(str(exc).strip("'\"")) from None
    report["status"] = verdict["status"]
    report["result"] = verdict
    return report


def _run_enumerated(cfg: RunConfig, source: str, program: TypedProgram) -> dict:
    report = _base_report(cfg, source, program)
    budget = cfg.t if cfg.t is not None else program.shares.order
    sets = enumerate_probe_sets(program.output_names, budget)
    unchecked: list[tuple[str, ...]] = []
    if cfg.probe_cap is not None and len(sets) > cfg.probe_cap:
        sets, unchecked = sets[: cfg.probe_cap], sets[cfg.probe_cap :]

    fingerprint = _fingerprint(source, cfg)
    checkpoint = Path(cfg.checkpoint) if cfg.checkpoint else None
    completed: dict[str, dict] = (
        _load_checkpoint(checkpoint, fingerprint) if checkpoint else {}
    )

    pending = [
        (i, probes)
        for i, probes in enumerate(sets)
        if _probe_key(probes) not in completed
    ]
    fresh: dict[int, dict] = {}

    def merge(idx: int, result: dict) -> None:
        fresh[idx] = result
        completed[_probe_key(sets[idx])] = result
        if checkpoint and len(fresh) % _CHECKPOINT_FLUSH_EVERY == 0:
            _save_checkpoint(checkpoint, fingerprint, completed)

    if pending and cfg.jobs > 1:
        chunk = max(1, len(pending) // (cfg.jobs * 4))
        with ProcessPoolExecutor(
            max_workers=cfg.jobs,
            initializer=_init_worker,
            initargs=(source, replace(cfg, jobs=1, checkpoint=None)),
        ) as pool:
            for idx, result in pool.map(_work_one, pending, chunksize=chunk):
                merge(idx, result)
    elif pending:
        checker = Checker(program, cfg)
        for idx, probes in pending:
            merge(idx, checker.probe_set_result(probes))

    if checkpoint:
        _save_checkpoint(checkpoint, fingerprint, completed)

    results = [completed[_probe_key(probes)] for probes in sets]
    report["status"] = _aggregate(results, unchecked)
    report["probe_results"] = results
    report["unchecked"] = [list(p) for p in unchecked]
    if unchecked:
        report["reason"] = f"{len(unchecked)} probe sets beyond the cap"
    report["summary"] = _summarize(results)
    return report


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute one configured check; return (exit code, report)."""
    cfg = cfg.validated()
    source, program = load_gadget(cfg.gadget)
    if cfg.prop == "io-ni":
        report = _run_io_ni(cfg, source, program)
    else:
        report = _run_enumerated(cfg, source, program)
    return _EXIT_BY_STATUS[report["status"]], report


def oracle_ci(cfg: RunConfig) -> tuple[int, dict]:
    """Answer one (I, O) pair with the exact oracle, no symbolic step."""
    return run(replace(cfg, prop="io-ni", engine="oracle"))


# ---------------------------------------------------------------------------
# Corpus verification


def _formula_agreement(entry, results: list[dict]) -> dict | None:
    """Diff verified witnesses against the entry's closed-form I-sets."""
    if entry.formula is None:
        return None
    checked = mismatches = 0
    first_bad = None
    for r in results:
        if r["status"] != "verified":
            continue
        checked += 1
        witness = set(r.get("witness", ()))
        expected = entry.formula_i(tuple(r["probes"]))
        ok = witness == expected if entry.formula_relation == "equal" else (
            witness <= expected
        )
        if not ok:
            mismatches += 1
            if first_bad is None:
                first_bad = {
                    "probes": r["probes"],
                    "witness": sorted(witness),
                    "formula": sorted(expected),
                }
    out = {
        "formula": entry.formula,
        "relation": entry.formula_relation,
        "checked": checked,
        "mismatches": mismatches,
    }
    if first_bad is not None:
        out["first_mismatch"] = first_bad
    return out


def corpus_verify(jobs: int = 1) -> tuple[int, dict]:
    """Re-check every shipped gadget at its configured (t, q).

    Exit code 0 when every entry's verdict matches its expectation and
    every witness agrees with its formula; 2 if anything came back
    unknown; 1 otherwise.
    """
    rows = []
    saw_refuted = saw_unknown = False
    for entry in CORPUS:
        cfg = RunConfig(
            gadget=f"corpus:{entry.name}",
            prop=entry.prop,
            t=entry.t,
            q=entry.q,
            engine="hybrid",
            jobs=jobs,
        ).validated()
        program = prepare(entry.source)
        report = _run_enumerated(cfg, entry.source, program)
        agreement = _formula_agreement(entry, report["probe_results"])
        as_expected = report["status"] == entry.expected and (
            agreement is None or agreement["mismatches"] == 0
        )
        if not as_expected:
            if report["status"] == "unknown":
                saw_unknown = True
            else:
                saw_refuted = True
        row = {
            "name": entry.name,
            "property": entry.prop,
            "t": entry.t,
            "q": entry.q,
            "expected": entry.expected,
            "status": report["status"],
            "as_expected": as_expected,
            "probe_sets": report["summary"]["probe_sets"],
            "by_engine": report["summary"]["by_engine"],
        }
        if agreement is not None:
            row["formula_agreement"] = agreement
        rows.append(row)
    status = "refuted" if saw_refuted else ("unknown" if saw_unknown else "verified")
    report = {
        "schema": SCHEMA,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "corpus": rows,
        "status": status,
    }
    return _EXIT_BY_STATUS[status], report


# ---------------------------------------------------------------------------
# Rendering


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _table(rows: list[list[str]], header: list[str]) -> str:
    widths = [
        max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))
    ]
    lines = [
        "  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip()
        for row in [header, ["-" * w for w in widths]] + rows
    ]
    return "\n".join(lines)


def _fmt_probes(probes: list) -> str:
    return ", ".join(probes) if probes else "(empty)"


def _fmt_witness(result: dict) -> str:
    if result["status"] == "verified":
        witness = result.get("witness", [])
        return "{" + ", ".join(witness) + "}"
    if result["status"] == "refuted":
        return "counterexample"
    return result.get("reason", "")


def _render_counterexample(ce: dict) -> list[str]:
    def fmt_assign(a: dict) -> str:
        return ", ".join(f"{k}={v}" for k, v in a.items())

    def fmt_marginal(m) -> str:
        return "; ".join(f"{tuple(p['value'])}: {p['prob']}" for p in m)

    return [
        f"  probes:       {_fmt_probes(ce['probes'])}",
        f"  I candidate:  {_fmt_probes(ce['i_set'])}",
        f"  assignment a: {fmt_assign(ce['assignment_a'])}",
        f"  assignment b: {fmt_assign(ce['assignment_b'])}",
        f"  marginal a:   {fmt_marginal(ce['marginal_a'])}",
        f"  marginal b:   {fmt_marginal(ce['marginal_b'])}",
    ]


def report_human(report: dict) -> str:
    if "corpus" in report:
        return _corpus_human(report)
    gadget = report["gadget"]
    check = report["check"]
    head = [
        f"gadget {gadget['name']} ({gadget['path']})",
        " ".join(
            f"{k}={check[k]}"
            for k in ("property", "t", "q", "engine")
            if k in check and check[k] is not None
        ),
        f"status: {report['status']}",
        "",
    ]
    if "result" in report:  # io-ni single pair
        result = report["result"]
        lines = head + [
            f"I = {_fmt_probes(check['i_set'])}",
            f"O = {_fmt_probes(check['probes'])}",
            f"engine: {result['engine']}",
        ]
        if result.get("needed") is not None:
            lines.append(f"simulator reads: {_fmt_probes(result['needed'])}")
        for pr in result.get("probe_results", ()):
            if pr.get("counterexample"):
                lines += ["", "counterexample:"]
                lines += _render_counterexample(pr["counterexample"])
        if result.get("reason"):
            lines.append(f"reason: {result['reason']}")
        return "\n".join(lines) + "\n"
    rows = [
        [
            _fmt_probes(r["probes"]),
            r["engine"],
            r["status"],
            _fmt_witness(r),
        ]
        for r in report["probe_results"]
    ]
    lines = head + [_table(rows, ["probe set", "engine", "status", "I witness"])]
    summary = report["summary"]
    lines += [
        "",
        f"{summary['probe_sets']} probe sets: "
        f"{summary['verified']} verified, {summary['refuted']} refuted, "
        f"{summary['unknown']} unknown "
        f"({', '.join(f'{v} via {k}' for k, v in summary['by_engine'].items())})",
    ]
    if report.get("unchecked"):
        lines.append(f"unchecked (beyond probe cap): {len(report['unchecked'])}")
    for r in report["probe_results"]:
        if r.get("counterexample"):
            lines += ["", f"counterexample for {_fmt_probes(r['probes'])}:"]
            lines += _render_counterexample(r["counterexample"])
            break
    return "\n".join(lines) + "\n"


def _corpus_human(report: dict) -> str:
    rows = []
    for row in report["corpus"]:
        agreement = row.get("formula_agreement")
        if agreement is None:
            formula = "-"
        else:
            formula = (
                f"{agreement['relation']} ok"
                if agreement["mismatches"] == 0
                else f"{agreement['mismatches']} mismatches"
            )
        rows.append(
            [
                row["name"],
                row["property"],
                str(row["t"]),
                str(row["q"]),
                row["status"],
                "yes" if row["as_expected"] else "NO",
                formula,
                str(row["probe_sets"]),
            ]
        )
    table = _table(
        rows,
        ["gadget", "property", "t", "q", "status", "as expected", "formula", "sets"],
    )
    return table + f"\nstatus: {report['status']}\n"


def render_report(report: dict, format: str) -> str:
    return report_json(report) if format == "json" else report_human(report)
