"""Scenario and sweep files: YAML in, trace/metrics/report out.

A scenario file is a mapping whose keys are those of
:class:`~bftlab.simnet.config.SimConfig`, plus a few harness keys:

``name`` / ``description``
    free text, copied into the report.
``seeds``
    list of seeds; one run per seed (default: the ``seed`` key).
``liveness_bound``
    window in views for the liveness oracle (default ``2n``).
``check_liveness``
    set to false when a scenario is expected to stall.

A sweep file adds ``sweep: {key: <dotted key>, values: [...]}`` and an
optional ``reference`` mapping of dotted keys whose values replace the swept
configuration to produce a comparison run (for example the same Byzantine
set with ``adversary.strategy: none``).

Errors carry the line of the offending key when it can be located.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..simnet import ConfigError, SimConfig, from_dict, run
from ..simnet.trace import Trace
from .metrics import Metrics, compute_metrics, to_csv, to_jsonl
from .oracles import OracleReport, evaluate

HARNESS_KEYS = ("name", "description", "seeds", "liveness_bound", "check_liveness", "sweep", "reference",
                "fuzz")

EXIT_OK, EXIT_SAFETY, EXIT_LIVENESS, EXIT_CONFIG = 0, 2, 3, 4


class ScenarioError(Exception):
    def __init__(self, message: str, source: str = "", line: int | None = None, path: str = "") -> None:
        where = source
        if line is not None:
            where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.message = message
        self.source = source
        self.line = line
        self.path = path


# -- loading -------------------------------------------------------------------


def _split_path(path: str) -> list[str | int]:
    parts: list[str | int] = []
    for chunk in path.split("."):
        while "[" in chunk:
            head, rest = chunk.split("[", 1)
            if head:
                parts.append(head)
            idx, chunk = rest.split("]", 1)
            parts.append(int(idx))
        if chunk:
            parts.append(chunk)
    return parts


def _locate(node: yaml.Node | None, path: str) -> int | None:
    """1-based line of the deepest node on ``path`` that exists."""
    if node is None:
        return None
    line = node.start_mark.line + 1
    for part in _split_path(path):
        if isinstance(node, yaml.MappingNode) and isinstance(part, str):
            for k, v in node.value:
                if k.value == part:
                    line = k.start_mark.line + 1
                    node = v
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            return line
    return line


@dataclass
class ScenarioDoc:
    data: dict[str, Any]
    source: str = ""
    node: yaml.Node | None = None

    def error(self, message: str, path: str = "") -> ScenarioError:
        return ScenarioError(message, self.source, _locate(self.node, path) if path else None, path)

    @property
    def name(self) -> str:
        return str(self.data.get("name") or Path(self.source).stem or "scenario")

    def sim_data(self) -> dict[str, Any]:
        return {k: v for k, v in self.data.items() if k not in HARNESS_KEYS}

    def config(self, overrides: dict[str, Any] | None = None) -> SimConfig:
        data = copy.deepcopy(self.sim_data())
        for key, value in (overrides or {}).items():
            set_dotted(data, key, value)
        try:
            return from_dict(data)
        except ConfigError as exc:
            raise self.error(exc.message, exc.path) from None

    def seeds(self) -> list[int]:
        seeds = self.data.get("seeds")
        if seeds is None:
            return [int(self.data.get("seed", 0))]
        if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            raise self.error("expected a list of integers", "seeds")
        return seeds


def loads(text: str, source: str = "") -> ScenarioDoc:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ScenarioError(str(exc.problem or exc), source, mark.line + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ScenarioError(str(exc), source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping", source, 1)
    doc = ScenarioDoc(data, source, node)
    for key in ("liveness_bound",):
        if key in data and (not isinstance(data[key], int) or data[key] < 1):
            raise doc.error("expected a positive integer", key)
    doc.config()
    if "sweep" in data:
        sweep_spec(doc)
    return doc


def load(path: str | Path) -> ScenarioDoc:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(p)) from None
    return loads(text, str(p))


def set_dotted(data: dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    cur = data
    for part in parts[:-1]:
        nxt = cur.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[part] = nxt
        cur = nxt
    cur[parts[-1]] = value


# -- running -------------------------------------------------------------------


@dataclass
class RunResult:
    seed: int
    trace: Trace
    metrics: Metrics
    report: OracleReport

    @property
    def exit_code(self) -> int:
        return self.report.exit_code


def run_config(cfg: SimConfig, liveness_bound: int | None = None) -> RunResult:
    trace = run(cfg)
    return RunResult(cfg.seed, trace, compute_metrics(trace), evaluate(trace, liveness_bound))


def combined_exit(codes: list[int]) -> int:
    if EXIT_SAFETY in codes:
        return EXIT_SAFETY
    if EXIT_LIVENESS in codes:
        return EXIT_LIVENESS
    return EXIT_OK


@dataclass
class ScenarioOutcome:
    name: str
    results: list[RunResult]
    check_liveness: bool = True
    rows: list[dict[str, Any]] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        codes = []
        for r in self.results:
            code = r.exit_code
            if code == EXIT_LIVENESS and not self.check_liveness:
                code = EXIT_OK
            codes.append(code)
        return combined_exit(codes)

    def report(self) -> dict[str, Any]:
        return {
            "scenario": self.name,
            "exit_code": self.exit_code,
            "check_liveness": self.check_liveness,
            "runs": [
                {"seed": r.seed, "oracles": r.report.to_dict(), "metrics": r.metrics.to_dict()}
                for r in self.results
            ],
            "rows": self.rows,
        }


def run_scenario(doc: ScenarioDoc, seed: int | None = None) -> ScenarioOutcome:
    if "sweep" in doc.data:
        return run_sweep(doc, seed)
    seeds = [seed] if seed is not None else doc.seeds()
    bound = doc.data.get("liveness_bound")
    results = [run_config(doc.config({"seed": s}), bound) for s in seeds]
    out = ScenarioOutcome(doc.name, results, bool(doc.data.get("check_liveness", True)))
    out.rows = [r.metrics.row() for r in results]
    return out


def sweep_spec(doc: ScenarioDoc) -> tuple[str, list[Any], dict[str, Any]]:
    spec = doc.data.get("sweep")
    if not isinstance(spec, dict) or set(spec) != {"key", "values"}:
        raise doc.error("expected a mapping with exactly 'key' and 'values'", "sweep")
    if not isinstance(spec["key"], str) or not isinstance(spec["values"], list) or not spec["values"]:
        raise doc.error("'key' must be a dotted name and 'values' a non-empty list", "sweep")
    reference = doc.data.get("reference") or {}
    if not isinstance(reference, dict):
        raise doc.error("expected a mapping of dotted keys", "reference")
    for value in spec["values"]:
        doc.config({spec["key"]: value})
    return spec["key"], spec["values"], reference


def run_sweep(doc: ScenarioDoc, seed: int | None = None) -> ScenarioOutcome:
    """One run per swept value; rates are normalized to the first value."""
    key, values, reference = sweep_spec(doc)
    seeds = [seed] if seed is not None else doc.seeds()
    bound = doc.data.get("liveness_bound")
    results: list[RunResult] = []
    rows: list[dict[str, Any]] = []
    for s in seeds:
        base_rate = None
        for value in values:
            res = run_config(doc.config({"seed": s, key: value}), bound)
            results.append(res)
            row = {"seed": s, key: value, **res.metrics.row()}
            if base_rate is None:
                base_rate = res.metrics.throughput
            row["normalized"] = res.metrics.throughput / base_rate if base_rate else 0.0
            if reference:
                ref = run_config(doc.config({"seed": s, key: value, **reference}), bound)
                row["reference_throughput"] = ref.metrics.throughput
                row["matches_reference"] = ref.metrics.throughput == res.metrics.throughput
            rows.append(row)
    out = ScenarioOutcome(doc.name, results, bool(doc.data.get("check_liveness", True)))
    out.rows = rows
    return out


# -- exports -------------------------------------------------------------------


def write_outputs(outcome: ScenarioOutcome, out_dir: str | Path, fmt: str = "table") -> Path:
    """``trace[-<seed>[-<i>]].jsonl``, ``metrics.csv`` (or ``.jsonl``), ``report.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    single = len(outcome.results) == 1
    for i, r in enumerate(outcome.results):
        name = "trace.jsonl" if single else f"trace-{r.seed}-{i}.jsonl"
        r.trace.write(out / name)
    if fmt == "jsonl":
        (out / "metrics.jsonl").write_text(to_jsonl(outcome.rows))
    else:
        (out / "metrics.csv").write_text(to_csv(outcome.rows))
    (out / "report.json").write_text(json.dumps(outcome.report(), indent=2, sort_keys=True) + "\n")
    return out


def run_scenario_file(path: str | Path, out_dir: str | Path | None = None, seed: int | None = None,
                      fmt: str = "table") -> tuple[int, ScenarioOutcome | None, str]:
    """Run a scenario or sweep file; returns ``(exit code, outcome, error message)``."""
    try:
        doc = load(path)
        outcome = run_scenario(doc, seed)
    except ScenarioError as exc:
        return EXIT_CONFIG, None, str(exc)
    if out_dir is not None:
        write_outputs(outcome, out_dir, fmt)
    return outcome.exit_code, outcome, ""


__all__ = [
    "EXIT_CONFIG",
    "EXIT_LIVENESS",
    "EXIT_OK",
    "EXIT_SAFETY",
    "RunResult",
    "ScenarioDoc",
    "ScenarioError",
    "ScenarioOutcome",
    "combined_exit",
    "load",
    "loads",
    "run_config",
    "run_scenario",
    "run_scenario_file",
    "run_sweep",
    "set_dotted",
    "write_outputs",
]
