"""Accuracy, focal method coverage and repair-attempt metrics, plus reports."""
from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyResultSet
from .verification import VerificationOutcome

SCHEMA_VERSION = 1


def accuracy(outcomes: Sequence[VerificationOutcome]) -> Fraction:
    """Share of outcomes that passed and actually call the focal method."""
    if not outcomes:
        raise EmptyResultSet("accuracy of an empty outcome set")
    return Fraction(sum(o.correct for o in outcomes), len(outcomes))


def focal_method_coverage(outcomes: Sequence[VerificationOutcome], focal_methods: Iterable[str]) -> Fraction:
    """Share of focal methods with at least one correct outcome."""
    focal = set(focal_methods)
    if not focal:
        raise EmptyResultSet("coverage over an empty focal method set")
    stray = {o.focal_key for o in outcomes} - focal
    if stray:
        raise ValueError(f"outcomes target focal methods outside the set: {sorted(stray)[:3]}")
    covered = {o.focal_key for o in outcomes if o.correct}
    return Fraction(len(covered), len(focal))


def avg_repair_attempts(outcomes: Sequence[VerificationOutcome]) -> Fraction:
    if not outcomes:
        raise EmptyResultSet("average over an empty outcome set")
    return Fraction(sum(o.compile_attempts + o.exec_attempts for o in outcomes), len(outcomes))


@dataclass(frozen=True)
class ProjectMetrics:
    accuracy: float
    focal_method_coverage: float
    avg_repair_attempts: float
    n_queries: int


@dataclass
class RunReport:
    per_project: "OrderedDict[str, ProjectMetrics]" = field(default_factory=OrderedDict)
    totals: ProjectMetrics | None = None
    mode: str = "cascaded"
    strategy: str = "random"
    variant: str = "well_crafted"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "strategy": self.strategy,
            "variant": self.variant,
            "per_project": {k: asdict(v) for k, v in self.per_project.items()},
            "totals": asdict(self.totals) if self.totals else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            per_project=OrderedDict((k, ProjectMetrics(**v)) for k, v in d["per_project"].items()),
            totals=ProjectMetrics(**d["totals"]) if d.get("totals") else None,
            mode=d["mode"], strategy=d["strategy"], variant=d["variant"],
        )


def _project_of(focal_key: str) -> str:
    return focal_key.split(":", 1)[0]


def _metrics(outcomes: Sequence[VerificationOutcome], focal: set[str]) -> ProjectMetrics:
    return ProjectMetrics(
        accuracy=float(accuracy(outcomes)),
        focal_method_coverage=float(focal_method_coverage(outcomes, focal)),
        avg_repair_attempts=float(avg_repair_attempts(outcomes)),
        n_queries=len(outcomes),
    )


def build_report(outcomes: Sequence[VerificationOutcome], focal_methods: Iterable[str] | None = None,
                 mode: str = "cascaded", strategy: str = "random", variant: str = "well_crafted") -> RunReport:
    """Aggregate outcomes per project (the prefix of ``focal_key``) and overall."""
    if not outcomes:
        raise EmptyResultSet("no outcomes to report on")
    focal = set(focal_methods) if focal_methods is not None else {o.focal_key for o in outcomes}
    per = OrderedDict()
    for project in sorted({_project_of(o.focal_key) for o in outcomes}):
        group = [o for o in outcomes if _project_of(o.focal_key) == project]
        per[project] = _metrics(group, {f for f in focal if _project_of(f) == project})
    return RunReport(per, _metrics(outcomes, focal), mode, strategy, variant)


def pct(x: float) -> str:
    """0.7716 -> '77.16%'."""
    return f"{x * 100:.2f}%"


def render_report(report: RunReport, format: str = "table") -> str:  # noqa: A002
    if format == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if format != "table":
        raise ValueError(f"unknown report format {format!r}")
    header = ("Project", "# Query", "% Accuracy", "% Focal Method Coverage", "# Average Repair Attempts")
    rows = [(name, str(m.n_queries), pct(m.accuracy), pct(m.focal_method_coverage),
             f"{m.avg_repair_attempts:.3f}") for name, m in report.per_project.items()]
    total = None
    if report.totals is not None:
        m = report.totals
        total = ("All", str(m.n_queries), pct(m.accuracy), pct(m.focal_method_coverage),
                 f"{m.avg_repair_attempts:.3f}")
    widths = [max(len(r[i]) for r in [header, *rows, *([total] if total else [])]) for i in range(5)]

    def line(r):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip()

    rule = "-" * len(line(header))
    out = [f"mode={report.mode} strategy={report.strategy} variant={report.variant}", line(header), rule]
    out += [line(r) for r in rows]
    if total:
        if rows:
            out.append(rule)
        out.append(line(total))
    return "\n".join(out) + "\n"
