"""Structured evaluation reports: versioned JSON plus figure-style CSV series.

Reports are written atomically (temp file then rename) and canonically
(sorted keys, two-space indent, trailing newline) so reruns with the same
configuration and seed produce byte-identical files.  Non-finite metrics
are rejected at serialization time.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

REPORT_FORMAT_VERSION = 1


@dataclass
class EvalReport:
    experiment: str
    config: dict
    counts: dict
    per_relation: dict[str, dict[str, float]]
    micro_average: dict[str, float]
    pooled: dict = field(default_factory=dict)
    series: dict[str, list] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_FORMAT_VERSION,
            "experiment": self.experiment,
            "config": self.config,
            "counts": self.counts,
            "per_relation": self.per_relation,
            "micro_average": self.micro_average,
            "pooled": self.pooled,
            "series": self.series,
            "extras": self.extras,
        }

    def validate(self) -> None:
        """Check metric sanity: finite, in [0, 1], micro recomputable."""
        for relation, metrics in self.per_relation.items():
            for name, value in metrics.items():
                _check_metric(f"per_relation[{relation}][{name}]", value)
        for name, value in self.micro_average.items():
            _check_metric(f"micro_average[{name}]", value)


def _check_metric(where: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{where}: metric must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"{where}: metric is not finite")
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{where}: metric {value} outside [0, 1]")


def report_to_json(report: EvalReport | dict) -> str:
    """Canonical JSON text for a report; raises on NaN/inf anywhere."""
    if isinstance(report, EvalReport):
        report.validate()
        payload = report.to_dict()
    else:
        payload = report
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: EvalReport | dict, path: str) -> None:
    """Serialize the report to ``path`` atomically."""
    _atomic_write(path, report_to_json(report))


def write_csv_series(rows: Sequence[Sequence], header: Sequence[str], path: str) -> None:
    """RFC-4180 CSV companion for plotting a report's series."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_report(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
