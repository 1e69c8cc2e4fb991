"""Estimates, standard errors and pass/fail verdicts.

Time series use batch means with 30 batches as the single SE convention.
Estimates from independent chains use the plain iid standard error.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

DEFAULT_BATCHES = 30
REPORT_COLUMNS = ("observable", "estimate", "se", "target", "z", "threshold", "verdict", "reliable")


def batch_means(x: Sequence[float], n_batches: int = DEFAULT_BATCHES) -> Tuple[float, float, bool]:
    """(mean, SE, reliable) of a correlated series.

    The series is cut into ``n_batches`` contiguous batches of equal length
    (the remainder at the start is dropped). With fewer than two batches the
    SE is NaN and flagged unreliable; fewer than ``n_batches`` batches are
    used, and flagged, when the series is too short.
    """
    x = np.asarray(x, float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("need a nonempty 1-d series")
    batches = min(n_batches, x.size)
    if batches < 2:
        return float(x.mean()), math.nan, False
    size = x.size // batches
    means = x[x.size - size * batches:].reshape(batches, size).mean(axis=1)
    se = float(means.std(ddof=1) / math.sqrt(batches))
    return float(x.mean()), se, batches == n_batches


def iid_stderr(x: Sequence[float]) -> float:
    x = np.asarray(x, float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan


@dataclass(frozen=True)
class StatReport:
    observable: str
    estimate: float
    se: float
    target: float
    z: float
    threshold: float
    verdict: str
    reliable: bool = True

    @classmethod
    def from_estimate(cls, observable: str, estimate: float, se: float, target: Optional[float],
                      threshold: float = 4.0, reliable: bool = True) -> "StatReport":
        """Verdict is pass iff |z| < threshold; without a target there is no verdict."""
        if target is None or (isinstance(target, float) and math.isnan(target)):
            return cls(observable, estimate, se, math.nan, math.nan, threshold, "n/a", reliable)
        diff = estimate - target
        if diff == 0:
            z = 0.0
        elif not se > 0:
            z = math.copysign(math.inf, diff)
        else:
            z = diff / se
        verdict = "pass" if abs(z) < threshold else "fail"
        return cls(observable, float(estimate), float(se), float(target), float(z), float(threshold), verdict,
                   reliable)

    @classmethod
    def check(cls, observable: str, value: float, ok: bool, bound: float = math.nan) -> "StatReport":
        """Deterministic check (no sampling error), stored with the bound in ``target``."""
        return cls(observable, float(value), 0.0, float(bound), math.nan, math.nan, "pass" if ok else "fail")

    @property
    def passed(self) -> bool:
        return self.verdict != "fail"


def all_passed(reports: Iterable[StatReport]) -> bool:
    return all(r.passed for r in reports)


def series_report(observable: str, values: Sequence[float], target: Optional[float],
                  threshold: float = 4.0, n_batches: int = DEFAULT_BATCHES) -> StatReport:
    mean, se, reliable = batch_means(values, n_batches)
    return StatReport.from_estimate(observable, mean, se, target, threshold, reliable)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_reports(path: Union[str, Path], reports: Sequence[StatReport], digest: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# run_digest={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])


def read_reports(path: Union[str, Path]) -> List[StatReport]:
    rows = _read_rows(path, REPORT_COLUMNS)
    return [StatReport(r["observable"], float(r["estimate"]), float(r["se"]), float(r["target"]), float(r["z"]),
                       float(r["threshold"]), r["verdict"], r["reliable"] == "True") for r in rows]


def _read_rows(path: Union[str, Path], required: Sequence[str]) -> List[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    return list(reader)


def reports_from_samples(path: Union[str, Path], threshold: float = 4.0,
                         n_batches: int = DEFAULT_BATCHES) -> List[StatReport]:
    """Batch-means reports from a long-format CSV with columns observable, value (and optional target).

    Rows of one observable are taken in file order as a time series.
    """
    rows = _read_rows(path, ("observable", "value"))
    series: dict = {}
    targets: dict = {}
    for r in rows:
        series.setdefault(r["observable"], []).append(float(r["value"]))
        if r.get("target") not in (None, ""):
            targets[r["observable"]] = float(r["target"])
    return [series_report(name, vals, targets.get(name), threshold, n_batches) for name, vals in series.items()]


def format_reports(reports: Sequence[StatReport]) -> str:
    width = max([len(r.observable) for r in reports] + [10])
    lines = [f"{'observable':<{width}}  {'estimate':>12}  {'se':>10}  {'target':>12}  {'z':>8}  verdict"]
    for r in reports:
        flag = "" if r.reliable else "  (SE unreliable)"
        lines.append(f"{r.observable:<{width}}  {r.estimate:>12.5g}  {r.se:>10.3g}  {r.target:>12.5g}  "
                     f"{r.z:>8.3g}  {r.verdict}{flag}")
    return "\n".join(lines)
