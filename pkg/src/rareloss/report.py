"""Estimate reports and their CSV / JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError

CSV_COLUMNS = ("model", "method", "alpha", "gamma", "ell_hat", "re_pct", "runs", "n_per_run", "seed", "elapsed_ms")


def relative_error(per_run) -> float:
    """std(per_run) / (mean(per_run) sqrt(R)), with the unbiased sample std.

    Zero spread gives 0; a zero mean with nonzero spread gives inf; a
    single run has no spread estimate and gives nan.
    """
    x = np.asarray(per_run, dtype=float)
    if x.size == 0:
        raise DomainError("no runs")
    if x.size == 1:
        return math.nan
    sd = float(np.std(x, ddof=1))
    mean = float(np.mean(x))
    if sd == 0.0:
        return 0.0
    if mean == 0.0:
        return math.inf
    return sd / (abs(mean) * math.sqrt(x.size))


@dataclass
class EstimateReport:
    point: float
    per_run: list[float]
    runs: int
    n_per_run: int
    relative_error: float
    seed: int
    elapsed_ms: float = 0.0
    model: str = ""
    method: str = ""
    alpha: float = math.nan
    gamma: float = math.nan
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_runs(cls, per_run, n_per_run: int, seed: int, elapsed_ms: float = 0.0, **meta) -> "EstimateReport":
        per_run = [float(v) for v in per_run]
        return cls(
            point=float(np.mean(per_run)),
            per_run=per_run,
            runs=len(per_run),
            n_per_run=int(n_per_run),
            relative_error=relative_error(per_run),
            seed=int(seed),
            elapsed_ms=float(elapsed_ms),
            **meta,
        )

    @property
    def std_error(self) -> float:
        """Standard error of the point estimate across runs."""
        if self.runs < 2:
            return math.nan
        return float(np.std(self.per_run, ddof=1) / math.sqrt(self.runs))

    @property
    def re_pct(self) -> float:
        return 100.0 * self.relative_error

    def same_estimates(self, other: "EstimateReport") -> bool:
        """Equality of every field except wall-clock timing."""
        a, b = asdict(self), asdict(other)
        a.pop("elapsed_ms")
        b.pop("elapsed_ms")
        return _nan_equal(a, b)


def _nan_equal(a, b) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_nan_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_nan_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def _fmt(v: float) -> str:
    return repr(float(v))


def csv_row(report: EstimateReport) -> dict:
    return {
        "model": report.model,
        "method": report.method,
        "alpha": _fmt(report.alpha),
        "gamma": _fmt(report.gamma),
        "ell_hat": _fmt(report.point),
        "re_pct": f"{report.re_pct:.2f}",
        "runs": str(report.runs),
        "n_per_run": str(report.n_per_run),
        "seed": str(report.seed),
        "elapsed_ms": f"{report.elapsed_ms:.3f}",
    }


def emit_csv(reports, header: bool = True) -> str:
    if isinstance(reports, EstimateReport):
        reports = [reports]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    if header:
        w.writeheader()
    for r in reports:
        w.writerow(csv_row(r))
    return buf.getvalue()


def parse_csv(text: str) -> list[EstimateReport]:
    """Rebuild reports from CSV rows.

    The CSV carries only the table columns, so ``per_run`` comes back
    empty and ``relative_error`` is recovered from the rounded ``re_pct``.
    """
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        if tuple(row.keys()) != CSV_COLUMNS:
            raise DomainError(f"unexpected CSV columns {tuple(row.keys())}")
        out.append(EstimateReport(
            point=float(row["ell_hat"]),
            per_run=[],
            runs=int(row["runs"]),
            n_per_run=int(row["n_per_run"]),
            relative_error=float(row["re_pct"]) / 100.0,
            seed=int(row["seed"]),
            elapsed_ms=float(row["elapsed_ms"]),
            model=row["model"],
            method=row["method"],
            alpha=float(row["alpha"]),
            gamma=float(row["gamma"]),
        ))
    return out


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.generic):
        return _json_safe(v.item())
    return v


_FLOAT_FIELDS = ("point", "relative_error", "elapsed_ms", "alpha", "gamma")


def emit_json(reports) -> str:
    single = isinstance(reports, EstimateReport)
    items = [reports] if single else list(reports)
    docs = []
    for r in items:
        doc = _json_safe(asdict(r))
        doc["ell_hat"] = doc["point"]
        doc["re_pct"] = _json_safe(r.re_pct)
        docs.append(doc)
    return json.dumps(docs[0] if single else docs, indent=2, sort_keys=True) + "\n"


def _from_doc(doc: dict) -> EstimateReport:
    def num(v):
        return float(v) if isinstance(v, str) else v

    kwargs = {k: doc[k] for k in ("point", "per_run", "runs", "n_per_run", "relative_error", "seed",
                                  "elapsed_ms", "model", "method", "alpha", "gamma", "extra")}
    for k in _FLOAT_FIELDS:
        kwargs[k] = float(num(kwargs[k]))
    kwargs["per_run"] = [float(num(v)) for v in kwargs["per_run"]]
    return EstimateReport(**kwargs)


def parse_json(text: str):
    data = json.loads(text)
    if isinstance(data, list):
        return [_from_doc(d) for d in data]
    return _from_doc(data)


def write_report(reports, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        text = emit_csv(reports)
    elif fmt == "json":
        text = emit_json(reports)
    else:
        raise DomainError(f"unknown report format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
