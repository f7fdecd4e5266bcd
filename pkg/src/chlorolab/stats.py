"""Correlation analysis and min-max rescaling for (date, NDVI, CF) triples.

Dates are encoded as integer days since the earliest training observation
before scaling, so the scaled triple lives in [0, 1]^3. Test-time values
outside the fitted range are clamped back into [0, 1].
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateSeriesError

CF_PA_MIN = 0.0
CF_PA_MAX = 10_000.0

GROUND_TRUTH_HEADER = ["field_id", "zone_id", "date", "ndvi_mean", "cf_pA"]


@dataclass(frozen=True)
class GroundTruthSample:
    """One field-zone observation: mean NDVI paired with a lab CF reading."""

    field_id: str
    zone_id: str
    date: dt.date
    ndvi_mean: float
    cf_pA: float

    def __post_init__(self):
        if not -1.0 <= self.ndvi_mean <= 1.0:
            raise ValueError(f"ndvi_mean {self.ndvi_mean} outside [-1, 1]")
        if not CF_PA_MIN <= self.cf_pA <= CF_PA_MAX:
            raise ValueError(f"cf_pA {self.cf_pA} outside [0, 10000]")


@dataclass(frozen=True)
class ScaledTriple:
    date01: float
    ndvi01: float
    cf01: float

    def __post_init__(self):
        for name in ("date01", "ndvi01", "cf01"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.date01, self.ndvi01, self.cf01])


@dataclass(frozen=True)
class ScaleParams:
    """Per-dimension (min, max) for (date_days, ndvi, cf) plus the date origin.

    `date_origin` is the earliest training date; dates are converted to
    day offsets from it before min-max scaling.
    """

    date_origin: dt.date
    mins: tuple[float, float, float]
    maxs: tuple[float, float, float]

    def __post_init__(self):
        for lo, hi in zip(self.mins, self.maxs):
            if not hi > lo:
                raise ValueError(f"degenerate scale dimension: min={lo} max={hi}")

    def date_to_days(self, date: dt.date) -> float:
        return float((date - self.date_origin).days)

    def to_json_dict(self) -> dict:
        return {
            "date_origin": self.date_origin.isoformat(),
            "mins": list(self.mins),
            "maxs": list(self.maxs),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ScaleParams":
        return cls(
            date_origin=dt.date.fromisoformat(d["date_origin"]),
            mins=tuple(float(x) for x in d["mins"]),
            maxs=tuple(float(x) for x in d["maxs"]),
        )


def _rankdata(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based); ties receive the mean of their rank span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def correlation(xs: Sequence[float], ys: Sequence[float], method: str = "pearson") -> float:
    """Pearson product-moment or Spearman rank correlation in [-1, 1]."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be equal-length 1D sequences")
    if len(x) < 2:
        raise ValueError("need at least 2 points")
    if method == "spearman":
        x = _rankdata(x)
        y = _rankdata(y)
    elif method != "pearson":
        raise ValueError(f"unknown method {method!r}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum())
    sy = np.sqrt((yc * yc).sum())
    if sx == 0.0 or sy == 0.0:
        raise DegenerateSeriesError("degenerate series: zero variance")
    r = float((xc * yc).sum() / (sx * sy))
    return min(1.0, max(-1.0, r))


def correlation_matrix(samples: Sequence[tuple[float, float, float]], method: str = "pearson") -> np.ndarray:
    """3x3 correlation matrix of (date_num, ndvi, cf) samples.

    Entry order follows the reporting convention (NDVI, CF, Date).
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("samples must be (N, 3) triples of (date_num, ndvi, cf)")
    if arr.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    date_num, ndvi, cf = arr[:, 0], arr[:, 1], arr[:, 2]
    cols = [ndvi, cf, date_num]
    mat = np.eye(3)
    for i in range(3):
        for j in range(i + 1, 3):
            r = correlation(cols[i], cols[j], method)
            mat[i, j] = mat[j, i] = r
    return mat


def _to_raw_triples(samples: Iterable[GroundTruthSample], origin: dt.date) -> np.ndarray:
    return np.array(
        [[(s.date - origin).days, s.ndvi_mean, s.cf_pA] for s in samples],
        dtype=float,
    )


def fit_scale(samples: Sequence[GroundTruthSample]) -> ScaleParams:
    """Learn per-dimension min-max bounds from training samples."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit a scale")
    origin = min(s.date for s in samples)
    raw = _to_raw_triples(samples, origin)
    mins = raw.min(axis=0)
    maxs = raw.max(axis=0)
    for d, name in enumerate(("date", "ndvi", "cf")):
        if maxs[d] <= mins[d]:
            raise DegenerateSeriesError(f"constant {name} dimension, cannot scale")
    return ScaleParams(date_origin=origin, mins=tuple(mins), maxs=tuple(maxs))


def apply_scale(sample: GroundTruthSample, params: ScaleParams) -> ScaledTriple:
    """Min-max scale a sample; out-of-range values clamp to [0, 1]."""
    raw = (
        params.date_to_days(sample.date),
        sample.ndvi_mean,
        sample.cf_pA,
    )
    vals = []
    for v, lo, hi in zip(raw, params.mins, params.maxs):
        vals.append(min(1.0, max(0.0, (v - lo) / (hi - lo))))
    return ScaledTriple(*vals)


def scale_values(date: dt.date, ndvi: float, cf_pA: float, params: ScaleParams) -> ScaledTriple:
    """Scale loose (date, ndvi, cf) values without building a sample."""
    raw = (params.date_to_days(date), ndvi, cf_pA)
    vals = [min(1.0, max(0.0, (v - lo) / (hi - lo))) for v, lo, hi in zip(raw, params.mins, params.maxs)]
    return ScaledTriple(*vals)


def scale_partial(date: dt.date, ndvi: float, params: ScaleParams) -> tuple[float, float]:
    """Scale only the conditioning pair (date, ndvi), clamped to [0, 1]."""
    d = (params.date_to_days(date) - params.mins[0]) / (params.maxs[0] - params.mins[0])
    n = (ndvi - params.mins[1]) / (params.maxs[1] - params.mins[1])
    return (min(1.0, max(0.0, d)), min(1.0, max(0.0, n)))


def invert_scale(triple: ScaledTriple, params: ScaleParams) -> tuple[float, float, float]:
    """Map a scaled triple back to (date_days, ndvi, cf_pA)."""
    vals = []
    for v, lo, hi in zip((triple.date01, triple.ndvi01, triple.cf01), params.mins, params.maxs):
        vals.append(lo + v * (hi - lo))
    return tuple(vals)


def scaled_matrix(samples: Sequence[GroundTruthSample], params: ScaleParams) -> np.ndarray:
    """Scale many samples at once into an (N, 3) array."""
    return np.array([apply_scale(s, params).as_array() for s in samples])


def read_ground_truth_csv(path: str | Path) -> list[GroundTruthSample]:
    """Read ground-truth samples (header field_id,zone_id,date,ndvi_mean,cf_pA)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != GROUND_TRUTH_HEADER:
            raise ValueError(
                f"unexpected ground-truth header {reader.fieldnames}, want {GROUND_TRUTH_HEADER}"
            )
        samples = []
        for row in reader:
            samples.append(
                GroundTruthSample(
                    field_id=row["field_id"],
                    zone_id=row["zone_id"],
                    date=dt.date.fromisoformat(row["date"]),
                    ndvi_mean=float(row["ndvi_mean"]),
                    cf_pA=float(row["cf_pA"]),
                )
            )
    return samples


def write_ground_truth_csv(samples: Iterable[GroundTruthSample], path: str | Path) -> None:
    """Write samples as RFC 4180 CSV (CRLF line endings, UTF-8)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for s in samples:
            writer.writerow(
                [s.field_id, s.zone_id, s.date.isoformat(), repr(s.ndvi_mean), repr(s.cf_pA)]
            )


def field_counts(samples: Iterable[GroundTruthSample]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for s in samples:
        counts[s.field_id] = counts.get(s.field_id, 0) + 1
    return counts
