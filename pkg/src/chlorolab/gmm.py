"""Gaussian mixture over scaled (date, ndvi, cf), fit by EM.

Component count is chosen from BIC/AIC scores, and the CF dimension can
be conditioned exactly on (date, ndvi) through Gaussian conditioning,
yielding the 1D histograms the weak labeler samples from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import histogram
from .errors import ConditioningError, FitError
from .histogram import Histogram1D
from .stats import ScaleParams

SYMMETRY_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
DENSITY_FLOOR = 1e-300
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 500
    tol: float = 1e-8
    epsilon: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"covariance shape {cov.shape} does not match mean length {d}")
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"component weight {self.weight} outside (0, 1]")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise ValueError("covariance not symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0.0:
            raise ValueError("covariance not positive definite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class GmmModel:
    components: tuple[GaussianComponent, ...]
    fit_log: tuple[float, ...]
    scale: ScaleParams | None = None
    train_fields: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("need at least one component")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"component weights sum to {total!r}, expected 1")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError("components disagree on dimensionality")

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def to_json_dict(self) -> dict:
        return {
            "scale": self.scale.to_json_dict() if self.scale else None,
            "components": [
                {"weight": c.weight, "mean": c.mean.tolist(), "cov": c.cov.tolist()}
                for c in self.components
            ],
            "fit_log": list(self.fit_log),
            "train_fields": list(self.train_fields),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "GmmModel":
        return cls(
            components=tuple(
                GaussianComponent(
                    weight=float(c["weight"]),
                    mean=np.array(c["mean"], dtype=float),
                    cov=np.array(c["cov"], dtype=float),
                )
                for c in d["components"]
            ),
            fit_log=tuple(float(x) for x in d["fit_log"]),
            scale=ScaleParams.from_json_dict(d["scale"]) if d.get("scale") else None,
            train_fields=tuple(d.get("train_fields", ())),
        )


@dataclass(frozen=True)
class SelectionTable:
    """Per-candidate (n_components, BIC, AIC) rows."""

    rows: tuple[tuple[int, float, float], ...] = field(default_factory=tuple)

    def as_lists(self) -> dict:
        return {
            "n_components": [r[0] for r in self.rows],
            "bic": [r[1] for r in self.rows],
            "aic": [r[2] for r in self.rows],
        }


def _as_data(data) -> np.ndarray:
    arr = np.asarray(
        [t.as_array() if hasattr(t, "as_array") else t for t in data], dtype=float
    )
    if arr.ndim != 2:
        raise FitError("data must be a list of fixed-length vectors")
    return arr


def _log_gaussian(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """log N(x | mean, cov) for x of shape (M, d)."""
    d = mean.shape[0]
    diff = x - mean
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise FitError("covariance lost positive definiteness")
    solved = np.linalg.solve(cov, diff.T).T
    maha = np.sum(diff * solved, axis=1)
    return -0.5 * (d * LOG_2PI + logdet + maha)


def _logsumexp(arr: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(arr, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(arr - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def _weighted_log_prob(data: np.ndarray, weights, means, covs) -> np.ndarray:
    cols = [
        _log_gaussian(data, means[i], covs[i]) + np.log(weights[i])
        for i in range(len(weights))
    ]
    return np.stack(cols, axis=1)


def _seed_means(data: np.ndarray, n_components: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++-style spread seeding: means are drawn from the data points."""
    n = data.shape[0]
    chosen = [int(rng.integers(n))]
    while len(chosen) < n_components:
        centers = data[chosen]
        d2 = np.min(((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            chosen.append(int(rng.integers(n)))
            continue
        chosen.append(int(rng.choice(n, p=d2 / total)))
    return data[chosen].copy()


def fit_em(
    data,
    n_components: int,
    config: EmConfig = EmConfig(),
    *,
    scale: ScaleParams | None = None,
    train_fields: Sequence[str] = (),
) -> GmmModel:
    """Fit a mixture by expectation maximization.

    Initialization: k-means++-style means seeded from data points with the
    run seed, uniform weights, pooled covariance. Each M-step adds
    epsilon * I to every covariance. The log-likelihood trace is recorded
    per iteration and is non-decreasing.
    """
    x = _as_data(data)
    n, d = x.shape
    if n == 0:
        raise FitError("empty data")
    if n < n_components:
        raise FitError(f"{n} samples cannot support {n_components} components")

    rng = np.random.default_rng(config.seed)
    eps_eye = config.epsilon * np.eye(d)
    means = _seed_means(x, n_components, rng)
    weights = np.full(n_components, 1.0 / n_components)
    pooled = np.cov(x, rowvar=False, bias=True).reshape(d, d) + eps_eye
    covs = np.array([pooled.copy() for _ in range(n_components)])

    fit_log: list[float] = []
    prev_ll = None
    for _ in range(config.max_iter):
        wlp = _weighted_log_prob(x, weights, means, covs)
        lse = _logsumexp(wlp, axis=1)
        ll = float(lse.sum())
        fit_log.append(ll)
        if prev_ll is not None:
            gain = (ll - prev_ll) / max(abs(prev_ll), 1e-12)
            if gain < config.tol:
                break
        prev_ll = ll

        resp = np.exp(wlp - lse[:, None])
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        weights = nk / nk.sum()
        means = (resp.T @ x) / nk[:, None]
        for k in range(n_components):
            diff = x - means[k]
            covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k] + eps_eye
            covs[k] = 0.5 * (covs[k] + covs[k].T)

    components = tuple(
        GaussianComponent(weight=float(weights[k]), mean=means[k], cov=covs[k])
        for k in range(n_components)
    )
    return GmmModel(
        components=components,
        fit_log=tuple(fit_log),
        scale=scale,
        train_fields=tuple(train_fields),
    )


def gmm_pdf_many(model: GmmModel, points: np.ndarray) -> np.ndarray:
    """Mixture density at each row of `points` (M, d)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    weights = [c.weight for c in model.components]
    means = [c.mean for c in model.components]
    covs = [c.cov for c in model.components]
    wlp = _weighted_log_prob(pts, weights, means, covs)
    return np.exp(_logsumexp(wlp, axis=1))


def gmm_pdf(model: GmmModel, x) -> float:
    """Mixture density at a single point (ScaledTriple or vector)."""
    vec = x.as_array() if hasattr(x, "as_array") else np.asarray(x, dtype=float)
    return float(gmm_pdf_many(model, vec[None, :])[0])


def log_likelihood(model: GmmModel, data) -> float:
    x = _as_data(data)
    weights = [c.weight for c in model.components]
    means = [c.mean for c in model.components]
    covs = [c.cov for c in model.components]
    wlp = _weighted_log_prob(x, weights, means, covs)
    return float(_logsumexp(wlp, axis=1).sum())


def param_count(n_components: int, dim: int) -> int:
    """Free parameters of a full-covariance mixture."""
    return (n_components - 1) + n_components * dim + n_components * dim * (dim + 1) // 2


def bic_score(k: int, n: int, log_l: float) -> float:
    return k * float(np.log(n)) - 2.0 * log_l


def aic_score(k: int, log_l: float) -> float:
    return 2.0 * k - 2.0 * log_l


def bic(model: GmmModel, data) -> float:
    x = _as_data(data)
    k = param_count(model.n_components, model.dim)
    return bic_score(k, x.shape[0], log_likelihood(model, x))


def aic(model: GmmModel, data) -> float:
    k = param_count(model.n_components, model.dim)
    return aic_score(k, log_likelihood(model, data))


def _minmax_normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi <= lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def select_components(
    data,
    c_range: Sequence[int] = range(1, 6),
    config: EmConfig = EmConfig(),
) -> tuple[int, SelectionTable]:
    """Score candidate component counts and pick the BIC/AIC trade-off.

    The winner minimizes the mean of min-max normalized BIC and AIC over
    the candidate set; ties go to the smaller count.
    """
    candidates = list(c_range)
    if not candidates:
        raise ValueError("empty candidate range")
    rows = []
    for c in candidates:
        model = fit_em(data, c, config)
        rows.append((c, bic(model, data), aic(model, data)))
    bics = np.array([r[1] for r in rows])
    aics = np.array([r[2] for r in rows])
    score = 0.5 * (_minmax_normalize(bics) + _minmax_normalize(aics))
    best = candidates[int(np.argmin(score))]
    return best, SelectionTable(rows=tuple(rows))


def gmm_conditional(
    model: GmmModel,
    date01: float,
    ndvi01: float,
    cf_grid: np.ndarray | None = None,
) -> Histogram1D:
    """Exact conditional of the CF dimension at fixed (date01, ndvi01).

    Component weights are reweighted by their marginal density at the
    conditioning point; per-component conditional mean and variance come
    from Gaussian conditioning. The result is evaluated on `cf_grid` and
    normalized to unit mass.
    """
    if model.dim != 3:
        raise ValueError("conditioning requires a 3D (date, ndvi, cf) model")
    grid = histogram.uniform_grid() if cf_grid is None else np.asarray(cf_grid, dtype=float)
    point = np.array([date01, ndvi01])

    log_marg = np.empty(model.n_components)
    cond_mean = np.empty(model.n_components)
    cond_var = np.empty(model.n_components)
    for i, comp in enumerate(model.components):
        mu_a, mu_b = comp.mean[:2], comp.mean[2]
        s_aa = comp.cov[:2, :2]
        s_ab = comp.cov[:2, 2]
        s_bb = comp.cov[2, 2]
        log_marg[i] = _log_gaussian(point[None, :], mu_a, s_aa)[0] + np.log(comp.weight)
        solved = np.linalg.solve(s_aa, s_ab)
        cond_mean[i] = mu_b + solved @ (point - mu_a)
        cond_var[i] = max(s_bb - solved @ s_ab, 1e-18)

    marg = np.exp(log_marg)
    if np.all(marg < DENSITY_FLOOR):
        raise ConditioningError("conditioning point outside support")
    w = marg / marg.sum()

    density = np.zeros_like(grid)
    for i in range(model.n_components):
        z = (grid - cond_mean[i]) / np.sqrt(cond_var[i])
        density += w[i] * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi * cond_var[i])
    if density.sum() <= 0.0:
        raise ConditioningError("conditioning point outside support")
    return histogram.from_weights(grid, density)


def save_model(model: GmmModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model.to_json_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> GmmModel:
    return GmmModel.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
