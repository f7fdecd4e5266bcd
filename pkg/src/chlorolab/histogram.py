"""Discrete 1D distribution over scaled CF values.

Shared by the generative models (which emit conditional CF histograms)
and the weak labeler (which samples from them).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-9


@dataclass(frozen=True)
class Histogram1D:
    """Normalized histogram on strictly ascending bin centers in [0, 1]."""

    bin_centers: np.ndarray
    masses: np.ndarray
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        centers = np.asarray(self.bin_centers, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if centers.ndim != 1 or masses.shape != centers.shape:
            raise ValueError("bin_centers and masses must be 1D and equal length")
        if centers.size == 0:
            raise ValueError("empty histogram")
        if np.any(np.diff(centers) <= 0):
            raise ValueError("bin centers must be strictly ascending")
        if np.any(masses < 0):
            raise ValueError("negative mass")
        total = masses.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1")
        centers.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "bin_centers", centers)
        object.__setattr__(self, "masses", masses)
        mean = float(np.dot(masses, centers))
        var = float(np.dot(masses, (centers - mean) ** 2))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", max(var, 0.0))

    @property
    def std(self) -> float:
        return self.variance ** 0.5


def from_weights(centers: np.ndarray, weights: np.ndarray) -> Histogram1D:
    """Build a histogram from non-negative, not yet normalized weights."""
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("weights must have positive finite total mass")
    return Histogram1D(np.asarray(centers, dtype=float), weights / total)


def uniform_grid(n_bins: int = 256) -> np.ndarray:
    """Centers of `n_bins` equal-width bins tiling [0, 1]."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    return (np.arange(n_bins) + 0.5) / n_bins
