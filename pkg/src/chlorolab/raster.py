"""Multi-band raster loading, NDVI, vegetation tiling, and tile time series.

Capture directory layout: five 16-bit binary PGM files (`blue.pgm`,
`green.pgm`, `red.pgm`, `rededge.pgm`, `nearir.pgm`, maxval 65535,
big-endian samples) plus a `capture.json` sidecar with `field_id`,
`timestamp` (ISO date) and `gsd_cm`. Reflectance = raw / 65535.

All types are immutable after construction and every operation is a pure
function, so captures can be processed concurrently.
"""

from __future__ import annotations

import datetime as dt
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import CaptureFormatError

BAND_NAMES = ("Blue", "Green", "Red", "RedEdge", "NearIR")
BAND_FILES = {
    "Blue": "blue.pgm",
    "Green": "green.pgm",
    "Red": "red.pgm",
    "RedEdge": "rededge.pgm",
    "NearIR": "nearir.pgm",
}
PGM_MAXVAL = 65535
DEFAULT_GSD_CM = 2.73

DEFAULT_TILE_SIZE = 128
DEFAULT_VEG_THRESHOLD = 0.3
DEFAULT_MIN_FRACTION = 0.85
DEFAULT_WINDOW = 4


@dataclass(frozen=True)
class MultispectralCapture:
    """One timestamped 5-band reflectance raster of a field."""

    field_id: str
    timestamp: dt.date
    bands: Mapping[str, np.ndarray]
    ground_sample_distance_cm: float = DEFAULT_GSD_CM

    def __post_init__(self):
        if set(self.bands) != set(BAND_NAMES):
            missing = set(BAND_NAMES) - set(self.bands)
            extra = set(self.bands) - set(BAND_NAMES)
            raise CaptureFormatError(f"bad band set (missing {sorted(missing)}, extra {sorted(extra)})")
        shapes = {name: b.shape for name, b in self.bands.items()}
        if len(set(shapes.values())) != 1:
            raise CaptureFormatError(f"band dimension mismatch: {shapes}")
        for name, b in self.bands.items():
            if b.ndim != 2:
                raise CaptureFormatError(f"band {name} is not a 2D grid")
            if not np.all(np.isfinite(b)):
                raise CaptureFormatError(f"band {name} contains non-finite values")
            if b.min() < 0.0 or b.max() > 1.0:
                raise CaptureFormatError(f"band {name} has reflectance outside [0, 1]")
            b.setflags(write=False)
        if not self.ground_sample_distance_cm > 0:
            raise CaptureFormatError("ground_sample_distance_cm must be positive")
        object.__setattr__(self, "bands", dict(self.bands))

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.bands.values())).shape

    @property
    def capture_id(self) -> str:
        return f"{self.field_id}@{self.timestamp.isoformat()}"


@dataclass(frozen=True)
class NdviImage:
    values: np.ndarray
    source_capture_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.isnan(v)):
            raise ValueError("NDVI image contains NaN")
        if v.min() < -1.0 or v.max() > 1.0:
            raise ValueError("NDVI values outside [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Tile:
    """One square NDVI patch cut from a capture on the regular tiling grid."""

    field_id: str
    timestep_index: int
    origin: tuple[int, int]
    size: int
    ndvi_patch: np.ndarray
    vegetation_fraction: float

    def __post_init__(self):
        if self.ndvi_patch.shape != (self.size, self.size):
            raise ValueError(f"patch shape {self.ndvi_patch.shape} != ({self.size}, {self.size})")
        self.ndvi_patch.setflags(write=False)

    @property
    def ref(self) -> tuple[str, int, tuple[int, int]]:
        return (self.field_id, self.timestep_index, self.origin)


@dataclass(frozen=True)
class TileSeries:
    """The same tile footprint observed at consecutive timesteps."""

    tiles: tuple[Tile, ...]
    dates: tuple[dt.date, ...]

    def __post_init__(self):
        if len(self.tiles) != len(self.dates):
            raise ValueError("tiles and dates length mismatch")
        if len(self.tiles) == 0:
            raise ValueError("empty series")
        first = self.tiles[0]
        for offset, tile in enumerate(self.tiles):
            if tile.field_id != first.field_id or tile.origin != first.origin:
                raise ValueError("series tiles must share field and origin")
            if tile.timestep_index != first.timestep_index + offset:
                raise ValueError("series timestep indices must be consecutive")

    @property
    def field_id(self) -> str:
        return self.tiles[0].field_id

    @property
    def origin(self) -> tuple[int, int]:
        return self.tiles[0].origin

    def __len__(self) -> int:
        return len(self.tiles)


def _read_pgm(path: Path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval 65535, big-endian samples."""
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise CaptureFormatError(f"{path.name}: not a binary PGM (P5)")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed, single whitespace byte after maxval.
    tokens: list[int] = []
    i = 2
    while len(tokens) < 3:
        if i >= len(data):
            raise CaptureFormatError(f"{path.name}: truncated header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        elif c.isdigit():
            j = i
            while j < len(data) and data[j : j + 1].isdigit():
                j += 1
            tokens.append(int(data[i:j]))
            i = j
        else:
            raise CaptureFormatError(f"{path.name}: malformed header byte {c!r}")
    i += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval != PGM_MAXVAL:
        raise CaptureFormatError(f"{path.name}: maxval {maxval}, expected {PGM_MAXVAL}")
    expected = width * height * 2
    raw = data[i : i + expected]
    if len(raw) != expected:
        raise CaptureFormatError(f"{path.name}: expected {expected} sample bytes, got {len(raw)}")
    grid = np.frombuffer(raw, dtype=">u2").reshape(height, width)
    return grid.astype(float) / PGM_MAXVAL


def _write_pgm(path: Path, raw16: np.ndarray) -> None:
    """Write a uint16 grid as binary PGM with maxval 65535."""
    h, w = raw16.shape
    header = f"P5\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii")
    path.write_bytes(header + raw16.astype(">u2").tobytes())


def load_capture(path: str | Path) -> MultispectralCapture:
    """Load a capture directory into a validated MultispectralCapture."""
    path = Path(path)
    sidecar = path / "capture.json"
    if not sidecar.is_file():
        raise CaptureFormatError(f"missing sidecar {sidecar}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        field_id = str(meta["field_id"])
        timestamp = dt.date.fromisoformat(meta["timestamp"])
        gsd = float(meta.get("gsd_cm", DEFAULT_GSD_CM))
    except (KeyError, ValueError, TypeError) as exc:
        raise CaptureFormatError(f"malformed sidecar {sidecar}: {exc}") from exc
    bands = {}
    for name, fname in BAND_FILES.items():
        band_path = path / fname
        if not band_path.is_file():
            raise CaptureFormatError(f"missing band file {fname} for band {name}")
        bands[name] = _read_pgm(band_path)
    return MultispectralCapture(
        field_id=field_id, timestamp=timestamp, bands=bands, ground_sample_distance_cm=gsd
    )


def save_capture(capture_dir: str | Path, field_id: str, timestamp: dt.date,
                 raw_bands: Mapping[str, np.ndarray], gsd_cm: float = DEFAULT_GSD_CM) -> None:
    """Write uint16 band grids plus sidecar in the capture directory format."""
    capture_dir = Path(capture_dir)
    capture_dir.mkdir(parents=True, exist_ok=True)
    for name, fname in BAND_FILES.items():
        _write_pgm(capture_dir / fname, raw_bands[name])
    sidecar = {
        "field_id": field_id,
        "timestamp": timestamp.isoformat(),
        "gsd_cm": gsd_cm,
    }
    (capture_dir / "capture.json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def compute_ndvi(capture: MultispectralCapture) -> NdviImage:
    """Per-pixel (NearIR - Red) / (NearIR + Red); 0 where the sum is 0."""
    nir = capture.bands["NearIR"]
    red = capture.bands["Red"]
    denom = nir + red
    values = np.zeros_like(denom)
    nz = denom > 0
    values[nz] = (nir[nz] - red[nz]) / denom[nz]
    return NdviImage(values=values, source_capture_id=capture.capture_id)


def tile_and_filter(
    ndvi: NdviImage,
    size: int = DEFAULT_TILE_SIZE,
    veg_threshold: float = DEFAULT_VEG_THRESHOLD,
    min_fraction: float = DEFAULT_MIN_FRACTION,
    *,
    field_id: str = "",
    timestep_index: int = 0,
) -> list[Tile]:
    """Cut non-overlapping size x size tiles and keep the vegetated ones.

    The grid is anchored at (0, 0); remainder strips narrower than `size`
    are dropped. A pixel is vegetation iff NDVI >= veg_threshold; tiles
    with vegetation_fraction < min_fraction are discarded.
    """
    if size < 1:
        raise ValueError("tile size must be >= 1")
    if not 0.0 <= min_fraction <= 1.0:
        raise ValueError("min_fraction must be in [0, 1]")
    h, w = ndvi.values.shape
    tiles = []
    for row in range(0, h - size + 1, size):
        for col in range(0, w - size + 1, size):
            patch = ndvi.values[row : row + size, col : col + size]
            frac = float(np.count_nonzero(patch >= veg_threshold)) / (size * size)
            if frac >= min_fraction:
                tiles.append(
                    Tile(
                        field_id=field_id,
                        timestep_index=timestep_index,
                        origin=(row, col),
                        size=size,
                        ndvi_patch=patch.copy(),
                        vegetation_fraction=frac,
                    )
                )
    return tiles


def mean_ndvi(tile: Tile) -> float:
    """Arithmetic mean over the tile's NDVI patch."""
    return float(tile.ndvi_patch.mean())


def build_tile_series(
    captures: Sequence[MultispectralCapture],
    window: int = DEFAULT_WINDOW,
    size: int = DEFAULT_TILE_SIZE,
    veg_threshold: float = DEFAULT_VEG_THRESHOLD,
    min_fraction: float = DEFAULT_MIN_FRACTION,
) -> list[TileSeries]:
    """Slide a length-`window` time window over aligned captures of one field.

    For T captures there are T - window + 1 candidate windows per tile
    origin; a window survives only if its origin passes the vegetation
    filter at every timestep inside the window. Returns [] with a warning
    when T < window.
    """
    if window < 1:
        raise ValueError("window length must be >= 1")
    if not captures:
        return []
    field_ids = {c.field_id for c in captures}
    if len(field_ids) != 1:
        raise ValueError(f"captures span multiple fields: {sorted(field_ids)}")
    shapes = {c.shape for c in captures}
    if len(shapes) != 1:
        raise ValueError("captures must share raster dimensions")
    dates = [c.timestamp for c in captures]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise ValueError("captures must be strictly increasing in date")
    if len(captures) < window:
        warnings.warn(
            f"only {len(captures)} captures for window length {window}; no series built",
            stacklevel=2,
        )
        return []

    per_step: list[dict[tuple[int, int], Tile]] = []
    for t, cap in enumerate(captures):
        tiles = tile_and_filter(
            compute_ndvi(cap),
            size=size,
            veg_threshold=veg_threshold,
            min_fraction=min_fraction,
            field_id=cap.field_id,
            timestep_index=t,
        )
        per_step.append({tile.origin: tile for tile in tiles})

    all_origins = sorted(set().union(*per_step) if per_step else set())
    series = []
    for start in range(len(captures) - window + 1):
        steps = per_step[start : start + window]
        for origin in all_origins:
            if all(origin in step for step in steps):
                series.append(
                    TileSeries(
                        tiles=tuple(step[origin] for step in steps),
                        dates=tuple(dates[start : start + window]),
                    )
                )
    return series
