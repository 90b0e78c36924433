"""Per-step feature derivation and the statistical audits run on the
archive: per-storm z-score normalization, product-moment correlation,
and an Anderson-Darling normality test.

Each track point becomes a tuple of (wind, lat, lon, bearing, distance,
grid_row, grid_col); bearing and distance describe the step *into* the
point and are 0 for the first fix. Normalization is per storm with the
population standard deviation, zero-variance columns mapping to zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geo import haversine_distance, initial_bearing
from .grid import GridSpec, encode_cell
from .tracks import StormTrack

FEATURE_NAMES = ("wind", "lat", "lon", "bearing", "distance", "grid_row", "grid_col")

# 5% critical value for the composite-normality statistic (mean and
# variance estimated), used with the (1 + 0.75/n + 2.25/n^2) adjustment.
AD_CRITICAL_5PCT = 0.787


class ConstantInputError(ValueError):
    """Correlation requested against a zero-variance sequence."""


@dataclass(frozen=True)
class FeatureTuple:
    wind: float
    lat: float
    lon: float
    bearing: float
    distance: float
    grid_row: int
    grid_col: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.wind, self.lat, self.lon, self.bearing, self.distance,
             self.grid_row, self.grid_col],
            dtype=np.float64,
        )


@dataclass
class NormalizedSequence:
    storm_id: str
    matrix: np.ndarray  # (T, k) z-scored feature rows
    mean: np.ndarray  # (k,) per-feature mean of the raw values
    std: np.ndarray  # (k,) per-feature population std (0 where constant)
    columns: tuple[str, ...]


def derive_features(track: StormTrack, spec: GridSpec) -> list[FeatureTuple]:
    """One FeatureTuple per track point. Coincident consecutive fixes get
    distance 0 and carry the previous step's bearing."""
    if len(track.points) < 2:
        raise ValueError(f"storm {track.storm_id} has {len(track.points)} points, need >= 2")
    tuples: list[FeatureTuple] = []
    bearing = 0.0
    for i, p in enumerate(track.points):
        distance = 0.0
        if i > 0:
            prev = track.points[i - 1]
            distance = haversine_distance(prev.geo(), p.geo())
            if distance > 0.0:
                bearing = initial_bearing(prev.geo(), p.geo())
        cell = encode_cell(spec, p.geo())
        tuples.append(
            FeatureTuple(
                wind=float(p.wind if p.wind is not None else 0.0),
                lat=p.lat,
                lon=p.lon,
                bearing=bearing,
                distance=distance,
                grid_row=cell.row,
                grid_col=cell.col,
            )
        )
    return tuples


def feature_matrix(
    tuples: list[FeatureTuple], columns: tuple[str, ...] = FEATURE_NAMES
) -> np.ndarray:
    """(T, k) float64 matrix of the selected feature columns.

    Besides the raw names, ``bearing_sin``/``bearing_cos`` select the
    circular encoding of the step direction.
    """
    cols = []
    for name in columns:
        if name == "bearing_sin":
            cols.append([math.sin(math.radians(t.bearing)) for t in tuples])
        elif name == "bearing_cos":
            cols.append([math.cos(math.radians(t.bearing)) for t in tuples])
        elif name in FEATURE_NAMES:
            cols.append([getattr(t, name) for t in tuples])
        else:
            raise ValueError(f"unknown feature column {name!r}")
    return np.array(cols, dtype=np.float64).T


def normalize_matrix(
    matrix: np.ndarray, storm_id: str = "", columns: tuple[str, ...] = FEATURE_NAMES
) -> NormalizedSequence:
    """Per-column z-score with population sigma; zero-variance columns map
    to all-zeros. Stores (mean, std) for the inverse transform."""
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError("normalization needs a (T >= 2, k) matrix")
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)  # population, no Bessel correction
    safe = np.where(std > 0.0, std, 1.0)
    z = (matrix - mean) / safe
    z[:, std == 0.0] = 0.0
    return NormalizedSequence(storm_id, z, mean, std, tuple(columns))


def normalize(
    tuples: list[FeatureTuple],
    storm_id: str = "",
    columns: tuple[str, ...] = FEATURE_NAMES,
) -> NormalizedSequence:
    if len(tuples) < 2:
        raise ValueError("normalization needs at least 2 feature tuples")
    return normalize_matrix(feature_matrix(tuples, columns), storm_id, columns)


def inverse_transform(seq: NormalizedSequence) -> np.ndarray:
    """Raw feature rows back from a normalized sequence."""
    return seq.matrix * np.where(seq.std > 0.0, seq.std, 1.0) + seq.mean


def pearson_r(x, y) -> float:
    """Product-moment correlation of two equal-length sequences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson_r needs two equal-length 1-d sequences")
    if x.size < 2:
        raise ValueError("pearson_r needs at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInputError("correlation undefined for constant input")
    return float(dx @ dy) / (sx * sy)


def _normal_cdf(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def anderson_darling_normal(x) -> tuple[float, bool]:
    """Adjusted A-squared statistic against a normal with estimated mean
    and variance, and whether normality is rejected at the 5% level."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.size
    if n < 8:
        raise ValueError(f"Anderson-Darling test needs >= 8 samples, got {n}")
    s = x.std(ddof=1)
    if s == 0.0:
        raise ConstantInputError("normality test undefined for constant input")
    z = _normal_cdf((x - x.mean()) / s)
    # guard log(0) from extreme tail probabilities
    z = np.clip(z, 1e-300, 1.0 - 1e-16)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (np.log(z) + np.log1p(-z[::-1])))
    a2_adj = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    return float(a2_adj), bool(a2_adj > AD_CRITICAL_5PCT)
