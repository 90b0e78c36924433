"""1x1-degree (configurable) latitude/longitude grid over a track archive.

The bounding box snaps outward to cell boundaries. Cells that contain at
least one data point are "occupied" and get sequential ids in row-major
(row, col) scan order; every other in-box cell is addressable but carries
the UNOCCUPIED id. Cell boxes are lower-inclusive / upper-exclusive, with
the top and right box edges folded into the last row/column so encoding
is total on the closed box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geo import GeoPoint
from .tracks import StormTrack

UNOCCUPIED = -1


class OutOfGridError(ValueError):
    """Point or cell index outside the grid's bounding box."""


@dataclass(frozen=True)
class GridCell:
    id: int
    row: int
    col: int
    center: GeoPoint


@dataclass(frozen=True)
class GridSpec:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    cell_size: float
    rows: int
    cols: int
    occupied: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if list(self.occupied) != sorted(set(self.occupied)):
            raise ValueError("occupied cells must be unique and in row-major order")
        object.__setattr__(
            self, "_ids", {rc: k for k, rc in enumerate(self.occupied)}
        )

    @property
    def n_occupied(self) -> int:
        return len(self.occupied)

    def cell_id(self, row: int, col: int) -> int:
        return self._ids.get((row, col), UNOCCUPIED)

    def contains(self, p: GeoPoint) -> bool:
        return (
            self.lat_min <= p.lat <= self.lat_max
            and self.lon_min <= p.lon <= self.lon_max
        )

    def clamp(self, row: int, col: int) -> tuple[int, int]:
        """Nearest in-extent (row, col)."""
        return (
            min(max(row, 0), self.rows - 1),
            min(max(col, 0), self.cols - 1),
        )


def build_grid(storms: list[StormTrack], cell_size: float = 1.0) -> GridSpec:
    """Grid over all points of ``storms``: box snapped outward to cell
    boundaries, occupied set = cells holding at least one point."""
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    points = [p for s in storms for p in s.points]
    if not points:
        raise ValueError("cannot build a grid from zero points")

    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    lat_min = math.floor(min(lats) / cell_size) * cell_size
    lat_max = math.ceil(max(lats) / cell_size) * cell_size
    lon_min = math.floor(min(lons) / cell_size) * cell_size
    lon_max = math.ceil(max(lons) / cell_size) * cell_size
    if lat_max == lat_min:
        lat_max += cell_size
    if lon_max == lon_min:
        lon_max += cell_size
    rows = round((lat_max - lat_min) / cell_size)
    cols = round((lon_max - lon_min) / cell_size)

    occupied = set()
    for p in points:
        row = _index(p.lat, lat_min, cell_size, rows)
        col = _index(p.lon, lon_min, cell_size, cols)
        occupied.add((row, col))

    return GridSpec(
        lat_min=lat_min,
        lat_max=lat_max,
        lon_min=lon_min,
        lon_max=lon_max,
        cell_size=cell_size,
        rows=rows,
        cols=cols,
        occupied=tuple(sorted(occupied)),
    )


def _index(value: float, low: float, cell: float, extent: int) -> int:
    # upper box edge belongs to the last cell
    k = math.floor((value - low) / cell)
    return min(int(k), extent - 1)


def encode_cell(spec: GridSpec, p: GeoPoint) -> GridCell:
    """Cell whose box contains ``p``. Unoccupied cells come back with the
    UNOCCUPIED id but valid indices."""
    if not spec.contains(p):
        raise OutOfGridError(
            f"({p.lat}, {p.lon}) outside grid box "
            f"[{spec.lat_min}, {spec.lat_max}] x [{spec.lon_min}, {spec.lon_max}]"
        )
    row = _index(p.lat, spec.lat_min, spec.cell_size, spec.rows)
    col = _index(p.lon, spec.lon_min, spec.cell_size, spec.cols)
    return GridCell(spec.cell_id(row, col), row, col, cell_center(spec, row, col))


def cell_center(spec: GridSpec, row: int, col: int) -> GeoPoint:
    if not (0 <= row < spec.rows and 0 <= col < spec.cols):
        raise OutOfGridError(f"cell ({row}, {col}) outside extents {spec.rows}x{spec.cols}")
    return GeoPoint(
        spec.lat_min + (row + 0.5) * spec.cell_size,
        spec.lon_min + (col + 0.5) * spec.cell_size,
    )


def decode_cell(spec: GridSpec, cell: GridCell | tuple[int, int]) -> GeoPoint:
    """Center point of a cell given as GridCell or (row, col)."""
    row, col = (cell.row, cell.col) if isinstance(cell, GridCell) else cell
    return cell_center(spec, row, col)


def save_grid(spec: GridSpec, path: str) -> None:
    """Text artifact: one header line, then ``id,row,col`` per occupied
    cell. Reload is bit-exact (floats written with repr)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"box {spec.lat_min!r} {spec.lat_max!r} {spec.lon_min!r} {spec.lon_max!r} "
            f"cell {spec.cell_size!r} extent {spec.rows} {spec.cols}\n"
        )
        for k, (row, col) in enumerate(spec.occupied):
            fh.write(f"{k},{row},{col}\n")


def load_grid(path: str) -> GridSpec:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 10 or header[0] != "box" or header[5] != "cell":
            raise ValueError(f"not a grid artifact: {path}")
        occupied = []
        for line in fh:
            k, row, col = line.strip().split(",")
            if int(k) != len(occupied):
                raise ValueError(f"non-sequential cell id {k} in {path}")
            occupied.append((int(row), int(col)))
    return GridSpec(
        lat_min=float(header[1]),
        lat_max=float(header[2]),
        lon_min=float(header[3]),
        lon_max=float(header[4]),
        cell_size=float(header[6]),
        rows=int(header[8]),
        cols=int(header[9]),
        occupied=tuple(occupied),
    )
