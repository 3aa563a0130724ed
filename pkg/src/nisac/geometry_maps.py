"""Map grids over the region of interest and discrete map labels.

All labeling happens on the horizontal RoI plane. A target is an axis-aligned
cuboid, so its footprint on that plane is a rectangle and every cell/target
overlap is an exact rectangle intersection.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ._accel import HAVE_NUMBA, njit


class MapRepr(str, enum.Enum):
    PROBABILITY = "probability"
    HARD = "hard"
    SOFT = "soft"


@dataclass(frozen=True)
class MapGrid:
    """Square n x n tiling of a rectangular RoI, cells in row-major order.

    Row index follows y, column index follows x, both starting at ``roi_min``,
    so cell ``i = row * n + col``.
    """

    roi_min: tuple[float, float]
    roi_max: tuple[float, float]
    cells_per_side: int

    @property
    def n_cells(self) -> int:
        return self.cells_per_side * self.cells_per_side

    @property
    def cell_size(self) -> np.ndarray:
        lo, hi = np.asarray(self.roi_min), np.asarray(self.roi_max)
        return (hi - lo) / self.cells_per_side

    def cell_bounds(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(lower corner, upper corner) of cell ``i``."""
        n = self.cells_per_side
        if not 0 <= i < n * n:
            raise IndexError(f"cell index {i} out of range for {n}x{n} grid")
        row, col = divmod(i, n)
        lo = np.asarray(self.roi_min, dtype=float)
        size = self.cell_size
        cmin = lo + size * np.array([col, row])
        # the last edge snaps to roi_max so the tiling is exact
        cmax = np.array([
            self.roi_max[0] if col == n - 1 else lo[0] + size[0] * (col + 1),
            self.roi_max[1] if row == n - 1 else lo[1] + size[1] * (row + 1),
        ])
        return cmin, cmax

    def all_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(lo, hi)`` of shape [I, 2] for every cell."""
        bounds = [self.cell_bounds(i) for i in range(self.n_cells)]
        return np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds])

    def to_dict(self) -> dict:
        return {
            "roi_min": list(self.roi_min),
            "roi_max": list(self.roi_max),
            "cells_per_side": self.cells_per_side,
        }


def make_grid(roi_min, roi_max, cells_per_side: int) -> MapGrid:
    roi_min = tuple(float(v) for v in roi_min)
    roi_max = tuple(float(v) for v in roi_max)
    if len(roi_min) != 2 or len(roi_max) != 2:
        raise ValueError("RoI corners must be 2-vectors")
    if not all(hi > lo for lo, hi in zip(roi_min, roi_max)):
        raise ValueError(f"degenerate RoI: {roi_min} .. {roi_max}")
    if int(cells_per_side) != cells_per_side or cells_per_side < 1:
        raise ValueError(f"cells_per_side must be a positive integer, got {cells_per_side}")
    return MapGrid(roi_min, roi_max, int(cells_per_side))


@dataclass(frozen=True)
class Cuboid:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]

    def footprint(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center[:2], dtype=float)
        h = np.asarray(self.half_extents[:2], dtype=float)
        return c - h, c + h

    def z_range(self) -> tuple[float, float]:
        return self.center[2] - self.half_extents[2], self.center[2] + self.half_extents[2]

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        c = np.asarray(self.center, dtype=float)
        h = np.asarray(self.half_extents, dtype=float) + margin
        return bool(np.all(np.abs(p - c) <= h))

    @classmethod
    def cube(cls, center, side: float) -> "Cuboid":
        half = side / 2.0
        return cls(tuple(float(v) for v in center), (half, half, half))


@dataclass(frozen=True)
class Scene:
    targets: tuple[Cuboid, ...]
    ues: tuple[tuple[float, float, float], ...]
    tx_center: tuple[float, float, float] = (-2.4, 0.1, 2.5)
    rx_center: tuple[float, float, float] = (-2.4, -0.1, 2.5)
    box_extents: tuple[float, float, float] = (5.0, 5.0, 3.0)
    plane_z: float = 1.0

    def validate(self) -> None:
        fps = [t.footprint() for t in self.targets]
        for a in range(len(fps)):
            for b in range(a + 1, len(fps)):
                if _overlap_area(fps[a][0], fps[a][1], fps[b][0], fps[b][1]) > 0.0:
                    raise ValueError(f"targets {a} and {b} overlap")
        for j, t in enumerate(self.targets):
            z0, z1 = t.z_range()
            if not z0 <= self.plane_z <= z1:
                raise ValueError(f"target {j} does not cross the labeling plane z={self.plane_z}")

    def summary(self) -> dict:
        return {
            "targets": [{"center": list(t.center), "half_extents": list(t.half_extents)}
                        for t in self.targets],
            "ues": [list(u) for u in self.ues],
        }


def _overlap_area(alo, ahi, blo, bhi) -> float:
    w = np.minimum(ahi, bhi) - np.maximum(alo, blo)
    return float(np.prod(np.clip(w, 0.0, None)))


@dataclass
class DiscreteMap:
    values: np.ndarray
    repr: MapRepr
    grid: MapGrid = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.repr = MapRepr(self.repr)
        v = self.values
        if v.shape != (self.grid.n_cells,):
            raise ValueError(f"map has shape {v.shape}, grid has {self.grid.n_cells} cells")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("map entries must lie in [0, 1]")
        if self.repr is MapRepr.HARD and not np.all((v == 0.0) | (v == 1.0)):
            raise ValueError("hard map entries must be 0 or 1")
        if self.repr is MapRepr.PROBABILITY and not (
            np.count_nonzero(v == 1.0) == 1 and np.count_nonzero(v) == 1
        ):
            raise ValueError("probability map must be one-hot")


def soft_values(scene: Scene, grid: MapGrid) -> np.ndarray:
    """Occupied area fraction of every cell.

    Targets never overlap, so the union area is the sum of per-target areas.
    """
    lo, hi = grid.all_bounds()
    area = np.prod(hi - lo, axis=1)
    covered = np.zeros(grid.n_cells)
    for t in scene.targets:
        flo, fhi = t.footprint()
        w = np.clip(np.minimum(hi, fhi) - np.maximum(lo, flo), 0.0, None)
        covered += w[:, 0] * w[:, 1]
    return np.clip(covered / area, 0.0, 1.0)


def soft_map(scene: Scene, grid: MapGrid) -> DiscreteMap:
    return DiscreteMap(soft_values(scene, grid), MapRepr.SOFT, grid)


def hard_map(scene: Scene, grid: MapGrid) -> DiscreteMap:
    # positive-area semantics: a footprint merely touching a cell edge does not count
    return DiscreteMap((soft_values(scene, grid) > 0.0).astype(float), MapRepr.HARD, grid)


def cell_index(point, grid: MapGrid) -> int:
    """Index of the cell holding ``point``; boundary points go to the lower index."""
    n = grid.cells_per_side
    lo = np.asarray(grid.roi_min, dtype=float)
    hi = np.asarray(grid.roi_max, dtype=float)
    p = np.asarray(point[:2], dtype=float)
    if np.any(p < lo) or np.any(p > hi):
        raise ValueError(f"point {tuple(p)} lies outside the RoI")
    u = (p - lo) / grid.cell_size
    # ceil(u) - 1 puts a point on an interior edge into the lower cell
    idx = np.clip(np.ceil(u).astype(int) - 1, 0, n - 1)
    return int(idx[1] * n + idx[0])


def probability_map(scene: Scene, grid: MapGrid) -> DiscreteMap:
    if len(scene.targets) != 1:
        raise ValueError(
            f"probability map needs exactly one target, scene has {len(scene.targets)}")
    values = np.zeros(grid.n_cells)
    values[cell_index(scene.targets[0].center, grid)] = 1.0
    return DiscreteMap(values, MapRepr.PROBABILITY, grid)


def make_map(scene: Scene, grid: MapGrid, representation) -> DiscreteMap:
    representation = MapRepr(representation)
    if representation is MapRepr.PROBABILITY:
        return probability_map(scene, grid)
    if representation is MapRepr.HARD:
        return hard_map(scene, grid)
    return soft_map(scene, grid)


# ---------------------------------------------------------------- Monte Carlo

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True)
def _splitmix_unit(c):
    z = c + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * _UNIT


@njit(cache=True)
def _coverage_count_loops(lo, hi, flo, fhi, n, key):
    count = 0
    base = np.uint64(key) * np.uint64(2) * np.uint64(n)
    for i in range(n):
        x = lo[0] + _splitmix_unit(base + np.uint64(2 * i)) * (hi[0] - lo[0])
        y = lo[1] + _splitmix_unit(base + np.uint64(2 * i + 1)) * (hi[1] - lo[1])
        for t in range(flo.shape[0]):
            if flo[t, 0] <= x < fhi[t, 0] and flo[t, 1] <= y < fhi[t, 1]:
                count += 1
                break
    return count


def _coverage_count_numpy(lo, hi, flo, fhi, n, key, chunk=1 << 20):
    count = 0
    base = np.uint64(key) * np.uint64(2) * np.uint64(n)
    for start in range(0, n, chunk):
        i = np.arange(start, min(start + chunk, n), dtype=np.uint64)
        pts = []
        for d in range(2):
            z = base + np.uint64(2) * i + np.uint64(d) + _GOLDEN
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
            pts.append(lo[d] + ((z >> np.uint64(11)).astype(float) * _UNIT) * (hi[d] - lo[d]))
        x, y = pts
        inside = np.zeros(len(i), dtype=bool)
        for t in range(flo.shape[0]):
            inside |= (flo[t, 0] <= x) & (x < fhi[t, 0]) & (flo[t, 1] <= y) & (y < fhi[t, 1])
        count += int(inside.sum())
    return count


def coverage_fraction_mc(scene: Scene, grid: MapGrid, cell: int, n_points: int, key: int = 0,
                         use_numba: bool = HAVE_NUMBA) -> float:
    """Monte Carlo estimate of the occupied fraction of one cell.

    Points come from a splitmix64 counter stream keyed by ``key``, so the
    numba and numpy paths count exactly the same points.
    """
    lo, hi = grid.cell_bounds(cell)
    if scene.targets:
        fp = [t.footprint() for t in scene.targets]
        flo = np.array([f[0] for f in fp], dtype=float)
        fhi = np.array([f[1] for f in fp], dtype=float)
    else:
        flo = fhi = np.zeros((0, 2))
    args = (np.asarray(lo, float), np.asarray(hi, float), flo, fhi, int(n_points), int(key))
    fast = use_numba and HAVE_NUMBA  # the scalar loop is only worth running compiled
    count = _coverage_count_loops(*args) if fast else _coverage_count_numpy(*args)
    return count / n_points
