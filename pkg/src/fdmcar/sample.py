"""Partially observed functional samples on a common grid.

A sample is a value matrix ``X`` (n curves by p grid points), a boolean
observation mask ``O`` of the same shape, and the grid itself. Unobserved
cells hold NaN; the mask is authoritative and NaN cells are never read.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, NoTestableSubdomain, ParseError

MISSING = np.nan


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered grid points in [0, 1] with the original inter-point spacing."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise DimensionError("grid points must be a non-empty vector")
        if not np.all(np.isfinite(pts)):
            raise ParseError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ParseError("grid points must be strictly increasing")
        if pts[0] < 0 or pts[-1] > 1:
            raise ParseError("grid points must lie in [0, 1]")
        if not self.spacing > 0:
            raise ParseError("grid spacing must be positive")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def equispaced(cls, p: int) -> "Grid":
        """Points ``j/p`` for ``j = 1..p``; t = 0 is excluded."""
        if p < 1:
            raise DimensionError("p must be at least 1")
        return cls(np.arange(1, p + 1) / p, 1.0 / p)

    @classmethod
    def from_points(cls, points) -> "Grid":
        pts = np.asarray(points, dtype=float)
        if pts.size < 2:
            raise DimensionError("need at least two grid points to infer spacing")
        canonical = cls.equispaced(pts.size)
        if np.array_equal(pts, canonical.points):
            # keep 1/p exactly so equispaced grids survive a CSV round trip
            return canonical
        return cls(pts, (pts[-1] - pts[0]) / (pts.size - 1))

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.spacing == other.spacing
            and np.array_equal(self.points, other.points)
        )


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """``n`` curves on a shared grid with their observation mask.

    Parameters
    ----------
    grid : Grid
    values : (n, p) array_like
        Curve values. Entries under ``mask == 0`` are replaced by NaN.
    mask : (n, p) array_like of {0, 1}
        Observation indicator.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.asarray(self.mask)
        if values.ndim != 2 or mask.shape != values.shape:
            raise DimensionError(f"values {values.shape} and mask {mask.shape} must be equal 2-d shapes")
        n, p = values.shape
        if n < 2 or p < 2:
            raise DimensionError(f"need n >= 2 curves and p >= 2 grid points, got n={n}, p={p}")
        if p != len(self.grid):
            raise DimensionError(f"grid has {len(self.grid)} points but values have {p} columns")
        if mask.dtype != bool:
            if not np.all((mask == 0) | (mask == 1)):
                raise ParseError("mask entries must be 0 or 1")
            mask = mask.astype(bool)
        bad = mask & ~np.isfinite(values)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ParseError(f"non-finite observed value at row {i + 1}, column {j + 1}", i + 1, j + 1)
        values[~mask] = MISSING
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "FunctionalSample":
        """Sample made of the given rows (repeats allowed)."""
        rows = np.asarray(rows, dtype=int)
        return FunctionalSample(self.grid, self.values[rows], self.mask[rows])

    def with_values(self, values) -> "FunctionalSample":
        """Same mask and grid, new values on the observed cells."""
        return FunctionalSample(self.grid, values, self.mask)


@dataclass(frozen=True, eq=False)
class SubdomainIndex:
    """Columns of the grid retained for testing.

    ``kept`` may be non-contiguous. ``min_counts`` holds, for every grid
    column, the smaller of the two group-wise observed counts.
    """

    kept: np.ndarray
    coverage_fraction: float
    min_counts: np.ndarray = field(default=None)

    def __post_init__(self):
        kept = np.asarray(self.kept, dtype=int)
        if kept.ndim != 1 or kept.size == 0:
            raise NoTestableSubdomain("subdomain must keep at least one column")
        object.__setattr__(self, "kept", _frozen(kept))
        if self.min_counts is not None:
            object.__setattr__(self, "min_counts", _frozen(np.asarray(self.min_counts)))

    @classmethod
    def full(cls, p: int) -> "SubdomainIndex":
        return cls(np.arange(p), 0.0)

    def __len__(self):
        return self.kept.size

    def domain_length(self, grid: Grid) -> float:
        return self.kept.size * grid.spacing

    def points(self, grid: Grid) -> np.ndarray:
        return grid.points[self.kept]

    def intervals(self, grid: Grid) -> list[tuple[float, float]]:
        """Maximal runs of consecutive kept columns as (first, last) grid points."""
        runs = []
        start = prev = self.kept[0]
        for j in self.kept[1:]:
            if j != prev + 1:
                runs.append((start, prev))
                start = j
            prev = j
        runs.append((start, prev))
        return [(float(grid.points[a]), float(grid.points[b])) for a, b in runs]


def _is_missing(cell: str, token: str) -> bool:
    cell = cell.strip()
    return cell == "" or cell == token


def load_csv(path, missing_token: str = "NA", header: bool = False) -> FunctionalSample:
    """Read one curve per row, one grid point per column.

    Cells equal to ``missing_token`` or empty are unobserved. With
    ``header=True`` the first row holds the grid coordinates; otherwise the
    grid is ``j/p``, ``j = 1..p``. Row and column numbers in errors are
    1-based file coordinates.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)]
    # a trailing newline yields no extra row in csv, but blank lines do
    while rows and rows[-1] == []:
        rows.pop()
    if not rows:
        raise DimensionError(f"{path}: empty file")

    grid_points = None
    first_data = 0
    if header:
        try:
            grid_points = [float(c) for c in rows[0]]
        except ValueError:
            raise ParseError(f"{path}: header row must hold numeric grid coordinates", 1) from None
        first_data = 1

    width = len(rows[0])
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise FormatError(f"{path}: row {r} has {len(row)} cells, expected {width}", r)

    data = rows[first_data:]
    n, p = len(data), width
    if n < 2 or p < 2:
        raise DimensionError(f"{path}: need at least 2 curves and 2 grid points, got {n}x{p}")

    values = np.full((n, p), MISSING)
    mask = np.zeros((n, p), dtype=bool)
    for i, row in enumerate(data):
        for j, cell in enumerate(row):
            if _is_missing(cell, missing_token):
                continue
            try:
                v = float(cell)
            except ValueError:
                r = i + 1 + first_data
                raise ParseError(f"{path}: cannot parse {cell!r} at row {r}, column {j + 1}", r, j + 1) from None
            if not np.isfinite(v):
                r = i + 1 + first_data
                raise ParseError(f"{path}: non-finite value at row {r}, column {j + 1}", r, j + 1)
            values[i, j] = v
            mask[i, j] = True

    grid = Grid.from_points(grid_points) if grid_points is not None else Grid.equispaced(p)
    return FunctionalSample(grid, values, mask)


def write_csv(sample: FunctionalSample, path, missing_token: str = "NA", header: bool = True) -> None:
    """Write ``sample`` so that ``load_csv(path, header=header)`` restores it exactly.

    Floats are written with ``repr``, which round-trips every double.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([repr(float(t)) for t in sample.grid.points])
        for x, o in zip(sample.values, sample.mask):
            w.writerow([repr(float(v)) if ok else missing_token for v, ok in zip(x, o)])


def observed_measure(sample: FunctionalSample, i: int) -> float:
    """Fraction of grid points at which curve ``i`` is observed."""
    if not 0 <= i < sample.n:
        raise IndexError(f"curve index {i} out of range for n={sample.n}")
    return float(np.count_nonzero(sample.mask[i])) / sample.p


def observed_measures(sample: FunctionalSample) -> np.ndarray:
    return np.count_nonzero(sample.mask, axis=1) / sample.p


def group_counts(sample: FunctionalSample, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-column observed counts in group A and group B."""
    in_a = np.asarray(labels.in_a, dtype=bool)
    m = sample.mask
    return np.count_nonzero(m[in_a], axis=0), np.count_nonzero(m[~in_a], axis=0)


def restrict_domain(sample: FunctionalSample, labels, threshold: float = 0.1) -> SubdomainIndex:
    """Columns where both groups have strictly more than ``n * threshold`` observations."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    if len(labels.in_a) != sample.n:
        raise DimensionError(f"{len(labels.in_a)} labels for {sample.n} curves")
    count_a, count_b = group_counts(sample, labels)
    min_counts = np.minimum(count_a, count_b)
    kept = np.flatnonzero(min_counts > sample.n * threshold)
    if kept.size == 0:
        best = int(min_counts.max())
        raise NoTestableSubdomain(
            f"no testable subdomain: the largest per-column minimum group count is {best}, "
            f"but more than {sample.n * threshold:g} is required",
            best,
        )
    return SubdomainIndex(kept, float(threshold), min_counts)
