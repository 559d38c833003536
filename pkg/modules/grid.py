"""
Grid - pixel-grid domain model: images, regions, inhomogeneity measures, shape integrals
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from modules.errors import InputError

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


# ── Grid ──────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PixelGrid:
    """A width x height raster; pixel (x, y) has row-major index y*width + x."""

    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise InputError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (rows, cols) of a 2-D view."""
        return self.height, self.width

    def index(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise InputError(f"pixel ({x}, {y}) is outside the {self.width}x{self.height} grid")
        return y * self.width + x

    def coords(self, index: int) -> tuple[int, int]:
        return index % self.width, index // self.width


# ── Image ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Image:
    grid: PixelGrid
    values: np.ndarray
    observed: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.size:
            raise InputError(f"image has {values.size} values for a grid of {self.grid.size} pixels")
        observed = self.observed
        if observed is not None:
            observed = np.asarray(observed, dtype=bool).reshape(-1)
            if observed.size != self.grid.size:
                raise InputError("observed mask does not match the image grid")
        mask = np.ones(values.size, dtype=bool) if observed is None else observed
        if not np.all(np.isfinite(values[mask])):
            raise InputError("image values must be finite at every observed pixel")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "observed", None if observed is None else _frozen(observed))

    @classmethod
    def from_array(cls, array, observed=None) -> "Image":
        array = np.asarray(array, dtype=float)
        if array.ndim != 2:
            raise InputError("image array must be 2-D (rows, cols)")
        grid = PixelGrid(width=array.shape[1], height=array.shape[0])
        return cls(grid, array.reshape(-1), observed)

    @property
    def observed_mask(self) -> np.ndarray:
        if self.observed is None:
            return np.ones(self.grid.size, dtype=bool)
        return self.observed

    def observed_values(self) -> np.ndarray:
        return self.values[self.observed_mask]

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


# ── Regions ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Region:
    """A possibly-empty pixel set on a grid, stored as a read-only boolean mask."""

    grid: PixelGrid
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        if mask.size != self.grid.size:
            raise InputError(
                f"mask has {mask.size} entries, grid {self.grid.width}x{self.grid.height} has {self.grid.size}"
            )
        object.__setattr__(self, "mask", _frozen(mask))

    @classmethod
    def from_indices(cls, grid: PixelGrid, indices: Iterable[int]):
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= grid.size):
            raise InputError(f"pixel index outside [0, {grid.size}) on a {grid.width}x{grid.height} grid")
        mask = np.zeros(grid.size, dtype=bool)
        mask[idx] = True
        return cls(grid, mask)

    @classmethod
    def from_array(cls, grid: PixelGrid, array):
        return cls(grid, np.asarray(array, dtype=bool).reshape(-1))

    @classmethod
    def empty(cls, grid: PixelGrid) -> "Region":
        return Region(grid, np.zeros(grid.size, dtype=bool))

    @property
    def pixels(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, index: int) -> bool:
        return 0 <= index < self.grid.size and bool(self.mask[index])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    def __hash__(self) -> int:
        return hash((self.grid, np.packbits(self.mask).tobytes()))

    def as_array(self) -> np.ndarray:
        return self.mask.reshape(self.grid.shape)

    def union(self, other: "Region") -> "Region":
        self._check_grid(other)
        return Region(self.grid, self.mask | other.mask)

    def difference(self, other: "Region") -> "Region":
        self._check_grid(other)
        return Region(self.grid, self.mask & ~other.mask)

    def intersects(self, other: "Region") -> bool:
        self._check_grid(other)
        return bool(np.any(self.mask & other.mask))

    def _check_grid(self, other: "Region"):
        if other.grid != self.grid:
            raise InputError("regions live on different grids")


class ShapeMask(Region):
    """A dictionary shape: a nonempty region."""

    def __post_init__(self):
        super().__post_init__()
        if not self.mask.any():
            raise InputError("a shape must contain at least one pixel")

    @classmethod
    def from_region(cls, region: Region) -> "ShapeMask":
        return cls(region.grid, region.mask)


def check_on_grid(grid: PixelGrid, regions: Sequence[Region], what: str = "shape"):
    for j, region in enumerate(regions):
        if region.grid != grid:
            raise InputError(
                f"{what} {j + 1} lies on a {region.grid.width}x{region.grid.height} grid, "
                f"expected {grid.width}x{grid.height}"
            )


def membership_matrix(shapes: Sequence[Region]) -> np.ndarray:
    """(pixels, shapes) boolean matrix with entry [x, j] = x in S_j."""
    return np.stack([s.mask for s in shapes], axis=1)


# ── Measures ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class InhomogeneityField:
    grid: PixelGrid
    pi_in: np.ndarray
    pi_ex: np.ndarray

    def __post_init__(self):
        pi_in = np.asarray(self.pi_in, dtype=float).reshape(-1)
        pi_ex = np.asarray(self.pi_ex, dtype=float).reshape(-1)
        if pi_in.size != self.grid.size or pi_ex.size != self.grid.size:
            raise InputError("measure arrays do not match the grid")
        if np.any(pi_in < 0) or np.any(pi_ex < 0):
            raise InputError("inhomogeneity measures must be nonnegative")
        if not (np.all(np.isfinite(pi_in)) and np.all(np.isfinite(pi_ex))):
            raise InputError("inhomogeneity measures must be finite")
        object.__setattr__(self, "pi_in", _frozen(pi_in))
        object.__setattr__(self, "pi_ex", _frozen(pi_ex))

    @property
    def d(self) -> np.ndarray:
        return self.pi_in - self.pi_ex

    @property
    def d_plus(self) -> np.ndarray:
        return np.maximum(self.d, 0.0)

    @property
    def d_minus(self) -> np.ndarray:
        return np.minimum(self.d, 0.0)

    def scaled(self, k: float) -> "InhomogeneityField":
        if k <= 0:
            raise InputError("scale factor must be positive")
        return InhomogeneityField(self.grid, self.pi_in * k, self.pi_ex * k)


@dataclass(frozen=True, eq=False)
class ShapeIntegrals:
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(np.asarray(self.P, dtype=float)))
        object.__setattr__(self, "Q", _frozen(np.asarray(self.Q, dtype=float)))

    @property
    def net(self) -> np.ndarray:
        """P_j - Q_j, the integral of d over each set."""
        return self.P - self.Q

    def __len__(self) -> int:
        return self.P.size


def chan_vese_measures(image: Image, u_in: float, u_ex: float) -> InhomogeneityField:
    if u_in == u_ex:
        raise InputError(f"u_in and u_ex are both {u_in}: every pixel would be tied")
    observed = image.observed_mask
    values = np.where(observed, image.values, 0.0)
    pi_in = np.where(observed, (values - u_in) ** 2, 0.0)
    pi_ex = np.where(observed, (values - u_ex) ** 2, 0.0)
    logger.debug("Chan-Vese measures with u_in=%g u_ex=%g on %d observed pixels",
                 u_in, u_ex, int(observed.sum()))
    return InhomogeneityField(image.grid, pi_in, pi_ex)


def quantile_levels(image: Image, lo: float, hi: float) -> tuple[float, float]:
    """Empirical (linear) quantiles of the observed values; the lower one is u_in."""
    if not (0.0 <= lo < hi <= 1.0):
        raise InputError(f"quantiles must satisfy 0 <= lo < hi <= 1, got {lo}, {hi}")
    values = image.observed_values()
    if values.size == 0:
        raise InputError("image has no observed pixels")
    u_in, u_ex = np.quantile(values, [lo, hi])
    return float(u_in), float(u_ex)


def minmax_levels(image: Image) -> tuple[float, float]:
    """Levels for near-binary images: darkest observed value inside, brightest outside."""
    values = image.observed_values()
    if values.size == 0:
        raise InputError("image has no observed pixels")
    return float(values.min()), float(values.max())


# ── Integrals ─────────────────────────────────────────────────────────────────

def pixel_set_integrals(field: InhomogeneityField, pixel_sets: Sequence[np.ndarray]) -> ShapeIntegrals:
    """P and Q over arbitrary index arrays (shapes, shapelets, cells)."""
    d_plus, d_minus = field.d_plus, field.d_minus
    P = np.array([d_plus[np.asarray(s, dtype=np.int64)].sum() for s in pixel_sets], dtype=float)
    Q = np.array([-d_minus[np.asarray(s, dtype=np.int64)].sum() for s in pixel_sets], dtype=float)
    return ShapeIntegrals(P, Q)


def shape_integrals(field: InhomogeneityField, masks: Sequence[Region]) -> ShapeIntegrals:
    check_on_grid(field.grid, masks, "mask")
    if not masks:
        return ShapeIntegrals(np.zeros(0), np.zeros(0))
    members = membership_matrix(masks).astype(float)
    return ShapeIntegrals(field.d_plus @ members, -(field.d_minus @ members))


# ── Lucid object condition ────────────────────────────────────────────────────

@dataclass(frozen=True)
class LocReport:
    holds: bool
    violations: int


def loc_holds(field: InhomogeneityField, sigma: Region) -> LocReport:
    """Strict comparison inside and outside sigma; ties are violations."""
    check_on_grid(field.grid, [sigma], "region")
    inside = sigma.mask
    bad_in = inside & ~(field.pi_in < field.pi_ex)
    bad_out = ~inside & ~(field.pi_in > field.pi_ex)
    violations = int(bad_in.sum() + bad_out.sum())
    return LocReport(holds=violations == 0, violations=violations)


def loc_lower_bound(field: InhomogeneityField, sigma: Region) -> float:
    """-sum of pi_ex over sigma; no alpha does better when the LOC holds."""
    check_on_grid(field.grid, [sigma], "region")
    return -float(field.pi_ex[sigma.mask].sum())


def loc_optimal_value(field: InhomogeneityField, sigma: Region) -> float:
    """sum of d over sigma: the value attained by every minimizer under the LOC."""
    check_on_grid(field.grid, [sigma], "region")
    return float(field.d[sigma.mask].sum())
