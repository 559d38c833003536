"""
DSD - disjoint shape decomposition: shapelets, constructor vectors, bearing matrices,
composition evaluation, non-redundancy and composition counting
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from modules.errors import CompositionError, InputError
from modules.grid import PixelGrid, Region, ShapeMask, check_on_grid, membership_matrix

logger = logging.getLogger(__name__)


# ── Types ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ConstructorVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InputError(f"constructor bits must be 0/1, got {bits}")
        if not any(bits):
            raise InputError("a constructor vector cannot be all-zero")
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return len(self.bits)

    def members(self) -> tuple[int, ...]:
        """0-based indices of the shapes containing the shapelet."""
        return tuple(j for j, b in enumerate(self.bits) if b)


@dataclass(frozen=True, eq=False)
class Shapelet:
    region: Region
    constructor: ConstructorVector

    def __post_init__(self):
        if self.region.is_empty:
            raise InputError("a shapelet must contain at least one pixel")

    @property
    def pixels(self) -> np.ndarray:
        return self.region.pixels


@dataclass(frozen=True, eq=False)
class BearingMatrix:
    """Stacked constructor vectors: rows are shapelets (or cells), columns are shapes."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int8)
        if rows.ndim != 2 or rows.shape[1] < 1:
            raise InputError("a bearing matrix needs a (rows, shapes) layout with at least one shape")
        if np.any((rows != 0) & (rows != 1)):
            raise InputError("bearing entries must be 0/1")
        if rows.shape[0] and not rows.any(axis=1).all():
            raise InputError("a bearing matrix cannot contain a zero row")
        if np.unique(rows, axis=0).shape[0] != rows.shape[0]:
            raise InputError("bearing matrix rows must be pairwise distinct")
        rows = np.ascontiguousarray(rows)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def shape_count(self) -> int:
        return self.rows.shape[1]

    @property
    def row_count(self) -> int:
        return self.rows.shape[0]

    def as_float(self) -> np.ndarray:
        return self.rows.astype(float)

    def index_sets(self) -> list[np.ndarray]:
        """I_j = rows whose constructor has bit j set."""
        return [np.flatnonzero(self.rows[:, j]) for j in range(self.shape_count)]

    def constructors(self) -> list[ConstructorVector]:
        return [ConstructorVector(tuple(r)) for r in self.rows]

    def to_text(self) -> str:
        return "\n".join(" ".join(str(int(v)) for v in row) for row in self.rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BearingMatrix":
        lines = [line.split() for line in text.splitlines() if line.strip()]
        if not lines:
            raise InputError("empty bearing matrix text")
        if len({len(r) for r in lines}) != 1:
            raise InputError("bearing matrix rows have different lengths")
        try:
            return cls(np.array([[int(v) for v in r] for r in lines]))
        except ValueError:
            raise InputError("bearing matrix text must contain integers only") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, BearingMatrix):
            return NotImplemented
        return np.array_equal(self.rows, other.rows)

    def __hash__(self) -> int:
        return hash((self.rows.shape, self.rows.tobytes()))


@dataclass(frozen=True)
class CompositionSpec:
    """(include, exclude) 0-based index sets; reports show them 1-based."""

    include: tuple[int, ...]
    exclude: tuple[int, ...] = ()

    def __post_init__(self):
        include = tuple(sorted(int(i) for i in self.include))
        exclude = tuple(sorted(int(i) for i in self.exclude))
        if not include:
            raise CompositionError("a composition needs at least one included shape")
        if len(set(include)) != len(include) or len(set(exclude)) != len(exclude):
            raise CompositionError("composition index sets contain duplicates")
        if set(include) & set(exclude):
            raise CompositionError(
                f"shapes {sorted(i + 1 for i in set(include) & set(exclude))} are both included and excluded"
            )
        if min(include + exclude) < 0:
            raise CompositionError("composition indices must be nonnegative")
        object.__setattr__(self, "include", include)
        object.__setattr__(self, "exclude", exclude)

    @property
    def members(self) -> tuple[int, ...]:
        """All shapes taking part, in dictionary order."""
        return tuple(sorted(self.include + self.exclude))

    @property
    def size(self) -> int:
        return len(self.include) + len(self.exclude)

    def check_bounds(self, n_shapes: int):
        bad = [i + 1 for i in self.members if i >= n_shapes]
        if bad:
            raise CompositionError(f"composition refers to shapes {bad} but the dictionary has {n_shapes}")

    def as_dict(self) -> dict:
        return {"include": [i + 1 for i in self.include], "exclude": [i + 1 for i in self.exclude]}


@dataclass(frozen=True, eq=False)
class Decomposition:
    shapelets: list[Shapelet]
    bearing: BearingMatrix
    index_sets: list[np.ndarray]
    labels: np.ndarray

    @property
    def grid(self) -> PixelGrid:
        return self.shapelets[0].region.grid

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=len(self.shapelets))

    def as_dict(self) -> dict:
        return {
            "shapes": self.bearing.shape_count,
            "shapelets": [
                {"index": i + 1, "constructor": list(s.constructor.bits), "pixels": len(s.region)}
                for i, s in enumerate(self.shapelets)
            ],
            "index_sets": {f"I{j + 1}": [int(i) + 1 for i in idx] for j, idx in enumerate(self.index_sets)},
        }


@dataclass(frozen=True)
class PartitionReport:
    disjoint: bool
    covers_union: bool
    reconstructs_shapes: bool

    @property
    def passed(self) -> bool:
        return self.disjoint and self.covers_union and self.reconstructs_shapes


# ── Decomposition ─────────────────────────────────────────────────────────────

def decompose(shapes: Sequence[Region]) -> Decomposition:
    """Groups the pixels of the union on their membership signature.

    Shapelets come out in ascending lexicographic order of their constructor bits.
    """
    if not shapes:
        raise InputError("cannot decompose an empty shape list")
    grid = shapes[0].grid
    check_on_grid(grid, shapes)
    members = membership_matrix(shapes)
    union = np.flatnonzero(members.any(axis=1))
    if union.size == 0:
        raise InputError("all shapes are empty")
    n = len(shapes)
    packed = np.packbits(members[union], axis=1)
    signatures, inverse = np.unique(packed, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    rows = np.unpackbits(signatures, axis=1)[:, :n]

    labels = np.full(grid.size, -1, dtype=np.int64)
    labels[union] = inverse
    labels.setflags(write=False)

    bearing = BearingMatrix(rows)
    shapelets = [
        Shapelet(Region(grid, labels == i), ConstructorVector(tuple(rows[i])))
        for i in range(rows.shape[0])
    ]
    logger.debug("Decomposed %d shapes into %d shapelets", n, len(shapelets))
    return Decomposition(shapelets, bearing, bearing.index_sets(), labels)


def _compose_mask(members: np.ndarray, include: Iterable[int], exclude: Iterable[int]) -> np.ndarray:
    include, exclude = list(include), list(exclude)
    if not include:
        return np.zeros(members.shape[0], dtype=bool)
    plus = members[:, include].any(axis=1)
    if exclude:
        plus &= ~members[:, exclude].any(axis=1)
    return plus


def compose_region(shapes: Sequence[Region], spec: CompositionSpec) -> Region:
    """(union of included shapes) minus (union of excluded shapes); may be empty."""
    if not shapes:
        raise InputError("empty shape list")
    spec.check_bounds(len(shapes))
    check_on_grid(shapes[0].grid, shapes)
    return Region(shapes[0].grid, _compose_mask(membership_matrix(shapes), spec.include, spec.exclude))


def is_nonredundant(shapes: Sequence[Region], spec: CompositionSpec) -> bool:
    spec.check_bounds(len(shapes))
    members = membership_matrix(shapes)
    target = _compose_mask(members, spec.include, spec.exclude)
    for j in spec.include:
        rest = [i for i in spec.include if i != j]
        if np.array_equal(_compose_mask(members, rest, spec.exclude), target):
            return False
    for j in spec.exclude:
        rest = [i for i in spec.exclude if i != j]
        if np.array_equal(_compose_mask(members, spec.include, rest), target):
            return False
    return True


def verify_partition_properties(
    shapes: Sequence[Region],
    shapelets: Sequence[Shapelet],
    index_sets: Sequence[Sequence[int]],
) -> PartitionReport:
    grid = shapes[0].grid
    union = membership_matrix(shapes).any(axis=1)
    if shapelets:
        cover = np.stack([s.region.mask for s in shapelets], axis=1)
        counts = cover.sum(axis=1)
    else:
        cover = np.zeros((grid.size, 0), dtype=bool)
        counts = np.zeros(grid.size, dtype=np.int64)
    disjoint = bool(np.all(counts <= 1))
    covers_union = bool(np.array_equal(counts > 0, union))
    reconstructs = len(index_sets) == len(shapes)
    if reconstructs:
        for shape, idx in zip(shapes, index_sets):
            idx = [int(i) for i in idx]
            if any(i < 0 or i >= cover.shape[1] for i in idx):
                reconstructs = False
                break
            rebuilt = cover[:, idx].any(axis=1) if idx else np.zeros(grid.size, dtype=bool)
            if not np.array_equal(rebuilt, shape.mask):
                reconstructs = False
                break
    return PartitionReport(disjoint, covers_union, reconstructs)


# ── Counting ──────────────────────────────────────────────────────────────────

def count_compositions(n_s: int, s: Optional[int] = None) -> int:
    """Number of distinct (include, exclude) selections, counting the empty one."""
    if n_s < 1:
        raise InputError(f"dictionary size must be at least 1, got {n_s}")
    if s is None:
        return 3 ** n_s - 2 ** n_s + 1
    if s < 0 or s > n_s:
        raise InputError(f"cardinality {s} outside [0, {n_s}]")
    return 1 + sum(math.comb(n_s, k) * (2 ** k - 1) for k in range(1, s + 1))


# ── Construction from a bearing matrix ────────────────────────────────────────

def masks_from_bearing(rows, cell_size: int = 1) -> tuple[PixelGrid, list[ShapeMask]]:
    """Lays each bearing row out as its own block of ``cell_size`` pixels.

    Row i occupies grid row y = i; shape j is the union of the rows with bit j set.
    """
    rows = np.asarray(rows, dtype=np.int8)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InputError("bearing rows must form a nonempty 2-D array")
    if cell_size < 1:
        raise InputError("cell size must be positive")
    grid = PixelGrid(width=cell_size, height=rows.shape[0])
    shapes = []
    for j in range(rows.shape[1]):
        cells = np.repeat(rows[:, j].astype(bool), cell_size)
        if not cells.any():
            raise InputError(f"bearing column {j + 1} is empty")
        shapes.append(ShapeMask(grid, cells))
    return grid, shapes
