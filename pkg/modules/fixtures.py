"""
Fixtures - small reference geometries and dictionary generators

Includes the worked layouts used to check decomposition, linkage and
certificates by hand, the block-grid dictionary, a desk-scale jigsaw puzzle
with decoy placements, and glyph-like polygon dictionaries.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from modules.dictionary_io import DictionarySpec, ShapeEntry, save_dictionary
from modules.dsd import CompositionSpec, masks_from_bearing
from modules.errors import InputError
from modules.grid import Image, InhomogeneityField, PixelGrid, Region, ShapeMask
from modules.image_io import write_mask_pgm, write_pgm

logger = logging.getLogger(__name__)


def _box(grid: PixelGrid, x0: int, x1: int, y0: int, y1: int) -> np.ndarray:
    """Half-open pixel box [x0, x1) x [y0, y1) as a flat mask."""
    mask = np.zeros(grid.shape, dtype=bool)
    mask[y0:y1, x0:x1] = True
    return mask.reshape(-1)


# ── Worked layouts ────────────────────────────────────────────────────────────

def three_shape_layout() -> tuple[PixelGrid, list[ShapeMask]]:
    """Two overlapping squares and a small square nested in the first.

    Five shapelets; the third shape never appears without the first.
    """
    grid = PixelGrid(10, 10)
    return grid, [
        ShapeMask(grid, _box(grid, 0, 6, 0, 6)),
        ShapeMask(grid, _box(grid, 4, 10, 0, 4)),
        ShapeMask(grid, _box(grid, 2, 5, 2, 5)),
    ]


FOUR_SHAPE_ROWS = (
    (1, 0, 0, 0), (1, 1, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0),
    (1, 0, 1, 0), (1, 1, 1, 0), (0, 0, 1, 1), (1, 0, 0, 1),
    (1, 1, 0, 1), (0, 0, 0, 1), (0, 1, 0, 1),
)


def four_shape_layout() -> tuple[PixelGrid, list[ShapeMask]]:
    """Eleven shapelets; (S1 u S2) minus (S3 u S4) links to alpha = (1, 1, -2, -2)."""
    return masks_from_bearing(FOUR_SHAPE_ROWS)


def five_rectangle_layout() -> tuple[PixelGrid, list[ShapeMask]]:
    """Three rectangles plus two thin excluded shapes sharing one shapelet.

    With S1, S2, S3 included and S4, S5 excluded the linkage LP has a whole
    optimal edge: alpha_4 + alpha_5 = -3 with both at most -1.
    """
    grid = PixelGrid(12, 6)
    s4 = _box(grid, 0, 1, 0, 6) | _box(grid, 4, 6, 2, 3)
    s5 = _box(grid, 4, 6, 2, 3) | _box(grid, 11, 12, 3, 6)
    return grid, [
        ShapeMask(grid, _box(grid, 0, 6, 0, 6)),
        ShapeMask(grid, _box(grid, 4, 12, 0, 3)),
        ShapeMask(grid, _box(grid, 4, 12, 2, 6)),
        ShapeMask(grid, s4),
        ShapeMask(grid, s5),
    ]


SEVEN_CELL_ROWS = (
    (1, 0, 0, 1), (1, 1, 0, 0), (1, 0, 1, 0), (0, 1, 0, 0),
    (0, 0, 1, 0), (0, 1, 1, 0), (1, 1, 1, 0),
)


def seven_cell_instance() -> tuple[list[ShapeMask], InhomogeneityField]:
    """Seven one-pixel cells; only the first favours the inside (p=0, q=1), the rest p=1, q=0.

    The object is the first cell, i.e. shape 4 alone; it can also be written as
    S1 minus (S2 u S3).
    """
    grid, shapes = masks_from_bearing(SEVEN_CELL_ROWS)
    pi_in = np.ones(grid.size)
    pi_ex = np.zeros(grid.size)
    pi_in[0], pi_ex[0] = 0.0, 1.0
    return shapes, InhomogeneityField(grid, pi_in, pi_ex)


# ── Block grid ────────────────────────────────────────────────────────────────

def block_grid_dictionary(width: int = 120, height: int = 100, block: int = 15,
                          columns: int = 40, rows: int = 30) -> DictionarySpec:
    """Square blocks centered on a uniform columns x rows lattice covering the grid."""
    if min(width, height, block, columns, rows) < 1:
        raise InputError("block grid parameters must be positive")
    dx, dy = width / columns, height / rows
    entries = []
    for j in range(rows):
        for i in range(columns):
            cx, cy = (i + 0.5) * dx, (j + 0.5) * dy
            entries.append(ShapeEntry(
                f"block_{j + 1:02d}_{i + 1:02d}", "rectangle",
                {"x": cx - block / 2.0, "y": cy - block / 2.0, "w": float(block), "h": float(block)},
            ))
    return DictionarySpec(PixelGrid(width, height), tuple(entries))


# ── Mini puzzle ───────────────────────────────────────────────────────────────

PUZZLE_PIECES = (
    "AAAABBBB",
    "AAAABBBB",
    "AAABBBBB",
    "AAAAABBB",
    "CCCCDDDD",
    "CCCDDDDD",
    "CCCCCDDD",
    "CCCCDDDD",
)
# outward direction (dx, dy) of each quadrant
PUZZLE_OUTWARD = {"A": (-1, -1), "B": (1, -1), "C": (-1, 1), "D": (1, 1)}


@dataclass(frozen=True, eq=False)
class PuzzleFixture:
    image: Image
    shapes: list[ShapeMask]
    labels: list[str]
    pad: Region
    true_indices: tuple[int, ...]

    @property
    def true_spec(self) -> CompositionSpec:
        return CompositionSpec(self.true_indices)


def _place(grid: PixelGrid, piece: np.ndarray, x0: int, y0: int) -> np.ndarray:
    canvas = np.zeros(grid.shape, dtype=bool)
    h, w = piece.shape
    canvas[y0:y0 + h, x0:x0 + w] = piece
    return canvas.reshape(-1)


def mini_puzzle(size: int = 12, margin: int = 2) -> PuzzleFixture:
    """An 8x8 pad tiled by four 16-pixel pieces, plus three decoys per piece.

    The decoys are the piece pushed one pixel out of the pad horizontally, one
    pixel vertically, and turned by 90 degrees in its outer corner and pushed out
    diagonally; every decoy covers background. The image is dark (0) on the
    pad and bright (1) elsewhere.
    """
    side = len(PUZZLE_PIECES)
    if size < side + 2 * margin or margin < 1:
        raise InputError(f"a {size}x{size} canvas with margin {margin} cannot hold the {side}x{side} pad")
    grid = PixelGrid(size, size)
    layout = np.array([list(row) for row in PUZZLE_PIECES])
    shapes, labels = [], []
    truth = []
    decoys = []
    for name, (ox, oy) in PUZZLE_OUTWARD.items():
        rows, cols = np.nonzero(layout == name)
        y0, x0 = rows.min(), cols.min()
        piece = (layout == name)[y0:rows.max() + 1, x0:cols.max() + 1]
        truth.append((name, _place(grid, piece, margin + x0, margin + y0)))
        decoys.append((f"{name}_h", _place(grid, piece, margin + x0 + ox, margin + y0)))
        decoys.append((f"{name}_v", _place(grid, piece, margin + x0, margin + y0 + oy)))
        turned = np.rot90(piece)
        h, w = turned.shape
        tx = margin if ox < 0 else margin + side - w
        ty = margin if oy < 0 else margin + side - h
        decoys.append((f"{name}_r", _place(grid, turned, tx + ox, ty + oy)))
    for label, mask in truth + decoys:
        labels.append(label)
        shapes.append(ShapeMask(grid, mask))
    pad = Region(grid, _box(grid, margin, margin + side, margin, margin + side))
    image = Image(grid, np.where(pad.mask, 0.0, 1.0))
    return PuzzleFixture(image, shapes, labels, pad, tuple(range(len(truth))))


def write_puzzle(out_dir: Path, fixture: Optional[PuzzleFixture] = None) -> Path:
    """Writes the puzzle image, one mask per placement and a dictionary referencing them."""
    fixture = fixture or mini_puzzle()
    out_dir = Path(out_dir)
    (out_dir / "pieces").mkdir(parents=True, exist_ok=True)
    entries = []
    for label, shape in zip(fixture.labels, fixture.shapes):
        rel = Path("pieces") / f"{label}.pgm"
        write_mask_pgm(out_dir / rel, shape)
        entries.append(ShapeEntry(label, "raster", {"file": rel.as_posix(), "dx": 0, "dy": 0}))
    write_pgm(out_dir / "puzzle.pgm", fixture.image)
    path = out_dir / "dictionary.json"
    save_dictionary(path, DictionarySpec(fixture.image.grid, tuple(entries), out_dir))
    return path


# ── Basic shapes and glyphs ───────────────────────────────────────────────────

def basic_shapes_dictionary(width: int = 48, height: int = 32, spacing: int = 8,
                            sizes: Sequence[int] = (6, 10)) -> DictionarySpec:
    """Circles, squares, triangles and ellipses of a few sizes on a coarse lattice."""
    entries = []
    for size in sizes:
        half = size / 2.0
        for cy in np.arange(spacing / 2.0, height, spacing):
            for cx in np.arange(spacing / 2.0, width, spacing):
                tag = f"{size}_{int(cx)}_{int(cy)}"
                entries += [
                    ShapeEntry(f"circle_{tag}", "disc", {"cx": cx, "cy": cy, "r": half}),
                    ShapeEntry(f"square_{tag}", "rectangle",
                               {"x": cx - half, "y": cy - half, "w": size, "h": size}),
                    ShapeEntry(f"triangle_{tag}", "polygon", {"vertices": [
                        (cx - half, cy + half), (cx + half, cy + half), (cx, cy - half)]}),
                    ShapeEntry(f"ellipse_{tag}", "ellipse",
                               {"cx": cx, "cy": cy, "rx": half, "ry": half / 2.0, "angle": 30.0}),
                ]
    return DictionarySpec(PixelGrid(width, height), tuple(entries))


# glyph outlines in a 6x9 box, y pointing down
GLYPHS = {
    "I": ((0, 0), (2, 0), (2, 9), (0, 9)),
    "L": ((0, 0), (2, 0), (2, 7), (5, 7), (5, 9), (0, 9)),
    "T": ((0, 0), (6, 0), (6, 2), (4, 2), (4, 9), (2, 9), (2, 2), (0, 2)),
    "F": ((0, 0), (5, 0), (5, 2), (2, 2), (2, 4), (4, 4), (4, 6), (2, 6), (2, 9), (0, 9)),
}


def glyph_dictionary(width: int = 32, height: int = 16, step: int = 4,
                     angles: Sequence[float] = (0.0, 90.0)) -> DictionarySpec:
    """Every glyph at every lattice offset that keeps its box on the grid, at each angle."""
    entries = []
    for name, outline in GLYPHS.items():
        for angle in angles:
            for y in range(0, height - 8, step):
                for x in range(0, width - 8, step):
                    vertices = [(x + vx, y + vy) for vx, vy in outline]
                    entries.append(ShapeEntry(f"{name}_{x}_{y}_r{int(angle)}", "polygon",
                                              {"vertices": vertices, "angle": angle}))
    return DictionarySpec(PixelGrid(width, height), tuple(entries))


def render_composition(spec: DictionarySpec, labels: Sequence[str],
                       ink: float = 0.0, background: float = 1.0) -> Image:
    """An image with the union of the named entries in ink and everything else in background."""
    masks = spec.masks
    union = np.zeros(spec.grid.size, dtype=bool)
    for label in labels:
        union |= masks[spec.index_of(label)].mask
    return Image(spec.grid, np.where(union, ink, background))
