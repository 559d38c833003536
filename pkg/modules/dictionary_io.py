"""
Dictionary I/O - dictionary documents: parsing, validation, rasterization, rendering

A document is JSON; the YAML composer is run over it only to recover the source
line of every node:

    {"grid": {"width": 12, "height": 8},
     "entries": [{"label": "a", "type": "rectangle", "x": 0, "y": 0, "w": 4, "h": 3}]}

Pixel (x, y) has center (x + 0.5, y + 0.5); a pixel belongs to a shape iff its
center lies in the closed shape. Rotations are counter-clockwise as displayed
(y grows downwards), in degrees, about the shape's area centroid.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from modules.errors import DictionaryError, InputError
from modules.grid import PixelGrid, ShapeMask
from modules.image_io import read_mask_pgm
from modules.validator import ENTRY_FIELDS, DictionaryValidator

logger = logging.getLogger(__name__)

EDGE_EPS = 1e-9


# ── Types ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ShapeEntry:
    label: str
    kind: str
    params: dict
    line: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.kind not in ENTRY_FIELDS:
            raise InputError(f"unknown shape kind {self.kind!r}")
        object.__setattr__(self, "params", _normalize_params(self.params))

    def as_dict(self) -> dict:
        out = {"label": self.label, "type": self.kind}
        for key, value in self.params.items():
            out[key] = [list(v) for v in value] if key == "vertices" else value
        return out


@dataclass(frozen=True, eq=False)
class DictionarySpec:
    grid: PixelGrid
    entries: tuple[ShapeEntry, ...]
    base_dir: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DictionarySpec):
            return NotImplemented
        return self.grid == other.grid and self.entries == other.entries

    __hash__ = None

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InputError(f"no dictionary entry labelled '{label}'") from None

    @cached_property
    def masks(self) -> list[ShapeMask]:
        """Every entry rasterized on the grid, in file order."""
        masks, problems = [], []
        for entry in self.entries:
            try:
                masks.append(rasterize(entry, self.grid, self.base_dir))
            except DictionaryError as exc:
                problems.extend(exc.messages)
        if problems:
            raise DictionaryError(problems)
        return masks

    def as_document(self) -> dict:
        return {
            "grid": {"width": self.grid.width, "height": self.grid.height},
            "entries": [e.as_dict() for e in self.entries],
        }


def _normalize_params(params: dict) -> dict:
    out = {}
    for key, value in params.items():
        if key == "vertices":
            out[key] = tuple((float(x), float(y)) for x, y in value)
        elif key == "file":
            out[key] = str(value)
        elif key in ("dx", "dy"):
            out[key] = int(value)
        else:
            out[key] = float(value)
    return out


# ── Parsing ───────────────────────────────────────────────────────────────────

def _line(node: yaml.Node) -> int:
    return node.start_mark.line + 1


def _entry_lines(text: str) -> tuple[Optional[int], list[dict[str, int]]]:
    """Source lines of the grid block and of every entry field.

    JSON is a YAML flow document once tabs become spaces (a JSON string cannot
    hold a raw tab), so the YAML composer supplies the node marks.
    """
    grid_line, entries = None, []
    try:
        root = yaml.compose(text.replace("\t", " "), Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        logger.debug("No source lines for this dictionary: %s", exc)
        return grid_line, entries
    if not isinstance(root, yaml.MappingNode):
        return grid_line, entries
    for key, value in root.value:
        if key.value == "grid":
            grid_line = _line(value)
        elif key.value == "entries" and isinstance(value, yaml.SequenceNode):
            for item in value.value:
                lines = {"": _line(item)}
                if isinstance(item, yaml.MappingNode):
                    lines.update({k.value: _line(k) for k, _ in item.value})
                entries.append(lines)
    return grid_line, entries


def parse_dictionary(text: str, base_dir: Optional[Path] = None) -> DictionarySpec:
    """Validated spec with entries in file order; raster paths resolve against base_dir."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DictionaryError([f"line {exc.lineno}: syntax error: {exc.msg}"]) from None

    grid_line, entry_lines = _entry_lines(text)
    result = DictionaryValidator().validate_document(data, grid_line, entry_lines)
    for warning in result.warnings:
        logger.warning("Dictionary: %s", warning)
    if not result.valid:
        raise DictionaryError(result.errors)

    grid = PixelGrid(width=data["grid"]["width"], height=data["grid"]["height"])
    entries = []
    for k, raw in enumerate(data["entries"]):
        required, optional = ENTRY_FIELDS[raw["type"]]
        params = {key: raw[key] for key in required + optional if key in raw}
        line = entry_lines[k][""] if k < len(entry_lines) else 0
        entries.append(ShapeEntry(raw["label"], raw["type"], params, line))
    spec = DictionarySpec(grid, tuple(entries), base_dir)
    spec.masks  # rejects entries that rasterize to nothing
    logger.debug("Parsed dictionary with %d entries on a %dx%d grid", len(spec), grid.width, grid.height)
    return spec


def render_dictionary(spec: DictionarySpec) -> str:
    return json.dumps(spec.as_document(), indent=2) + "\n"


def load_dictionary(path: Path) -> DictionarySpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read dictionary {path}: {exc}") from exc
    try:
        return parse_dictionary(text, path.parent)
    except DictionaryError as exc:
        raise DictionaryError([f"{path.name}: {m}" for m in exc.messages]) from None


def save_dictionary(path: Path, spec: DictionarySpec):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_dictionary(spec), encoding="utf-8")
    logger.info("Wrote dictionary %s (%d entries)", path, len(spec))


# ── Rasterization ─────────────────────────────────────────────────────────────

def _cos_sin(angle: float) -> tuple[float, float]:
    quarter = angle / 90.0
    if quarter == round(quarter):
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(round(quarter)) % 4]
    rad = np.deg2rad(angle)
    return float(np.cos(rad)), float(np.sin(rad))


def _pixel_centers(grid: PixelGrid) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:grid.height, 0:grid.width]
    return xs.reshape(-1) + 0.5, ys.reshape(-1) + 0.5


def _unrotate(px, py, cx, cy, angle):
    """Maps grid points into the frame of the unrotated shape."""
    c, s = _cos_sin(angle)
    dx, dy = px - cx, py - cy
    return cx + c * dx - s * dy, cy + s * dx + c * dy


def _inside_polygon(px: np.ndarray, py: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Closed even-odd test: interior by ray casting, boundary by segment distance."""
    inside = np.zeros(px.size, dtype=bool)
    on_edge = np.zeros(px.size, dtype=bool)
    for (xa, ya), (xb, yb) in zip(vertices, np.roll(vertices, -1, axis=0)):
        crosses = (ya > py) != (yb > py)
        if ya != yb:
            x_cross = xa + (py - ya) * (xb - xa) / (yb - ya)
            inside ^= crosses & (px < x_cross)
        length = max(1.0, float(np.hypot(xb - xa, yb - ya)))
        cross = (xb - xa) * (py - ya) - (yb - ya) * (px - xa)
        within = ((min(xa, xb) - EDGE_EPS <= px) & (px <= max(xa, xb) + EDGE_EPS)
                  & (min(ya, yb) - EDGE_EPS <= py) & (py <= max(ya, yb) + EDGE_EPS))
        on_edge |= within & (np.abs(cross) <= EDGE_EPS * length)
    return inside | on_edge


def _polygon_centroid(vertices: np.ndarray) -> tuple[float, float]:
    """Area centroid by the shoelace formula; the bounding-box center for degenerate outlines."""
    x, y = vertices[:, 0], vertices[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    if abs(area) <= EDGE_EPS:
        lo, hi = vertices.min(axis=0), vertices.max(axis=0)
        return float((lo[0] + hi[0]) / 2.0), float((lo[1] + hi[1]) / 2.0)
    return float(((x + xn) * cross).sum() / (6.0 * area)), float(((y + yn) * cross).sum() / (6.0 * area))


def _raster_mask(entry: ShapeEntry, grid: PixelGrid, px, py, base_dir: Optional[Path]) -> np.ndarray:
    path = Path(entry.params["file"])
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    try:
        source = read_mask_pgm(path).as_array()
    except InputError as exc:
        raise DictionaryError([f"{_where(entry)}raster '{entry.label}': {exc}"]) from None
    rows, cols = np.nonzero(source)
    if rows.size == 0:
        return np.zeros(grid.size, dtype=bool)
    dx, dy = entry.params.get("dx", 0), entry.params.get("dy", 0)
    cx = cols.mean() + 0.5 + dx
    cy = rows.mean() + 0.5 + dy
    qx, qy = _unrotate(px, py, cx, cy, entry.params.get("angle", 0.0))
    sx = np.floor(qx - dx).astype(np.int64)
    sy = np.floor(qy - dy).astype(np.int64)
    ok = (sx >= 0) & (sx < source.shape[1]) & (sy >= 0) & (sy < source.shape[0])
    mask = np.zeros(grid.size, dtype=bool)
    mask[ok] = source[sy[ok], sx[ok]]
    return mask


def _where(entry: ShapeEntry) -> str:
    return f"line {entry.line}: " if entry.line else ""


def rasterize(entry: ShapeEntry, grid: PixelGrid, base_dir: Optional[Path] = None) -> ShapeMask:
    px, py = _pixel_centers(grid)
    p = entry.params
    angle = p.get("angle", 0.0)
    if entry.kind == "rectangle":
        cx, cy = p["x"] + p["w"] / 2.0, p["y"] + p["h"] / 2.0
        qx, qy = _unrotate(px, py, cx, cy, angle)
        mask = ((np.abs(qx - cx) <= p["w"] / 2.0 + EDGE_EPS)
                & (np.abs(qy - cy) <= p["h"] / 2.0 + EDGE_EPS))
    elif entry.kind == "disc":
        mask = np.hypot(px - p["cx"], py - p["cy"]) <= p["r"] + EDGE_EPS
    elif entry.kind == "ellipse":
        qx, qy = _unrotate(px, py, p["cx"], p["cy"], angle)
        mask = ((qx - p["cx"]) / p["rx"]) ** 2 + ((qy - p["cy"]) / p["ry"]) ** 2 <= 1.0 + EDGE_EPS
    elif entry.kind == "polygon":
        vertices = np.asarray(p["vertices"], dtype=float)
        cx, cy = _polygon_centroid(vertices)
        qx, qy = _unrotate(px, py, cx, cy, angle)
        mask = _inside_polygon(qx, qy, vertices)
    else:
        mask = _raster_mask(entry, grid, px, py, base_dir)
    if not mask.any():
        raise DictionaryError([f"{_where(entry)}entry '{entry.label}' rasterizes to an empty mask "
                               f"on the {grid.width}x{grid.height} grid"])
    return ShapeMask(grid, mask)
