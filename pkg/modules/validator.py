"""
Validator - dictionary document validation (pure logic, no rasterization)
"""

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

logger = logging.getLogger(__name__)

VALID_LABEL_RE = re.compile(r'^[A-Za-z0-9_.-]+$')
MAX_LABEL_LEN = 64
MAX_GRID_SIDE = 1 << 14

ENTRY_FIELDS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    # kind: (required, optional)
    "rectangle": (("x", "y", "w", "h"), ("angle",)),
    "disc":      (("cx", "cy", "r"), ()),
    "ellipse":   (("cx", "cy", "rx", "ry"), ("angle",)),
    "polygon":   (("vertices",), ("angle",)),
    "raster":    (("file",), ("dx", "dy", "angle")),
}
POSITIVE_FIELDS = {"w", "h", "r", "rx", "ry"}
INTEGER_FIELDS = {"dx", "dy"}


@dataclass
class ValidationResult:
    valid: bool = True
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def add_error(self, msg: str):
        self.errors.append(msg)
        self.valid = False

    def add_warning(self, msg: str):
        self.warnings.append(msg)

    def merge(self, other: "ValidationResult") -> "ValidationResult":
        if not other.valid:
            self.valid = False
        self.errors.extend(other.errors)
        self.warnings.extend(other.warnings)
        return self


def is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _at(line: Optional[int]) -> str:
    return f"line {line}: " if line else ""


class DictionaryValidator:

    # ── Grid ─────────────────────────────────────────────────────────────────

    def validate_grid(self, grid: Any, line: Optional[int] = None) -> ValidationResult:
        r = ValidationResult()
        if not isinstance(grid, Mapping):
            r.add_error(f"{_at(line)}'grid' must be an object with 'width' and 'height'")
            return r
        for key in ("width", "height"):
            value = grid.get(key)
            if not isinstance(value, int) or isinstance(value, bool):
                r.add_error(f"{_at(line)}grid '{key}' must be an integer, got {value!r}")
            elif not 1 <= value <= MAX_GRID_SIDE:
                r.add_error(f"{_at(line)}grid '{key}' must lie in [1, {MAX_GRID_SIDE}], got {value}")
        return r

    # ── Label ────────────────────────────────────────────────────────────────

    def validate_label(self, label: Any, line: Optional[int] = None) -> ValidationResult:
        r = ValidationResult()
        if not isinstance(label, str) or not label:
            r.add_error(f"{_at(line)}entry 'label' is required and must be a string")
            return r
        if len(label) > MAX_LABEL_LEN:
            r.add_error(f"{_at(line)}label too long: {len(label)} chars (max {MAX_LABEL_LEN})")
        if not VALID_LABEL_RE.match(label):
            r.add_error(f"{_at(line)}label '{label}' may only contain letters, digits, '_', '.' and '-'")
        return r

    # ── Vertices ─────────────────────────────────────────────────────────────

    def validate_vertices(self, vertices: Any, line: Optional[int] = None) -> ValidationResult:
        r = ValidationResult()
        if not isinstance(vertices, Sequence) or isinstance(vertices, str):
            r.add_error(f"{_at(line)}'vertices' must be a list of [x, y] pairs")
            return r
        if len(vertices) < 3:
            r.add_error(f"{_at(line)}a polygon needs at least 3 vertices, got {len(vertices)}")
        for k, vertex in enumerate(vertices):
            if (not isinstance(vertex, Sequence) or isinstance(vertex, str)
                    or len(vertex) != 2 or not all(is_number(v) for v in vertex)):
                r.add_error(f"{_at(line)}vertex {k + 1} must be a pair of finite numbers, got {vertex!r}")
        return r

    # ── Single entry ─────────────────────────────────────────────────────────

    def validate_entry(self, entry: Any, lines: Optional[Mapping[str, int]] = None) -> ValidationResult:
        """``lines`` maps field names to source lines; key '' is the entry itself."""
        lines = lines or {}
        here = lines.get("")
        r = ValidationResult()
        if not isinstance(entry, Mapping):
            r.add_error(f"{_at(here)}each entry must be an object")
            return r
        r.merge(self.validate_label(entry.get("label"), lines.get("label", here)))
        kind = entry.get("type")
        if kind not in ENTRY_FIELDS:
            r.add_error(f"{_at(lines.get('type', here))}unknown entry type {kind!r}; "
                        f"expected one of {', '.join(ENTRY_FIELDS)}")
            return r
        required, optional = ENTRY_FIELDS[kind]
        for key in required:
            if key not in entry:
                r.add_error(f"{_at(here)}{kind} entry '{entry.get('label')}' is missing '{key}'")
        for key in set(entry) - set(required) - set(optional) - {"label", "type"}:
            r.add_warning(f"{_at(lines.get(key, here))}ignoring unknown field '{key}' on {kind} entry")
        for key in required + optional:
            if key not in entry or key in ("vertices", "file"):
                continue
            value, line = entry[key], lines.get(key, here)
            if not is_number(value):
                r.add_error(f"{_at(line)}field '{key}' must be a finite number, got {value!r}")
            elif key in POSITIVE_FIELDS and value <= 0:
                r.add_error(f"{_at(line)}field '{key}' must be positive, got {value}")
            elif key in INTEGER_FIELDS and float(value) != int(value):
                r.add_error(f"{_at(line)}raster offset '{key}' must be a whole number of pixels, got {value}")
        if "vertices" in entry and kind == "polygon":
            r.merge(self.validate_vertices(entry["vertices"], lines.get("vertices", here)))
        if kind == "raster" and "file" in entry:
            if not isinstance(entry["file"], str) or not entry["file"].strip():
                r.add_error(f"{_at(lines.get('file', here))}raster 'file' must be a nonempty path")
            angle = entry.get("angle", 0)
            if is_number(angle) and angle % 90:
                r.add_warning(f"{_at(lines.get('angle', here))}raster '{entry.get('label')}' rotated by "
                              f"{angle} degrees is resampled to the nearest pixel")
        return r

    # ── Whole document ───────────────────────────────────────────────────────

    def validate_document(self, data: Any, grid_line: Optional[int] = None,
                          entry_lines: Optional[Sequence[Mapping[str, int]]] = None) -> ValidationResult:
        r = ValidationResult()
        if not isinstance(data, Mapping):
            r.add_error("a dictionary document must be an object with 'grid' and 'entries'")
            return r
        if "grid" not in data:
            r.add_error("missing top-level 'grid' block")
        else:
            r.merge(self.validate_grid(data["grid"], grid_line))
        entries = data.get("entries")
        if not isinstance(entries, list):
            r.add_error("top-level 'entries' must be a list")
            return r
        if not entries:
            r.add_error("a dictionary needs at least one entry")
        entry_lines = list(entry_lines or [])
        seen: dict[str, int] = {}
        for k, entry in enumerate(entries):
            lines = entry_lines[k] if k < len(entry_lines) else {}
            r.merge(self.validate_entry(entry, lines))
            label = entry.get("label") if isinstance(entry, Mapping) else None
            if isinstance(label, str):
                if label in seen:
                    r.add_error(f"{_at(lines.get('label', lines.get('')))}duplicate label '{label}' "
                                f"(first used by entry {seen[label]})")
                else:
                    seen[label] = k + 1
        return r
