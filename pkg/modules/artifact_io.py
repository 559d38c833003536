"""
Artifact IO - writes run outputs: YAML reports, alpha CSV tables, sweep summaries, masks
"""

import csv
import io
import logging
import threading
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from modules.errors import InputError
from modules.grid import Image, Region
from modules.image_io import write_mask_pgm, write_pgm

logger = logging.getLogger(__name__)

ALPHA_HEADER = ("index", "label", "alpha")
SWEEP_HEADER = ("tau", "objective", "support_size")


def _plain(value):
    """numpy scalars and arrays to builtin types so safe_dump accepts them."""
    if isinstance(value, dict):
        return {_plain(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def format_number(value: float) -> str:
    value = float(value)
    if value == 0.0:
        value = 0.0  # no "-0"
    return f"{value:.12g}"


class ArtifactWriter:
    """All files of one run go under ``out_dir``; writes to one path never interleave."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self._locks: dict[Path, threading.Lock] = {}
        self._guard = threading.Lock()
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"cannot create output directory {self.out_dir}: {exc}") from exc

    def _lock(self, path: Path) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(path, threading.Lock())

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        with self._lock(path):
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(text, encoding="utf-8")
            except OSError as exc:
                raise InputError(f"cannot write {path}: {exc}") from exc
        logger.info("Wrote %s", path)
        return path

    # ── Reports ───────────────────────────────────────────────────────────────

    def write_report(self, name: str, report: dict) -> Path:
        text = yaml.safe_dump(_plain(report), sort_keys=False, allow_unicode=True)
        return self.write_text(name, text)

    # ── Tables ────────────────────────────────────────────────────────────────

    def write_table(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) if isinstance(v, (float, np.floating)) else v for v in row])
        return self.write_text(name, buffer.getvalue())

    def write_alpha(self, name: str, alpha, labels: Optional[Sequence[str]] = None) -> Path:
        alpha = np.asarray(alpha, dtype=float)
        if labels is not None and len(labels) != alpha.size:
            raise InputError(f"{len(labels)} labels for {alpha.size} coefficients")
        rows = [(j + 1, labels[j] if labels else str(j + 1), float(a)) for j, a in enumerate(alpha)]
        return self.write_table(name, ALPHA_HEADER, rows)

    def write_sweep_summary(self, name: str, rows: Iterable[tuple[float, float, int]]) -> Path:
        return self.write_table(name, SWEEP_HEADER, [(float(t), float(v), int(k)) for t, v, k in rows])

    # ── Masks and images ──────────────────────────────────────────────────────

    def write_mask(self, name: str, region: Region) -> Path:
        path = self.out_dir / name
        with self._lock(path):
            try:
                write_mask_pgm(path, region)
            except OSError as exc:
                raise InputError(f"cannot write {path}: {exc}") from exc
        return path

    def write_image(self, name: str, image: Image) -> Path:
        path = self.out_dir / name
        with self._lock(path):
            try:
                write_pgm(path, image)
            except OSError as exc:
                raise InputError(f"cannot write {path}: {exc}") from exc
        return path
