"""
Image IO - PGM (P2 ASCII / P5 binary) reading and writing
"""

import logging
import re
from pathlib import Path

import numpy as np

from modules.errors import InputError
from modules.grid import Image, PixelGrid, Region

logger = logging.getLogger(__name__)

MAX_PGM_VALUE = 65535
_TOKEN_RE = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


# ── Header ────────────────────────────────────────────────────────────────────

def _read_header(data: bytes, path: Path) -> tuple[str, int, int, int, int]:
    """Returns (magic, width, height, maxval, offset of the first raster byte)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        match = _TOKEN_RE.match(data, pos)
        if match is None:
            raise InputError(f"{path}: truncated PGM header")
        tokens.append(match.group(1))
        pos = match.end()
    magic = tokens[0].decode("ascii", errors="replace")
    if magic not in ("P2", "P5"):
        raise InputError(f"{path}: unsupported PGM magic '{magic}' (expected P2 or P5)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise InputError(f"{path}: non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise InputError(f"{path}: PGM size {width}x{height} is empty")
    if not (1 <= maxval <= MAX_PGM_VALUE):
        raise InputError(f"{path}: PGM maxval {maxval} outside [1, {MAX_PGM_VALUE}]")
    # a single whitespace byte separates the header from P5 raster data
    return magic, width, height, maxval, pos + 1


def read_pgm_raw(path: Path) -> tuple[PixelGrid, np.ndarray, int]:
    """Returns (grid, integer samples, maxval) without normalization."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read image {path}: {exc}") from exc
    magic, width, height, maxval, offset = _read_header(data, path)
    count = width * height
    if magic == "P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        raster = data[offset:offset + count * dtype.itemsize]
        if len(raster) < count * dtype.itemsize:
            raise InputError(f"{path}: P5 raster holds {len(raster)} bytes, expected {count * dtype.itemsize}")
        samples = np.frombuffer(raster, dtype=dtype).astype(np.int64)
    else:
        try:
            samples = np.array(data[offset - 1:].split(), dtype=np.int64)
        except ValueError:
            raise InputError(f"{path}: non-numeric sample in P2 raster") from None
        if samples.size < count:
            raise InputError(f"{path}: P2 raster holds {samples.size} samples, expected {count}")
        samples = samples[:count]
    if samples.max(initial=0) > maxval:
        raise InputError(f"{path}: sample exceeds maxval {maxval}")
    return PixelGrid(width, height), samples, maxval


def read_pgm(path: Path) -> Image:
    """Loads a grayscale image normalized to [0, 1]."""
    grid, samples, maxval = read_pgm_raw(path)
    logger.debug("Read %s (%dx%d, maxval %d)", path, grid.width, grid.height, maxval)
    return Image(grid, samples.astype(float) / maxval)


def read_mask_pgm(path: Path) -> Region:
    """Nonzero samples are members."""
    grid, samples, _ = read_pgm_raw(path)
    return Region(grid, samples > 0)


def read_observed_mask(path: Path, grid: PixelGrid) -> np.ndarray:
    region = read_mask_pgm(path)
    if region.grid != grid:
        raise InputError(
            f"observed mask {path} is {region.grid.width}x{region.grid.height}, "
            f"image is {grid.width}x{grid.height}"
        )
    return region.mask


# ── Writing ───────────────────────────────────────────────────────────────────

def _write(path: Path, width: int, height: int, maxval: int, samples: np.ndarray, binary: bool):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{width} {height}\n{maxval}\n".encode("ascii")
    if binary:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        body = samples.astype(dtype).tobytes()
    else:
        rows = samples.reshape(height, width)
        body = "\n".join(" ".join(str(int(v)) for v in row) for row in rows).encode("ascii") + b"\n"
    path.write_bytes(header + body)
    logger.info("Wrote %s", path)


def write_pgm(path: Path, image: Image, maxval: int = 255, binary: bool = True):
    """Writes values clipped to [0, 1] and scaled to maxval."""
    if not (1 <= maxval <= MAX_PGM_VALUE):
        raise InputError(f"maxval {maxval} outside [1, {MAX_PGM_VALUE}]")
    values = np.clip(np.where(image.observed_mask, image.values, 0.0), 0.0, 1.0)
    samples = np.rint(values * maxval).astype(np.int64)
    _write(path, image.grid.width, image.grid.height, maxval, samples, binary)


def write_mask_pgm(path: Path, region: Region):
    """P5 with members at 255 and everything else at 0."""
    samples = np.where(region.mask, 255, 0).astype(np.int64)
    _write(path, region.grid.width, region.grid.height, 255, samples, binary=True)
