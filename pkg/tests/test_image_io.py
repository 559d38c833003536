import numpy as np
import pytest

from modules.errors import InputError
from modules.grid import Image, PixelGrid, Region
from modules.image_io import (
    read_mask_pgm,
    read_observed_mask,
    read_pgm,
    read_pgm_raw,
    write_mask_pgm,
    write_pgm,
)


def test_read_ascii_pgm_with_comments(tmp_path):
    path = tmp_path / "tiny.pgm"
    path.write_text("P2\n# a comment\n3 2\n# another\n4\n0 1 2\n3 4 0\n")
    grid, samples, maxval = read_pgm_raw(path)
    assert grid == PixelGrid(3, 2)
    assert maxval == 4
    np.testing.assert_array_equal(samples, [0, 1, 2, 3, 4, 0])
    image = read_pgm(path)
    np.testing.assert_allclose(image.values, [0.0, 0.25, 0.5, 0.75, 1.0, 0.0])


def test_binary_write_then_read(tmp_path):
    image = Image.from_array(np.array([[0.0, 0.5, 1.0], [1.0, 0.0, 0.2]]))
    path = tmp_path / "img.pgm"
    write_pgm(path, image)
    back = read_pgm(path)
    assert back.grid == image.grid
    np.testing.assert_allclose(back.values, image.values, atol=1 / 255)


def test_sixteen_bit_binary(tmp_path):
    image = Image.from_array(np.array([[0.0, 0.123456]]))
    path = tmp_path / "deep.pgm"
    write_pgm(path, image, maxval=65535)
    _, samples, maxval = read_pgm_raw(path)
    assert maxval == 65535
    assert samples[1] == round(0.123456 * 65535)


def test_mask_files_hold_only_0_and_255(tmp_path):
    grid = PixelGrid(4, 2)
    region = Region.from_indices(grid, [0, 5, 7])
    path = tmp_path / "mask.pgm"
    write_mask_pgm(path, region)
    _, samples, _ = read_pgm_raw(path)
    assert set(np.unique(samples)) <= {0, 255}
    assert read_mask_pgm(path) == region


def test_observed_mask_must_match_grid(tmp_path):
    path = tmp_path / "observed.pgm"
    write_mask_pgm(path, Region.from_indices(PixelGrid(3, 3), [0]))
    assert read_observed_mask(path, PixelGrid(3, 3)).sum() == 1
    with pytest.raises(InputError):
        read_observed_mask(path, PixelGrid(4, 3))


@pytest.mark.parametrize("content", [
    b"P6\n1 1\n255\n\x00\x00\x00",
    b"P5\n2 2\n255\n\x00",
    b"P2\n2 1\n3\n1 9\n",
    b"P2\n2",
])
def test_malformed_files(tmp_path, content):
    path = tmp_path / "bad.pgm"
    path.write_bytes(content)
    with pytest.raises(InputError):
        read_pgm(path)


def test_missing_file(tmp_path):
    with pytest.raises(InputError):
        read_pgm(tmp_path / "nope.pgm")
