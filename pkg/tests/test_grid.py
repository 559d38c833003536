import numpy as np
import pytest

from modules.errors import InputError
from modules.grid import (
    Image,
    InhomogeneityField,
    PixelGrid,
    Region,
    ShapeMask,
    chan_vese_measures,
    loc_holds,
    loc_lower_bound,
    loc_optimal_value,
    membership_matrix,
    minmax_levels,
    pixel_set_integrals,
    quantile_levels,
    shape_integrals,
)
from tests.builders import binary_field, box


def test_grid_index_roundtrip():
    grid = PixelGrid(5, 3)
    assert grid.size == 15
    assert grid.shape == (3, 5)
    assert grid.index(4, 2) == 14
    assert grid.coords(14) == (4, 2)
    with pytest.raises(InputError):
        grid.index(5, 0)


@pytest.mark.parametrize("width,height", [(0, 3), (3, 0), (-1, -1)])
def test_grid_rejects_empty(width, height):
    with pytest.raises(InputError):
        PixelGrid(width, height)


def test_image_from_array_and_observed():
    values = np.array([[0.0, np.nan], [1.0, 0.5]])
    with pytest.raises(InputError):
        Image.from_array(values)
    observed = np.array([True, False, True, True])
    image = Image.from_array(values, observed)
    assert image.grid == PixelGrid(2, 2)
    np.testing.assert_array_equal(image.observed_values(), [0.0, 1.0, 0.5])


def test_region_set_operations(grid10):
    a = box(grid10, 0, 4, 0, 4)
    b = box(grid10, 2, 6, 2, 6)
    assert len(a.union(b)) == 16 + 16 - 4
    assert len(a.difference(b)) == 12
    assert a.intersects(b)
    assert not a.intersects(box(grid10, 8, 10, 8, 10))
    assert Region.empty(grid10).is_empty
    assert a == Region.from_indices(grid10, a.pixels)
    assert hash(a) == hash(Region(grid10, a.mask.copy()))
    assert grid10.index(3, 3) in a and grid10.index(4, 3) not in a


def test_region_rejects_off_grid(grid10):
    with pytest.raises(InputError):
        Region.from_indices(grid10, [0, 100])
    with pytest.raises(InputError):
        Region(grid10, np.zeros(99, dtype=bool))
    with pytest.raises(InputError):
        box(grid10, 0, 2, 0, 2).union(box(PixelGrid(4, 4), 0, 2, 0, 2))


def test_shape_mask_must_be_nonempty(grid10):
    with pytest.raises(InputError):
        ShapeMask(grid10, np.zeros(grid10.size, dtype=bool))
    with pytest.raises(InputError):
        ShapeMask.from_region(Region.empty(grid10))


def test_membership_matrix(grid10):
    shapes = [box(grid10, 0, 2, 0, 1), box(grid10, 1, 3, 0, 1)]
    members = membership_matrix(shapes)
    assert members.shape == (100, 2)
    np.testing.assert_array_equal(members[:3], [[True, False], [True, True], [False, True]])


def test_chan_vese_measures():
    image = Image.from_array(np.array([[0.0, 0.25], [0.75, 1.0]]), np.array([True, True, True, False]))
    field = chan_vese_measures(image, 0.0, 1.0)
    np.testing.assert_allclose(field.pi_in, [0.0, 0.0625, 0.5625, 0.0])
    np.testing.assert_allclose(field.pi_ex, [1.0, 0.5625, 0.0625, 0.0])
    with pytest.raises(InputError):
        chan_vese_measures(image, 0.3, 0.3)


def test_field_rejects_negative_measures(grid10):
    with pytest.raises(InputError):
        InhomogeneityField(grid10, -np.ones(100), np.zeros(100))


def test_levels():
    image = Image.from_array(np.linspace(0.0, 1.0, 11).reshape(1, 11))
    assert quantile_levels(image, 0.1, 0.9) == pytest.approx((0.1, 0.9))
    assert minmax_levels(image) == (0.0, 1.0)
    with pytest.raises(InputError):
        quantile_levels(image, 0.9, 0.1)


def test_shape_and_pixel_set_integrals(grid10):
    d = np.zeros(100)
    d[:10] = -1.0   # first row favours the inside
    d[10:20] = 2.0
    field = InhomogeneityField(grid10, np.maximum(d, 0.0), np.maximum(-d, 0.0))
    shape = box(grid10, 0, 10, 0, 2)
    integrals = shape_integrals(field, [shape])
    assert integrals.P[0] == pytest.approx(20.0)
    assert integrals.Q[0] == pytest.approx(10.0)
    assert integrals.net[0] == pytest.approx(10.0)
    by_pixels = pixel_set_integrals(field, [shape.pixels, np.arange(5)])
    np.testing.assert_allclose(by_pixels.P, [20.0, 0.0])
    np.testing.assert_allclose(by_pixels.Q, [10.0, 5.0])


def test_loc_holds_counts_ties_as_violations(grid10):
    sigma = box(grid10, 2, 5, 2, 5)
    field = binary_field(sigma)
    assert loc_holds(field, sigma).holds
    pi_in = field.pi_in.copy()
    pi_in[grid10.index(0, 0)] = 0.0  # tie outside
    tied = InhomogeneityField(grid10, pi_in, field.pi_ex)
    report = loc_holds(tied, sigma)
    assert not report.holds and report.violations == 1


def test_loc_values(grid10):
    sigma = box(grid10, 0, 3, 0, 3)
    pi_in = np.full(100, 0.5)
    pi_ex = np.full(100, 0.2)
    pi_in[sigma.mask], pi_ex[sigma.mask] = 0.25, 1.0
    field = InhomogeneityField(grid10, pi_in, pi_ex)
    assert loc_lower_bound(field, sigma) == pytest.approx(-9.0)
    assert loc_optimal_value(field, sigma) == pytest.approx(-6.75)
    assert loc_lower_bound(field, sigma) <= loc_optimal_value(field, sigma)
