import numpy as np
import pytest

from modules.dsd import CompositionSpec, compose_region
from modules.errors import CompositionError
from modules.fixtures import five_rectangle_layout, four_shape_layout, seven_cell_instance, three_shape_layout
from modules.linkage import (
    active_sets,
    bearing_has_full_column_rank,
    discriminant_matrix,
    indicator_coefficients,
    is_basic,
    linkage_alpha,
    row_rank,
)
from modules.solver import superposition, SparseCscProblem
from tests.builders import binary_field, box


def test_three_shape_linkage():
    _, shapes = three_shape_layout()
    result = linkage_alpha(shapes, CompositionSpec((0, 1), (2,)))
    np.testing.assert_array_equal(result.alpha, [1.0, 1.0, -2.0])
    np.testing.assert_array_equal(result.beta, [1.0, 1.0, -1.0, 2.0, 0.0])
    assert result.unique
    assert result.null_shapelets == (4,)
    assert result.unit_shapelets == (0, 1)
    assert bearing_has_full_column_rank(result)


def test_four_shape_linkage():
    _, shapes = four_shape_layout()
    result = linkage_alpha(shapes, CompositionSpec((0, 1), (2, 3)))
    np.testing.assert_array_equal(result.alpha, [1.0, 1.0, -2.0, -2.0])
    assert result.unique
    assert len(result.exclude_rows) == 8


def test_five_rectangle_layout_is_degenerate():
    _, shapes = five_rectangle_layout()
    spec = CompositionSpec((0, 1, 2), (3, 4))
    result = linkage_alpha(shapes, spec)
    assert not result.unique
    a4, a5 = result.alpha[3], result.alpha[4]
    assert a4 + a5 == pytest.approx(-3.0)
    assert a4 <= -1.0 + 1e-9 and a5 <= -1.0 + 1e-9
    delta = discriminant_matrix(shapes, spec, result)
    assert delta.shape == (2, 2)
    report = is_basic(shapes, spec)
    assert not report.basic


def test_linkage_alpha_reconstructs_the_composition(rng, grid10):
    shapes = [box(grid10, 0, 6, 0, 6), box(grid10, 4, 10, 2, 8), box(grid10, 3, 7, 3, 5), box(grid10, 5, 9, 6, 10)]
    spec = CompositionSpec((0, 1), (2, 3))
    result = linkage_alpha(shapes, spec)
    sigma = compose_region(shapes, spec)
    problem = SparseCscProblem(binary_field(sigma), shapes)
    level = superposition(problem, result.full_alpha(len(shapes)))
    np.testing.assert_array_equal(level > 0.5, sigma.mask)
    assert np.all((level <= 0) | (level >= 1))


def test_redundant_composition_is_rejected(grid10):
    shapes = [box(grid10, 0, 4, 0, 4), box(grid10, 7, 9, 7, 9)]
    with pytest.raises(CompositionError):
        linkage_alpha(shapes, CompositionSpec((0,), (1,)))


def test_include_only_composition_is_basic(grid10):
    shapes = [box(grid10, 0, 4, 0, 4), box(grid10, 2, 6, 2, 6)]
    report = is_basic(shapes, CompositionSpec((0, 1)))
    assert report.basic and report.n_exclude == 0
    np.testing.assert_array_equal(report.linkage.alpha, [1.0, 1.0])


def test_seven_cell_composition_is_basic():
    shapes, _ = seven_cell_instance()
    report = is_basic(shapes, CompositionSpec((0,), (1, 2)))
    assert report.basic
    np.testing.assert_array_equal(report.linkage.alpha, [1.0, -1.0, -1.0])
    assert report.min_w == pytest.approx(1.0)


def test_indicator_coefficients_and_active_sets():
    _, shapes = three_shape_layout()
    alpha = indicator_coefficients(shapes, CompositionSpec((0, 1), (2,)))
    np.testing.assert_array_equal(alpha, [1.0, 1.0, -2.0])
    assert active_sets([0.5, -1e-8, -0.2, 0.0]) == ((0,), (2,))


def test_row_rank():
    assert row_rank(np.eye(3)) == 3
    assert row_rank([[1, 0], [1, 1], [0, 1]]) == 2
    assert row_rank([[1, 2], [2, 4]]) == 1
    assert row_rank(np.zeros((0, 3))) == 0
