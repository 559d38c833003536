import numpy as np
import pytest

from modules.certify import (
    CertificateStatus,
    bearing_constants,
    bounding_vectors,
    certify_alpha,
    find_certificate,
    geometric_coherence,
    linkage_bearing_constants,
    loc_violation,
    partition_beta,
    tangent_witness_loc,
    verify_recovery_conditions,
)
from modules.dsd import CompositionSpec, decompose
from modules.errors import CertificationError, CompositionError, InputError
from modules.fixtures import five_rectangle_layout, seven_cell_instance, three_shape_layout
from modules.linkage import linkage_alpha
from modules.solver import SparseCscProblem
from tests.builders import binary_field, box


@pytest.fixture
def seven_cells():
    shapes, field = seven_cell_instance()
    return SparseCscProblem(field, shapes)


def test_partition_beta():
    partition = partition_beta([-2.0, 0.0, 1.0, 3.0, 1e-12, -1.0])
    assert partition.gamma_0minus == (0, 5)
    assert partition.gamma_0 == (1, 4)
    assert partition.gamma_1 == (2,)
    assert partition.gamma_1plus == (3,)
    assert partition.off_support == (1, 2, 4)
    with pytest.raises(CertificationError):
        partition_beta([0.0, 0.5])


def test_bounding_vectors_of_the_seven_cell_instance(seven_cells):
    alpha = np.array([1.0, -1.0, -1.0, 0.0])
    partition = partition_beta(seven_cells.B @ alpha)
    assert len(partition.gamma_1) == 1 and len(partition.gamma_0) == 2
    bounds = bounding_vectors(seven_cells.p, seven_cells.q, partition)
    np.testing.assert_array_equal(bounds.l, [0.0, -1.0, -1.0])
    np.testing.assert_array_equal(bounds.u, [1.0, 0.0, 0.0])


def test_seven_cell_certificates(seven_cells):
    first = certify_alpha(seven_cells, [1.0, -1.0, -1.0, 0.0])
    assert not first.feasible
    second = certify_alpha(seven_cells, [0.0, 0.0, 0.0, 1.0])
    assert second.feasible
    assert second.margin > 0
    assert second.residual <= 1e-8
    assert second.rank == 4


def test_certificate_rejects_bad_c(seven_cells):
    alpha = np.array([0.0, 0.0, 0.0, 1.0])
    partition = partition_beta(seven_cells.B @ alpha)
    bounds = bounding_vectors(seven_cells.p, seven_cells.q, partition)
    with pytest.raises(InputError):
        find_certificate(seven_cells.B, [None, None, None, 2.0], np.zeros(4), bounds, partition)
    with pytest.raises(InputError):
        find_certificate(seven_cells.B, [None, None, 1.0], np.zeros(4), bounds, partition)


def test_certificate_needs_unit_c_on_the_support(seven_cells):
    alpha = np.array([0.0, 0.0, 0.0, 1.0])
    partition = partition_beta(seven_cells.B @ alpha)
    bounds = bounding_vectors(seven_cells.p, seven_cells.q, partition)
    e = np.zeros(4)
    with pytest.raises(CertificationError):
        find_certificate(seven_cells.B, [None, None, None, 0.5], e, bounds, partition, support=[3])
    with pytest.raises(CertificationError):
        find_certificate(seven_cells.B, [None, None, None, None], e, bounds, partition, support=[3])
    with pytest.raises(InputError):
        find_certificate(seven_cells.B, [None, None, None, 1.0], e, bounds, partition, support=[4])
    with pytest.raises(CertificationError):
        certify_alpha(seven_cells, alpha, c=[None, None, None, -0.5])
    assert certify_alpha(seven_cells, alpha, c=[None, None, None, 1.0]).feasible


def test_rank_deficient_off_support(grid10):
    # one off-support cell cannot pin down three shapes
    shapes = [box(grid10, 0, 4, 0, 4), box(grid10, 2, 6, 0, 4), box(grid10, 8, 10, 8, 10)]
    problem = SparseCscProblem(binary_field(shapes[2]), shapes)
    beta = problem.B @ np.array([3.0, 3.0, 1.0])
    partition = partition_beta(beta)
    bounds = bounding_vectors(problem.p, problem.q, partition)
    e = loc_violation(problem.p, problem.q, problem.cells.index_sets, partition)
    cert = find_certificate(problem.B, [1.0, 1.0, 1.0], e, bounds, partition)
    assert cert.status is CertificateStatus.RANK_DEFICIENT


def test_loc_violation():
    p = np.array([1.0, 2.0, 0.0])
    q = np.array([0.5, 0.0, 4.0])
    partition = partition_beta([2.0, 1.0, -1.0])
    e = loc_violation(p, q, [[0, 1], [1, 2]], partition)
    np.testing.assert_allclose(e, [1.0, -4.0])


def test_tangent_witness(seven_cells):
    witness = tangent_witness_loc(seven_cells, CompositionSpec((3,)), [0.0, 0.0, 0.0, 1.0])
    assert witness.gain > 0
    np.testing.assert_allclose(witness.alpha_hat[:3], -witness.epsilon)
    assert witness.alpha_hat[3] == pytest.approx(1.0 + witness.k)


def test_tangent_witness_needs_the_loc(grid10):
    shapes = [box(grid10, 0, 4, 0, 4)]
    problem = SparseCscProblem(binary_field(box(grid10, 0, 2, 0, 2)), shapes)
    with pytest.raises(CertificationError):
        tangent_witness_loc(problem, CompositionSpec((0,)), [1.0])


def test_bearing_constants_of_the_three_shape_linkage():
    _, shapes = three_shape_layout()
    constants = linkage_bearing_constants(linkage_alpha(shapes, CompositionSpec((0, 1), (2,))))
    assert constants.bounds_ok
    assert constants.unit == (0, 1) and constants.null == (4,)
    assert constants.of(4) == pytest.approx(1.0)
    assert constants.of(0) == pytest.approx(-2.0)
    assert constants.of(1) == pytest.approx(-2.0)


def test_singular_bearing_system():
    B = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(CertificationError):
        bearing_constants(B, [0], [], [1.0, -1.0])


def test_seven_cell_recovery_conditions_fail():
    shapes, _ = seven_cell_instance()
    report = verify_recovery_conditions(shapes, CompositionSpec((0,), (1, 2)))
    assert not report.verdict
    assert report.coherence[3] == pytest.approx(3.0)
    w = dict(zip(report.shapelets, report.w))
    assert sorted(round(v, 9) for v in w.values()) == [-3.0, 1.0, 1.0]


def test_recovery_on_a_non_basic_composition_raises():
    _, shapes = five_rectangle_layout()
    with pytest.raises(CompositionError):
        verify_recovery_conditions(shapes, CompositionSpec((0, 1, 2), (3, 4)))


def test_recovery_with_a_disjoint_exterior_shape(grid10):
    shapes = [box(grid10, 0, 5, 0, 5), box(grid10, 2, 4, 2, 4), box(grid10, 7, 10, 7, 10)]
    report = verify_recovery_conditions(shapes, CompositionSpec((0,), (1,)))
    assert report.exempt == (2,)
    assert report.verdict


def test_geometric_coherence_per_exterior_shape(grid10):
    shapes, _ = seven_cell_instance()
    linkage = linkage_alpha(shapes, CompositionSpec((0,), (1, 2)))
    C = geometric_coherence(decompose(shapes), linkage, [3], linkage_bearing_constants(linkage))
    assert C.tolist() == pytest.approx([3.0])

    shapes = [box(grid10, 0, 5, 0, 5), box(grid10, 2, 4, 2, 4), box(grid10, 7, 10, 7, 10)]
    linkage = linkage_alpha(shapes, CompositionSpec((0,), (1,)))
    C = geometric_coherence(decompose(shapes), linkage, [2], linkage_bearing_constants(linkage))
    assert C.tolist() == [0.0]
