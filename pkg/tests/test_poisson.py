"""Poisson structure validation, orthogonal frames, and projectors."""

import numpy as np
import pytest

from poisson_ortho import dsl
from poisson_ortho.context import ChartContext
from poisson_ortho.errors import ConfigError, DegeneracyError, RegularityError
from poisson_ortho.geometry import CENTRAL_4, DerivativeScheme, Grid, Point, TensorField
from poisson_ortho.metric import MetricField
from poisson_ortho.poisson import (
    DistributionFrame, PoissonStructure, bivector_rank, canonical_bivector,
    casimir_coframe, coframe_fields, independent_columns, leaf_basis,
    leaf_operator, orthogonal_frame, projectors, validate_poisson,
)


def canonical4():
    return PoissonStructure(
        bivector=canonical_bivector(4, 2),
        casimirs=[dsl.scalar_field("x1", 4), dsl.scalar_field("x2", 4)],
        expected_rank=2)


def shear_metric():
    f = "atan(x2) / pi"
    return MetricField.from_entries(4, [
        ["1", "0", f, "0"],
        ["0", "1", "0", "0"],
        [f, "0", "1", "0"],
        ["0", "0", "0", "1"],
    ])


def so3_structure():
    biv = dsl.expr_field(3, "uu", [
        ["0", "x3", "-x2"],
        ["-x3", "0", "x1"],
        ["x2", "-x1", "0"],
    ])
    return PoissonStructure(
        bivector=biv,
        casimirs=[dsl.scalar_field("x1^2 + x2^2 + x3^2", 3)],
        expected_rank=2)


def sl2r_structure():
    biv = dsl.expr_field(3, "uu", [
        ["0", "2*x2", "-2*x3"],
        ["-2*x2", "0", "x1"],
        ["2*x3", "-x1", "0"],
    ])
    return PoissonStructure(
        bivector=biv,
        casimirs=[dsl.scalar_field("x1^2/8 + x2*x3/2", 3)],
        expected_rank=2)


def sl2r_killing_metric():
    # contravariant metric = the Killing form of this basis
    K = np.array([[8.0, 0.0, 0.0], [0.0, 0.0, 4.0], [0.0, 4.0, 0.0]])
    return MetricField.from_contravariant(K)


def se3_structure():
    # basis (rotations e1..e3, translations e4..e6); invariants x.p and p.p
    def pbracket():
        rows = [["0"] * 6 for _ in range(6)]
        eps = {(0, 1): 2, (1, 2): 0, (2, 0): 1}
        for (i, j), k in eps.items():
            lam = f"x{k + 1}"
            mom = f"x{k + 4}"
            rows[i][j] = lam
            rows[j][i] = f"-({lam})"
            rows[i][3 + j] = mom
            rows[3 + j][i] = f"-({mom})"
            rows[j][3 + i] = f"-({mom})"
            rows[3 + i][j] = mom
        return dsl.expr_field(6, "uu", rows)

    return PoissonStructure(
        bivector=pbracket(),
        casimirs=[
            dsl.scalar_field("x1*x4 + x2*x5 + x3*x6", 6),
            dsl.scalar_field("x4^2 + x5^2 + x6^2", 6),
        ],
        expected_rank=4,
        coframe_scales=[1, 0.5])


# ---------------------------------------------------------------------------
# structure declaration

def test_structure_validation():
    biv = canonical_bivector(4, 2)
    cas = [dsl.scalar_field("x1", 4), dsl.scalar_field("x2", 4)]
    with pytest.raises(ValueError, match="even"):
        PoissonStructure(biv, cas, expected_rank=3)
    with pytest.raises(ValueError, match="invariant functions"):
        PoissonStructure(biv, cas[:1], expected_rank=2)
    with pytest.raises(ValueError, match="complement"):
        PoissonStructure(biv, [], expected_rank=4)
    with pytest.raises(ValueError, match="coframe_scales"):
        PoissonStructure(biv, cas, expected_rank=2, coframe_scales=[1.0])
    ps = canonical4()
    assert ps.dim == 4 and ps.codim == 2


def test_canonical_bivector_layout():
    P = canonical_bivector(6, 4).components(Point(np.zeros(6)))
    assert P[2, 4] == 1.0 and P[3, 5] == 1.0
    assert P[4, 2] == -1.0 and P[5, 3] == -1.0
    assert np.count_nonzero(P) == 4
    assert np.array_equal(P, -P.T)


# ---------------------------------------------------------------------------
# coframe construction

def test_coframe_plain_gradients():
    ws = coframe_fields(canonical4())
    p = Point([0.3, -0.7, 2.0, 5.0])
    assert np.allclose(ws[0].components(p), [1, 0, 0, 0])
    assert np.allclose(ws[1].components(p), [0, 1, 0, 0])


def test_coframe_scales_se3_gauge():
    ws = coframe_fields(se3_structure())
    x = np.array([0.2, -1.0, 0.4])
    mom = np.array([1.5, 0.3, -0.6])
    p = Point(np.concatenate([x, mom]))
    assert np.allclose(ws[0].components(p), np.concatenate([mom, x]))
    assert np.allclose(ws[1].components(p), np.concatenate([np.zeros(3), mom]))
    # exact-derivative backing must survive the rescaling
    assert isinstance(ws[0], dsl.ExprTensorField)
    assert isinstance(ws[1], dsl.ExprTensorField)


def test_coframe_scale_expression_and_field():
    base = canonical4()
    scaled = PoissonStructure(
        base.bivector, base.casimirs, 2, coframe_scales=["x2", 2.0])
    ws = coframe_fields(scaled)
    p = Point([1.0, 3.0, 0.0, 0.0])
    assert np.allclose(ws[0].components(p), [3, 0, 0, 0])
    assert np.allclose(ws[1].components(p), [0, 2, 0, 0])
    assert isinstance(ws[0], dsl.ExprTensorField)

    # a plain numeric scale field forces the closure path but same values
    half = TensorField(4, "", lambda q: np.asarray(0.5))
    scaled2 = PoissonStructure(
        base.bivector, base.casimirs, 2, coframe_scales=[half, half])
    ws2 = coframe_fields(scaled2)
    assert np.allclose(ws2[0].components(p), [0.5, 0, 0, 0])


def test_casimir_coframe_checks_annihilation():
    biv = canonical_bivector(4, 2)
    bad = PoissonStructure(
        biv, [dsl.scalar_field("x1", 4), dsl.scalar_field("x3", 4)], 2)
    with pytest.raises(ConfigError, match="not annihilated"):
        casimir_coframe(bad, [0.0, 0.0, 0.0, 0.0])


def test_casimir_coframe_checks_independence():
    biv = canonical_bivector(4, 2)
    dep = PoissonStructure(
        biv, [dsl.scalar_field("x1", 4), dsl.scalar_field("2*x1", 4)], 2)
    with pytest.raises(DegeneracyError, match="dependent"):
        casimir_coframe(dep, [1.0, 1.0, 0.0, 0.0])


def test_casimir_coframe_values_so3():
    rows = casimir_coframe(so3_structure(), [0.1, -0.2, 1.0])
    assert np.allclose(rows, [[0.2, -0.4, 2.0]])


# ---------------------------------------------------------------------------
# orthogonal frame

def test_orthogonal_frame_shear_metric():
    # raising dx1 through the sheared metric tilts the frame into -x3
    frame = orthogonal_frame(canonical4(), shear_metric(), [0.0, 1.0, 0.0, 0.0])
    p = Point([0.0, 1.0, 0.0, 0.0])  # f = atan(1)/pi = 1/4 here
    xi1 = frame.vectors[0].components(p)
    xi2 = frame.vectors[1].components(p)
    assert np.allclose(xi1, [16 / 15, 0.0, -4 / 15, 0.0])
    assert np.allclose(xi2, [0.0, 1.0, 0.0, 0.0])
    gram = frame.gram(p)
    assert np.allclose(gram, [[16 / 15, 0.0], [0.0, 1.0]])
    assert frame.codim == 2
    assert frame.frame_matrix(p).shape == (4, 2)
    assert frame.coframe_matrix(p).shape == (2, 4)


def test_frame_is_metric_orthogonal_to_leaf():
    m = shear_metric()
    frame = orthogonal_frame(canonical4(), m, [0.4, -0.3, 1.0, 2.0])
    p = Point([0.4, -0.3, 1.0, 2.0])
    g = m.components(p)
    B, _ = leaf_basis(canonical4(), p)
    for v in frame.vectors:
        assert np.max(np.abs(B.T @ g @ v.components(p))) < 1e-12


def test_orthogonal_frame_degenerate_gram():
    # indefinite metric: the frame gram collapses on the cone x1^2/8+x2*x3/2=0
    with pytest.raises(DegeneracyError, match="degenerate"):
        orthogonal_frame(sl2r_structure(), sl2r_killing_metric(), [0.0, 1.0, 0.0])


def test_orthogonal_frame_sl2r_generic_point():
    frame = orthogonal_frame(sl2r_structure(), sl2r_killing_metric(), [1.0, 0.0, 0.0])
    p = Point([1.0, 0.0, 0.0])
    # frame vector is 2*lambda and the gram is 4x the invariant function
    assert np.allclose(frame.vectors[0].components(p), [2.0, 0.0, 0.0])
    assert np.allclose(frame.gram(p), [[0.5]])


# ---------------------------------------------------------------------------
# leaf operator, column selection, projectors

def test_independent_columns_deterministic():
    mat = np.array([
        [1.0, 2.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
    assert independent_columns(mat) == [0, 3]
    assert independent_columns(np.zeros((3, 3))) == []
    # near-duplicate column is dropped relative to overall scale
    near = np.array([[1.0, 1.0 + 1e-13], [1.0, 1.0]])
    assert independent_columns(near) == [0]


def test_leaf_basis_canonical():
    B, cols = leaf_basis(canonical4(), [0.0, 0.0, 0.0, 0.0])
    assert cols == [2, 3]
    assert B.shape == (4, 2)
    assert np.allclose(B[:, 0], [0, 0, 0, -1])
    assert np.allclose(B[:, 1], [0, 0, 1, 0])


def test_leaf_operator_kernel_and_image():
    ps = canonical4()
    m = shear_metric()
    p = Point([0.2, 0.5, -1.0, 3.0])
    A = leaf_operator(ps, m, p)
    frame = orthogonal_frame(ps, m, p)
    for v in frame.vectors:
        assert np.max(np.abs(A @ v.components(p))) < 1e-12
    assert bivector_rank(A) == 2


def test_projectors_split_identity():
    ps = canonical4()
    m = shear_metric()
    p = Point([0.1, 0.8, 0.0, -2.0])
    v, h = projectors(ps, m, p)
    assert np.allclose(v + h, np.eye(4))
    assert np.allclose(v @ v, v)
    assert np.allclose(h @ h, h)
    # v fixes the leaf basis, h kills it; the opposite for the frame
    B, _ = leaf_basis(ps, p)
    assert np.allclose(v @ B, B)
    assert np.max(np.abs(h @ B)) < 1e-12
    frame = orthogonal_frame(ps, m, p)
    for vec in frame.vectors:
        val = vec.components(p)
        assert np.allclose(h @ val, val)
        assert np.max(np.abs(v @ val)) < 1e-12
    # g-self-adjoint: g v = (g v)^T
    g = m.components(p)
    assert np.allclose(g @ v, (g @ v).T)


def test_projectors_rank_mismatch():
    ps = PoissonStructure(
        dsl.expr_field(4, "uu", [
            ["0", "x1", "0", "0"],
            ["-x1", "0", "0", "0"],
            ["0", "0", "0", "0"],
            ["0", "0", "0", "0"],
        ]),
        [dsl.scalar_field("x3", 4), dsl.scalar_field("x4", 4)],
        expected_rank=2)
    with pytest.raises(RegularityError) as err:
        projectors(ps, MetricField.constant(np.eye(4)), [0.0, 5.0, 0.0, 0.0])
    assert "rank 0" in str(err.value)
    assert len(err.value.points) == 1
    # fine away from the degeneracy locus
    v, h = projectors(ps, MetricField.constant(np.eye(4)), [2.0, 5.0, 0.0, 0.0])
    assert np.allclose(v + h, np.eye(4))


# ---------------------------------------------------------------------------
# grid validation

def test_validate_poisson_canonical():
    report = validate_poisson(canonical4(), Grid.cube([0.0] * 4, 1.0, 3))
    assert report.ok
    assert report.rank == 2
    assert report.antisymmetry.max_residual == 0.0
    assert report.jacobi.max_residual < 1e-9
    assert report.casimir_annihilation.max_residual == 0.0
    assert len(report.antisymmetry.points) == 81


def test_validate_poisson_so3():
    report = validate_poisson(
        so3_structure(), Grid(center=[0.0, 0.0, 1.0], half_width=0.25,
                              points_per_axis=3))
    assert report.ok
    assert report.rank == 2
    assert report.jacobi.max_residual < 1e-9


def test_validate_poisson_se3():
    report = validate_poisson(
        se3_structure(),
        Grid(center=[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], half_width=0.25,
             points_per_axis=2))
    assert report.ok
    assert report.rank == 4


def test_validate_poisson_jacobi_failure():
    # 3d bivector dual to the covector a = (x2, 0, 1): a . curl a = -1, so
    # the cyclic contraction has unit-size entries everywhere
    biv = dsl.expr_field(3, "uu", [
        ["0", "1", "0"],
        ["-1", "0", "x2"],
        ["0", "-x2", "0"],
    ])
    ps = PoissonStructure(biv, [dsl.scalar_field("x3", 3)], expected_rank=2)
    report = validate_poisson(ps, Grid.cube([0.0] * 3, 0.5, 2))
    assert not report.ok
    assert report.jacobi.max_residual == pytest.approx(1.0, abs=1e-9)
    assert not report.casimir_annihilation.holds  # x3 is not invariant here


def test_validate_poisson_rank_error():
    biv = dsl.expr_field(4, "uu", [
        ["0", "x1", "0", "0"],
        ["-x1", "0", "0", "0"],
        ["0", "0", "0", "0"],
        ["0", "0", "0", "0"],
    ])
    ps = PoissonStructure(
        biv, [dsl.scalar_field("x3", 4), dsl.scalar_field("x4", 4)],
        expected_rank=2)
    with pytest.raises(RegularityError, match="rank 0"):
        validate_poisson(ps, Grid.cube([0.0] * 4, 1.0, 3))  # grid crosses x1 = 0


def test_validate_poisson_fd_scheme():
    scheme = DerivativeScheme(kind=CENTRAL_4)
    report = validate_poisson(so3_structure(),
                              Grid(center=[0.0, 0.0, 1.0], half_width=0.25,
                                   points_per_axis=2),
                              scheme=scheme, tol=1e-8)
    assert report.ok


# ---------------------------------------------------------------------------
# chart context

def test_context_matches_pointwise_constructions():
    ps = canonical4()
    m = shear_metric()
    ctx = ChartContext(ps, m)
    p = Point([0.3, 0.9, -0.4, 1.1])
    v, h = projectors(ps, m, p)
    assert np.allclose(ctx.projector_h(p), h, atol=1e-12)
    assert np.allclose(ctx.projector_v(p), v, atol=1e-12)
    assert np.allclose(ctx.leaf_operator_at(p), leaf_operator(ps, m, p))
    frame = DistributionFrame(covectors=ctx.coframe, vectors=ctx.frame)
    assert np.allclose(ctx.gram_at(p), frame.gram(p))
    assert np.allclose(ctx.frame_at(p), frame.frame_matrix(p))
    assert np.allclose(ctx.metric_inv_at(p) @ ctx.metric_at(p), np.eye(4),
                       atol=1e-12)


def test_context_memoizes_values():
    ctx = ChartContext(canonical4(), shear_metric())
    p = Point([0.0, 0.5, 0.0, 0.0])
    first = ctx.projector_h(p)
    assert ctx.projector_h(p) is first
    assert ctx.projector_h(Point([0.0, 0.5, 0.0, 0.0])) is first  # same coords
    other = ctx.projector_h(Point([0.0, 0.6, 0.0, 0.0]))
    assert other is not first


def test_context_frame_keeps_exact_derivatives():
    ctx = ChartContext(canonical4(), MetricField.from_contravariant(np.eye(4)))
    jac = ctx.frame_jacobian(0, Point([0.0, 0.0, 0.0, 0.0]))
    assert np.array_equal(jac, np.zeros((4, 4)))
    assert isinstance(ctx.frame[0], dsl.ExprTensorField)


def test_context_gram_degeneracy_propagates():
    ctx = ChartContext(sl2r_structure(), sl2r_killing_metric())
    with pytest.raises(DegeneracyError):
        ctx.projector_h(Point([0.0, 1.0, 0.0]))


def test_context_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        ChartContext(so3_structure(), MetricField.constant(np.eye(4)))
