import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algmech.algebroid import GHMorphism, SamplePlan
from algmech.catalog import builtin_transition
from algmech.prolongation import (
    MissingMorphism,
    ProlongationSection,
    RhoEtaConnection,
    SingularTransition,
    StructureKind,
    TransitionData,
    adapted_dual_pairing,
    adapted_frame,
    anchor_derivative,
    apply_structure,
    curvature,
    ddot,
    dtilde,
    from_adapted,
    liouville,
    nijenhuis,
    prolong_anchor_apply,
    prolong_bracket,
    random_polynomial_section,
    to_adapted,
    transformation_residuals,
)
from algmech.smoothfn import ConstantMap, ExprMap
from algmech.specfile import so3_structure
from algmech.verify import bracket_suite, structure_identity_suite

from conftest import catalog, so3_point_like, tangent


def const_conn(G, A):
    return RhoEtaConnection(ConstantMap(np.asarray(G, dtype=float), A.n))


def expr_conn(src, A):
    return RhoEtaConnection(ExprMap.from_strings(src, A.m, A.r))


def section(zsrc, ysrc, A):
    return ProlongationSection(ExprMap.from_strings(zsrc, A.m, A.r), ExprMap.from_strings(ysrc, A.m, A.r))


def close(S, T, p, tol=1e-12):
    (z1, y1), (z2, y2) = S.at(p), T.at(p)
    return np.max(np.abs(z1 - z2), initial=0) <= tol and np.max(np.abs(y1 - y2), initial=0) <= tol


P0 = np.array([0.3, -0.7, 0.4, 1.1])


# anchor -----------------------------------------------------------------------------


def test_anchor_on_vertical_frame():
    A = tangent(1)
    f = ExprMap.from_strings("y1^2", 1, 1)
    assert prolong_anchor_apply(A, ddot(A, 0), f, [0.0, 3.0]) == 6.0


def test_anchor_on_horizontal_frame():
    A = tangent(1)
    assert prolong_anchor_apply(A, dtilde(A, 0), ExprMap.from_strings("x1", 1, 1), [0.5, 0.2]) == 1.0


def test_zero_anchor_kills_base_functions():
    A = so3_point_like()
    f = ExprMap.from_strings("sin(x1)*x2 + x3^2", 3, 3)
    X = section(["1", "x2", "y3"], ["0", "0", "0"], A)
    assert prolong_anchor_apply(A, X, f, np.arange(6) * 0.3) == 0.0


# bracket ----------------------------------------------------------------------------


def test_bracket_with_itself_vanishes():
    A = tangent(2)
    X = section(["x1*y2", "sin(y1)"], ["x2", "y1*y2"], A)
    z, y = prolong_bracket(A, X, X).at(P0)
    assert np.max(np.abs(z)) == 0.0 and np.max(np.abs(y)) == 0.0


def test_bracket_of_so3_frame():
    A = so3_point_like()
    z, y = prolong_bracket(A, dtilde(A, 0), dtilde(A, 1)).at(np.ones(6))
    assert np.array_equal(z, [0, 0, 1]) and np.array_equal(y, [0, 0, 0])


def test_bracket_derivative_term():
    A = tangent(2)
    W = section(["0", "x1"], ["0", "0"], A)
    z, y = prolong_bracket(A, dtilde(A, 0), W).at(P0)
    assert np.array_equal(z, [0, 1]) and np.array_equal(y, [0, 0])


# adapted basis ------------------------------------------------------------------------


def test_zero_connection_adapted_is_identity():
    A = tangent(2)
    X = section(["x1", "y2"], ["y1", "3"], A)
    assert close(to_adapted(const_conn(np.zeros((2, 2)), A), X), X, P0, tol=0.0)


def test_adapted_vertical_part():
    A = tangent(1)
    Xa = to_adapted(const_conn([[2.5]], A), dtilde(A, 0))
    assert Xa.at([0.1, 0.2])[1][0] == 2.5


@given(st.integers(0, 10_000))
def test_adapted_round_trip(seed):
    A = tangent(2)
    rng = np.random.default_rng(seed)
    X = random_polynomial_section(A, rng)
    c = [float(v) for v in rng.standard_normal(4)]
    conn = expr_conn([[f"{c[0]!r}*x1 + y2", f"{c[1]!r}*y1"], [f"{c[2]!r}", f"{c[3]!r}*x2*y1"]], A)
    back = from_adapted(conn, to_adapted(conn, X))
    assert close(back, X, P0)


def test_dual_pairing():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "1"], ["y1", "x2^2"]], A)
    assert adapted_dual_pairing(conn, 0, adapted_frame(A, conn, 0), P0) == 0.0
    assert adapted_dual_pairing(conn, 1, ddot(A, 1), P0) == 1.0
    A1 = tangent(1)
    assert adapted_dual_pairing(const_conn([[5.0]], A1), 0, dtilde(A1, 0), [0.0, 1.0]) == 5.0


# curvature -----------------------------------------------------------------------------


def test_flat_connection_has_zero_curvature():
    A = tangent(2)
    assert not np.any(curvature(A, const_conn(np.zeros((2, 2)), A)).at(P0))


def test_so3_identity_connection_curvature():
    A = so3_point_like()
    R = curvature(A, const_conn(np.eye(3), A)).at(np.ones(6))
    eps = so3_structure()  # eps[c, a, b] = L^c_ab
    assert np.array_equal(R, eps)


def test_half_plane_connection_and_curvature_match_symbolic_oracle():
    # frozen from tests/oracles/derive.py (sympy)
    sysm = catalog("poincare_half_plane").system
    p = np.array([0.3, 1.5, 0.7, -0.4])
    G = sysm.connection().gamma.at(p)
    assert np.allclose(G, [[0.26666666666666666, -0.46666666666666662],
                           [0.46666666666666662, 0.26666666666666666]], rtol=0, atol=1e-14)
    R = curvature(sysm.algebroid, sysm.connection()).at(p)
    assert R[0, 0, 1] == pytest.approx(-0.17777777777777778, abs=1e-13)
    assert R[1, 0, 1] == pytest.approx(-0.31111111111111106, abs=1e-13)
    assert np.allclose(R, -R.transpose(0, 2, 1), atol=1e-15)


def test_curvature_is_vertical_part_of_adapted_bracket():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1^2"], ["sin(x2)*y1", "x1*x2*y2"]], A)
    res = bracket_suite(A, conn, SamplePlan(seed=2, count=6))
    for key in ("base_brackets", "adapted_vertical_bracket", "curvature_bracket", "bracket_antisymmetry"):
        assert res[key] <= 1e-8, key
    assert res["anchor_homomorphism"] <= 1e-6


# structures ------------------------------------------------------------------------------


def test_vertical_projector_on_frames():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1"], ["0", "x2*y2"]], A)
    V = lambda X: apply_structure(StructureKind.VERTICAL, A, conn, X)
    for a in range(2):
        z, y = V(adapted_frame(A, conn, a)).at(P0)
        assert np.max(np.abs(np.concatenate([z, y]))) <= 1e-15
        assert close(V(ddot(A, a)), ddot(A, a), P0, tol=0.0)


def test_almost_product_squares_to_identity():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1"], ["cos(x1)", "x2*y2"]], A)
    X = random_polynomial_section(A, np.random.default_rng(4))
    P = lambda S: apply_structure("P", A, conn, S)
    assert close(P(P(X)), X, P0)


def test_almost_tangent_maps_semispray_to_liouville():
    A = tangent(1)
    g = ExprMap.from_strings([["2 + sin(x1)"]], 1, 0)
    gt = ExprMap.from_strings([["1/(2 + sin(x1))"]], 1, 0)
    gh = GHMorphism(g, gt)
    S = section(["(2 + sin(x1))*y1"], ["x1*y1"], A)
    JS = apply_structure("J", A, None, S, gh)
    assert close(JS, liouville(A), np.array([0.4, -1.3]))


def test_almost_tangent_needs_a_morphism():
    A = tangent(1)
    with pytest.raises(MissingMorphism):
        apply_structure("J", A, None, dtilde(A, 0))


def test_identity_morphism_maps_horizontal_frame_to_vertical():
    A = tangent(2)
    gh = GHMorphism.identity(2, 2)
    for a in range(2):
        assert close(apply_structure("J", A, None, dtilde(A, a), gh), ddot(A, a), P0, tol=0.0)


def test_nijenhuis_relations():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1^2"], ["sin(x2)*y1", "x1*y2"]], A)
    gh = GHMorphism.identity(2, 2)
    rng = np.random.default_rng(9)
    X, W = (random_polynomial_section(A, rng, scale=0.5) for _ in range(2))
    V = lambda S: apply_structure("V", A, conn, S)
    H = lambda S: apply_structure("H", A, conn, S)
    Jt = lambda S: apply_structure("J", A, conn, S, gh)
    zero = 0.0 * X
    assert close(nijenhuis(Jt, A, X, W), zero, P0, tol=1e-8)
    vhh = V(prolong_bracket(A, H(X), H(W)))
    assert close(nijenhuis(V, A, X, W), vhh, P0, tol=1e-8)
    assert close(nijenhuis(H, A, X, W), vhh, P0, tol=1e-8)
    flat = const_conn(np.zeros((2, 2)), A)
    Vf = lambda S: apply_structure("V", A, flat, S)
    assert close(nijenhuis(Vf, A, X, W), zero, P0, tol=1e-10)


def test_structure_suite_on_a_curved_connection():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1^2"], ["sin(x2)*y1", "x1*x2*y2"]], A)
    res = structure_identity_suite(A, conn, GHMorphism.identity(2, 2), SamplePlan(seed=1, count=4))
    assert len(res) == 18
    assert max(res.values()) <= 1e-8


def test_vertical_projector_without_connection_term_breaks_almost_product():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1"], ["1", "x2"]], A)
    X = random_polynomial_section(A, np.random.default_rng(0))
    mutant_V = ProlongationSection(ConstantMap(np.zeros(2), 4), X.ycoef)
    P = apply_structure("P", A, conn, X)
    assert not close(P, X - 2.0 * mutant_V, P0, tol=1e-3)


# transformation laws ----------------------------------------------------------------------


def test_identity_transition_has_zero_residuals():
    A = tangent(2)
    conn = expr_conn([["x1*y2", "y1"], ["0", "x2*y2"]], A)
    res = transformation_residuals(A, builtin_transition("identity", 2), SamplePlan(count=6), conn=conn)
    assert all(v == 0.0 for v in res.values())


def test_linear_scale_with_flat_connection():
    A = tangent(2)
    res = transformation_residuals(A, builtin_transition("linear_scale", 2, [2.0]), SamplePlan(count=6),
                                   conn=const_conn(np.zeros((2, 2)), A))
    assert res["gamma_law"] <= 1e-9 and res["rho_law"] <= 1e-9 and res["lambda_vs_M"] == 0.0


def test_mismatched_lambda_is_reported():
    A = tangent(2)
    tr = builtin_transition("linear_scale", 2, [2.0])
    bad = TransitionData(tr.phi, tr.Mmat, ConstantMap(3.0 * np.eye(2), 2))
    res = transformation_residuals(A, bad, SamplePlan(count=3))
    assert res["lambda_vs_M"] == pytest.approx(1.0)
    assert res["rho_law"] > 0.1


def test_singular_transition_raises():
    A = tangent(2)
    tr = builtin_transition("identity", 2)
    bad = TransitionData(tr.phi, ExprMap.from_strings([["1", "0"], ["0", "0"]], 2, 0), tr.Lam)
    with pytest.raises(SingularTransition):
        transformation_residuals(A, bad, SamplePlan(count=2))


# properties ----------------------------------------------------------------------------------


@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_prolongation_jacobi_on_polynomial_sections(seed):
    A = tangent(2)
    rng = np.random.default_rng(seed)
    X, W, U = (random_polynomial_section(A, rng, scale=0.5) for _ in range(3))
    br = lambda S, T: prolong_bracket(A, S, T)
    total = br(br(X, W), U) + br(br(W, U), X) + br(br(U, X), W)
    z, y = total.at(P0)
    assert np.max(np.abs(np.concatenate([z, y]))) <= 1e-7


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_anchor_is_a_homomorphism(seed):
    A = tangent(2) if seed % 2 else so3_point_like()
    rng = np.random.default_rng(seed)
    X, W = (random_polynomial_section(A, rng, scale=0.5) for _ in range(2))
    names = [f"x{i + 1}" for i in range(A.m)] + [f"y{a + 1}" for a in range(A.r)]
    f = ExprMap.from_strings(" + ".join(f"sin({k + 1}*{v})" for k, v in enumerate(names)), A.m, A.r)
    p = rng.uniform(-1, 1, A.n)
    lhs = anchor_derivative(A, prolong_bracket(A, X, W), f).at(p)
    rhs = anchor_derivative(A, X, anchor_derivative(A, W, f)).at(p) - anchor_derivative(
        A, W, anchor_derivative(A, X, f)).at(p)
    assert abs(lhs - rhs) <= 1e-6
