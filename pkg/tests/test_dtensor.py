import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algmech.algebroid import SamplePlan
from algmech.dtensor import (
    DistinguishedConnection,
    DTensorField,
    SignatureError,
    berwald_from_connection,
    h_covariant_derivative,
    h_covariant_derivative_map,
    normality_residual,
    regroup_derivative,
    tensor_product,
    v_covariant_derivative,
)
from algmech.prolongation import RhoEtaConnection
from algmech.smoothfn import ConstantMap, ExprMap

from conftest import catalog, tangent

P0 = np.array([0.3, -0.7, 0.4, 1.1])


def conn_of(src, A):
    return RhoEtaConnection(ExprMap.from_strings(src, A.m, A.r))


def fd(fn, p, j, h=1e-6):
    up, dn = p.copy(), p.copy()
    up[j] += h
    dn[j] -= h
    return (np.asarray(fn(up)) - np.asarray(fn(dn))) / (2 * h)


CURVED = [["x1*y2 + y1^2", "sin(x2)*y1"], ["y2*y1", "x1*x2*y2 + cos(y1)"]]


def test_berwald_of_zero_connection_vanishes():
    A = tangent(2)
    dc = berwald_from_connection(A, RhoEtaConnection(ConstantMap(np.zeros((2, 2)), 4)))
    for blk in (dc.Hh, dc.Hv, dc.Vh, dc.Vv):
        assert not np.any(blk.at(P0))


def test_berwald_of_linear_connection_is_constant():
    A = tangent(2)
    c = np.arange(8.0).reshape(2, 2, 2) - 3.0  # c[a, gamma, b]
    src = [[" + ".join(f"{float(c[a, g, b])!r}*y{b + 1}" for b in range(2)) for g in range(2)] for a in range(2)]
    dc = berwald_from_connection(A, conn_of(src, A))
    H = dc.Hh.at(P0)  # H[a, b, gamma]
    assert np.array_equal(H, c.transpose(0, 2, 1))
    assert np.array_equal(dc.Hv.at(P0), H)


def test_berwald_blocks_match_finite_differences_of_catalog_connection():
    sysm = catalog("poincare_half_plane").system
    A, conn = sysm.algebroid, sysm.connection()
    dc = berwald_from_connection(A, conn)
    p = np.array([0.3, 1.5, 0.7, -0.4])
    H = dc.Hh.at(p)
    for b in range(2):
        dG = fd(conn.gamma.at, p, A.m + b)  # [a, gamma]
        assert np.max(np.abs(H[:, b, :] - dG)) <= 1e-5


def test_scalar_h_derivative_is_the_adapted_anchor():
    A = tangent(2)
    conn = conn_of(CURVED, A)
    f = ExprMap.from_strings("x1*sin(y2) + x2^2*y1", 2, 2)
    T = DTensorField((0, 0, 0, 0), f)
    out = h_covariant_derivative(A, T, berwald_from_connection(A, conn), conn, P0)
    G = conn.gamma.at(P0)
    want = np.array([fd(f.at, P0, g) - sum(G[b, g] * fd(f.at, P0, 2 + b) for b in range(2))
                     for g in range(2)])
    assert np.max(np.abs(out - want)) <= 1e-8


def test_liouville_tensor_is_horizontally_parallel_for_flat_connection():
    A = tangent(2)
    conn = RhoEtaConnection(ConstantMap(np.zeros((2, 2)), 4))
    T = DTensorField((0, 0, 1, 0), ExprMap.from_strings(["y1", "y2"], 2, 2))
    assert not np.any(h_covariant_derivative(A, T, berwald_from_connection(A, conn), conn, P0))


def test_constant_tensor_with_zero_connection():
    A = tangent(2)
    conn = RhoEtaConnection(ConstantMap(np.zeros((2, 2)), 4))
    T = DTensorField((1, 1, 0, 1), ConstantMap(np.arange(8.0).reshape(2, 2, 2), 4))
    dc = berwald_from_connection(A, conn)
    assert not np.any(h_covariant_derivative(A, T, dc, conn, P0))
    assert not np.any(v_covariant_derivative(A, T, dc, P0))


def test_vertical_vector_h_derivative_against_hand_expansion():
    # T^a_{|g} = rho^i_g d_i T^a - Gamma^b_g d_b T^a + H^a_{bg} T^b
    A = tangent(2)
    conn = conn_of(CURVED, A)
    dc = berwald_from_connection(A, conn)
    Tm = ExprMap.from_strings(["x2*y1^2", "sin(x1) + y2"], 2, 2)
    out = h_covariant_derivative(A, DTensorField((0, 0, 1, 0), Tm), dc, conn, P0)
    G, H, T0 = conn.gamma.at(P0), dc.Hv.at(P0), Tm.at(P0)
    want = np.zeros((2, 2))
    for g in range(2):
        want[:, g] = fd(Tm.at, P0, g) - sum(G[b, g] * fd(Tm.at, P0, 2 + b) for b in range(2)) + H[:, :, g] @ T0
    assert np.max(np.abs(out - want)) <= 1e-8


def test_covector_h_derivative_sign():
    # T_{b|g} = ... - H^a_{bg} T_a for a vertical covariant slot
    A = tangent(2)
    conn = conn_of(CURVED, A)
    dc = berwald_from_connection(A, conn)
    T = DTensorField((0, 0, 0, 1), ConstantMap(np.array([1.0, -2.0]), 4))
    out = h_covariant_derivative(A, T, dc, conn, P0)
    H = dc.Hv.at(P0)
    assert np.allclose(out, -np.einsum("abg,a->bg", H, [1.0, -2.0]), atol=1e-14)


def test_scalar_v_derivative():
    A = tangent(2)
    f = ExprMap.from_strings("x1*y1*y2 + y2^3", 2, 2)
    dc = berwald_from_connection(A, conn_of(CURVED, A))
    out = v_covariant_derivative(A, DTensorField((0, 0, 0, 0), f), dc, P0)
    assert np.allclose(out, [P0[0] * P0[3], P0[0] * P0[2] + 3 * P0[3] ** 2], atol=1e-14)


def test_liouville_v_derivative_is_kronecker():
    A = tangent(2)
    dc = berwald_from_connection(A, conn_of(CURVED, A))
    T = DTensorField((0, 0, 1, 0), ExprMap.from_strings(["y1", "y2"], 2, 2))
    assert np.array_equal(v_covariant_derivative(A, T, dc, P0), np.eye(2))


def test_v_derivative_uses_the_vertical_blocks():
    A = tangent(1)
    k = ConstantMap(np.full((1, 1, 1), 0.5), 2)
    zero = ConstantMap(np.zeros((1, 1, 1)), 2)
    dc = DistinguishedConnection(zero, zero, zero, k)
    T = DTensorField((0, 0, 1, 0), ExprMap.from_strings(["y1"], 1, 1))
    # d y / dy + Vv * y
    assert v_covariant_derivative(A, T, dc, np.array([0.0, 2.0]))[0, 0] == pytest.approx(2.0)


def test_signature_errors():
    with pytest.raises(SignatureError):
        DTensorField((1, 0, 0), ConstantMap(np.zeros(2), 4))
    with pytest.raises(SignatureError):
        DTensorField((1, -1, 0, 0), ConstantMap(np.zeros(2), 4))
    A = tangent(2)
    bad = DTensorField((1, 0, 0, 0), ConstantMap(np.zeros(3), 4))
    conn = RhoEtaConnection(ConstantMap(np.zeros((2, 2)), 4))
    with pytest.raises(SignatureError):
        h_covariant_derivative_map(A, bad, berwald_from_connection(A, conn), conn)


def test_normality():
    A = tangent(2)
    dc = berwald_from_connection(A, conn_of(CURVED, A))
    plan = SamplePlan(count=4)
    assert normality_residual(dc, plan, 2, 2) == 0.0
    bumped = DistinguishedConnection(dc.Hh, ConstantMap(np.ones((2, 2, 2)), 4), dc.Vh, dc.Vv)
    assert normality_residual(bumped, plan, 2, 2) > 0.1


SIGNATURES = [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1), (1, 1, 0, 0), (0, 0, 1, 1)]


def _field(sig, seed):
    rng = np.random.default_rng(seed)
    rank = sum(sig)
    names = ["x1", "x2", "y1", "y2"]
    coef = np.empty((2,) * rank, dtype=object)
    for idx in np.ndindex(coef.shape):
        a, b = rng.integers(0, 4, 2)
        coef[idx] = f"{float(rng.uniform(-1, 1))!r}*{names[a]}*{names[b]} + sin({names[b]})"
    return DTensorField(sig, ExprMap.from_strings(coef.tolist(), 2, 2))


@settings(max_examples=12)
@given(st.sampled_from(SIGNATURES), st.sampled_from(SIGNATURES), st.integers(0, 1000))
def test_h_derivative_obeys_leibniz_over_tensor_products(s1, s2, seed):
    A = tangent(2)
    conn = conn_of(CURVED, A)
    dc = berwald_from_connection(A, conn)
    T1, T2 = _field(s1, seed), _field(s2, seed + 1)
    prod = tensor_product(T1, T2)
    lhs = h_covariant_derivative(A, prod, dc, conn, P0)
    d1 = h_covariant_derivative(A, T1, dc, conn, P0)  # [slots1, g]
    d2 = h_covariant_derivative(A, T2, dc, conn, P0)
    v1, v2 = np.asarray(T1.coef.at(P0)), np.asarray(T2.coef.at(P0))
    k1, k2 = T1.rank, T2.rank
    # outer products arranged as [slots1, slots2, g]
    a = np.moveaxis(np.multiply.outer(d1, v2), k1, k1 + k2)
    b = np.multiply.outer(v1, d2)
    rhs = regroup_derivative(T1, T2, a + b)
    assert np.max(np.abs(lhs - rhs)) <= 1e-7
