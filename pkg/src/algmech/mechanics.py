"""Lagrangian and Finsler mechanics on the prolongation.

Semisprays are described by their vertical coefficient Avert, so that
S = g^a_b(h(x)) y^b d~_a + Avert^a d._a.  With an external force F the
paper-style coefficient G satisfies Avert = -2 (G - F/4).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebroid import GeneralizedLieAlgebroid, GHMorphism, SamplePlan
from .dtensor import DTensorField, berwald_from_connection, h_covariant_derivative_map
from .prolongation import (
    ProlongationSection,
    RhoEtaConnection,
    anchor_derivative,
    curvature,
    ddot,
    dtilde,
    liouville,
    prolong_bracket,
)
from .smoothfn import ConstantMap, DerivedMap, FuncMap, Jet, SmoothMap
from .smoothfn import jet as J
from .smoothfn.linalg import eliminate


class SingularHessian(ArithmeticError):
    def __init__(self, message, point=None):
        self.point = None if point is None else np.asarray(point, dtype=float).tolist()
        super().__init__(message if point is None else f"{message} at {self.point}")


@dataclass
class Lagrangian:
    fn: SmoothMap


@dataclass
class FinslerFunction:
    """Fundamental function F; the mechanics uses the Lagrangian L = F^2."""

    fn: SmoothMap

    def lagrangian(self) -> Lagrangian:
        f = self.fn
        return Lagrangian(FuncMap(lambda u: f(u) * f(u), f.arity_in, ()))


@dataclass
class ExternalForce:
    """Vertical force coefficients F^a(x, y); None means zero."""

    fn: SmoothMap | None = None

    def at(self, p, r):
        return np.zeros(r) if self.fn is None else np.asarray(self.fn.at(p), dtype=float)

    def expand(self, p, K, r):
        if self.fn is None:
            return Jet.constant(np.zeros(r), Jet.variables(p, K).basis)
        return self.fn.expand(p, K)


@dataclass
class MechanicalSystem:
    algebroid: GeneralizedLieAlgebroid
    gh: GHMorphism
    payload: object  # Lagrangian | FinslerFunction | RhoEtaConnection
    fe: ExternalForce = field(default_factory=ExternalForce)
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        if isinstance(self.payload, Lagrangian):
            return "lagrange"
        if isinstance(self.payload, FinslerFunction):
            return "finsler"
        if isinstance(self.payload, RhoEtaConnection):
            return "connection"
        raise TypeError(f"unknown payload {self.payload!r}")

    def lagrangian(self) -> Lagrangian | None:
        if isinstance(self.payload, Lagrangian):
            return self.payload
        if isinstance(self.payload, FinslerFunction):
            return self.payload.lagrangian()
        return None

    def semispray(self) -> "SemisprayField":
        L = self.lagrangian()
        if L is not None:
            return canonical_semispray(L, self.gh, self.algebroid)
        return canonical_spray(self.payload, self.gh, self.algebroid)

    def connection(self) -> RhoEtaConnection:
        if isinstance(self.payload, RhoEtaConnection):
            return self.payload
        return connection_from_semispray(self.semispray(), self.gh, self.algebroid)


@dataclass
class SemisprayField:
    """S = (g(h(x)) y) d~ + Avert d._"""

    Avert: SmoothMap
    algebroid: GeneralizedLieAlgebroid
    gh: GHMorphism

    def horizontal(self) -> SmoothMap:
        A, gh = self.algebroid, self.gh
        m = A.m
        return FuncMap(lambda u: J.einsum("ab,b->a", gh.g(A.h(u[:m])), u[m:]), A.n, (A.r,))

    def section(self) -> ProlongationSection:
        return ProlongationSection(self.horizontal(), self.Avert)

    def G(self, fe: ExternalForce | None = None) -> SmoothMap:
        """G^a = -Avert^a / 2 + F^a / 4."""
        av, r = self.Avert, self.algebroid.r
        if fe is None or fe.fn is None:
            return FuncMap(lambda u: -0.5 * av(u), av.arity_in, (r,))
        f = fe.fn
        return FuncMap(lambda u: -0.5 * av(u) + 0.25 * f(u), av.arity_in, (r,))


# geometric context at a point -------------------------------------------------------


class _Frame:
    """rho(h), L(h), g(h), g~(h) and the identity jet at a point, order K."""

    def __init__(self, A: GeneralizedLieAlgebroid, gh: GHMorphism, p, K):
        X = Jet.variables(p, K)
        self.X = X
        self.x = X[: A.m]
        self.y = X[A.m :]
        hx = A.h(self.x)
        self.rho = A.rho(hx)
        self.L = A.lstruct(hx)
        self.g = gh.g(hx)
        self.gt = gh.gtilde(hx)
        self.zs = J.einsum("ab,b->a", self.g, self.y)


# Lagrangian quantities ---------------------------------------------------------------


def lagrangian_jets(L: Lagrangian, point, m: int) -> dict:
    """Values of L_i, L_a, L_ib (= d2L/dx^i dy^b) and L_ab at ``point``."""
    T = L.fn.expand(point, 2)
    g = T.first
    Hs = T.second
    return {"L": T.value, "L_i": g[:m], "L_a": g[m:], "L_ib": Hs[:m, m:], "L_ab": Hs[m:, m:]}


def check_regularity(L: Lagrangian, point, m: int, tol: float = 1e-9):
    """(regular, |det L_ab|) by full-pivot elimination with relative threshold ``tol``."""
    H = lagrangian_jets(L, point, m)["L_ab"]
    el = eliminate(H, rtol=tol)
    return el.rank == H.shape[0], abs(el.det)


def _checked_inverse(H, p, tol=1e-9):
    H0 = H.value if isinstance(H, Jet) else np.asarray(H)
    # the first full pivot is max|H_ab|, so the ratio test matches check_regularity
    el = eliminate(H0, rtol=0.0)
    if el.rank < H0.shape[0]:
        raise SingularHessian("Hessian L_ab is singular", p)
    if el.pivot_ratio * tol > 1.0:
        raise SingularHessian(f"Hessian L_ab is ill-conditioned (pivot ratio {el.pivot_ratio:.3e})", p)
    return J.matinv(H)


def hessian_inverse(L: Lagrangian, point, m: int) -> np.ndarray:
    H = lagrangian_jets(L, point, m)["L_ab"]
    return _checked_inverse(H, point)


def _lagrange_pieces(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid, p, K):
    """Euler-Lagrange covector E_b and Hessian L_ab as order-K jets."""
    m, n = A.m, A.n
    Lam = L.fn.expand(p, K + 2)
    fr = _Frame(A, gh, p, K + 1)
    dL = Lam.grad(range(n))
    Lx, Ly = dL[:m], dL[m:]
    Q = J.einsum("ae,e,a->", fr.g, fr.y, Ly)
    P = J.einsum("eb,e->b", fr.gt, Ly)
    dQ = Q.grad(range(m))
    dP = P.grad(range(m))  # [b, i]
    rho = fr.rho.truncate(K)
    zs = fr.zs.truncate(K)
    Ls = fr.L.truncate(K)
    E = (J.einsum("ib,i->b", rho, Lx)
         - J.einsum("ib,i->b", rho, dQ)
         - J.einsum("d,id,bi->b", zs, rho, dP)
         + J.einsum("d,ib,di->b", zs, rho, dP)
         + J.einsum("d,cdb,c->b", zs, Ls, P.truncate(K)))
    H = Ly.grad(range(m, n))
    return E, H


def euler_lagrange_map(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid) -> SmoothMap:
    return DerivedMap(lambda p, K: _lagrange_pieces(L, gh, A, p, K)[0], A.n, (A.r,))


def euler_lagrange_covector(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid, point):
    return np.asarray(euler_lagrange_map(L, gh, A).at(point))


def energy_map(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid) -> SmoothMap:
    """E_L = g^a_e(h) y^e L_a - L."""
    m, n = A.m, A.n

    def expand(p, K):
        Lam = L.fn.expand(p, K + 1)
        Ly = Lam.grad(range(m, n))
        fr = _Frame(A, gh, p, K)
        return J.einsum("a,a->", fr.zs, Ly) - Lam.truncate(K)

    return DerivedMap(expand, n, ())


def energy(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid, point) -> float:
    return float(energy_map(L, gh, A).at(point))


def theta_map(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid,
              X: ProlongationSection) -> SmoothMap:
    """theta_L(X) = g~^e_a(h) L_e Z^a."""
    m, n = A.m, A.n

    def expand(p, K):
        Ly = L.fn.expand(p, K + 1).grad(range(m, n))
        fr = _Frame(A, gh, p, K)
        return J.einsum("ea,e,a->", fr.gt, Ly, X.zcoef.expand(p, K))

    return DerivedMap(expand, n, ())


def poincare_cartan_theta(L, gh, A, X, point) -> float:
    return float(theta_map(L, gh, A, X).at(point))


def poincare_cartan_omega(L, gh, A, U: ProlongationSection, V: ProlongationSection, point) -> float:
    """omega_L(U, V) = rho~(U) theta(V) - rho~(V) theta(U) - theta([U, V])."""
    tU = theta_map(L, gh, A, U)
    tV = theta_map(L, gh, A, V)
    val = (anchor_derivative(A, U, tV).at(point) - anchor_derivative(A, V, tU).at(point)
           - theta_map(L, gh, A, prolong_bracket(A, U, V)).at(point))
    return float(val)


# semisprays ----------------------------------------------------------------------------


def canonical_semispray(L: Lagrangian, gh: GHMorphism, A: GeneralizedLieAlgebroid) -> SemisprayField:
    """Avert^a = E_b L~^{be} g^a_e(h): the semispray solving the Cartan equation."""

    def expand(p, K):
        E, H = _lagrange_pieces(L, gh, A, p, K)
        Hinv = _checked_inverse(H, p)
        g = _Frame(A, gh, p, K).g
        return J.einsum("b,be,ae->a", E, Hinv, g)

    return SemisprayField(DerivedMap(expand, A.n, (A.r,)), A, gh)


def cartan_residual_map(S: SemisprayField, L: Lagrangian, gh, A, X: ProlongationSection) -> SmoothMap:
    """omega_L(S, X) + rho~(X)(E_L) as a map on E."""
    Ss = S.section()
    tS = theta_map(L, gh, A, Ss)
    tX = theta_map(L, gh, A, X)
    parts = [anchor_derivative(A, Ss, tX), anchor_derivative(A, X, tS),
             theta_map(L, gh, A, prolong_bracket(A, Ss, X)),
             anchor_derivative(A, X, energy_map(L, gh, A))]
    return FuncMap(lambda u: parts[0](u) - parts[1](u) - parts[2](u) + parts[3](u), A.n, ())


def verify_cartan_equation(S: SemisprayField, L: Lagrangian, gh, A: GeneralizedLieAlgebroid,
                           plan: SamplePlan) -> float:
    """max over samples and the natural frame of |omega_L(S, X) + rho~(X) E_L|."""
    frame = [dtilde(A, b) for b in range(A.r)] + [ddot(A, b) for b in range(A.r)]
    maps = [cartan_residual_map(S, L, gh, A, X) for X in frame]
    worst = 0.0
    for p in plan.points(A.m, A.r):
        for f in maps:
            worst = max(worst, abs(float(f.at(p))))
    return worst


def liouville_residual(S: SemisprayField, plan: SamplePlan) -> float:
    """max |J(S) - C|, where J(S) = (0, g~(h) g(h) y)."""
    A, gh = S.algebroid, S.gh
    m = A.m
    worst = 0.0
    for p in plan.points(A.m, A.r):
        hx = A.h.at(p[:m])
        js = np.asarray(gh.gtilde.at(hx)) @ (np.asarray(gh.g.at(hx)) @ p[m:])
        worst = max(worst, float(np.max(np.abs(js - p[m:]))))
    return worst


def avert_from_cartan_system(L: Lagrangian, gh, A: GeneralizedLieAlgebroid, point) -> np.ndarray:
    """Second route to Avert: solve omega_L(S, d~_b) = -rho~(d~_b) E_L for Avert.

    omega_L(S, .) is pointwise linear in S, so with S_c = (g y) d~ + c d._
    (c constant) the equations are affine in c.
    """
    r, n = A.r, A.n
    point = np.asarray(point, dtype=float)
    Sx = SemisprayField(ConstantMap(np.zeros(r), n), A, gh)
    S0 = Sx.section()
    EL = energy_map(L, gh, A)
    Mmat = np.zeros((r, r))
    rhs = np.zeros(r)
    for b in range(r):
        Xb = dtilde(A, b)
        rhs[b] = -float(anchor_derivative(A, Xb, EL).at(point)) - poincare_cartan_omega(L, gh, A, S0, Xb, point)
        for k in range(r):
            Mmat[b, k] = poincare_cartan_omega(L, gh, A, ddot(A, k), Xb, point)
    return np.linalg.solve(Mmat, rhs)


def connection_from_semispray(S: SemisprayField, gh: GHMorphism, A: GeneralizedLieAlgebroid) -> RhoEtaConnection:
    """Gamma^a_c = -1/2 g~^b_c dAvert^a/dy^b - 1/2 (g y)^d L^f_{dc} g~^a_f
    + 1/2 rho^j_c d(g^b_e)/dx^j y^e g~^a_b - 1/2 (g y)^b rho^i_b d(g~^a_c)/dx^i,
    all structure maps evaluated at h(x)."""
    m, n = A.m, A.n
    av = S.Avert

    def expand(p, K):
        dA = av.expand(p, K + 1).grad(range(m, n))  # [a, b]
        fr = _Frame(A, gh, p, K + 1)
        dg = fr.g.grad(range(m))     # [b, e, j]
        dgt = fr.gt.grad(range(m))   # [a, c, i]
        gt, rho, Ls, zs, y = (t.truncate(K) for t in (fr.gt, fr.rho, fr.L, fr.zs, fr.y))
        return (-0.5 * J.einsum("bc,ab->ac", gt, dA)
                - 0.5 * J.einsum("d,fdc,af->ac", zs, Ls, gt)
                + 0.5 * J.einsum("jc,bej,e,ab->ac", rho, dg, y, gt)
                - 0.5 * J.einsum("b,ib,aci->ac", zs, rho, dgt))

    return RhoEtaConnection(DerivedMap(expand, n, (A.r, A.r)))


def canonical_spray(conn: RhoEtaConnection, gh: GHMorphism, A: GeneralizedLieAlgebroid) -> SemisprayField:
    """Spray of a connection: Avert = -2 (G - F/4) with
    2 (G - F/4)^a = Gamma^a_c (gy)^c + 1/2 (gy)^d L^b_{dc} g~^a_b (gy)^c
                    - 1/2 rho^j_c d(g^b_e)/dx^j y^e g~^a_b (gy)^c
                    + 1/2 (gy)^b rho^i_b d(g~^a_c)/dx^i (gy)^c."""
    m, n = A.m, A.n

    def expand(p, K):
        fr = _Frame(A, gh, p, K + 1)
        dg = fr.g.grad(range(m))
        dgt = fr.gt.grad(range(m))
        gt, rho, Ls, zs, y = (t.truncate(K) for t in (fr.gt, fr.rho, fr.L, fr.zs, fr.y))
        G = conn.gamma.expand(p, K)
        two_g = (J.einsum("ac,c->a", G, zs)
                 + 0.5 * J.einsum("d,bdc,ab,c->a", zs, Ls, gt, zs)
                 - 0.5 * J.einsum("jc,bej,e,ab,c->a", rho, dg, y, gt, zs)
                 + 0.5 * J.einsum("b,ib,aci,c->a", zs, rho, dgt, zs))
        return -two_g

    return SemisprayField(DerivedMap(expand, n, (A.r,)), A, gh)


def spray_deviation_map(S: SemisprayField) -> SmoothMap:
    """Vertical coefficients of [C, S] - S, i.e. y^f dAvert/dy^f - 2 Avert.

    In terms of G - F/4 this is 2(-y^f d(G - F/4)/dy^f + 2 (G - F/4)).
    """
    A = S.algebroid
    m, n = A.m, A.n
    av = S.Avert

    def expand(p, K):
        T = av.expand(p, K + 1)
        y = Jet.variables(p, K)[m:]
        return J.einsum("af,f->a", T.grad(range(m, n)), y) - 2.0 * T.truncate(K)

    return DerivedMap(expand, n, (A.r,))


def spray_deviation(S: SemisprayField, point) -> np.ndarray:
    return np.asarray(spray_deviation_map(S).at(point))


def spray_deviation_by_bracket(S: SemisprayField, point) -> np.ndarray:
    """Same quantity through the prolongation bracket [C, S] - S."""
    A = S.algebroid
    Ss = S.section()
    z, y = (prolong_bracket(A, liouville(A), Ss) - Ss).at(point)
    return y


# external forces ---------------------------------------------------------------------------


def ring_connection(conn: RhoEtaConnection, fe: ExternalForce, gh: GHMorphism,
                    A: GeneralizedLieAlgebroid) -> RhoEtaConnection:
    """Gamma_ring^a_c = Gamma^a_c + 1/4 g~^d_c(h) dF^a/dy^d."""
    if fe is None or fe.fn is None:
        return conn
    m, n = A.m, A.n

    def expand(p, K):
        dF = fe.fn.expand(p, K + 1).grad(range(m, n))  # [a, d]
        gt = _Frame(A, gh, p, K).gt
        return conn.gamma.expand(p, K) + 0.25 * J.einsum("ad,dc->ac", dF, gt)

    return RhoEtaConnection(DerivedMap(expand, n, (A.r, A.r)))


def ring_curvature(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection, fe: ExternalForce,
                   gh: GHMorphism) -> SmoothMap:
    """Curvature of the ring connection written through the base connection:

    R_ring^a_{cd} = R^a_{cd}
        + 1/4 (g~^e_d (dF^a/dy^e)_{|c} - g~^e_c (dF^a/dy^e)_{|d})
        + 1/16 (g~^e_d dF^b/dy^e g~^f_c d2F^a/dy^b dy^f - g~^f_c dF^b/dy^f g~^e_d d2F^a/dy^b dy^e)
        + 1/4 L^f_{cd} g~^e_f dF^a/dy^e

    where |c is the h-covariant derivative of the Berwald connection of Gamma.
    """
    m, n, r = A.m, A.n, A.r
    R = curvature(A, conn)
    if fe is None or fe.fn is None:
        return R
    f = fe.fn
    dFmap = DerivedMap(lambda p, K: f.expand(p, K + 1).grad(range(m, n)), n, (r, r))
    berw = berwald_from_connection(A, conn)
    covd = h_covariant_derivative_map(A, DTensorField((0, 0, 1, 1), dFmap), berw, conn)

    def expand(p, K):
        F2 = f.expand(p, K + 2)
        dF = F2.grad(range(m, n)).truncate(K)                   # [a, e]
        ddF = F2.grad(range(m, n)).grad(range(m, n))            # [a, b, f]
        TC = covd.expand(p, K)                                  # [a, e, c]
        fr = _Frame(A, gh, p, K)
        gt, Ls = fr.gt, fr.L
        out = R.expand(p, K)
        out = out + 0.25 * (J.einsum("ed,aec->acd", gt, TC) - J.einsum("ec,aed->acd", gt, TC))
        out = out + (1.0 / 16.0) * (J.einsum("ed,be,fc,abf->acd", gt, dF, gt, ddF)
                                    - J.einsum("fc,bf,ed,abe->acd", gt, dF, gt, ddF))
        return out + 0.25 * J.einsum("fcd,ef,ae->acd", Ls, gt, dF)

    return DerivedMap(expand, n, (r, r, r))


# Finsler functions ----------------------------------------------------------------------------


@dataclass
class FinslerReport:
    euler_residual: float
    scaling_residual: float
    min_pivot: float
    min_value: float

    @property
    def ok(self) -> bool:
        return (self.euler_residual <= 1e-8 and self.scaling_residual <= 1e-8
                and self.min_pivot > 0.0 and self.min_value > 0.0)


def check_finsler_axioms(F: FinslerFunction, plan: SamplePlan, m: int, r: int) -> FinslerReport:
    """Positivity, 1-homogeneity (Euler and lambda in {0.5, 2}) and positive
    definiteness of the fibre Hessian of F^2 (smallest elimination pivot
    without row exchanges, positive iff the Hessian is positive definite)."""
    f = F.fn
    F2 = F.lagrangian().fn
    euler = scaling = 0.0
    min_piv = min_val = np.inf
    for p in plan.points(m, r):
        T = f.expand(p, 1)
        y = p[m:]
        val = T.value
        min_val = min(min_val, val)
        euler = max(euler, abs(float(T.first[m:] @ y) - val))
        for lam in (0.5, 2.0):
            q = p.copy()
            q[m:] *= lam
            scaling = max(scaling, abs(float(f.at(q)) - lam * val))
        H = F2.expand(p, 2).second[m:, m:].copy()
        for k in range(r):
            piv = H[k, k]
            min_piv = min(min_piv, piv)
            if piv <= 0.0:
                break
            H[k + 1 :] -= np.outer(H[k + 1 :, k] / piv, H[k])
    return FinslerReport(euler, scaling, float(min_piv), float(min_val))
