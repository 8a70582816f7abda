"""The prolongation (rho, eta)TE: sections, anchor, bracket, connections, curvature.

A section X = Z^a d~_a + Y^a d._a is stored through its natural coefficients
(Z, Y), both smooth maps on E.  With a (rho, eta)-connection Gamma the adapted
basis is delta_a = d~_a - Gamma^b_a d._b and the adapted coefficients are
(Z, Y + Gamma Z).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .algebroid import GeneralizedLieAlgebroid, GHMorphism, SamplePlan
from .smoothfn import ConstantMap, DerivedMap, FuncMap, Jet, SmoothMap
from .smoothfn import jet as J


class MissingMorphism(ValueError):
    pass


class SingularTransition(ArithmeticError):
    pass


class StructureKind(enum.Enum):
    VERTICAL = "V"
    HORIZONTAL = "H"
    ALMOST_PRODUCT = "P"
    TANGENT = "J"


@dataclass
class RhoEtaConnection:
    """Coefficients gamma(x, y)[a, alpha] = Gamma^a_alpha."""

    gamma: SmoothMap


@dataclass
class TransitionData:
    """Change of vector-bundle chart x' = phi(x), y' = M(x) y, z' = Lam(x) z."""

    phi: SmoothMap
    Mmat: SmoothMap
    Lam: SmoothMap
    name: str = ""


class _Cached:
    """Memoize the most recent (point, order) evaluation of a pair of fields."""

    def __init__(self, fn):
        self.fn = fn
        self.key = None
        self.val = None

    def __call__(self, p, K):
        key = (p.tobytes(), K)
        if key != self.key:
            self.val = self.fn(p, K)
            self.key = key
        return self.val


class ProlongationSection:
    """Section of (rho, eta)TE through coefficient maps on E.

    ``basis`` is "natural" (Z, Y) or "adapted" (Z, Y^), the latter produced
    by ``to_adapted``.  Geometric operations expect natural sections.
    """

    def __init__(self, zcoef: SmoothMap, ycoef: SmoothMap, basis: str = "natural"):
        if basis not in ("natural", "adapted"):
            raise ValueError("basis must be 'natural' or 'adapted'")
        self.zcoef = zcoef
        self.ycoef = ycoef
        self.basis = basis

    @classmethod
    def from_pair(cls, fn, arity: int, r: int) -> "ProlongationSection":
        """Build from ``fn(p, K) -> (Z jet, Y jet)`` computed together."""
        cached = _Cached(fn)
        z = DerivedMap(lambda p, K: cached(p, K)[0], arity, (r,))
        y = DerivedMap(lambda p, K: cached(p, K)[1], arity, (r,))
        return cls(z, y)

    def at(self, p):
        p = np.asarray(p, dtype=float)
        return np.asarray(self.zcoef.at(p), dtype=float), np.asarray(self.ycoef.at(p), dtype=float)

    def expand(self, p, K):
        p = np.asarray(p, dtype=float)
        return self.zcoef.expand(p, K), self.ycoef.expand(p, K)

    def _natural(self):
        if self.basis != "natural":
            raise ValueError("convert adapted sections with from_adapted first")
        return self

    def __add__(self, other):
        return linear_combination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return linear_combination([(1.0, self), (-1.0, other)])

    def __neg__(self):
        return linear_combination([(-1.0, self)])

    def __rmul__(self, c):
        return linear_combination([(c, self)])

    def scaled(self, f: SmoothMap) -> "ProlongationSection":
        """Multiply by a function on E."""
        z, y = self.zcoef, self.ycoef
        return ProlongationSection(FuncMap(lambda u: f(u) * z(u), z.arity_in, z.shape),
                                   FuncMap(lambda u: f(u) * y(u), y.arity_in, y.shape),
                                   self.basis)


def linear_combination(terms) -> ProlongationSection:
    terms = list(terms)
    basis = terms[0][1].basis
    if any(s.basis != basis for _, s in terms):
        raise ValueError("cannot combine sections written in different bases")

    def comb(attr):
        maps = [(c, getattr(s, attr)) for c, s in terms]
        ref = maps[0][1]
        return FuncMap(lambda u: sum(c * f(u) for c, f in maps), ref.arity_in, ref.shape)

    return ProlongationSection(comb("zcoef"), comb("ycoef"), basis)


# frames -----------------------------------------------------------------------


def dtilde(A: GeneralizedLieAlgebroid, alpha: int) -> ProlongationSection:
    e = np.zeros(A.r)
    e[alpha] = 1.0
    return ProlongationSection(ConstantMap(e, A.n), ConstantMap(np.zeros(A.r), A.n))


def ddot(A: GeneralizedLieAlgebroid, a: int) -> ProlongationSection:
    e = np.zeros(A.r)
    e[a] = 1.0
    return ProlongationSection(ConstantMap(np.zeros(A.r), A.n), ConstantMap(e, A.n))


def liouville(A: GeneralizedLieAlgebroid) -> ProlongationSection:
    """C = y^a d._a."""
    m = A.m
    return ProlongationSection(ConstantMap(np.zeros(A.r), A.n),
                               FuncMap(lambda u: u[m:], A.n, (A.r,)))


def adapted_frame(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection, alpha: int):
    """delta_alpha = d~_alpha - Gamma^a_alpha d._a."""
    e = np.zeros(A.r)
    e[alpha] = 1.0
    g = conn.gamma
    return ProlongationSection(ConstantMap(e, A.n), FuncMap(lambda u: -g(u)[:, alpha], A.n, (A.r,)))


# anchor and bracket --------------------------------------------------------------


def _base_data(A: GeneralizedLieAlgebroid, p, K):
    X = Jet.variables(p, K)
    x = X[: A.m]
    return X, A.rho_h(x), A.lstruct_h(x)



def anchor_derivative(A: GeneralizedLieAlgebroid, X: ProlongationSection, f: SmoothMap) -> SmoothMap:
    """The function rho~(X) f on E, as a smooth map."""
    X._natural()
    m = A.m

    def expand(p, K):
        F1 = f.expand(p, K + 1)
        dF = F1.grad(range(A.n))
        _, rho, _ = _base_data(A, p, K)
        Z, Y = X.expand(p, K)
        return (J.einsum("...i,ia,a->...", dF[..., :m], rho, Z)
                + J.einsum("...b,b->...", dF[..., m:], Y))

    return DerivedMap(expand, A.n, f.shape)


def prolong_anchor_apply(A: GeneralizedLieAlgebroid, X: ProlongationSection, f: SmoothMap, point):
    """rho~(X) f = Z^a rho^i_a(h(x)) df/dx^i + Y^a df/dy^a at ``point``."""
    return anchor_derivative(A, X, f).at(point)


def prolong_bracket(A: GeneralizedLieAlgebroid, X: ProlongationSection,
                    W: ProlongationSection) -> ProlongationSection:
    """Bracket of two sections in natural coefficients.

    F-part:  rho~(X) W_Z - rho~(W) X_Z + L^c_{ab}(h) X_Z^a W_Z^b
    vertical: rho~(X) W_Y - rho~(W) X_Y
    """
    X._natural()
    W._natural()
    n = A.n

    def pair(p, K):
        Zx1, Yx1 = X.expand(p, K + 1)
        Zw1, Yw1 = W.expand(p, K + 1)
        _, rho, L = _base_data(A, p, K)
        Zx, Yx, Zw, Yw = (t.truncate(K) for t in (Zx1, Yx1, Zw1, Yw1))
        vx = J.stack(list(J.einsum("ia,a->i", rho, Zx)) + list(Yx))
        vw = J.stack(list(J.einsum("ia,a->i", rho, Zw)) + list(Yw))

        def along(v, T):
            return J.einsum("ci,i->c", T.grad(range(n)), v)

        z = along(vx, Zw1) - along(vw, Zx1) + J.einsum("cab,a,b->c", L, Zx, Zw)
        y = along(vx, Yw1) - along(vw, Yx1)
        return z, y

    return ProlongationSection.from_pair(pair, n, A.r)


# adapted basis -----------------------------------------------------------------------


def to_adapted(conn: RhoEtaConnection, X: ProlongationSection) -> ProlongationSection:
    X._natural()
    z, y, g = X.zcoef, X.ycoef, conn.gamma
    yhat = FuncMap(lambda u: y(u) + J.einsum("ab,b->a", g(u), z(u)), y.arity_in, y.shape)
    return ProlongationSection(z, yhat, "adapted")


def from_adapted(conn: RhoEtaConnection, X: ProlongationSection) -> ProlongationSection:
    if X.basis != "adapted":
        raise ValueError("section is not in the adapted basis")
    z, yh, g = X.zcoef, X.ycoef, conn.gamma
    y = FuncMap(lambda u: yh(u) - J.einsum("ab,b->a", g(u), z(u)), yh.arity_in, yh.shape)
    return ProlongationSection(z, y, "natural")


def adapted_dual_pairing(conn: RhoEtaConnection, a: int, X: ProlongationSection, point) -> float:
    """delta y^a (X) = Gamma^a_alpha Z^alpha + Y^a."""
    Z, Y = X._natural().at(point)
    G = np.asarray(conn.gamma.at(point))
    return float(G[a] @ Z + Y[a])


# structures --------------------------------------------------------------------------


def apply_structure(kind, A: GeneralizedLieAlgebroid, conn: RhoEtaConnection | None,
                    X: ProlongationSection, gh: GHMorphism | None = None) -> ProlongationSection:
    """Apply V, H, P (need the connection) or J (needs the (g, h) morphism)."""
    kind = StructureKind(kind) if not isinstance(kind, StructureKind) else kind
    X._natural()
    z, y = X.zcoef, X.ycoef
    n, r, m = A.n, A.r, A.m
    zero = ConstantMap(np.zeros(r), n)
    if kind is StructureKind.TANGENT:
        if gh is None:
            raise MissingMorphism("the tangent structure J needs a (g, h) morphism")
        gt = gh.gtilde
        ynew = FuncMap(lambda u: J.einsum("ab,b->a", gt(A.h(u[:m])), z(u)), n, (r,))
        return ProlongationSection(zero, ynew)
    if conn is None:
        raise ValueError(f"structure {kind.value} needs a connection")
    g = conn.gamma

    def gz(u):
        return J.einsum("ab,b->a", g(u), z(u))

    if kind is StructureKind.VERTICAL:
        return ProlongationSection(zero, FuncMap(lambda u: y(u) + gz(u), n, (r,)))
    if kind is StructureKind.HORIZONTAL:
        return ProlongationSection(z, FuncMap(lambda u: -gz(u), n, (r,)))
    # almost product P = H - V
    return ProlongationSection(z, FuncMap(lambda u: -y(u) - 2.0 * gz(u), n, (r,)))


def nijenhuis(e, A: GeneralizedLieAlgebroid, X: ProlongationSection,
              W: ProlongationSection) -> ProlongationSection:
    """N_e(X, W) = [eX, eW] + e^2 [X, W] - e[eX, W] - e[X, eW]; ``e`` maps sections."""
    br = prolong_bracket
    return (br(A, e(X), e(W)) + e(e(br(A, X, W)))
            - e(br(A, e(X), W)) - e(br(A, X, e(W))))


def curvature(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection) -> SmoothMap:
    """R(x, y)[a, alpha, beta] = R^a_{alpha beta} of the connection.

    R^a_{ab} = rho~(delta_b) Gamma^a_a - rho~(delta_a) Gamma^a_b + L^c_{ab}(h) Gamma^a_c
    with rho~(delta_b) = rho^i_b(h) d/dx^i - Gamma^c_b d/dy^c.
    """
    m, n = A.m, A.n

    def expand(p, K):
        G1 = conn.gamma.expand(p, K + 1)
        _, rho, L = _base_data(A, p, K)
        G = G1.truncate(K)
        dG = G1.grad(range(n))  # [a, alpha, i]
        T = J.einsum("aqi,ib->aqb", dG[..., :m], rho) - J.einsum("aqc,cb->aqb", dG[..., m:], G)
        return T - T.transpose(0, 2, 1) + J.einsum("gqb,ag->aqb", L, G)

    return DerivedMap(expand, n, (A.r, A.r, A.r))


# transformation laws --------------------------------------------------------------------


def _check_invertible(mat, label, x):
    if not np.all(np.isfinite(mat)) or abs(np.linalg.det(mat)) < 1e-12:
        raise SingularTransition(f"{label} is singular at x = {np.asarray(x).tolist()}")


def transformation_residuals(A: GeneralizedLieAlgebroid, trans: TransitionData, plan: SamplePlan,
                             conn: RhoEtaConnection | None = None, semispray_g: SmoothMap | None = None,
                             gh: GHMorphism | None = None, primed=None) -> dict:
    """Residuals of the chart-change laws for rho, Gamma and the semispray G.

    The primed objects are read from ``primed`` (a dict with optional keys
    rho, gamma, G) and default to the same maps evaluated in the primed chart,
    so a zero residual says the transition is a symmetry of the presentation.
    ``semispray_g`` is G^a(x, y); the law checked is
    2G'^{a'} = M^{a'}_a 2G^a - (g y)^a rho^i_a(h) d y'^{a'} / d x^i.
    Also reported: max |Lam - M|, which must vanish when E and F are identified.
    """
    primed = primed or {}
    rho_p = primed.get("rho", A.rho)
    gamma_p = primed.get("gamma", conn.gamma if conn is not None else None)
    g_p = primed.get("G", semispray_g)
    m = A.m
    out = {"rho_law": 0.0, "lambda_vs_M": 0.0}
    if conn is not None:
        out["gamma_law"] = 0.0
    if semispray_g is not None:
        out["semispray_law"] = 0.0
    for p in plan.points(A.m, A.r):
        x, y = p[:m], p[m:]
        PX = trans.phi.expand(x, 1)
        Dphi = PX.first
        _check_invertible(Dphi, "Jacobian of phi", x)
        MX = trans.Mmat.expand(x, 1)
        Mv = MX.value
        _check_invertible(Mv, "M", x)
        Lam = np.asarray(trans.Lam.at(x))
        _check_invertible(Lam, "Lambda", x)
        Laminv = np.linalg.inv(Lam)
        xp = PX.value
        yp = Mv @ y
        rho = np.asarray(A.rho.at(x))
        res = Dphi @ rho @ Laminv - np.asarray(rho_p.at(xp))
        out["rho_law"] = max(out["rho_law"], float(np.max(np.abs(res))))
        out["lambda_vs_M"] = max(out["lambda_vs_M"], float(np.max(np.abs(Lam - Mv))))
        rho_h = np.asarray(A.rho_h(x))
        if conn is not None:
            MinvX = J.matinv(MX)
            dMinv = MinvX.grad(range(m)).value  # [a, b', i]
            G = np.asarray(conn.gamma.at(p))
            term = np.einsum("ig,abi,b->ag", rho_h, dMinv, yp)
            rhs = Mv @ (term + G) @ Laminv
            lhs = np.asarray(gamma_p.at(np.concatenate([xp, yp])))
            out["gamma_law"] = max(out["gamma_law"], float(np.max(np.abs(lhs - rhs))))
        if semispray_g is not None:
            gmat = np.eye(A.r) if gh is None else np.asarray(gh.g.at(A.h.at(x)))
            zs = gmat @ y
            dM = MX.grad(range(m)).value  # [a', b, i]
            rhs = Mv @ (2.0 * np.asarray(semispray_g.at(p))) - np.einsum("a,ia,cbi,b->c", zs, rho_h, dM, y)
            lhs = 2.0 * np.asarray(g_p.at(np.concatenate([xp, yp])))
            out["semispray_law"] = max(out["semispray_law"], float(np.max(np.abs(lhs - rhs))))
    return out


verify_transformation_laws = transformation_residuals


# polynomial test sections ----------------------------------------------------------------


def random_polynomial_section(A: GeneralizedLieAlgebroid, rng, degree: int = 2,
                              scale: float = 1.0) -> ProlongationSection:
    """Section whose coefficients are random polynomials of degree <= ``degree`` in (x, y)."""
    n, r = A.n, A.r
    monos = [mono for d in range(degree + 1)
             for mono in itertools.combinations_with_replacement(range(n), d)]
    cz = scale * rng.standard_normal((r, len(monos)))
    cy = scale * rng.standard_normal((r, len(monos)))

    def poly(coefs):
        def fn(u):
            terms = []
            for mono in monos:
                t = 1.0
                for v in mono:
                    t = t * u[v]
                terms.append(t)
            basis = J.stack(terms) if isinstance(u, Jet) else np.array(terms, dtype=float)
            return J.einsum("ak,k->a", coefs, basis)
        return FuncMap(fn, n, (r,))

    return ProlongationSection(poly(cz), poly(cy))
