"""Generalized Lie algebroids, (g, h)-morphisms and their axiom checks.

Index layouts used throughout the package:

* ``rho(x)[i, alpha]``        anchor components rho^i_alpha, shape (m, r)
* ``lstruct(x)[c, a, b]``     structure functions L^c_{ab}, shape (r, r, r)
* ``g(x)[alpha, a]``          g^alpha_a, shape (r, r)
* ``gtilde(x)[a, alpha]``     inverse of g, so ``gtilde @ g == I``

Points of the total space are flat arrays ``(x1..xm, y1..yr)``.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from .smoothfn import ConstantMap, DerivedMap, FuncMap, IdentityMap, Jet, SmoothMap
from .smoothfn import jet as J


def identity_diffeo(m: int) -> SmoothMap:
    return IdentityMap(m)


@dataclass
class GeneralizedLieAlgebroid:
    m: int
    r: int
    rho: SmoothMap
    lstruct: SmoothMap
    h: SmoothMap
    eta: SmoothMap
    name: str = ""

    def __post_init__(self):
        checks = [
            ("rho", self.rho, (self.m, self.r)),
            ("lstruct", self.lstruct, (self.r, self.r, self.r)),
            ("h", self.h, (self.m,)),
            ("eta", self.eta, (self.m,)),
        ]
        for label, fn, shape in checks:
            if fn.arity_in != self.m or tuple(fn.shape) != shape:
                raise ValueError(
                    f"{label}: expected R^{self.m} -> {shape}, got R^{fn.arity_in} -> {fn.shape}"
                )

    @property
    def n(self) -> int:
        return self.m + self.r

    def rho_h(self, x):
        """rho composed with h, at a base point (floats or jet)."""
        return self.rho(self.h(x))

    def lstruct_h(self, x):
        return self.lstruct(self.h(x))


@dataclass
class GHMorphism:
    """Vector-bundle map (g, h) from the pullback bundle to E, with inverse g~."""

    g: SmoothMap
    gtilde: SmoothMap
    tag: str = "explicit"

    @classmethod
    def identity(cls, m: int, r: int) -> "GHMorphism":
        eye = np.eye(r)
        return cls(ConstantMap(eye, m, tag="identity"), ConstantMap(eye, m, tag="identity"),
                   tag="identity")

    def check_inverse(self, points, tol: float = 1e-10) -> float:
        """max |g~ g - I| over base points; raises if above ``tol``."""
        worst = 0.0
        for x in points:
            g = np.asarray(self.g.at(x))
            gt = np.asarray(self.gtilde.at(x))
            worst = max(worst, float(np.max(np.abs(gt @ g - np.eye(g.shape[0])), initial=0.0)))
        if worst > tol:
            raise ValueError(f"g~ is not the inverse of g (residual {worst:.3e})")
        return worst


@dataclass
class SamplePlan:
    seed: int = 0
    count: int = 64
    box: list | None = None  # one (lo, hi) pair per coordinate of (x, y)
    exclude_zero_fiber: bool = True

    def points(self, m: int, r: int) -> np.ndarray:
        n = m + r
        box = self.box if self.box is not None else [(-2.0, 2.0)] * n
        if len(box) != n:
            raise ValueError(f"sample box has {len(box)} intervals, expected {n}")
        lo = np.array([b[0] for b in box], dtype=float)
        hi = np.array([b[1] for b in box], dtype=float)
        rng = np.random.default_rng(self.seed)
        pts = np.empty((self.count, n))
        k = 0
        while k < self.count:
            p = lo + (hi - lo) * rng.random(n)
            if self.exclude_zero_fiber and r and np.linalg.norm(p[m:]) < 1e-3:
                continue
            pts[k] = p
            k += 1
        return pts

    def base_points(self, m: int, r: int) -> np.ndarray:
        return self.points(m, r)[:, :m]

    @classmethod
    def from_env(cls, **kw) -> "SamplePlan":
        """Plan whose seed may be overridden by ALGMECH_SEED."""
        plan = cls(**kw)
        env = os.environ.get("ALGMECH_SEED")
        if env is not None:
            plan.seed = int(env)
        return plan


# sections of the pullback bundle -------------------------------------------------


def constant_section(A: GeneralizedLieAlgebroid, alpha: int, arity: int | None = None) -> SmoothMap:
    e = np.zeros(A.r)
    e[alpha] = 1.0
    return ConstantMap(e, A.m if arity is None else arity)


def pullback_bracket(A: GeneralizedLieAlgebroid, u: SmoothMap, v: SmoothMap) -> SmoothMap:
    """[u, v] = rho^i_a(h) (u^a d_i v - v^a d_i u) + L^c_{ab}(h) u^a v^b.

    ``u`` and ``v`` are functions of the base point (arity m) or of a point
    of E (arity m + r); only x-derivatives enter, as for the pullback bundle.
    """
    m = A.m
    arity = u.arity_in

    def expand(p, K):
        U1 = u.expand(p, K + 1)
        V1 = v.expand(p, K + 1)
        X = Jet.variables(p, K)
        x = X[:m]
        rho = A.rho_h(x)
        L = A.lstruct_h(x)
        dU = U1.grad(range(m))
        dV = V1.grad(range(m))
        U, V = U1.truncate(K), V1.truncate(K)
        out = J.einsum("ia,a,ci->c", rho, U, dV) - J.einsum("ia,a,ci->c", rho, V, dU)
        return out + J.einsum("cab,a,b->c", L, U, V)

    return DerivedMap(expand, arity, (A.r,))


def check_antisymmetry(A: GeneralizedLieAlgebroid, plan: SamplePlan) -> float:
    worst = 0.0
    for x in plan.base_points(A.m, A.r):
        L = np.asarray(A.lstruct.at(x))
        worst = max(worst, float(np.max(np.abs(L + L.transpose(0, 2, 1)), initial=0.0)))
    return worst


def check_jacobi(A: GeneralizedLieAlgebroid, plan: SamplePlan) -> float:
    """Cyclic sum of nested brackets of the constant frame sections."""
    frame = [constant_section(A, a) for a in range(A.r)]
    nested = {}
    for a, b in itertools.permutations(range(A.r), 2):
        nested[a, b] = pullback_bracket(A, frame[a], frame[b])
    terms = []
    for a, b, c in itertools.combinations(range(A.r), 3):
        terms.append([
            pullback_bracket(A, nested[a, b], frame[c]),
            pullback_bracket(A, nested[b, c], frame[a]),
            pullback_bracket(A, nested[c, a], frame[b]),
        ])
    worst = 0.0
    for x in plan.base_points(A.m, A.r):
        for trio in terms:
            total = sum(np.asarray(t.at(x)) for t in trio)
            worst = max(worst, float(np.max(np.abs(total), initial=0.0)))
    return worst


def anchor_compatibility_residual(A: GeneralizedLieAlgebroid, x) -> np.ndarray:
    """L^c_{ab}(h) rho^k_c(h) - rho^i_a(h) d_i(rho^k_b o h) + rho^j_b(h) d_j(rho^k_a o h)."""
    X = Jet.variables(x, 1)
    R = A.rho_h(X)
    rho = R.value
    drho = R.grad(range(A.m)).value  # [k, b, i]
    L = np.asarray(A.lstruct_h(np.asarray(x, dtype=float)))
    lhs = np.einsum("cab,kc->kab", L, rho)
    rhs = np.einsum("ia,kbi->kab", rho, drho) - np.einsum("ib,kai->kab", rho, drho)
    return lhs - rhs


def check_anchor_compatibility(A: GeneralizedLieAlgebroid, plan: SamplePlan) -> float:
    worst = 0.0
    for x in plan.base_points(A.m, A.r):
        worst = max(worst, float(np.max(np.abs(anchor_compatibility_residual(A, x)), initial=0.0)))
    return worst


def check_leibniz_pullback(A: GeneralizedLieAlgebroid, u: SmoothMap, v: SmoothMap,
                           f: SmoothMap, plan: SamplePlan, bracket=pullback_bracket) -> float:
    """max |[u, f v] - f [u, v] - (rho^i_a(h) u^a d_i f) v| over points of E."""
    m = A.m
    fv = FuncMap(lambda p: f(p) * v(p), v.arity_in, v.shape)
    left = bracket(A, u, fv)
    uv = bracket(A, u, v)
    worst = 0.0
    for p in plan.points(A.m, A.r):
        F = f.expand(p, 1)
        df = np.asarray(F.first)[:m]
        rho = np.asarray(A.rho_h(p[:m]))
        uval = np.asarray(u.at(p))
        anchor_f = float(uval @ rho.T @ df)
        res = np.asarray(left.at(p)) - F.value * np.asarray(uv.at(p)) - anchor_f * np.asarray(v.at(p))
        worst = max(worst, float(np.max(np.abs(res), initial=0.0)))
    return worst
