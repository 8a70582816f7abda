"""Distinguished tensor fields and their covariant derivatives.

A d-tensor of signature (p, q, r, s) has p horizontal contravariant, q
horizontal covariant, r vertical contravariant and s vertical covariant
slots, stored in that order.  Connection blocks use the layout
``H[upper, lower, derivative]``:

* Hh[alpha, beta, gamma] = H^alpha_{beta gamma}, Hv[a, b, gamma] = H^a_{b gamma}
* Vh[alpha, beta, c]     = V^alpha_{beta c},     Vv[a, b, c]     = V^a_{b c}
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .algebroid import GeneralizedLieAlgebroid, SamplePlan
from .prolongation import RhoEtaConnection
from .smoothfn import ConstantMap, DerivedMap, FuncMap, Jet, SmoothMap
from .smoothfn import jet as J


class SignatureError(ValueError):
    pass


@dataclass
class DTensorField:
    signature: tuple
    coef: SmoothMap

    def __post_init__(self):
        self.signature = tuple(int(k) for k in self.signature)
        if len(self.signature) != 4 or min(self.signature) < 0:
            raise SignatureError(f"bad signature {self.signature}")

    @property
    def rank(self) -> int:
        return sum(self.signature)

    def slot_kinds(self):
        """(contravariant?, horizontal?) for each slot in storage order."""
        p, q, r, s = self.signature
        return [(True, True)] * p + [(False, True)] * q + [(True, False)] * r + [(False, False)] * s

    def validate(self, r: int):
        want = (r,) * self.rank
        if tuple(self.coef.shape) != want:
            raise SignatureError(
                f"signature {self.signature} needs components of shape {want}, got {self.coef.shape}"
            )


@dataclass
class DistinguishedConnection:
    Hh: SmoothMap
    Hv: SmoothMap
    Vh: SmoothMap
    Vv: SmoothMap


def berwald_from_connection(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection) -> DistinguishedConnection:
    """Hh = Hv = dGamma^a_gamma / dy^b, Vh = Vv = 0."""
    m, n, r = A.m, A.n, A.r

    def expand(p, K):
        dG = conn.gamma.expand(p, K + 1).grad(range(m, n))  # [a, gamma, b]
        return dG.transpose(0, 2, 1)

    H = DerivedMap(expand, n, (r, r, r))
    zero = ConstantMap(np.zeros((r, r, r)), n)
    return DistinguishedConnection(H, H, zero, zero)


def _letters(k):
    # upper case keeps slot letters apart from the fixed lower-case indices;
    # 'Z' is reserved by the jet einsum for the coefficient axis
    if k > 25:
        raise SignatureError("too many slots")
    return string.ascii_uppercase[:k]


def _slot_terms(kinds, T, blocks_h, blocks_v):
    """Sum of +H T over contravariant slots and -H T over covariant slots.

    Returns an array (or jet) with one extra trailing derivative index.
    """
    k = len(kinds)
    idx = _letters(k)
    total = None
    for s, (contra, horiz) in enumerate(kinds):
        H = blocks_h if horiz else blocks_v
        src = idx[:s] + "w" + idx[s + 1 :]
        if contra:
            term = J.einsum(f"{idx[s]}wz,{src}->{idx}z", H, T)
        else:
            term = -J.einsum(f"w{idx[s]}z,{src}->{idx}z", H, T)
        total = term if total is None else total + term
    return total


def h_covariant_derivative_map(A: GeneralizedLieAlgebroid, T: DTensorField,
                               dc: DistinguishedConnection, conn: RhoEtaConnection) -> SmoothMap:
    """T_{|gamma} as a map on E; the derivative index gamma is the last axis."""
    T.validate(A.r)
    m, n, r = A.m, A.n, A.r
    kinds = T.slot_kinds()
    idx = _letters(T.rank)

    def expand(p, K):
        T1 = T.coef.expand(p, K + 1)
        dT = T1.grad(range(n))
        T0 = T1.truncate(K)
        X = Jet.variables(p, K)
        rho = A.rho_h(X[:m])
        G = conn.gamma.expand(p, K)
        base = (J.einsum(f"{idx}i,iz->{idx}z", dT[..., :m], rho)
                - J.einsum(f"{idx}b,bz->{idx}z", dT[..., m:], G))
        if kinds:
            base = base + _slot_terms(kinds, T0, dc.Hh.expand(p, K), dc.Hv.expand(p, K))
        return base

    return DerivedMap(expand, n, (r,) * (T.rank + 1))


def v_covariant_derivative_map(A: GeneralizedLieAlgebroid, T: DTensorField,
                               dc: DistinguishedConnection) -> SmoothMap:
    """T|_c as a map on E; the derivative index c is the last axis."""
    T.validate(A.r)
    m, n, r = A.m, A.n, A.r
    kinds = T.slot_kinds()

    def expand(p, K):
        T1 = T.coef.expand(p, K + 1)
        base = T1.grad(range(m, n))
        if kinds:
            base = base + _slot_terms(kinds, T1.truncate(K), dc.Vh.expand(p, K), dc.Vv.expand(p, K))
        return base

    return DerivedMap(expand, n, (r,) * (T.rank + 1))


def h_covariant_derivative(A, T, dc, conn, point, gamma: int | None = None):
    out = np.asarray(h_covariant_derivative_map(A, T, dc, conn).at(point))
    return out if gamma is None else out[..., gamma]


def v_covariant_derivative(A, T, dc, point, c: int | None = None):
    out = np.asarray(v_covariant_derivative_map(A, T, dc).at(point))
    return out if c is None else out[..., c]


def tensor_product(T1: DTensorField, T2: DTensorField) -> DTensorField:
    """T1 (x) T2 with slots regrouped by kind."""
    k1, k2 = T1.rank, T2.rank
    letters = _letters(k1 + k2)
    a, b = letters[:k1], letters[k1:]
    groups = []
    off1 = off2 = 0
    for g in range(4):
        n1, n2 = T1.signature[g], T2.signature[g]
        groups.append(a[off1 : off1 + n1] + b[off2 : off2 + n2])
        off1 += n1
        off2 += n2
    out = "".join(groups)
    sig = tuple(x + y for x, y in zip(T1.signature, T2.signature))
    f1, f2 = T1.coef, T2.coef
    shape = tuple(f1.shape) + tuple(f2.shape)
    fn = FuncMap(lambda u: J.einsum(f"{a},{b}->{out}", f1(u), f2(u)), f1.arity_in, shape)
    return DTensorField(sig, fn)


def regroup_derivative(T1: DTensorField, T2: DTensorField, arr):
    """Reorder an outer product ``arr[slots of T1, slots of T2, ...]`` into the
    grouped slot order used by ``tensor_product``."""
    k1, k2 = T1.rank, T2.rank
    order = []
    off1, off2 = 0, k1
    for g in range(4):
        n1, n2 = T1.signature[g], T2.signature[g]
        order += list(range(off1, off1 + n1)) + list(range(off2, off2 + n2))
        off1 += n1
        off2 += n2
    extra = list(range(k1 + k2, np.ndim(arr)))
    return np.transpose(arr, order + extra)


def normality_residual(dc: DistinguishedConnection, plan: SamplePlan, m: int, r: int) -> float:
    """max of |Hh - Hv| and |Vh - Vv|; zero for a normal d-connection."""
    worst = 0.0
    for p in plan.points(m, r):
        worst = max(worst,
                    float(np.max(np.abs(np.asarray(dc.Hh.at(p)) - np.asarray(dc.Hv.at(p))))),
                    float(np.max(np.abs(np.asarray(dc.Vh.at(p)) - np.asarray(dc.Vv.at(p))))))
    return worst
