"""Truncated multivariate Taylor jets.

A ``Jet`` of order K in n seed variables stores, for every monomial
``d^alpha`` with ``|alpha| <= K``, the Taylor coefficient ``f^(alpha) / alpha!``.
Order 1 jets are dual numbers, order 2 jets carry value, gradient and Hessian.
The coefficient axis is always the last one, so a jet can be array shaped
(a matrix of jets shares one basis and is stored as a single ndarray).
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import DomainError


class JetBasis:
    """Monomial bookkeeping for jets with ``nvars`` seeds truncated at ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 0 or order < 0:
            raise ValueError("nvars and order must be non-negative")
        self.nvars = nvars
        self.order = order
        monos = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monos.append(tuple(alpha))
        self.monomials = monos
        self.size = len(monos)
        self.index = {a: k for k, a in enumerate(monos)}
        self.degree = np.array([sum(a) for a in monos], dtype=int)
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in a) for a in monos], dtype=float
        )

        ti, tj, tk = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if self.degree[i] + self.degree[j] > order:
                    continue
                ti.append(i)
                tj.append(j)
                tk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        perm = np.argsort(np.array(tk), kind="stable")
        self.ti = np.array(ti, dtype=int)[perm]
        self.tj = np.array(tj, dtype=int)[perm]
        tk_sorted = np.array(tk, dtype=int)[perm]
        # every monomial k is hit at least by the pair (0, k)
        self.starts = np.searchsorted(tk_sorted, np.arange(self.size))

    def var_index(self, j: int) -> int:
        alpha = [0] * self.nvars
        alpha[j] = 1
        return self.index[tuple(alpha)]

    @property
    def lower(self) -> "JetBasis":
        return get_basis(self.nvars, self.order - 1)

    @lru_cache(maxsize=None)
    def derivative_table(self, j: int):
        """Source indices and factors mapping d/du_j of an order-K jet to order K-1."""
        low = self.lower
        src = np.empty(low.size, dtype=int)
        fac = np.empty(low.size, dtype=float)
        for k, beta in enumerate(low.monomials):
            up = list(beta)
            up[j] += 1
            src[k] = self.index[tuple(up)]
            fac[k] = up[j]
        return src, fac

    def __repr__(self):
        return f"JetBasis(nvars={self.nvars}, order={self.order})"


@lru_cache(maxsize=None)
def get_basis(nvars: int, order: int) -> JetBasis:
    return JetBasis(nvars, order)


def _common(a: "Jet", b: "Jet"):
    if a.basis is b.basis:
        return a.coef, b.coef, a.basis
    if a.basis.nvars != b.basis.nvars:
        raise ValueError(f"cannot mix jets over {a.basis} and {b.basis}")
    if a.basis.order < b.basis.order:
        return a.coef, b.coef[..., : a.basis.size], a.basis
    return a.coef[..., : b.basis.size], b.coef, b.basis


class Jet:
    """Array of truncated Taylor polynomials sharing one ``JetBasis``."""

    __slots__ = ("coef", "basis")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, coef, basis: JetBasis):
        coef = np.asarray(coef, dtype=float)
        if coef.shape[-1:] != (basis.size,):
            raise ValueError("coefficient axis does not match basis")
        self.coef = coef
        self.basis = basis

    # construction -----------------------------------------------------------
    @classmethod
    def constant(cls, value, basis: JetBasis) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros(value.shape + (basis.size,))
        coef[..., 0] = value
        return cls(coef, basis)

    @classmethod
    def variables(cls, point, order: int) -> "Jet":
        """Identity jet: seed j is the coordinate u_j around ``point``."""
        point = np.asarray(point, dtype=float)
        n = point.shape[0]
        basis = get_basis(n, order)
        coef = np.zeros((n, basis.size))
        coef[:, 0] = point
        if order >= 1:
            for j in range(n):
                coef[j, basis.var_index(j)] = 1.0
        return cls(coef, basis)

    # views ------------------------------------------------------------------
    @property
    def shape(self):
        return self.coef.shape[:-1]

    @property
    def ndim(self):
        return self.coef.ndim - 1

    @property
    def order(self):
        return self.basis.order

    @property
    def value(self):
        v = self.coef[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    @property
    def first(self):
        """Gradient with respect to the seeds, seeds on the last axis."""
        n = self.basis.nvars
        if self.order < 1:
            return np.zeros(self.shape + (n,))
        idx = [self.basis.var_index(j) for j in range(n)]
        return self.coef[..., idx].copy()

    @property
    def second(self):
        """Symmetric Hessian with respect to the seeds."""
        n = self.basis.nvars
        out = np.zeros(self.shape + (n, n))
        if self.order < 2:
            return out
        for i in range(n):
            for j in range(i, n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                c = self.coef[..., self.basis.index[tuple(alpha)]]
                if i == j:
                    out[..., i, i] = 2.0 * c
                else:
                    out[..., i, j] = c
                    out[..., j, i] = c
        return out

    def derivative(self, alpha) -> np.ndarray | float:
        alpha = tuple(alpha)
        k = self.basis.index[alpha]
        v = self.coef[..., k] * self.basis.factorial[k]
        return float(v) if v.ndim == 0 else v

    def d(self, j: int) -> "Jet":
        """Partial derivative along seed j, one order lower."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.basis.derivative_table(j)
        return Jet(self.coef[..., src] * fac, self.basis.lower)

    def grad(self, seeds) -> "Jet":
        """Stack of partial derivatives along ``seeds`` on a new last axis."""
        parts = [self.d(j).coef for j in seeds]
        low = self.basis.lower
        if not parts:
            if self.order == 0:
                raise ValueError("cannot differentiate an order-0 jet")
            return Jet(np.zeros(self.shape + (0, len(low.degree))), low)
        return Jet(np.stack(parts, axis=-2), low)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        b = get_basis(self.basis.nvars, order)
        return Jet(self.coef[..., : b.size], b)

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.coef[key + (slice(None),)], self.basis)

    def __len__(self):
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(np.transpose(self.coef, tuple(axes) + (self.ndim,)), self.basis)

    @property
    def T(self):
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Jet(self.coef.reshape(tuple(shape) + (self.basis.size,)), self.basis)

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        axis = _leading_axes(axis, self.ndim)
        return Jet(self.coef.sum(axis=axis), self.basis)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order}, value={self.value!r})"

    # arithmetic ---------------------------------------------------------------
    def __neg__(self):
        return Jet(-self.coef, self.basis)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b, basis = _common(self, other)
            return Jet(a + b, basis)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coef = np.array(np.broadcast_to(self.coef, shape + (self.basis.size,)))
        coef[..., 0] += other
        return Jet(coef, self.basis)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b, basis = _common(self, other)
            prod = a[..., basis.ti] * b[..., basis.tj]
            return Jet(np.add.reduceat(prod, basis.starts, axis=-1), basis)
        other = np.asarray(other, dtype=float)
        return Jet(self.coef * other[..., None], self.basis)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        other = np.asarray(other, dtype=float)
        if np.any(other == 0.0):
            raise DomainError("division by zero")
        return Jet(self.coef / other[..., None], self.basis)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        p = np.asarray(p, dtype=float)
        if p.ndim == 0:
            return power(self, float(p))
        return exp(log(self) * p)

    def __rpow__(self, base):
        base = np.asarray(base, dtype=float)
        if np.any(base <= 0.0):
            raise DomainError("non-positive base raised to a varying power")
        return exp(self * np.log(base))

    def reciprocal(self) -> "Jet":
        a = self.coef[..., 0]
        if np.any(a == 0.0):
            raise DomainError("division by zero")
        K = self.order
        coeffs = [(-1.0) ** k / a ** (k + 1) for k in range(K + 1)]
        return self._compose(coeffs)

    def _compose(self, coeffs) -> "Jet":
        """Evaluate sum_k coeffs[k] * (self - value)^k by Horner's rule."""
        basis = self.basis
        delta = self.coef.copy()
        delta[..., 0] = 0.0
        res = np.zeros(delta.shape)
        res[..., 0] = coeffs[-1]
        for ck in reversed(coeffs[:-1]):
            prod = res[..., basis.ti] * delta[..., basis.tj]
            res = np.add.reduceat(prod, basis.starts, axis=-1)
            res[..., 0] += ck
        return Jet(res, basis)


def _leading_axes(axis, ndim):
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a + ndim if a < 0 else a for a in axis)


# elementary functions ---------------------------------------------------------


def exp(u):
    if not isinstance(u, Jet):
        return _float_call(math.exp, np.exp, u)
    a = u.coef[..., 0]
    ea = np.exp(a)
    return u._compose([ea / math.factorial(k) for k in range(u.order + 1)])


def log(u):
    if not isinstance(u, Jet):
        arr = np.asarray(u, dtype=float)
        if np.any(arr <= 0.0):
            raise DomainError("log of a non-positive number")
        return _float_call(math.log, np.log, u)
    a = u.coef[..., 0]
    if np.any(a <= 0.0):
        raise DomainError("log of a non-positive number")
    coeffs = [np.log(a)] + [(-1.0) ** (k + 1) / (k * a**k) for k in range(1, u.order + 1)]
    return u._compose(coeffs)


def sin(u):
    if not isinstance(u, Jet):
        return _float_call(math.sin, np.sin, u)
    a = u.coef[..., 0]
    cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
    return u._compose([cyc[k % 4] / math.factorial(k) for k in range(u.order + 1)])


def cos(u):
    if not isinstance(u, Jet):
        return _float_call(math.cos, np.cos, u)
    a = u.coef[..., 0]
    cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
    return u._compose([cyc[k % 4] / math.factorial(k) for k in range(u.order + 1)])


def sqrt(u):
    if not isinstance(u, Jet):
        arr = np.asarray(u, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError("sqrt of a negative number")
        return _float_call(math.sqrt, np.sqrt, u)
    return power(u, 0.5)


def power(u, p: float):
    """u ** p for a constant real exponent."""
    if not isinstance(u, Jet):
        return float_power(u, p)
    a = u.coef[..., 0]
    K = u.order
    is_int = float(p).is_integer()
    if not is_int and np.any(a < 0.0):
        raise DomainError("negative base raised to a non-integer power")
    if is_int and p >= 0:
        n = int(p)
        if n <= 3:
            res = Jet.constant(np.ones(u.shape), u.basis)
            for _ in range(n):
                res = res * u
            return res
    coeffs = []
    binom = 1.0
    for k in range(K + 1):
        if k > 0:
            binom *= (p - (k - 1)) / k
        if binom == 0.0:
            coeffs.append(np.zeros_like(a))
            continue
        e = p - k
        if e < 0 and np.any(a == 0.0):
            raise DomainError("zero base raised to a negative power")
        coeffs.append(binom * a**e)
    return u._compose(coeffs)


def float_power(u, p):
    arr = np.asarray(u, dtype=float)
    parr = np.asarray(p, dtype=float)
    if np.any((arr < 0.0) & (parr != np.round(parr))):
        raise DomainError("negative base raised to a non-integer power")
    if np.any((arr == 0.0) & (parr < 0.0)):
        raise DomainError("zero base raised to a negative power")
    out = np.power(arr, parr)
    return float(out) if np.ndim(out) == 0 else out


def _float_call(scalar_fn, array_fn, u):
    if np.ndim(u) == 0:
        return scalar_fn(float(u))
    return array_fn(np.asarray(u, dtype=float))


# array helpers ---------------------------------------------------------------


def find_basis(items):
    for it in items:
        if isinstance(it, Jet):
            return it.basis
    return None


def as_jet(x, basis: JetBasis) -> Jet:
    if isinstance(x, Jet):
        if x.basis is basis:
            return x
        return x.truncate(basis.order) if x.order > basis.order else x
    return Jet.constant(x, basis)


def _align(items):
    jets = [it for it in items if isinstance(it, Jet)]
    if not jets:
        return None, items
    order = min(j.order for j in jets)
    basis = get_basis(jets[0].basis.nvars, order)
    out = []
    for it in items:
        if isinstance(it, Jet):
            out.append(it if it.order == order else it.truncate(order))
        else:
            out.append(Jet.constant(it, basis))
    return basis, out


def stack(items, axis: int = 0):
    """np.stack for a mixture of floats, arrays and jets."""
    items = list(items)
    basis, aligned = _align(items)
    if basis is None:
        return np.stack([np.asarray(i, dtype=float) for i in items], axis=axis)
    ndim = aligned[0].ndim
    if axis < 0:
        axis += ndim + 1
    return Jet(np.stack([j.coef for j in aligned], axis=axis), basis)


def array(nested):
    """Build a jet (or float) array from a nested list of scalars."""
    if isinstance(nested, (list, tuple)):
        return stack([array(n) for n in nested])
    return nested


def einsum(subscripts: str, *operands):
    """np.einsum that accepts jets; products are truncated Taylor products."""
    if not any(isinstance(op, Jet) for op in operands):
        return np.einsum(subscripts, *[np.asarray(o, dtype=float) for o in operands])
    steps, single = _plan(subscripts, len(operands))
    acc = operands[0]
    for k, (sa, sb, inter) in enumerate(steps, start=1):
        acc = _einsum2(sa, sb, inter, acc, operands[k])
    if single is not None:
        acc = _einsum1(single[0], single[1], acc)
    return acc


@lru_cache(maxsize=None)
def _plan(subscripts: str, nops: int):
    """Pairwise contraction order for ``einsum``, cached per subscript string."""
    lhs, out = subscripts.replace(" ", "").split("->")
    specs = lhs.split(",")
    if len(specs) != nops:
        raise ValueError("operand count does not match subscripts")
    toks = [_tokens(sp) for sp in specs]
    out_toks = _tokens(out)
    acc_toks = toks[0]
    steps = []
    for k in range(1, nops):
        rest = [t for tk in toks[k + 1 :] for t in tk] + out_toks
        keep = []
        for t in acc_toks + toks[k]:
            if t in rest and t not in keep:
                keep.append(t)
        inter = keep if k < nops - 1 else out_toks
        steps.append(("".join(acc_toks), "".join(toks[k]), "".join(inter)))
        acc_toks = inter
    return tuple(steps), ((specs[0], out) if nops == 1 else None)


def _tokens(spec):
    """Split an einsum spec into index letters, keeping '...' as one token."""
    out, i = [], 0
    while i < len(spec):
        if spec.startswith("...", i):
            out.append("...")
            i += 3
        else:
            out.append(spec[i])
            i += 1
    return out


def _einsum1(spec, out, a):
    if isinstance(a, Jet):
        return Jet(np.einsum(f"{spec}Z->{out}Z", a.coef), a.basis)
    return np.einsum(f"{spec}->{out}", a)


def _einsum2(sa, sb, out, a, b):
    ja, jb = isinstance(a, Jet), isinstance(b, Jet)
    if ja and jb:
        ca, cb, basis = _common(a, b)
        prod = np.einsum(f"{sa}Z,{sb}Z->{out}Z", ca[..., basis.ti], cb[..., basis.tj])
        return Jet(np.add.reduceat(prod, basis.starts, axis=-1), basis)
    if ja:
        return Jet(np.einsum(f"{sa}Z,{sb}->{out}Z", a.coef, np.asarray(b, float)), a.basis)
    if jb:
        return Jet(np.einsum(f"{sa},{sb}Z->{out}Z", np.asarray(a, float), b.coef), b.basis)
    return np.einsum(f"{sa},{sb}->{out}", np.asarray(a, float), np.asarray(b, float))


def value_of(x):
    """Strip derivative information."""
    if isinstance(x, Jet):
        return x.value
    return x


def matinv(a):
    """Inverse of a square matrix of jets (or floats).

    The constant part is inverted with pivoted elimination, higher orders by
    the Neumann series (I + A0^-1 D)^-1 A0^-1, exact because D is nilpotent.
    """
    from .linalg import inverse

    if not isinstance(a, Jet):
        return inverse(np.asarray(a, dtype=float))
    a0inv = inverse(a.coef[..., 0])
    delta = Jet(a.coef.copy(), a.basis)
    delta.coef[..., 0] = 0.0
    step = -einsum("ij,jk->ik", a0inv, delta)  # -A0^-1 D
    term = Jet.constant(a0inv, a.basis)
    total = term
    for _ in range(a.order):
        term = einsum("ij,jk->ik", step, term)
        total = total + term
    return total
