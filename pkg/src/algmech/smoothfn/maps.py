"""Smooth maps R^n -> R^shape that evaluate on floats and on jets."""

from __future__ import annotations

import numpy as np

from . import jet as J
from .expr import compile_node, free_variables, parse_expression, to_source


class SmoothMap:
    """Base class.  Subclasses provide ``_eval_float`` and ``_eval_jet``.

    ``expand(point, order)`` is the Taylor expansion at ``point`` in the
    identity seeds, i.e. a jet over all ``arity_in`` coordinates.
    """

    arity_in: int
    shape: tuple
    tag: str | None = None

    def __call__(self, u):
        if isinstance(u, J.Jet):
            return self._eval_jet(u)
        return self._eval_float(np.asarray(u, dtype=float))

    def at(self, point):
        return self._eval_float(np.asarray(point, dtype=float))

    def expand(self, point, order: int) -> J.Jet:
        return self._eval_jet(J.Jet.variables(point, order))

    @property
    def arity_out(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1

    def _eval_float(self, u):
        raise NotImplementedError

    def _eval_jet(self, u):
        raise NotImplementedError


class ExprMap(SmoothMap):
    """Array of parsed expressions sharing one variable list."""

    def __init__(self, nodes, variables):
        shape = _nested_shape(nodes)
        flat = list(_flatten(nodes))
        arr = np.empty(len(flat), dtype=object)
        arr[:] = flat
        self.nodes = arr.reshape(shape)
        self.variables = list(variables)
        self.arity_in = len(self.variables)
        self.shape = shape
        self._fns = [compile_node(n) for n in flat]
        self._const = [not free_variables(n) for n in flat]
        self._const_vals: dict[int, float] = {}
        self.tag = None

    @classmethod
    def from_strings(cls, sources, m: int = 0, r: int = 0, variables=None):
        """Parse a (nested list of) source string(s)."""
        from .expr import default_variables

        if variables is None:
            variables = default_variables(m, r)
        return cls(_map_nested(lambda s: parse_expression(s, variables=variables), sources),
                   variables)

    def sources(self):
        return np.vectorize(to_source, otypes=[object])(self.nodes)

    def _const_value(self, k):
        if k not in self._const_vals:
            self._const_vals[k] = float(self._fns[k](()))
        return self._const_vals[k]

    def _eval_float(self, u):
        env = [float(v) for v in u]
        out = [self._const_value(k) if c else float(f(env))
               for k, (f, c) in enumerate(zip(self._fns, self._const))]
        if not self.shape:
            return out[0]
        return np.array(out).reshape(self.shape)

    def _eval_jet(self, u):
        env = [u[i] for i in range(u.shape[0])]
        out = []
        for k, (f, c) in enumerate(zip(self._fns, self._const)):
            out.append(self._const_value(k) if c else f(env))
        res = J.stack(out) if len(out) > 1 else J.as_jet(out[0], u.basis)
        if not isinstance(res, J.Jet):
            res = J.Jet.constant(res, u.basis)
        return res.reshape(self.shape)


def _nested_shape(nodes):
    if isinstance(nodes, np.ndarray):
        return nodes.shape
    if isinstance(nodes, (list, tuple)):
        if not nodes:
            return (0,)
        return (len(nodes),) + _nested_shape(nodes[0])
    return ()


def _map_nested(fn, nodes):
    if isinstance(nodes, np.ndarray):
        nodes = nodes.tolist()
    if isinstance(nodes, (list, tuple)):
        return [_map_nested(fn, n) for n in nodes]
    return fn(nodes)


def _flatten(nodes):
    if isinstance(nodes, np.ndarray):
        yield from nodes.reshape(-1).tolist()
    elif isinstance(nodes, (list, tuple)):
        for n in nodes:
            yield from _flatten(n)
    else:
        yield nodes


class FuncMap(SmoothMap):
    """Map given by a Python function written with jet-aware operations."""

    def __init__(self, fn, arity_in: int, shape=(), tag=None):
        self.fn = fn
        self.arity_in = arity_in
        self.shape = tuple(shape)
        self.tag = tag

    def _eval_float(self, u):
        out = self.fn(u)
        if isinstance(out, J.Jet):
            out = out.value
        return out if not self.shape else np.asarray(out, dtype=float).reshape(self.shape)

    def _eval_jet(self, u):
        out = self.fn(u)
        if not isinstance(out, J.Jet):
            out = J.Jet.constant(out, u.basis)
        return out.reshape(self.shape)


class ConstantMap(SmoothMap):
    def __init__(self, value, arity_in: int, tag=None):
        self.value = np.asarray(value, dtype=float)
        self.arity_in = arity_in
        self.shape = self.value.shape
        self.tag = tag

    def _eval_float(self, u):
        return float(self.value) if not self.shape else self.value.copy()

    def _eval_jet(self, u):
        return J.Jet.constant(self.value, u.basis)


class IdentityMap(SmoothMap):
    def __init__(self, n: int):
        self.arity_in = n
        self.shape = (n,)
        self.tag = "identity"

    def _eval_float(self, u):
        return u

    def _eval_jet(self, u):
        return u


class DerivedMap(SmoothMap):
    """Map defined by its Taylor expansion at a point.

    ``expand_fn(point, order)`` must return a jet over the identity seeds.
    Evaluation on a general jet input substitutes the input's nilpotent part
    into that Taylor polynomial.
    """

    def __init__(self, expand_fn, arity_in: int, shape=(), value_fn=None, tag=None):
        self.expand_fn = expand_fn
        self.value_fn = value_fn
        self.arity_in = arity_in
        self.shape = tuple(shape)
        self.tag = tag

    def expand(self, point, order):
        return self.expand_fn(np.asarray(point, dtype=float), order)

    def _eval_float(self, u):
        if self.value_fn is not None:
            return self.value_fn(u)
        return self.expand_fn(u, 0).value

    def _eval_jet(self, u):
        u0 = np.asarray(u.value, dtype=float)
        taylor = self.expand_fn(u0, u.order)
        return substitute(taylor, u - u0)


def substitute(taylor: J.Jet, delta: J.Jet) -> J.Jet:
    """Evaluate the Taylor polynomial ``taylor`` (identity seeds) at ``delta``.

    ``delta`` has shape (n,) and zero constant part; the result lives on
    ``delta``'s basis.
    """
    tb = taylor.basis
    basis = delta.basis
    order = min(tb.order, basis.order)
    tb_used = J.get_basis(tb.nvars, order)
    monos = [None] * tb_used.size
    monos[0] = J.Jet.constant(1.0, basis)
    out = J.Jet.constant(taylor.coef[..., 0], basis)
    for k in range(1, tb_used.size):
        alpha = list(tb_used.monomials[k])
        j = next(i for i, e in enumerate(alpha) if e)
        alpha[j] -= 1
        monos[k] = monos[tb_used.index[tuple(alpha)]] * delta[j]
        out = out + monos[k] * taylor.coef[..., k]
    return out


def compose(outer: SmoothMap, inner: SmoothMap) -> SmoothMap:
    return FuncMap(lambda u: outer(inner(u)), inner.arity_in, outer.shape)


def eval_jet(f: SmoothMap, point, seeds=None, order: int = 2) -> J.Jet:
    """Evaluate ``f`` at ``point`` with derivative seeds on the chosen inputs.

    ``seeds`` is a list of input indices or variable names (default: all).
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    if seeds is None:
        seeds = list(range(n))
    names = getattr(f, "variables", None)
    idx = [names.index(s) if isinstance(s, str) else int(s) for s in seeds]
    basis = J.get_basis(len(idx), order)
    coef = np.zeros((n, basis.size))
    coef[:, 0] = point
    if order >= 1:
        for k, s in enumerate(idx):
            coef[s, basis.var_index(k)] = 1.0
    return f(J.Jet(coef, basis))


def fd_oracle_check(f: SmoothMap, point, second: bool = True) -> float:
    """Largest relative gap between jet derivatives and central differences.

    First derivatives use h = 1e-6 (1 + |u_j|) on values; second derivatives
    use h = 1e-4 (1 + |u_j|), a coarser step that balances truncation
    against cancellation.  Relative means divided by max(1, |difference quotient|).
    """
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    jt = f.expand(point, 2 if second else 1)
    grad = np.asarray(jt.first).reshape(-1, n)
    worst = 0.0
    for j in range(n):
        h = 1e-6 * (1.0 + abs(point[j]))
        up, dn = point.copy(), point.copy()
        up[j] += h
        dn[j] -= h
        fd = (np.asarray(f.at(up)) - np.asarray(f.at(dn))).reshape(-1) / (2 * h)
        worst = max(worst, float(np.max(np.abs(grad[:, j] - fd) / np.maximum(1.0, np.abs(fd)))))
    if second:
        hess = np.asarray(jt.second).reshape(-1, n, n)
        f0 = np.asarray(f.at(point)).reshape(-1)
        for i in range(n):
            for j in range(n):
                hi = 1e-4 * (1.0 + abs(point[i]))
                hj = 1e-4 * (1.0 + abs(point[j]))
                if i == j:
                    up, dn = point.copy(), point.copy()
                    up[i] += hi
                    dn[i] -= hi
                    fd = (np.asarray(f.at(up)).reshape(-1) - 2 * f0
                          + np.asarray(f.at(dn)).reshape(-1)) / hi**2
                else:
                    vals = []
                    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                        q = point.copy()
                        q[i] += si * hi
                        q[j] += sj * hj
                        vals.append(np.asarray(f.at(q)).reshape(-1))
                    fd = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * hi * hj)
                worst = max(worst, float(np.max(np.abs(hess[:, i, j] - fd) / np.maximum(1.0, np.abs(fd)))))
    return worst
