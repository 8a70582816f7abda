"""JSON system specifications: schema checks and construction of MechanicalSystem.

Schema (all keys optional unless noted)::

    {
      "name": str,
      "builtin": catalog id, "params": [...],      # alternative to the fields below
      "m": int, "r": int,                          # required without "builtin"
      "rho": "identity" | "zero" | m x r expressions in x,
      "structure": "abelian" | "so3" | r x r x r expressions in x
                   | [{"c": 1, "a": 1, "b": 2, "expr": "..."}],   # 1-based, antisymmetrized
      "h", "eta": "identity" | m expressions in x,
      "g": "identity" | r x r expressions in x,
      "payload": {"lagrangian": expr} | {"finsler": expr} | {"connection": r x r exprs},
      "external_force": "zero" | r expressions in (x, y),
      "initial": {"x": [...], "y": [...]},
      "integrate": {"method": "rk4", "dt": float, "t_end": float, "t0": float},
      "monitors": [{"name": str, "expr": expr}],
      "sample_plan": {"seed": int, "count": int, "box": [[lo, hi], ...]}
    }
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .algebroid import (
    GeneralizedLieAlgebroid,
    GHMorphism,
    SamplePlan,
    check_anchor_compatibility,
    check_antisymmetry,
    check_jacobi,
)
from .mechanics import ExternalForce, FinslerFunction, Lagrangian, MechanicalSystem
from .prolongation import RhoEtaConnection
from .smoothfn import ConstantMap, ExprMap, FuncMap, IdentityMap, ParseError, SmoothMap
from .smoothfn import jet as J

AXIOM_TOL = 1e-8

TOP_KEYS = {"name", "builtin", "params", "m", "r", "rho", "structure", "h", "eta", "g",
            "payload", "external_force", "initial", "integrate", "monitors", "sample_plan"}


class SpecError(ValueError):
    pass


class SchemaError(SpecError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DimensionError(SchemaError):
    pass


class SpecWarning(UserWarning):
    pass


@dataclass
class LoadedSpec:
    system: MechanicalSystem
    x0: np.ndarray | None
    y0: np.ndarray | None
    t0: float = 0.0
    t_end: float | None = None
    dt: float | None = None
    monitors: dict = field(default_factory=dict)
    plan: SamplePlan = field(default_factory=SamplePlan)
    raw: dict = field(default_factory=dict)
    issues: list = field(default_factory=list)


# helpers ------------------------------------------------------------------------


def _shape_of(value, path):
    if isinstance(value, list):
        if not value:
            return (0,)
        inner = [_shape_of(v, f"{path}[{k}]") for k, v in enumerate(value)]
        if any(s != inner[0] for s in inner):
            raise DimensionError(path, "ragged array")
        return (len(value),) + inner[0]
    if isinstance(value, (str, int, float)) and not isinstance(value, bool):
        return ()
    raise SchemaError(path, f"expected an expression or array, got {type(value).__name__}")


def _as_source(value):
    if isinstance(value, list):
        return [_as_source(v) for v in value]
    return value if isinstance(value, str) else repr(float(value))


def _expr_array(value, shape, path, m, r, y_allowed=False) -> SmoothMap:
    got = _shape_of(value, path)
    if got != tuple(shape):
        raise DimensionError(path, f"expected shape {tuple(shape)}, got {got}")
    try:
        return ExprMap.from_strings(_as_source(value), m, r if y_allowed else 0)
    except ParseError as exc:  # keep the type and offset, prefix the JSON path
        exc.path = path
        exc.args = (f"{path}: {exc}",)
        raise


def _expr_scalar(value, path, m, r):
    if not isinstance(value, (str, int, float)) or isinstance(value, bool):
        raise SchemaError(path, "expected an expression string")
    return _expr_array(value, (), path, m, r, y_allowed=True)


def _int(d, key, path):
    v = d.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise SchemaError(f"{path}{key}", "expected a non-negative integer")
    return v


def _float_vector(value, n, path):
    if not isinstance(value, list) or any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in value):
        raise SchemaError(path, "expected a list of numbers")
    if len(value) != n:
        raise DimensionError(path, f"expected {n} entries, got {len(value)}")
    return np.array(value, dtype=float)


def so3_structure() -> np.ndarray:
    """L^c_{ab} = eps_{abc}."""
    eps = np.zeros((3, 3, 3))
    for a, b, c in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        eps[c, a, b] = 1.0
        eps[c, b, a] = -1.0
    return eps


def _structure(value, m, r, path):
    if value in (None, "abelian"):
        return ConstantMap(np.zeros((r, r, r)), m)
    if value == "so3":
        if r != 3:
            raise DimensionError(path, "so3 structure needs r = 3")
        return ConstantMap(so3_structure(), m)
    if isinstance(value, list) and value and isinstance(value[0], dict):
        src = [[["0"] * r for _ in range(r)] for _ in range(r)]
        for k, ent in enumerate(value):
            ep = f"{path}[{k}]"
            if set(ent) - {"c", "a", "b", "expr"} or not {"c", "a", "b", "expr"} <= set(ent):
                raise SchemaError(ep, "sparse entries need exactly c, a, b, expr")
            c, a, b = (ent[key] for key in ("c", "a", "b"))
            for key, idx in (("c", c), ("a", a), ("b", b)):
                if not isinstance(idx, int) or not 1 <= idx <= r:
                    raise DimensionError(f"{ep}.{key}", f"index must be in 1..{r}")
            if a == b:
                raise SchemaError(ep, "a == b contradicts antisymmetry")
            e = _as_source(ent["expr"])
            src[c - 1][a - 1][b - 1] = e
            src[c - 1][b - 1][a - 1] = f"-({e})"
        return _expr_array(src, (r, r, r), path, m, r)
    if isinstance(value, str):
        raise SchemaError(path, f"unknown structure keyword {value!r}")
    return _expr_array(value, (r, r, r), path, m, r)


def _gh(value, m, r, path) -> GHMorphism:
    if value in (None, "identity"):
        return GHMorphism.identity(m, r)
    g = _expr_array(value, (r, r), path, m, r)
    gt = FuncMap(lambda x: J.matinv(g(x)) if isinstance(x, J.Jet) else np.linalg.inv(g(x)), m, (r, r))
    return GHMorphism(g, gt, tag="explicit")


def _diffeo(value, m, path):
    if value in (None, "identity"):
        return IdentityMap(m)
    return _expr_array(value, (m,), path, m, 0)


# loader -------------------------------------------------------------------------


def build_system(d: dict, strict: bool = False, run_checks: bool = True) -> LoadedSpec:
    """Construct a LoadedSpec from an already-parsed JSON object."""
    if not isinstance(d, dict):
        raise SchemaError("", "top level must be an object")
    issues = []
    unknown = sorted(set(d) - TOP_KEYS)
    for k in unknown:
        if strict:
            raise SchemaError(k, "unknown field")
        issues.append(f"unknown field {k!r} ignored")
        warnings.warn(issues[-1], SpecWarning, stacklevel=2)
    if "builtin" in d:
        from .catalog import builtin_spec

        base = builtin_spec(d["builtin"], d.get("params", []))
        merged = {**base, **{k: v for k, v in d.items() if k in TOP_KEYS - {"builtin", "params"}}}
        out = build_system(merged, strict=strict, run_checks=run_checks)
        out.raw = d
        out.issues = issues + out.issues
        return out

    m = _int(d, "m", "")
    r = _int(d, "r", "")
    if m + r == 0:
        raise DimensionError("m", "m + r must be positive")
    rho_v = d.get("rho", "identity")
    if rho_v == "identity":
        if m != r:
            raise DimensionError("rho", "identity anchor needs m == r")
        rho = ConstantMap(np.eye(m), m, tag="identity")
    elif rho_v == "zero":
        rho = ConstantMap(np.zeros((m, r)), m, tag="zero")
    else:
        rho = _expr_array(rho_v, (m, r), "rho", m, r)
    L = _structure(d.get("structure"), m, r, "structure")
    h = _diffeo(d.get("h"), m, "h")
    eta = _diffeo(d.get("eta"), m, "eta")
    A = GeneralizedLieAlgebroid(m, r, rho, L, h, eta, name=d.get("name", ""))
    gh = _gh(d.get("g"), m, r, "g")

    payload = None
    pv = d.get("payload")
    if pv is not None:
        if not isinstance(pv, dict) or len(pv) != 1:
            raise SchemaError("payload", "expected exactly one of lagrangian, finsler, connection")
        (kind, val), = pv.items()
        if kind == "lagrangian":
            payload = Lagrangian(_expr_scalar(val, "payload.lagrangian", m, r))
        elif kind == "finsler":
            payload = FinslerFunction(_expr_scalar(val, "payload.finsler", m, r))
        elif kind == "connection":
            payload = RhoEtaConnection(_expr_array(val, (r, r), "payload.connection", m, r, y_allowed=True))
        else:
            raise SchemaError(f"payload.{kind}", "unknown payload kind")

    fv = d.get("external_force", "zero")
    fe = ExternalForce(None if fv == "zero" else _expr_array(fv, (r,), "external_force", m, r, y_allowed=True))
    system = MechanicalSystem(A, gh, payload, fe, name=d.get("name", ""), meta={})

    x0 = y0 = None
    init = d.get("initial")
    if init is not None:
        if not isinstance(init, dict) or set(init) - {"x", "y"}:
            raise SchemaError("initial", "expected {x: [...], y: [...]}")
        x0 = _float_vector(init.get("x", [0.0] * m), m, "initial.x")
        y0 = _float_vector(init.get("y", [0.0] * r), r, "initial.y")

    t0 = 0.0
    t_end = dt = None
    integ = d.get("integrate")
    if integ is not None:
        if not isinstance(integ, dict):
            raise SchemaError("integrate", "expected an object")
        extra = set(integ) - {"method", "dt", "t_end", "t0"}
        if extra:
            raise SchemaError(f"integrate.{sorted(extra)[0]}", "unknown field")
        if integ.get("method", "rk4") != "rk4":
            raise SchemaError("integrate.method", "only rk4 is supported")
        try:
            dt = float(integ["dt"])
            t_end = float(integ["t_end"])
            t0 = float(integ.get("t0", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError("integrate", f"dt and t_end must be numbers ({exc})") from None
        if not dt > 0:
            raise SchemaError("integrate.dt", "must be positive")
        if t_end < t0:
            raise SchemaError("integrate.t_end", "must not precede t0")

    monitors = {}
    for k, mon in enumerate(d.get("monitors", [])):
        mp = f"monitors[{k}]"
        if not isinstance(mon, dict) or set(mon) != {"name", "expr"}:
            raise SchemaError(mp, "expected {name, expr}")
        name = mon["name"]
        if not isinstance(name, str) or not name or "," in name or name in monitors:
            raise SchemaError(f"{mp}.name", "names must be unique, non-empty and comma-free")
        monitors[name] = _expr_scalar(mon["expr"], f"{mp}.expr", m, r)

    sp = d.get("sample_plan", {})
    if not isinstance(sp, dict) or set(sp) - {"seed", "count", "box"}:
        raise SchemaError("sample_plan", "expected {seed, count, box}")
    box = sp.get("box")
    if box is not None:
        if not isinstance(box, list) or len(box) != m + r:
            raise DimensionError("sample_plan.box", f"expected {m + r} intervals")
        box = [tuple(float(v) for v in iv) for iv in box]
    plan = SamplePlan(seed=int(sp.get("seed", 0)), count=int(sp.get("count", 64)), box=box)

    out = LoadedSpec(system, x0, y0, t0, t_end, dt, monitors, plan, d, issues)
    if run_checks:
        axiom_issues(out, strict)
    return out


def axiom_issues(spec: LoadedSpec, strict: bool = False) -> list:
    """Run the algebroid axiom checks at a small plan; warn or raise."""
    A, gh = spec.system.algebroid, spec.system.gh
    plan = SamplePlan(seed=spec.plan.seed, count=8, box=spec.plan.box)
    found = []
    checks = [("antisymmetry", check_antisymmetry), ("jacobi", check_jacobi),
              ("anchor_compatibility", check_anchor_compatibility)]
    for name, fn in checks:
        res = fn(A, plan)
        if res > AXIOM_TOL:
            found.append(f"{name} residual {res:.3e}")
    try:
        gh.check_inverse([A.h.at(x) for x in plan.base_points(A.m, A.r)], tol=AXIOM_TOL)
    except (ValueError, np.linalg.LinAlgError) as exc:
        found.append(f"g inverse: {exc}")
    for msg in found:
        if strict:
            raise SpecError(f"axiom check failed: {msg}")
        warnings.warn(msg, SpecWarning, stacklevel=3)
    spec.issues.extend(found)
    return found


def load_spec(path, strict: bool = False, run_checks: bool = True) -> LoadedSpec:
    """Read a JSON spec file.  OSError propagates for unreadable files."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from None
    return build_system(d, strict=strict, run_checks=run_checks)
