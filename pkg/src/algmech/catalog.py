"""Built-in benchmark systems and chart transitions.

Every system is written as a spec dictionary and constructed through the
same loader as user files, so a JSON copy of an entry behaves identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mechanics import MechanicalSystem
from .prolongation import TransitionData
from .smoothfn import ConstantMap, ExprMap
from .specfile import build_system, so3_structure


class UnknownId(KeyError):
    pass


class BadParams(ValueError):
    pass


@dataclass
class CatalogEntry:
    id: str
    system: MechanicalSystem
    spec: dict
    oracles: dict = field(default_factory=dict)
    default_initial: tuple = ()
    default_horizon: tuple = ()
    plan: object = None


BUILTIN_IDS = ("harmonic_oscillator", "free_particle", "rigid_body_so3", "poincare_half_plane",
               "sphere_geodesics", "shifted_h_toy")

LAGRANGE_IDS = ("harmonic_oscillator", "free_particle", "rigid_body_so3", "poincare_half_plane",
                "sphere_geodesics")


def _num(v) -> str:
    return repr(float(v))


def _params(pid, params, defaults):
    params = list(params or [])
    if len(params) > len(defaults):
        raise BadParams(f"{pid} takes at most {len(defaults)} parameters, got {len(params)}")
    out = params + list(defaults[len(params):])
    for v in out:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise BadParams(f"{pid}: parameters must be finite numbers, got {v!r}")
    return [float(v) for v in out]


def builtin_spec(pid: str, params=()) -> dict:
    """The spec dictionary of a catalog system."""
    if pid == "harmonic_oscillator":
        _params(pid, params, [])
        return {
            "name": pid, "m": 1, "r": 1, "rho": "identity", "structure": "abelian",
            "payload": {"lagrangian": "y1^2/2 - x1^2/2"},
            "initial": {"x": [1.0], "y": [0.0]},
            "integrate": {"method": "rk4", "dt": 1e-3, "t_end": 2 * math.pi},
            "monitors": [],
        }
    if pid == "free_particle":
        _params(pid, params, [])
        return {
            "name": pid, "m": 1, "r": 1, "rho": "identity", "structure": "abelian",
            "payload": {"lagrangian": "y1^2/2"},
            "initial": {"x": [0.0], "y": [1.0]},
            "integrate": {"method": "rk4", "dt": 1e-3, "t_end": 1.0},
        }
    if pid == "rigid_body_so3":
        inertia = _params(pid, params, [1.0, 2.0, 3.0])
        if min(inertia) <= 0:
            raise BadParams(f"{pid}: inertias must be positive, got {inertia}")
        i1, i2, i3 = (_num(v) for v in inertia)
        return {
            "name": pid, "m": 3, "r": 3, "rho": "zero", "structure": "so3",
            "payload": {"lagrangian": f"({i1}*y1^2 + {i2}*y2^2 + {i3}*y3^2)/2"},
            "initial": {"x": [0.0, 0.0, 0.0], "y": [1.0, 1.0, 1.0]},
            "integrate": {"method": "rk4", "dt": 1e-3, "t_end": 10.0},
            "monitors": [{"name": "casimir",
                          "expr": f"({i1}*y1)^2 + ({i2}*y2)^2 + ({i3}*y3)^2"}],
        }
    if pid == "poincare_half_plane":
        _params(pid, params, [])
        return {
            "name": pid, "m": 2, "r": 2, "rho": "identity", "structure": "abelian",
            "payload": {"lagrangian": "(y1^2 + y2^2)/(2*x2^2)"},
            "initial": {"x": [0.0, 1.0], "y": [1.0, 0.0]},
            "integrate": {"method": "rk4", "dt": 1e-4, "t_end": 1.0},
            "monitors": [{"name": "circle", "expr": "x1^2 + x2^2"}],
            "sample_plan": {"seed": 0, "count": 64,
                            "box": [[-2.0, 2.0], [0.5, 2.0], [-2.0, 2.0], [-2.0, 2.0]]},
        }
    if pid == "sphere_geodesics":
        (radius,) = _params(pid, params, [1.0])
        if radius <= 0:
            raise BadParams(f"{pid}: radius must be positive, got {radius}")
        rs = _num(radius)
        return {
            "name": pid, "m": 2, "r": 2, "rho": "identity", "structure": "abelian",
            "payload": {"lagrangian": f"{rs}^2*(y1^2 + sin(x1)^2*y2^2)/2"},
            "initial": {"x": [math.pi / 2, 0.0], "y": [0.0, 1.0]},
            "integrate": {"method": "rk4", "dt": 1e-3, "t_end": 1.0},
            "sample_plan": {"seed": 0, "count": 64,
                            "box": [[0.5, 2.6], [-2.0, 2.0], [-2.0, 2.0], [-2.0, 2.0]]},
        }
    if pid == "shifted_h_toy":
        (k,) = _params(pid, params, [0.5])
        ks = _num(k)
        return {
            "name": pid, "m": 1, "r": 1, "rho": "identity", "structure": "abelian",
            "h": [f"x1 + {ks}"], "eta": [f"x1 - {ks}"],
            "g": [["1 + 0.1*sin(x1)"]],
            "payload": {"connection": [["0.2*y1*cos(x1)"]]},
            "initial": {"x": [0.0], "y": [1.0]},
            "integrate": {"method": "rk4", "dt": 1e-3, "t_end": 1.0},
        }
    raise UnknownId(pid)


def _oracles(pid, spec) -> dict:
    if pid == "harmonic_oscillator":
        return {"x": lambda t, x0, y0: x0 * np.cos(t) + y0 * np.sin(t),
                "y": lambda t, x0, y0: -x0 * np.sin(t) + y0 * np.cos(t)}
    if pid == "free_particle":
        return {"x": lambda t, x0, y0: x0 + y0 * t, "y": lambda t, x0, y0: y0 + 0.0 * t}
    if pid == "rigid_body_so3":
        inertia = np.array([float(s) for s in spec["_inertia"]])
        return {"euler_rhs": euler_rhs(inertia)}
    if pid == "poincare_half_plane":
        # unit-speed geodesic from (0, 1) with velocity (1, 0)
        return {"x": lambda t: np.stack([np.tanh(t), 1.0 / np.cosh(t)], axis=-1)}
    if pid == "sphere_geodesics":
        return {"x": lambda t: np.stack([np.full_like(np.asarray(t, dtype=float), np.pi / 2),
                                         np.asarray(t, dtype=float)], axis=-1)}
    return {}


def euler_rhs(inertia) -> Callable[[np.ndarray], np.ndarray]:
    """Free rigid body in body angular velocity: I_1 w1' = (I_2 - I_3) w2 w3 and cyclic."""
    i1, i2, i3 = (float(v) for v in inertia)

    def f(w):
        return np.array([(i2 - i3) / i1 * w[1] * w[2],
                         (i3 - i1) / i2 * w[2] * w[0],
                         (i1 - i2) / i3 * w[0] * w[1]])

    return f


def build_builtin(pid: str, params=()) -> CatalogEntry:
    spec = builtin_spec(pid, params)
    loaded = build_system(spec, strict=True)
    ora_spec = dict(spec)
    if pid == "rigid_body_so3":
        ora_spec["_inertia"] = _params(pid, params, [1.0, 2.0, 3.0])
    return CatalogEntry(
        id=pid,
        system=loaded.system,
        spec=spec,
        oracles=_oracles(pid, ora_spec),
        default_initial=(loaded.x0, loaded.y0),
        default_horizon=(loaded.t_end, loaded.dt),
        plan=loaded.plan,
    )


# transitions ---------------------------------------------------------------------


def builtin_transition(tid: str, m: int, params=()) -> TransitionData:
    """identity, linear_scale(s) or rotation(theta) (m = 2) as a chart change
    with M = Lam = the Jacobian of phi (tangent-algebroid presentation)."""
    if tid == "identity":
        _params(tid, params, [])
        eye = [["1" if i == j else "0" for j in range(m)] for i in range(m)]
        phi = ExprMap.from_strings([f"x{i + 1}" for i in range(m)], m, 0)
        M = ExprMap.from_strings(eye, m, 0)
        return TransitionData(phi, M, ConstantMap(np.eye(m), m), tid)
    if tid == "linear_scale":
        (s,) = _params(tid, params, [2.0])
        if s == 0:
            raise BadParams("linear_scale needs s != 0")
        ss = _num(s)
        phi = ExprMap.from_strings([f"{ss}*x{i + 1}" for i in range(m)], m, 0)
        M = ExprMap.from_strings([[ss if i == j else "0" for j in range(m)] for i in range(m)], m, 0)
        return TransitionData(phi, M, ConstantMap(s * np.eye(m), m), f"linear_scale({s!r})")
    if tid == "rotation":
        if m != 2:
            raise BadParams("rotation is defined for m = 2")
        (th,) = _params(tid, params, [math.pi / 2])
        c, s = _num(math.cos(th)), _num(math.sin(th))
        phi = ExprMap.from_strings([f"{c}*x1 - {s}*x2", f"{s}*x1 + {c}*x2"], 2, 0)
        M = ExprMap.from_strings([[c, f"-{s}"], [s, c]], 2, 0)
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        return TransitionData(phi, M, ConstantMap(rot, 2), f"rotation({th!r})")
    raise UnknownId(tid)


def parse_call(text: str):
    """'rigid_body_so3(1,2,3)' -> ('rigid_body_so3', [1.0, 2.0, 3.0])."""
    text = text.strip()
    if "(" not in text:
        return text, []
    if not text.endswith(")"):
        raise BadParams(f"malformed call {text!r}")
    name, args = text[:-1].split("(", 1)
    try:
        vals = [float(a) for a in args.split(",") if a.strip()]
    except ValueError:
        raise BadParams(f"malformed arguments in {text!r}") from None
    return name.strip(), vals


__all__ = ["BUILTIN_IDS", "BadParams", "CatalogEntry", "LAGRANGE_IDS", "UnknownId", "build_builtin",
           "builtin_spec", "builtin_transition", "euler_rhs", "parse_call", "so3_structure"]
