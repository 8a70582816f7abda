"""ODE synthesis for semisprays, sprays and parallel transport, with fixed-step RK4."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebroid import GeneralizedLieAlgebroid, GHMorphism
from .mechanics import MechanicalSystem, SemisprayField, SingularHessian, canonical_spray
from .prolongation import RhoEtaConnection
from .smoothfn import SmoothMap


class NonFiniteState(ArithmeticError):
    def __init__(self, time, trajectory=None):
        self.time = float(time)
        self.trajectory = trajectory
        super().__init__(f"non-finite state at t={self.time!r}")


@dataclass
class OdeField:
    m: int
    r: int
    rhs: Callable[[float, np.ndarray], np.ndarray]

    @property
    def dim(self) -> int:
        return self.m + self.r

    def __call__(self, t, state):
        return self.rhs(t, state)


@dataclass
class Trajectory:
    m: int
    times: np.ndarray
    states: np.ndarray
    monitors: dict = field(default_factory=dict)
    aborted: str | None = None

    @property
    def x(self) -> np.ndarray:
        return self.states[:, : self.m]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, self.m :]

    def state_at(self, t, rtol=1e-9):
        """Stored state at time ``t`` (must lie on the grid)."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > rtol * max(1.0, abs(t)):
            raise KeyError(f"t={t} is not on the trajectory grid")
        return self.states[k]


def base_velocity(A: GeneralizedLieAlgebroid, gh: GHMorphism, x, y) -> np.ndarray:
    """rho(eta(h(x))) g(h(x)) y."""
    hx = np.asarray(A.h.at(x), dtype=float)
    rho = np.asarray(A.rho.at(A.eta.at(hx)), dtype=float)
    return rho @ (np.asarray(gh.g.at(hx), dtype=float) @ y)


def synthesize_semispray_ode(sys: MechanicalSystem, S: SemisprayField) -> OdeField:
    A, gh = sys.algebroid, sys.gh
    m = A.m

    def rhs(t, u):
        return np.concatenate([base_velocity(A, gh, u[:m], u[m:]), np.asarray(S.Avert.at(u), dtype=float)])

    return OdeField(A.m, A.r, rhs)


def synthesize_spray_ode(sys: MechanicalSystem, conn: RhoEtaConnection) -> OdeField:
    return synthesize_semispray_ode(sys, canonical_spray(conn, sys.gh, sys.algebroid))


def _step_times(t0, t1, dt):
    if dt == 0 or (t1 - t0) * dt < 0:
        raise ValueError("dt must be non-zero and point from t0 towards t1")
    span = (t1 - t0) / dt
    n_full = int(math.floor(span + 1e-9))
    times = [t0 + k * dt for k in range(n_full + 1)]
    if abs(t1 - times[-1]) > 1e-9 * abs(dt):
        times.append(t1)
    else:
        times[-1] = t1 if n_full else t0
    return times


def rk4_step(f, t, u, h):
    k1 = f(t, u)
    k2 = f(t + 0.5 * h, u + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, u + 0.5 * h * k2)
    k4 = f(t + h, u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rk4(f: OdeField, x0, y0, t0: float, t1: float, dt: float,
                  monitors: dict | None = None) -> Trajectory:
    """Fixed-step RK4 from t0 to t1; the last step is shortened to land on t1.

    Raises NonFiniteState or SingularHessian with ``trajectory`` holding the
    accepted steps so far.
    """
    u = np.concatenate([np.asarray(x0, dtype=float).ravel(), np.asarray(y0, dtype=float).ravel()])
    if u.size != f.dim:
        raise ValueError(f"initial state has {u.size} entries, expected {f.dim}")
    monitors = dict(monitors or {})
    times = [t0] if t1 == t0 else _step_times(t0, t1, dt)
    states = [u]
    chans = {name: [float(fn.at(u))] for name, fn in monitors.items()}

    def partial(reason=None):
        traj = Trajectory(f.m, np.array(times[: len(states)]), np.array(states),
                          {k: np.array(v) for k, v in chans.items()}, reason)
        return traj

    for k in range(1, len(times)):
        t = times[k - 1]
        try:
            u = rk4_step(f, t, u, times[k] - t)
        except SingularHessian as exc:
            exc.trajectory = partial(str(exc))
            raise
        if not np.all(np.isfinite(u)):
            raise NonFiniteState(times[k], partial(f"non-finite state at t={times[k]!r}"))
        states.append(u)
        for name, fn in monitors.items():
            chans[name].append(float(fn.at(u)))
    return partial()


def attach_monitor(traj: Trajectory, name: str, expr: SmoothMap) -> np.ndarray:
    """Evaluate ``expr`` at every stored state and store it as a channel."""
    chan = np.array([float(expr.at(u)) for u in traj.states])
    traj.monitors[name] = chan
    return chan


def relative_drift(chan) -> float:
    chan = np.asarray(chan, dtype=float)
    return float(np.max(np.abs(chan - chan[0])) / max(abs(chan[0]), 1e-300))


def parallel_transport(conn: RhoEtaConnection, gh: GHMorphism, A: GeneralizedLieAlgebroid,
                       base_curve: Callable[[float], np.ndarray], y0, t0: float, t1: float,
                       dt: float) -> Trajectory:
    """du^a/dt = -Gamma^a_alpha(c(t), u) g^alpha_b(h(c(t))) u^b along the base curve c.

    ``base_curve`` maps a time to a base point; it is only called at the RK4
    stage times t, t + dt/2 and t + dt.
    """
    m = A.m
    # integrate the fibre part only; the base part is read from the curve
    times = [t0] if t1 == t0 else _step_times(t0, t1, dt)
    u = np.asarray(y0, dtype=float).ravel()
    states = [np.concatenate([np.asarray(base_curve(t0), dtype=float), u])]

    def fib(t, v):
        x = np.asarray(base_curve(t), dtype=float)
        G = np.asarray(conn.gamma.at(np.concatenate([x, v])), dtype=float)
        return -G @ (np.asarray(gh.g.at(A.h.at(x)), dtype=float) @ v)

    for k in range(1, len(times)):
        u = rk4_step(fib, times[k - 1], u, times[k] - times[k - 1])
        if not np.all(np.isfinite(u)):
            partial = Trajectory(m, np.array(times[:k]), np.array(states))
            raise NonFiniteState(times[k], partial)
        states.append(np.concatenate([np.asarray(base_curve(times[k]), dtype=float), u]))
    return Trajectory(m, np.array(times), np.array(states))


def dense_base_curve(sys: MechanicalSystem, S: SemisprayField, x0, y0, t0, t1, dt):
    """Integrate the semispray at step dt/2 and return (trajectory, curve) where
    ``curve(t)`` looks up the base point on that half-step grid."""
    traj = integrate_rk4(synthesize_semispray_ode(sys, S), x0, y0, t0, t1, dt / 2.0)

    def curve(t):
        return traj.state_at(t)[: sys.algebroid.m]

    return traj, curve


def check_lift_condition(sys: MechanicalSystem, traj: Trajectory) -> float:
    """max over the grid of |rho(eta(h(c))) g(h(c)) y - d(eta(h(c)))/dt|,
    with the time derivative from second-order differences on the stored grid."""
    A, gh = sys.algebroid, sys.gh
    if len(traj.times) < 3:
        return 0.0
    base = np.array([np.asarray(A.eta.at(A.h.at(x)), dtype=float) for x in traj.x])
    deriv = np.gradient(base, traj.times, axis=0, edge_order=2)
    worst = 0.0
    for k, u in enumerate(traj.states):
        x, y = u[: A.m], u[A.m :]
        hx = np.asarray(A.h.at(x), dtype=float)
        lhs = np.asarray(A.rho.at(A.eta.at(hx)), dtype=float) @ (np.asarray(gh.g.at(hx), dtype=float) @ y)
        worst = max(worst, float(np.max(np.abs(lhs - deriv[k]))) if lhs.size else 0.0)
    return worst
