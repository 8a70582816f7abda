"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line."""

import json
import math

import numpy as np
import pytest

from algmech.algebroid import SamplePlan, check_anchor_compatibility, check_antisymmetry, check_jacobi
from algmech.catalog import BUILTIN_IDS, LAGRANGE_IDS, builtin_spec, builtin_transition
from algmech.cli import main
from algmech.dynamics import integrate_rk4, relative_drift, rk4_step, synthesize_semispray_ode
from algmech.mechanics import (
    ExternalForce,
    SemisprayField,
    canonical_spray,
    energy_map,
    ring_connection,
    ring_curvature,
    spray_deviation,
    verify_cartan_equation,
)
from algmech.prolongation import apply_structure, curvature, liouville, transformation_residuals
from algmech.smoothfn import ExprMap, fd_oracle_check
from algmech.verify import bracket_suite, structure_identity_suite, transport_equivalence

from conftest import catalog

PLAN64 = SamplePlan(seed=0, count=64)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:>2}] {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


def simulate(pid, t1, dt, x0=None, y0=None, monitors=None):
    entry = catalog(pid)
    sysm = entry.system
    dx, dy = entry.default_initial
    f = synthesize_semispray_ode(sysm, sysm.semispray())
    return integrate_rk4(f, dx if x0 is None else x0, dy if y0 is None else y0, 0.0, t1, dt, monitors)


def plan_of(pid, count=64):
    entry = catalog(pid)
    return SamplePlan(seed=entry.plan.seed, count=count, box=entry.plan.box)


def test_01_oscillator_matches_cosine(report):
    sysm = catalog("harmonic_oscillator").system
    E = energy_map(sysm.lagrangian(), sysm.gh, sysm.algebroid)
    traj = simulate("harmonic_oscillator", 2 * math.pi, 1e-3, monitors={"E_L": E})
    err = float(np.max(np.abs(traj.x[:, 0] - np.cos(traj.times))))
    drift = relative_drift(traj.monitors["E_L"])
    ok = err <= 1e-6 and drift <= 1e-10
    report(1, ok, f"oscillator max|x - cos t| = {err:.3e} (tol 1e-6), energy drift = {drift:.3e} (tol 1e-10)")
    assert ok


def test_02_rigid_body_matches_euler_equations(report):
    entry = catalog("rigid_body_so3")
    sysm = entry.system
    inertia = np.array([1.0, 2.0, 3.0])
    mons = {"E_L": energy_map(sysm.lagrangian(), sysm.gh, sysm.algebroid),
            "casimir": ExprMap.from_strings("(1*y1)^2 + (2*y2)^2 + (3*y3)^2", 3, 3)}
    traj = simulate("rigid_body_so3", 10.0, 1e-3, monitors=mons)
    # independent integration of I w' = (I w) x w, written out by hand
    euler = entry.oracles["euler_rhs"]
    w = np.ones(3)
    ref = [w]
    for k in range(1, len(traj.times)):
        w = rk4_step(lambda t, v: euler(v), traj.times[k - 1], w, traj.times[k] - traj.times[k - 1])
        ref.append(w)
    gap = float(np.max(np.abs(traj.y - np.array(ref))))
    e_drift = relative_drift(traj.monitors["E_L"])
    c_drift = relative_drift(traj.monitors["casimir"])
    casimir0 = float(np.sum((inertia * np.ones(3)) ** 2))
    ok = gap <= 1e-9 and e_drift <= 1e-8 and c_drift <= 1e-8 and traj.monitors["casimir"][0] == casimir0
    report(2, ok, f"rigid body vs Euler RK4 = {gap:.3e} (tol 1e-9), energy drift = {e_drift:.3e}, "
                  f"Casimir drift = {c_drift:.3e} (tol 1e-8)")
    assert ok


def test_03_half_plane_geodesic_stays_on_the_unit_circle(report):
    traj = simulate("poincare_half_plane", 1.0, 1e-4)
    res = float(np.max(np.abs(np.sum(traj.x ** 2, axis=1) - 1.0)))
    ok = res <= 1e-6
    report(3, ok, f"half-plane max|x1^2 + x2^2 - 1| = {res:.3e} (tol 1e-6)")
    assert ok


def test_04_axiom_and_identity_suite_on_every_catalog_system(report):
    worst = {}
    for pid in BUILTIN_IDS:
        sysm = catalog(pid).system
        A, conn = sysm.algebroid, sysm.connection()
        plan = plan_of(pid)
        vals = {"antisymmetry": check_antisymmetry(A, plan), "jacobi": check_jacobi(A, plan),
                "anchor_compatibility": check_anchor_compatibility(A, plan)}
        vals.update(bracket_suite(A, conn, plan))
        vals.update(structure_identity_suite(A, conn, sysm.gh, plan))
        name = max(vals, key=vals.get)
        worst[pid] = (name, vals[name], len(vals))
    top = max(v[1] for v in worst.values())
    ok = top <= 1e-8
    detail = ", ".join(f"{pid} {v[1]:.1e} ({v[0]})" for pid, v in worst.items())
    report(4, ok, f"worst residual per system over {worst['harmonic_oscillator'][2]} checks: {detail} (tol 1e-8)")
    assert ok


def test_05_cartan_equation_on_lagrange_systems(report):
    worst = {}
    exact = True
    for pid in LAGRANGE_IDS:
        sysm = catalog(pid).system
        L, A, gh = sysm.lagrangian(), sysm.algebroid, sysm.gh
        S = sysm.semispray()
        worst[pid] = verify_cartan_equation(S, L, gh, A, plan_of(pid))
        JS = apply_structure("J", A, None, S.section(), gh)
        C = liouville(A)
        for p in plan_of(pid, 8).points(A.m, A.r):
            (jz, jy), (cz, cy) = JS.at(p), C.at(p)
            exact &= np.array_equal(jz, cz) and np.array_equal(jy, cy)
    top = max(worst.values())
    ok = top <= 1e-7 and exact
    detail = ", ".join(f"{pid} {v:.1e}" for pid, v in worst.items())
    report(5, ok, f"Cartan residuals {detail} (tol 1e-7); J(S) = C exact: {exact}")
    assert ok


def test_06_ring_curvature_formula_matches_direct_curvature(report):
    sysm = catalog("harmonic_oscillator").system
    A, conn, gh = sysm.algebroid, sysm.connection(), sysm.gh
    fe = ExternalForce(ExprMap.from_strings(["0.3*y1"], 1, 1))
    Rr = ring_curvature(A, conn, fe, gh)
    Rd = curvature(A, ring_connection(conn, fe, gh, A))
    gap = max(float(np.max(np.abs(np.asarray(Rr.at(p)) - np.asarray(Rd.at(p))))) for p in PLAN64.points(1, 1))
    ok = gap <= 1e-7
    report(6, ok, f"oscillator with F = 0.3 y: max|R_formula - R_direct| = {gap:.3e} (tol 1e-7)")
    assert ok


def test_07_parallel_transport_reproduces_the_semispray(report):
    # expected to fail on the oscillator; see the README
    res = {}
    for pid in ("harmonic_oscillator", "poincare_half_plane"):
        entry = catalog(pid)
        x0, y0 = entry.default_initial
        res[pid] = transport_equivalence(entry.system, x0, y0, 1.0, 1e-3)
    ok = max(res.values()) <= 1e-6
    report(7, ok, ", ".join(f"{pid} max|u - y| = {v:.3e}" for pid, v in res.items()) + " (tol 1e-6)")
    assert ok


def test_08_spray_deviation_and_mutant_kill(report):
    worst = 0.0
    for pid in BUILTIN_IDS:
        sysm = catalog(pid).system
        A = sysm.algebroid
        spray = canonical_spray(sysm.connection(), sysm.gh, A)
        worst = max(worst, max(float(np.max(np.abs(spray_deviation(spray, p))))
                               for p in plan_of(pid).points(A.m, A.r)))
    # a cubic term is not 2-homogeneous
    sysm = catalog("poincare_half_plane").system
    A = sysm.algebroid
    spray = canonical_spray(sysm.connection(), sysm.gh, A)
    cubic = ExprMap.from_strings(["y1^3", "y1*y2^2"], 2, 2)
    av = spray.Avert
    mutant = SemisprayField(type(av)(lambda p, K: av.expand(p, K) + cubic.expand(p, K), A.n, (A.r,)), A, sysm.gh)
    kill = max(float(np.max(np.abs(spray_deviation(mutant, p)))) for p in plan_of("poincare_half_plane").points(2, 2))
    ok = worst <= 1e-8 and kill >= 1e-2
    report(8, ok, f"max spray deviation over catalog = {worst:.3e} (tol 1e-8), mutant deviation = {kill:.3e} (>= 1e-2)")
    assert ok


def test_09_transformation_laws_under_linear_scale(report):
    tr = builtin_transition("linear_scale", 2, [2.0])
    sysm = catalog("poincare_half_plane").system
    A = sysm.algebroid
    res = transformation_residuals(A, tr, plan_of("poincare_half_plane"), conn=sysm.connection(), gh=sysm.gh)
    osc = catalog("harmonic_oscillator").system
    S = osc.semispray()
    res1 = transformation_residuals(osc.algebroid, builtin_transition("linear_scale", 1, [2.0]), PLAN64,
                                    conn=osc.connection(), semispray_g=S.G(), gh=osc.gh)
    laws = max(res["rho_law"], res["gamma_law"], res1["rho_law"], res1["gamma_law"])
    ok = laws <= 1e-9 and res1["semispray_law"] <= 1e-8
    report(9, ok, f"rho/Gamma laws = {laws:.3e} (tol 1e-9), oscillator semispray law = "
                  f"{res1['semispray_law']:.3e} (tol 1e-8)")
    assert ok


def _spec_expressions(spec):
    m, r = spec["m"], spec["r"]
    out = []
    for kind, src in spec.get("payload", {}).items():
        out.append((kind, src))
    for key in ("h", "eta", "g"):
        if isinstance(spec.get(key), list):
            out.append((key, spec[key]))
    for mon in spec.get("monitors", []):
        out.append((mon["name"], mon["expr"]))
    return [(name, ExprMap.from_strings(src, m, r)) for name, src in out]


def test_10_derivatives_agree_with_finite_differences_and_rk4_order(report):
    worst, count = 0.0, 0
    for pid in BUILTIN_IDS:
        spec = builtin_spec(pid)
        pts = plan_of(pid, 8).points(spec["m"], spec["r"])
        for _, f in _spec_expressions(spec):
            count += 1
            worst = max(worst, max(fd_oracle_check(f, p) for p in pts))
    sysm = catalog("harmonic_oscillator").system
    f = synthesize_semispray_ode(sysm, sysm.semispray())
    errs = []
    for n in (32, 64):
        traj = integrate_rk4(f, [1.0], [0.0], 0.0, 2 * math.pi, 2 * math.pi / n)
        errs.append(float(np.max(np.abs(traj.x[:, 0] - np.cos(traj.times)))))
    ratio = errs[0] / errs[1]
    ok = worst <= 1e-5 and 12 <= ratio <= 20
    report(10, ok, f"fd oracle over {count} expressions = {worst:.3e} (tol 1e-5), RK4 halving ratio = "
                   f"{ratio:.2f} (in [12, 20])")
    assert ok


def test_11_outputs_are_byte_identical(report, tmp_path):
    cfg = tmp_path / "osc.json"
    cfg.write_text(json.dumps({"builtin": "harmonic_oscillator", "integrate": {"dt": 1e-3, "t_end": 1.0},
                               "sample_plan": {"seed": 7, "count": 8}}))
    outs = []
    for k in range(2):
        sim, ver = tmp_path / f"sim{k}.csv", tmp_path / f"ver{k}.json"
        assert main(["simulate", "--config", str(cfg), "--out", str(sim)]) == 0
        main(["verify", "--config", str(cfg), "--out", str(ver)])
        outs.append((sim.read_bytes(), ver.read_bytes()))
    ok = outs[0] == outs[1]
    report(11, ok, f"simulate {len(outs[0][0])} bytes, verify {len(outs[0][1])} bytes, identical: {ok}")
    assert ok
