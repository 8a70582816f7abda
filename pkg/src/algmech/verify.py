"""Verification suite: every residual check of the package as one report."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebroid import (
    GeneralizedLieAlgebroid,
    GHMorphism,
    SamplePlan,
    check_anchor_compatibility,
    check_antisymmetry,
    check_jacobi,
)
from .dynamics import dense_base_curve, parallel_transport
from .mechanics import (
    MechanicalSystem,
    SingularHessian,
    avert_from_cartan_system,
    canonical_spray,
    check_finsler_axioms,
    check_regularity,
    liouville_residual,
    ring_connection,
    ring_curvature,
    spray_deviation_map,
    verify_cartan_equation,
)
from .prolongation import (
    RhoEtaConnection,
    StructureKind,
    adapted_dual_pairing,
    adapted_frame,
    anchor_derivative,
    apply_structure,
    curvature,
    ddot,
    dtilde,
    nijenhuis,
    prolong_bracket,
    random_polynomial_section,
    transformation_residuals,
)
from .smoothfn import ConstantMap, ExprMap, FuncMap

TOL = {
    "axiom": 1e-8,
    "cartan": 1e-7,
    "transport": 1e-6,
    "transformation": 1e-9,
    "semispray_law": 1e-8,
    "anchor_homomorphism": 1e-6,
}


@dataclass
class Check:
    check: str
    max_residual: float | None
    samples: int
    tolerance: float
    status: str = "ok"  # ok | skipped | error
    detail: str = ""

    @property
    def passed(self) -> bool | None:
        if self.status == "skipped":
            return None
        if self.status == "error" or self.max_residual is None or not math.isfinite(self.max_residual):
            return False
        return self.max_residual <= self.tolerance

    def as_dict(self) -> dict:
        d = {"check": self.check, "max_residual": self.max_residual, "samples": self.samples,
             "tolerance": self.tolerance, "pass": self.passed}
        if self.status != "ok":
            d["status"] = self.status
        if self.detail:
            d["detail"] = self.detail
        return d


def _section_diff(S1, S2, points) -> float:
    worst = 0.0
    for p in points:
        z1, y1 = S1.at(p)
        z2, y2 = S2.at(p)
        worst = max(worst, float(np.max(np.abs(z1 - z2), initial=0.0)),
                    float(np.max(np.abs(y1 - y2), initial=0.0)))
    return worst


def _structure_maps(A, conn, gh):
    def make(kind):
        return lambda X: apply_structure(kind, A, conn, X, gh)

    return {k.value: make(k) for k in StructureKind}


def structure_identity_suite(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection, gh: GHMorphism,
                             plan: SamplePlan, nsections: int = 2) -> dict:
    """Residuals of the projector, almost product and almost tangent identities
    and of the Nijenhuis relations, on random polynomial test sections."""
    pts = plan.points(A.m, A.r)
    rng = np.random.default_rng(plan.seed + 1)
    secs = [random_polynomial_section(A, rng, degree=2, scale=0.5) for _ in range(nsections)]
    e = _structure_maps(A, conn, gh)
    V, H, P, Jt = e["V"], e["H"], e["P"], e["J"]
    out = {}

    def put(name, val):
        out[name] = max(out.get(name, 0.0), val)

    for X in secs:
        put("V^2=V", _section_diff(V(V(X)), V(X), pts))
        put("H^2=H", _section_diff(H(H(X)), H(X), pts))
        put("P^2=Id", _section_diff(P(P(X)), X, pts))
        put("P=2H-Id", _section_diff(P(X), 2.0 * H(X) - X, pts))
        put("P=Id-2V", _section_diff(P(X), X - 2.0 * V(X), pts))
        put("P=H-V", _section_diff(P(X), H(X) - V(X), pts))
        put("H+V=Id", _section_diff(H(X) + V(X), X, pts))
        put("J.P=J", _section_diff(Jt(P(X)), Jt(X), pts))
        put("P.J=-J", _section_diff(P(Jt(X)), -Jt(X), pts))
        put("J.H=J", _section_diff(Jt(H(X)), Jt(X), pts))
        put("H.J=0", _section_diff(H(Jt(X)), 0.0 * X, pts))
        put("J.V=0", _section_diff(Jt(V(X)), 0.0 * X, pts))
        put("V.J=J", _section_diff(V(Jt(X)), Jt(X), pts))
        put("J.J=0", _section_diff(Jt(Jt(X)), 0.0 * X, pts))
        # V X pairs with the dual adapted frame: Y^a + Gamma^a_alpha Z^alpha
        worst = 0.0
        for p in pts:
            vy = V(X).at(p)[1]
            pair = np.array([adapted_dual_pairing(conn, a, X, p) for a in range(A.r)])
            worst = max(worst, float(np.max(np.abs(vy - pair))))
        put("connection_projector", worst)
    for i in range(len(secs)):
        for j in range(i + 1, len(secs)):
            X, W = secs[i], secs[j]
            put("N_J=0", _section_diff(nijenhuis(Jt, A, X, W), 0.0 * X, pts))
            vhh = V(prolong_bracket(A, H(X), H(W)))
            put("N_V=V[H,H]", _section_diff(nijenhuis(V, A, X, W), vhh, pts))
            put("N_H=V[H,H]", _section_diff(nijenhuis(H, A, X, W), vhh, pts))
    return out


def bracket_suite(A: GeneralizedLieAlgebroid, conn: RhoEtaConnection, plan: SamplePlan) -> dict:
    """Natural-frame brackets, the adapted/vertical bracket, curvature as the
    vertical part of [delta_a, delta_b], and the anchor homomorphism."""
    pts = plan.points(A.m, A.r)
    r, n = A.r, A.n
    out = {"base_brackets": 0.0, "adapted_vertical_bracket": 0.0, "curvature_bracket": 0.0,
           "anchor_homomorphism": 0.0, "bracket_antisymmetry": 0.0}
    R = curvature(A, conn)
    dG = FuncMap(lambda u: conn.gamma(u), n, (r, r))
    for a in range(r):
        for b in range(r):
            br = prolong_bracket(A, dtilde(A, a), dtilde(A, b))
            brv = prolong_bracket(A, dtilde(A, a), ddot(A, b))
            brvv = prolong_bracket(A, ddot(A, a), ddot(A, b))
            bd = prolong_bracket(A, adapted_frame(A, conn, a), ddot(A, b))
            dd = prolong_bracket(A, adapted_frame(A, conn, a), adapted_frame(A, conn, b))
            for p in pts:
                L = np.asarray(A.lstruct_h(p[: A.m]))
                z, y = br.at(p)
                res = max(np.max(np.abs(z - L[:, a, b]), initial=0.0), np.max(np.abs(y), initial=0.0))
                for S in (brv, brvv):
                    z2, y2 = S.at(p)
                    res = max(res, np.max(np.abs(z2), initial=0.0), np.max(np.abs(y2), initial=0.0))
                out["base_brackets"] = max(out["base_brackets"], float(res))
                dgy = dG.expand(p, 1).first[:, :, A.m + b]  # dGamma^c_alpha / dy^b
                z3, y3 = bd.at(p)
                res = max(np.max(np.abs(z3), initial=0.0), np.max(np.abs(y3 - dgy[:, a]), initial=0.0))
                out["adapted_vertical_bracket"] = max(out["adapted_vertical_bracket"], float(res))
                # [delta_a, delta_b] = L^c_{ab} delta_c + R^e_{ab} d._e
                z4, y4 = dd.at(p)
                G = np.asarray(conn.gamma.at(p))
                Rv = np.asarray(R.at(p))[:, a, b]
                res = max(np.max(np.abs(z4 - L[:, a, b]), initial=0.0),
                          np.max(np.abs(y4 - (-G @ L[:, a, b] + Rv)), initial=0.0))
                out["curvature_bracket"] = max(out["curvature_bracket"], float(res))
    rng = np.random.default_rng(plan.seed + 2)
    X = random_polynomial_section(A, rng, degree=2, scale=0.5)
    W = random_polynomial_section(A, rng, degree=2, scale=0.5)
    f = ExprMap.from_strings(
        "+".join([f"sin({0.3 * (k + 1)}*{v})" for k, v in enumerate(
            [f"x{i + 1}" for i in range(A.m)] + [f"y{a + 1}" for a in range(A.r)])]) or "0",
        A.m, A.r)
    lhs = anchor_derivative(A, prolong_bracket(A, X, W), f)
    rhs1 = anchor_derivative(A, X, anchor_derivative(A, W, f))
    rhs2 = anchor_derivative(A, W, anchor_derivative(A, X, f))
    XW, WX = prolong_bracket(A, X, W), prolong_bracket(A, W, X)
    for p in pts:
        res = abs(float(lhs.at(p)) - float(rhs1.at(p)) + float(rhs2.at(p)))
        out["anchor_homomorphism"] = max(out["anchor_homomorphism"], res)
        z1, y1 = XW.at(p)
        z2, y2 = WX.at(p)
        out["bracket_antisymmetry"] = max(out["bracket_antisymmetry"],
                                          float(np.max(np.abs(np.concatenate([z1 + z2, y1 + y2])))))
    return out


def transport_equivalence(sys: MechanicalSystem, x0, y0, t1: float = 1.0, dt: float = 1e-3) -> float:
    """max |u(t) - y(t)| where y(t) integrates the canonical semispray and u(t)
    is the parallel transport of y(0) along its base curve."""
    S = sys.semispray()
    conn = sys.connection()
    traj, curve = dense_base_curve(sys, S, x0, y0, 0.0, t1, dt)
    tr = parallel_transport(conn, sys.gh, sys.algebroid, curve, y0, 0.0, t1, dt)
    ys = np.array([traj.state_at(t)[sys.algebroid.m:] for t in tr.times])
    return float(np.max(np.abs(tr.y - ys)))


def _run(name, samples, tol, fn):
    try:
        return Check(name, float(fn()), samples, tol)
    except (SingularHessian, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return Check(name, None, samples, tol, status="error", detail=f"{type(exc).__name__}: {exc}")


def run_verification(sys: MechanicalSystem, plan: SamplePlan, tol: float | None = None,
                     transition=None, initial=None, horizon: float = 1.0, dt: float = 1e-3) -> list:
    """All checks for one system, sorted by name."""
    A, gh = sys.algebroid, sys.gh
    ns = plan.count
    T = (lambda key: tol) if tol is not None else (lambda key: TOL[key])
    checks = [
        _run("antisymmetry", ns, T("axiom"), lambda: check_antisymmetry(A, plan)),
        _run("jacobi", ns, T("axiom"), lambda: check_jacobi(A, plan)),
        _run("anchor_compatibility", ns, T("axiom"), lambda: check_anchor_compatibility(A, plan)),
        _run("gh_inverse", ns, T("axiom"),
             lambda: gh.check_inverse([A.h.at(x) for x in plan.base_points(A.m, A.r)], tol=math.inf)),
    ]
    lag = sys.lagrangian()
    skip_names = ["regularity", "cartan_equation", "avert_two_path", "semispray_liouville",
                  "spray_deviation", "ring_curvature_equivalence", "transport_equivalence"]
    if sys.payload is None:
        checks += [Check(n, None, 0, T("axiom"), status="skipped", detail="no payload") for n in skip_names]
        conn = RhoEtaConnection(ConstantMap(np.zeros((A.r, A.r)), A.n))
    else:
        conn = sys.connection()
    pts = plan.points(A.m, A.r)

    try:
        br = bracket_suite(A, conn, plan)
        for k, v in br.items():
            checks.append(Check(k, v, ns, T("anchor_homomorphism") if k == "anchor_homomorphism" else T("axiom")))
        st = structure_identity_suite(A, conn, gh, plan)
        for k, v in st.items():
            checks.append(Check(f"structure:{k}", v, ns, T("axiom")))
    except (SingularHessian, ArithmeticError, ValueError) as exc:
        checks.append(Check("structure_suite", None, ns, T("axiom"), status="error", detail=str(exc)))

    if sys.payload is not None:
        S = sys.semispray()
        if lag is not None:
            def regular():
                for p in pts:
                    if not check_regularity(lag, p, A.m)[0]:
                        raise SingularHessian("Hessian L_ab is singular", p)
                return 0.0
            checks.append(_run("regularity", ns, T("axiom"), regular))
            checks.append(_run("cartan_equation", ns, T("cartan"),
                               lambda: verify_cartan_equation(S, lag, gh, A, plan)))
            checks.append(_run("avert_two_path", ns, T("axiom"), lambda: max(
                float(np.max(np.abs(avert_from_cartan_system(lag, gh, A, p) - np.asarray(S.Avert.at(p)))))
                for p in pts)))
            if sys.kind == "finsler":
                checks.append(_run("finsler_axioms", ns, T("axiom"),
                                   lambda: _finsler_residual(sys, plan)))
        else:
            checks += [Check(n, None, 0, T("axiom"), status="skipped", detail="connection payload")
                       for n in ("regularity", "cartan_equation", "avert_two_path")]
        checks.append(_run("semispray_liouville", ns, T("axiom"), lambda: liouville_residual(S, plan)))
        spray = canonical_spray(conn, gh, A)
        dev = spray_deviation_map(spray)
        checks.append(_run("spray_deviation", ns, T("axiom"),
                           lambda: max(float(np.max(np.abs(dev.at(p)))) for p in pts)))
        fe = sys.fe

        def ring():
            Rr = ring_curvature(A, conn, fe, gh)
            Rd = curvature(A, ring_connection(conn, fe, gh, A))
            return max(float(np.max(np.abs(np.asarray(Rr.at(p)) - np.asarray(Rd.at(p)))))
                       for p in pts)

        checks.append(_run("ring_curvature_equivalence", ns, T("axiom"), ring))
        if lag is None:
            checks.append(Check("transport_equivalence", None, 0, T("transport"), status="skipped",
                                detail="stated for Lagrange systems"))
        elif initial is not None:
            x0, y0 = initial
            checks.append(_run("transport_equivalence", 1, T("transport"),
                               lambda: transport_equivalence(sys, x0, y0, horizon, dt)))
        else:
            checks.append(Check("transport_equivalence", None, 0, T("transport"), status="skipped",
                                detail="no initial state"))
        if transition is not None:
            G = FuncMap(lambda u: -0.5 * S.Avert(u), A.n, (A.r,))
            res = transformation_residuals(A, transition, plan, conn=conn, semispray_g=G, gh=gh)
            for k, v in res.items():
                key = "semispray_law" if k == "semispray_law" else "transformation"
                checks.append(Check(f"transformation:{k}", v, ns, T(key)))
    elif transition is not None:
        res = transformation_residuals(A, transition, plan)
        for k, v in res.items():
            checks.append(Check(f"transformation:{k}", v, ns, T("transformation")))
    return sorted(checks, key=lambda c: c.check)


def _finsler_residual(sys, plan):
    rep = check_finsler_axioms(sys.payload, plan, sys.algebroid.m, sys.algebroid.r)
    if rep.min_pivot <= 0 or rep.min_value <= 0:
        return math.inf
    return max(rep.euler_residual, rep.scaling_residual)
