"""Named property suites behind the ``suite`` CLI command.

Each suite runs a fixed-seed batch of invariant checks and returns a
machine-readable report: one (check, pass/fail, detail) row per property.
Failures are report content, never exceptions.  The checks encode what is
mathematically true of a correct implementation on each backend, including
deliberate falsification cases (properties that must be caught failing).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bilevel import (
    Schedule,
    SolverConfig,
    fejer_audit,
    limsup_condition_audit,
    solve_bilevel,
    step_decay_audit,
    validate_schedule,
)
from .bregman import (
    BregmanFunction,
    WholeManifold,
    coercive_augment,
    energy_bregman,
    negentropy_bregman,
    sqnorm_bregman,
    validate_bregman,
)
from .equilibrium import (
    ball_constraint,
    box_constraint,
    check_monotonicity_class,
    ep_residual,
    make_minimization_bifunction,
    make_vi_bifunction,
    regularized_bifunction,
    zero_bifunction,
)
from .geometry import EuclideanSpace, Hyperboloid, Point, TangentVector, check_comparison_inequalities
from .problems import get_problem, quadratic_scalar_field
from .subsolver import InnerProblem, solve_inner


@dataclass
class SuiteCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks.append(SuiteCheck(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        out = [f"suite {self.suite}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            out.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}" + (f" ({c.detail})" if c.detail else ""))
        return out


def _rand_hyp(rng, H, scale=1.0):
    return H.random_point(rng, scale)


def suite_geometry(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("geometry")
    rng = np.random.default_rng(seed)
    E, H = EuclideanSpace(3), Hyperboloid(2)

    worst = 0.0
    for m in (E, H):
        for _ in range(200):
            x = m.random_point(rng, 1.0)
            v = m.random_tangent(rng, x, 1.0)
            n = m.norm(v)
            if n > 5.0:
                v = v * (5.0 / n)
            w = m.log(x, m.exp(x, v))
            worst = max(worst, float(np.abs((w - v).components).max()))
    rep.add("exp_log_roundtrip", worst <= 1e-7, f"max deviation {worst:.2e}")

    worst_iso = worst_inv = 0.0
    for _ in range(200):
        x, y = _rand_hyp(rng, H), _rand_hyp(rng, H)
        u, v = H.random_tangent(rng, x), H.random_tangent(rng, x)
        pu, pv = H.transport(x, y, u), H.transport(x, y, v)
        worst_iso = max(worst_iso, abs(H.inner(y, pu, pv) - H.inner(x, u, v)))
        back = H.transport(y, x, pu)
        worst_inv = max(worst_inv, float(np.abs((back - u).components).max()))
    rep.add("transport_isometry", worst_iso <= 1e-8, f"max defect {worst_iso:.2e}")
    rep.add("transport_inverse", worst_inv <= 1e-8, f"max defect {worst_inv:.2e}")

    worst_c = 0.0
    for _ in range(100):
        x = _rand_hyp(rng, H)
        u = H.random_tangent(rng, x, 1.0)
        u = u * (1.0 / max(H.norm(u), 1e-12))
        y, z = H.exp(x, u * 0.4), H.exp(x, u * 1.1)
        v = H.random_tangent(rng, z)
        direct = H.transport(z, x, v)
        chained = H.transport(y, x, H.transport(z, y, v))
        worst_c = max(worst_c, float(np.abs((direct - chained).components).max()))
    rep.add("transport_composition_on_geodesic", worst_c <= 1e-8, f"max defect {worst_c:.2e}")

    min_slack = math.inf
    for _ in range(1000):
        pts = [_rand_hyp(rng, H, 1.2) for _ in range(3)]
        min_slack = min(min_slack, check_comparison_inequalities(H, *pts).min_slack)
    rep.add("triangle_comparison_hyperboloid", min_slack >= -1e-8, f"min slack {min_slack:.2e}")

    worst_flat = 0.0
    for _ in range(200):
        pts = [E.random_point(rng, 2.0) for _ in range(3)]
        r = check_comparison_inequalities(E, *pts)
        worst_flat = max(worst_flat, max(abs(s) for s in r.cyclic_slacks))
    rep.add("triangle_comparison_euclidean_tight", worst_flat <= 1e-10, f"max |slack| {worst_flat:.2e}")

    x = _rand_hyp(rng, H)
    drift = 0.0
    for _ in range(3400):  # 3 chained calls per round: ~1e4 exp/log operations
        v = H.random_tangent(rng, x, 1.0)
        v = v * (0.5 / max(H.norm(v), 1e-12))  # unit-scale hops
        y = H.exp(x, v)
        x = H.exp(y, H.log(y, x))  # hop out and return: net motion is roundoff
        q = H.minkowski(x.coords, x.coords)
        drift = max(drift, abs(q + 1.0))
    rep.add("hyperboloid_drift_10k_ops", drift <= 1e-8, f"max |<x,x>+1| {drift:.2e}")

    worst_sp = 0.0
    for _ in range(100):
        x, y = _rand_hyp(rng, H), _rand_hyp(rng, H)
        t = float(rng.uniform())
        worst_sp = max(worst_sp, abs(H.dist(x, H.geodesic_point(x, y, t)) - t * H.dist(x, y)))
    rep.add("geodesic_constant_speed", worst_sp <= 1e-8, f"max defect {worst_sp:.2e}")
    return rep


def _energy_pair(rng, H):
    anchor = H.random_point(rng, 1.0)
    return energy_bregman(H, anchor), anchor


def suite_bregman(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("bregman")
    rng = np.random.default_rng(seed)
    E2, H = EuclideanSpace(2), Hyperboloid(2)
    flat_bregmans = [sqnorm_bregman(E2), energy_bregman(E2, E2.point([0.4, -0.3])), negentropy_bregman(E2)]

    worst_neg = 0.0
    for b in flat_bregmans + [energy_bregman(H, H.random_point(rng))]:
        for _ in range(300):
            x = b.zone.sample(rng, b.manifold)
            y = b.zone.sample(rng, b.manifold)
            worst_neg = min(worst_neg, b.distance(x, y))
    rep.add("divergence_nonnegative", worst_neg >= -1e-10, f"min value {worst_neg:.2e}")

    min_lb = math.inf
    for m in (E2, H):
        b, _ = _energy_pair(rng, m) if m is H else (energy_bregman(m, m.point([0.2, 0.1])), None)
        for _ in range(300):
            x, y = m.random_point(rng), m.random_point(rng)
            min_lb = min(min_lb, b.distance(x, y) - 0.5 * m.dist(x, y) ** 2)
    rep.add("energy_dominates_half_sqdist", min_lb >= -1e-10, f"min slack {min_lb:.2e}")

    worst3 = 0.0
    for b in flat_bregmans:
        for _ in range(300):
            x = b.zone.sample(rng, E2)
            y = b.zone.sample(rng, E2)
            z = b.zone.sample(rng, E2)
            worst3 = max(worst3, b.three_point_residual(x, y, z))
    rep.add("three_point_flat", worst3 <= 1e-8, f"max residual {worst3:.2e}")

    bh, _ = _energy_pair(rng, H)
    worst_geo = 0.0
    for _ in range(200):
        a = H.random_point(rng)
        u = H.random_tangent(rng, a, 1.0)
        u = u * (1.0 / max(H.norm(u), 1e-12))
        x, z, y = (H.exp(a, u * t) for t in (0.0, 0.45, 0.9))
        worst_geo = max(worst_geo, bh.three_point_residual(x, y, z))
    rep.add("three_point_hyperboloid_on_geodesic", worst_geo <= 1e-8, f"max residual {worst_geo:.2e}")

    worst_gen = 0.0
    for _ in range(50):
        pts = [H.random_point(rng) for _ in range(3)]
        worst_gen = max(worst_gen, bh.three_point_residual(*pts))
    rep.add(
        "three_point_hyperboloid_off_geodesic_breaks",
        worst_gen > 1e-6,
        f"max residual {worst_gen:.2e} (holonomy makes the flat identity fail off geodesics)",
    )

    from .bregman import finite_difference_gradient

    worst_fd = 0.0
    for b in flat_bregmans:
        for _ in range(40):
            x = b.zone.sample(rng, E2)
            y = b.zone.sample(rng, E2)
            g = b.grad_first(x, y)
            g_fd = finite_difference_gradient(E2, lambda q: b.distance(q, y), x)
            worst_fd = max(worst_fd, (g - g_fd).norm() / max(1.0, g_fd.norm()))
    rep.add("transported_gradient_matches_fd_flat", worst_fd <= 1e-5, f"max rel err {worst_fd:.2e}")

    min_aug = math.inf
    for m in (E2, H):
        base = energy_bregman(m, m.random_point(rng))
        z = m.random_point(rng)
        aug = coercive_augment(base, z)
        for _ in range(300):
            x, y = m.random_point(rng), m.random_point(rng)
            min_aug = min(min_aug, aug.distance(x, y) - base.distance(x, y) - 0.5 * m.dist(x, y) ** 2)
    rep.add("coercive_augment_inequality", min_aug >= -1e-10, f"min slack {min_aug:.2e}")

    ok = True
    details = []
    for b in flat_bregmans + [bh]:
        r = validate_bregman(b, 200, np.random.default_rng(seed + 1))
        ok = ok and r.passed
        details.append(f"{b.name}:{'ok' if r.passed else r.summary()}")
    rep.add("builtin_validation", ok, "; ".join(details))

    def wavy(p: Point) -> float:
        return 0.5 * float(p.coords @ p.coords) + 0.5 * math.sin(3.0 * p.coords[0])

    def wavy_grad(p: Point) -> TangentVector:
        g = p.coords.copy()
        g[0] += 1.5 * math.cos(3.0 * p.coords[0])
        return TangentVector(p, g)

    bad = BregmanFunction(E2, wavy, wavy_grad, WholeManifold(), "sine-perturbed")
    r = validate_bregman(bad, 400, np.random.default_rng(seed + 2), scale=2.0)
    rep.add("nonconvex_candidate_rejected", not r.clauses["b"].passed, r.clauses["b"].detail)

    worst_bridge = 0.0
    for b in flat_bregmans:
        for _ in range(100):
            x, y = b.zone.sample(rng, E2), b.zone.sample(rng, E2)
            z = b.zone.sample(rng, E2)
            lhs = E2.inner(x, -b.grad_first(x, z) + E2.transport(y, x, b.grad_first(y, z)), E2.log(x, y))
            rhs = E2.inner(x, -b.gradient(x) + E2.transport(y, x, b.gradient(y)), E2.log(x, y))
            worst_bridge = max(worst_bridge, abs(lhs - rhs))
    for _ in range(100):
        x, y, z = (H.random_point(rng) for _ in range(3))
        banch = energy_bregman(H, z)  # anchor at the regularization center
        lhs = H.inner(x, -banch.grad_first(x, z) + H.transport(y, x, banch.grad_first(y, z)), H.log(x, y))
        rhs = H.inner(x, -banch.gradient(x) + H.transport(y, x, banch.gradient(y)), H.log(x, y))
        worst_bridge = max(worst_bridge, abs(lhs - rhs))
    rep.add("gradient_bridge_identity", worst_bridge <= 1e-8, f"max residual {worst_bridge:.2e}")

    worst_pair = 0.0
    for m, b in ((E2, flat_bregmans[0]), (H, bh)):
        for _ in range(200):
            x, y = m.random_point(rng), m.random_point(rng)
            worst_pair = max(worst_pair, abs(b.symmetric_pairing(x, y) - b.distance(x, y) - b.distance(y, x)))
    rep.add("pairing_equals_symmetrized_divergence", worst_pair <= 1e-8, f"max residual {worst_pair:.2e}")
    return rep


def undermonotone_vi_pair(manifold: EuclideanSpace, mu: float = 0.5):
    """Built-in genuinely undermonotone pair with a tight combined bound.

    F has symmetric part diag(0.25, -1) (theta_F = 1), Q has diag(0.5, -0.25)
    (theta_Q = 0.25); the symmetric parts are aligned, so F + mu*Q is exactly
    (theta_F + mu*theta_Q)-undermonotone with respect to the squared-norm
    Bregman function and no smaller bound works.
    """
    A_F = np.array([[0.25, 1.0], [-1.0, -1.0]])
    A_Q = np.array([[0.5, 0.3], [-0.3, -0.25]])

    def field_of(A):
        def V(p: Point) -> TangentVector:
            return TangentVector(p, A @ p.coords)
        return V

    F = make_vi_bifunction(manifold, field_of(A_F), "undermonotone", theta=1.0, name="under-F")
    Q = make_vi_bifunction(manifold, field_of(A_Q), "undermonotone", theta=0.25, name="under-Q")
    theta_eff = F.theta + mu * Q.theta
    return F, Q, mu, theta_eff


def suite_monotonicity(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("monotonicity")
    rng = np.random.default_rng(seed)
    E = EuclideanSpace(2)
    b = sqnorm_bregman(E)
    omega = box_constraint(E, [-4.0, -4.0], [4.0, 4.0])

    phi, gphi = quadratic_scalar_field(E, [1.0, 2.0], [0.5, -0.5])
    Fmin = make_minimization_bifunction(E, phi, gphi)
    r = check_monotonicity_class(Fmin, omega, b, theta=0.0, samples=500, rng=rng)
    rep.add("minimization_is_monotone", r.monotone.passed and r.pseudomonotone.passed,
            f"max symmetry sum {r.monotone.max_violation:.2e}")

    A = np.array([[1.0, 2.0], [-2.0, 0.5]])  # positive definite symmetric part
    Fpsd = make_vi_bifunction(E, lambda p: TangentVector(p, A @ p.coords))
    r = check_monotonicity_class(Fpsd, omega, b, theta=0.0, samples=500, rng=rng)
    rep.add("psd_vi_is_monotone", r.monotone.passed, f"max symmetry sum {r.monotone.max_violation:.2e}")

    def scaled(p: Point) -> TangentVector:
        return TangentVector(p, p.coords / (1.0 + float(p.coords @ p.coords)))

    Fscaled = make_vi_bifunction(E, scaled, "pseudomonotone")
    r = check_monotonicity_class(Fscaled, omega, b, theta=0.0, samples=800, rng=rng)
    rep.add(
        "scaled_field_pseudo_not_monotone",
        (not r.monotone.passed) and r.pseudomonotone.passed,
        f"monotone counterexample violation {r.monotone.max_violation:.2e}",
    )

    F, Q, mu, theta_eff = undermonotone_vi_pair(E)
    pair = make_vi_bifunction(
        E, lambda p: F.first_field(p) + Q.first_field(p) * mu, name="F+muQ"
    )
    r_tight = check_monotonicity_class(pair, omega, b, theta=theta_eff, samples=800, rng=rng)
    r_loose = check_monotonicity_class(pair, omega, b, theta=0.5 * theta_eff, samples=800, rng=rng)
    rep.add("undermonotone_bound_tight", r_tight.undermonotone.passed,
            f"theta={theta_eff}")
    rep.add("undermonotone_smaller_theta_fails", not r_loose.undermonotone.passed,
            f"violation {r_loose.undermonotone.max_violation:.2e} at theta/2")

    worst = 0.0
    z = omega.sample(rng)
    for lam in (theta_eff, 2.0 * theta_eff, 10.0 * theta_eff + 1.0):
        L = regularized_bifunction(F, Q, mu, lam, z, b)
        for _ in range(400):
            x, y = omega.sample(rng), omega.sample(rng)
            worst = max(worst, L(x, y) + L(y, x))
    rep.add("regularization_monotonizes", worst <= 1e-10, f"max symmetry sum {worst:.2e}")

    worst_lin = 0.0
    H = Hyperboloid(2)
    fixed = np.array([0.3, -0.7, 0.5])
    Fdir = make_vi_bifunction(H, lambda p: H.project_tangent(p, fixed))
    for _ in range(200):
        x, y = H.random_point(rng), H.random_point(rng)
        t = float(rng.uniform())
        worst_lin = max(worst_lin, abs(Fdir(x, H.geodesic_point(x, y, t)) - t * Fdir(x, y)))
    rep.add("vi_payoff_linear_along_geodesics", worst_lin <= 1e-8, f"max defect {worst_lin:.2e}")
    return rep


def suite_convergence(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("convergence")

    r = validate_schedule(Schedule.power(1.0, 2.0, 1.0, 0.0))
    rep.add("schedule_inverse_square_passes", r.ok, f"tail share {r.tail_ratio:.2e}")
    r = validate_schedule(Schedule.power(1.0, 1.0, 1.0, 0.0))
    rep.add("schedule_harmonic_fails", not r.ok, "; ".join(r.failures))
    r = validate_schedule(Schedule(mu=lambda k: (k + 1.0) ** -2, lam=lambda k: 1.0, theta_bound=1.0))
    rep.add("schedule_lambda_at_theta_rejected", not r.ok, "; ".join(r.failures))

    p = get_problem("bilevel_quadratic")
    res = solve_bilevel(p.F, p.Q, p.omega, p.bregman, p.schedule, p.x0, p.config)
    ref = p.references[0]
    fj = fejer_audit(res.traces, res.x_final, ref, F=p.F, Q=p.Q, omega=p.omega, b=p.bregman)
    sd = step_decay_audit(res.traces)
    rep.add("quadratic_run_converges", res.converged, f"status {res.status} in {res.iterations} iters")
    rep.add("quadratic_fejer_inequality", fj.passed, f"max violation {fj.max_violation:.2e}")
    rep.add("quadratic_step_decay", sd.passed, f"final step {sd.final_step:.2e}")
    ls = limsup_condition_audit(res.traces, res.x_final, [ref], F=p.F, omega=p.omega, b=p.bregman)
    rep.add(
        "limsup_fails_under_weak_upper_weights",
        not ls.passed,
        f"tail {ls.tail_values[0]:.3e}: summable mu_k/lam_k caps the upper-level pull",
    )

    ps = get_problem("bilevel_quadratic_strong")
    res_s = solve_bilevel(ps.F, ps.Q, ps.omega, ps.bregman, ps.schedule, ps.x0, ps.config)
    ref_s = ps.references[0]
    ls_s = limsup_condition_audit(res_s.traces, res_s.x_final, [ref_s], F=ps.F, omega=ps.omega, b=ps.bregman)
    dev = float(np.abs(res_s.x_final.coords - np.array([0.0, 1.0])).max())
    rep.add("limsup_holds_under_strong_upper_weights", ls_s.passed,
            f"tail {ls_s.tail_values[0]:.3e}")
    rep.add("strong_run_reaches_upper_optimum", dev <= 1e-3, f"|x - (0,1)| = {dev:.2e}")

    # fast-decaying upper weights (floored above the subnormal range so the
    # schedule stays positive over the validation horizon)
    broken = Schedule(mu=lambda k: max(math.exp(-float(k)), 1e-300), lam=lambda k: 1.0,
                      theta_bound=0.0)
    cfg = replace(p.config, max_iters=300, tau_step=1e-12)
    res_b = solve_bilevel(p.F, p.Q, p.omega, p.bregman, broken, p.x0, cfg)
    ls_b = limsup_condition_audit(res_b.traces, res_b.x_final, [ref], F=p.F, omega=p.omega, b=p.bregman)
    rep.add("limsup_detects_overfast_upper_decay", not ls_b.passed,
            f"tail {ls_b.tail_values[0]:.3e} for mu_k = exp(-k)")

    short = replace(p.config, max_iters=120, tau_step=1e-14)
    long = replace(p.config, max_iters=1200, tau_step=1e-14)
    m = p.manifold
    r1 = solve_bilevel(p.F, p.Q, p.omega, p.bregman, p.schedule, p.x0, short)
    r2 = solve_bilevel(p.F, p.Q, p.omega, p.bregman, p.schedule, p.x0, long)
    reach1 = max(m.dist(t.x_k, p.x0) for t in r1.traces)
    reach2 = max(m.dist(t.x_k, p.x0) for t in r2.traces)
    rep.add("iterates_bounded_under_10x_extension", reach2 <= reach1 * 1.05 + 1e-9,
            f"reach {reach1:.4f} -> {reach2:.4f}")
    return rep


def suite_recovery(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("recovery")
    E = EuclideanSpace(2)
    b = sqnorm_bregman(E)
    a = np.array([1.0, 2.0])
    phi, gphi = quadratic_scalar_field(E, [1.0, 1.0], a)
    F = make_minimization_bifunction(E, phi, gphi)
    Q = zero_bifunction(E)
    omega = box_constraint(E, [-10.0, -10.0], [10.0, 10.0])
    lam = lambda k: 1.0 + 0.5 / (k + 1.0)
    sched = Schedule(mu=lambda k: (k + 1.0) ** -2, lam=lam, theta_bound=0.0)
    # tau_step < 0 never triggers: run the full 100 iterations
    cfg = SolverConfig(strategy="prox_min", tol_inner=1e-12, tau_step=-1.0, max_iters=100, seed=seed)
    res = solve_bilevel(F, Q, omega, b, sched, E.point([-4.0, 5.0]), cfg)
    xs = [t.x_k.coords for t in res.traces] + [res.x_final.coords]
    x_ref = np.array([-4.0, 5.0])
    worst = 0.0
    for k in range(len(xs) - 1):
        x_ref = (2.0 * a + lam(k) * x_ref) / (2.0 + lam(k))
        worst = max(worst, float(np.abs(xs[k + 1] - x_ref).max()))
    rep.add("classical_prox_per_iterate", worst <= 1e-8, f"max per-iterate deviation {worst:.2e}")

    Fz, Qz = zero_bifunction(E), zero_bifunction(E)
    cfg0 = SolverConfig(strategy="prox_min", tol_inner=1e-10, tau_step=1e-8, max_iters=50, seed=seed)
    x0 = E.point([0.7, -0.3])
    res0 = solve_bilevel(Fz, Qz, omega, b, Schedule.power(1.0, 2.0, 1.0, 0.0), x0, cfg0)
    rep.add(
        "zero_problem_stops_immediately",
        res0.status == "stopped_fixed_point" and res0.iterations == 1
        and float(np.abs(res0.x_final.coords - x0.coords).max()) <= 1e-9,
        f"status {res0.status} after {res0.iterations} iteration(s)",
    )

    phi2, gphi2 = quadratic_scalar_field(E, [1.0, 1.0], [0.0, 0.0])
    F2 = make_minimization_bifunction(E, phi2, gphi2)
    L = regularized_bifunction(F2, zero_bifunction(E), 0.5, 1.0, E.point([2.0, 0.0]), b)
    prob = InnerProblem(L, omega, x_init=E.point([2.0, 0.0]), tol_inner=1e-8)
    sols = {}
    for strat in ("prox_min", "best_response", "extragradient"):
        sols[strat] = solve_inner(prob, strategy=strat, rng=np.random.default_rng(seed)).x.coords
    spread = max(
        float(np.abs(sols[s1] - sols[s2]).max()) for s1 in sols for s2 in sols
    )
    expected = np.array([2.0 / 3.0, 0.0])
    dev = max(float(np.abs(sols[s] - expected).max()) for s in sols)
    rep.add("inner_strategies_agree", spread <= 1e-5 and dev <= 1e-5,
            f"spread {spread:.2e}, deviation from closed form {dev:.2e}")
    return rep


SUITES = {
    "geometry": suite_geometry,
    "bregman": suite_bregman,
    "monotonicity": suite_monotonicity,
    "convergence": suite_convergence,
    "recovery": suite_recovery,
}


def run_suite(name: str, seed: int = 0) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; available: {', '.join(sorted(SUITES))}")
    return SUITES[name](seed)
