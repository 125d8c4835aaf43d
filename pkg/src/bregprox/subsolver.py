"""Inner-subproblem strategies.

Each outer iteration needs a point x with L(x, y) >= 0 for all feasible y,
where L is the regularized payoff.  Three interchangeable strategies:

* ``prox_min`` - when both payoffs are minimization type, the subproblem is
  the constrained minimization of phi + mu*Phi + lam*D(., z); first-order
  stationarity of that objective implies equilibrium membership through the
  subgradient inequality.
* ``best_response`` - iterate x <- argmin_y L(x, y); a fixed point is an
  equilibrium since L(x, .) is convex with minimum value <= L(x, x) = 0.
* ``extragradient`` - two projected geodesic steps per iteration on the
  combined field V_F + mu*V_Q + lam*grad D(., z), for payoffs exposing a
  first-argument field.

Every candidate is audited with an independent equilibrium-gap probe before
``converged`` is reported; strategies tighten and retry when the audit
fails.  Iterates stay feasible (post-projection) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .descent import geodesic_descent
from .equilibrium import Bifunction, ConstraintSet, EPResidual, ep_residual
from .errors import DivergenceError, ParameterError, StrategyError
from .geometry import Point

STRATEGIES = ("prox_min", "best_response", "extragradient")


@dataclass
class InnerProblem:
    """One regularized subproblem: payoff, feasible set, start, tolerances."""

    L: Bifunction
    omega: ConstraintSet
    x_init: Point
    tol_inner: float = 1e-8
    max_inner_iters: int = 400
    divergence_radius: Optional[float] = None
    audit_probes: int = 16
    audit_descent_iters: int = 80
    descent_max_iters: int = 400
    extragradient_step: Optional[float] = None

    def __post_init__(self):
        if self.tol_inner <= 0:
            raise ParameterError("tol_inner must be positive")
        if not self.omega.contains(self.x_init):
            raise ParameterError("inner start must be feasible")

    @property
    def parts(self) -> dict:
        if self.L.components is None:
            raise StrategyError("inner problems require a regularized payoff")
        return self.L.components


@dataclass
class InnerSolution:
    x: Point
    residual: EPResidual
    iterations: int
    strategy: str
    converged: bool


def _default_radius(p: InnerProblem) -> float:
    z = p.parts["z"]
    m = p.L.manifold
    return 1e3 * (1.0 + m.dist(p.x_init, z))


def _guard(p: InnerProblem, x: Point, radius: float) -> None:
    if p.L.manifold.dist(x, p.x_init) > radius:
        raise DivergenceError(
            f"inner iterate escaped the trust radius {radius:.3g}; "
            "the subproblem looks misconfigured (is lambda > theta?)"
        )


def choose_strategy(p: InnerProblem) -> str:
    F, Q = p.parts["F"], p.parts["Q"]
    if F.kind == "minimization" and Q.kind == "minimization":
        return "prox_min"
    if F.first_field is not None and Q.first_field is not None:
        return "extragradient"
    if p.L.grad_second is not None:
        return "best_response"
    raise StrategyError("no strategy applies: payoffs expose neither gradients nor fields")


def _audit(p: InnerProblem, x: Point, rng) -> EPResidual:
    return ep_residual(
        p.L, p.omega, x, probes=p.audit_probes, local_minimize=p.L.grad_second is not None,
        rng=rng, descent_iters=p.audit_descent_iters,
    )


def _prox_min(p: InnerProblem, rng) -> InnerSolution:
    parts = p.parts
    F, Q, mu, lam, z, b = (
        parts["F"], parts["Q"], parts["mu"], parts["lam"], parts["z"], parts["bregman"],
    )
    if F.kind != "minimization" or Q.kind != "minimization":
        raise StrategyError("prox_min needs minimization-type payoffs on both levels")

    def objective(y: Point) -> float:
        return F.phi(y) + mu * Q.phi(y) + lam * b.distance(y, z)

    def grad(y: Point):
        return F.grad_phi(y) + Q.grad_phi(y) * mu + b.grad_first(y, z) * lam

    radius = p.divergence_radius or _default_radius(p)
    x = p.x_init
    tol = p.tol_inner * 0.1
    total = 0
    for _ in range(3):
        res = geodesic_descent(
            objective, grad, p.omega, x, tol=tol, max_iters=p.descent_max_iters
        )
        x = res.x
        total += max(res.iterations, 1)
        _guard(p, x, radius)
        audit = _audit(p, x, rng)
        if audit.gap >= -p.tol_inner:
            return InnerSolution(x, audit, total, "prox_min", True)
        tol *= 1e-2
    return InnerSolution(x, audit, total, "prox_min", False)


def _best_response(p: InnerProblem, rng) -> InnerSolution:
    if p.L.grad_second is None:
        raise StrategyError("best_response needs a second-argument gradient oracle")
    L, omega = p.L, p.omega
    m = L.manifold
    radius = p.divergence_radius or _default_radius(p)
    x = omega.project(p.x_init)
    fp_tol = p.tol_inner
    for it in range(1, p.max_inner_iters + 1):
        res = geodesic_descent(
            lambda y: L(x, y),
            lambda y: L.grad_second(x, y),
            omega,
            x,
            tol=min(1e-10, 0.01 * fp_tol),
            max_iters=p.descent_max_iters,
        )
        x_next = res.x
        _guard(p, x_next, radius)
        if m.dist(x_next, x) <= fp_tol:
            audit = _audit(p, x_next, rng)
            if audit.gap >= -p.tol_inner:
                return InnerSolution(x_next, audit, it, "best_response", True)
            fp_tol *= 0.1
        x = x_next
    audit = _audit(p, x, rng)
    return InnerSolution(x, audit, p.max_inner_iters, "best_response", audit.gap >= -p.tol_inner)


def _extragradient(p: InnerProblem, rng) -> InnerSolution:
    if p.L.first_field is None:
        raise StrategyError(
            "extragradient needs first-argument fields on both payoffs "
            "(a VI field or a gradient oracle)"
        )
    L, omega = p.L, p.omega
    m = L.manifold
    lam = p.parts["lam"]
    s = p.extragradient_step if p.extragradient_step is not None else 0.5 / lam
    radius = p.divergence_radius or _default_radius(p)
    x = omega.project(p.x_init)
    prev_merit = math.inf
    surrogate = p.tol_inner
    for it in range(1, p.max_inner_iters + 1):
        v = L.first_field(x)
        # s-independent stationarity surrogate: unit-step prox residual
        unit_res = m.dist(x, omega.project(m.exp(x, -v)))
        if unit_res <= surrogate:
            audit = _audit(p, x, rng)
            if audit.gap >= -p.tol_inner:
                return InnerSolution(x, audit, it, "extragradient", True)
            surrogate *= 0.1
        mid = omega.project(m.exp(x, v * (-s)))
        dxm = m.dist(x, mid)
        if dxm > 1e-15:
            v_mid = m.transport(mid, x, L.first_field(mid))
            # cap the step by the local Lipschitz estimate of the field,
            # otherwise the midpoint overshoots and the update stalls
            lips = m.norm(v_mid - v) / dxm
            if s * lips > 0.7:
                s = 0.7 / lips
                mid = omega.project(m.exp(x, v * (-s)))
                dxm = m.dist(x, mid)
                v_mid = m.transport(mid, x, L.first_field(mid))
        else:
            v_mid = v
        merit = dxm / s
        if merit > prev_merit * (1.0 + 1e-12):
            s *= 0.5
            prev_merit = math.inf
            continue
        prev_merit = merit
        x_next = omega.project(m.exp(x, v_mid * (-s)))
        _guard(p, x_next, radius)
        x = x_next
    audit = _audit(p, x, rng)
    return InnerSolution(x, audit, p.max_inner_iters, "extragradient", audit.gap >= -p.tol_inner)


_RUNNERS = {
    "prox_min": _prox_min,
    "best_response": _best_response,
    "extragradient": _extragradient,
}


def solve_inner(
    p: InnerProblem,
    strategy: str = "auto",
    rng: Optional[np.random.Generator] = None,
) -> InnerSolution:
    """Solve one regularized subproblem with the requested strategy.

    ``auto`` picks prox_min for double-minimization problems, extragradient
    for field-based ones, best_response otherwise.  A strategy/problem
    mismatch raises :class:`StrategyError`; an iterate escaping the trust
    radius raises :class:`DivergenceError`.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    name = choose_strategy(p) if strategy == "auto" else strategy
    if name not in _RUNNERS:
        raise StrategyError(f"unknown strategy {name!r}; choose from {STRATEGIES}")
    return _RUNNERS[name](p, rng)


@dataclass
class UniquenessReport:
    passed: bool
    max_pairwise: float
    trials: int
    points: list = field(default_factory=list)


def verify_uniqueness(
    p: InnerProblem,
    trials: int = 5,
    strategy: str = "auto",
    rng: Optional[np.random.Generator] = None,
) -> UniquenessReport:
    """Re-solve from random feasible starts; solutions must agree pairwise
    within 10 * tol_inner (the regime lam > theta has a unique solution)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = []
    for t in range(trials):
        start = p.x_init if t == 0 else p.omega.sample(rng)
        sol = solve_inner(replace(p, x_init=start), strategy=strategy, rng=rng)
        pts.append(sol.x)
    m = p.L.manifold
    worst = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            worst = max(worst, m.dist(pts[i], pts[j]))
    return UniquenessReport(worst <= 10.0 * p.tol_inner, worst, trials, pts)
