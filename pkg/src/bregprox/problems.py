"""Built-in problem library.

Each entry assembles a full run (manifold, payoffs, feasible set, Bregman
function, schedule, start, solver settings) plus its expected outcome, and
finishes well inside a CI-grade time budget.  Entries double as the
end-to-end fixtures for the convergence suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .bilevel import Schedule, SolverConfig
from .bregman import BregmanFunction, energy_bregman, sqnorm_bregman
from .equilibrium import (
    Bifunction,
    ConstraintSet,
    ball_constraint,
    box_constraint,
    make_minimization_bifunction,
    make_vi_bifunction,
    zero_bifunction,
)
from .geometry import EuclideanSpace, Hyperboloid, Manifold, Point, TangentVector


@dataclass
class ExpectedOutcome:
    coords: np.ndarray
    tolerance: float
    note: str = ""


@dataclass
class ProblemSetup:
    name: str
    description: str
    manifold: Manifold
    F: Bifunction
    Q: Bifunction
    omega: ConstraintSet
    bregman: BregmanFunction
    schedule: Schedule
    x0: Point
    config: SolverConfig
    expected: Optional[ExpectedOutcome] = None
    budget_seconds: float = 60.0
    references: list = dc_field(default_factory=list)
    output_dir: Optional[str] = None


def quadratic_scalar_field(manifold: EuclideanSpace, weights, center):
    """phi(x) = sum_i w_i * (x_i - c_i)^2 with its gradient oracle."""
    w = np.broadcast_to(np.asarray(weights, dtype=float), (manifold.dim,)).copy()
    c = np.broadcast_to(np.asarray(center, dtype=float), (manifold.dim,)).copy()

    def phi(p: Point) -> float:
        d = p.coords - c
        return float(w @ (d * d))

    def grad(p: Point) -> TangentVector:
        return TangentVector(p, 2.0 * w * (p.coords - c))

    return phi, grad


def distance_sq_field(manifold: Manifold, target: Point, weight: float = 0.5):
    """phi(x) = weight * d^2(x, target), valid on both backends."""

    def phi(p: Point) -> float:
        return weight * manifold.dist(p, target) ** 2

    def grad(p: Point) -> TangentVector:
        return manifold.log(p, target) * (-2.0 * weight)

    return phi, grad


def median_field(manifold: Manifold, anchors: list) -> Callable[[Point], TangentVector]:
    """Subgradient field of x -> sum_i d(x, a_i): minus the unit directions
    toward the anchors.  Monotone (gradient field of a geodesically convex
    function); singular at the anchors, so keep them outside the feasible set."""

    def V(p: Point) -> TangentVector:
        total = manifold.zero_tangent(p)
        for a in anchors:
            d = manifold.dist(p, a)
            if d < 1e-12:
                continue
            total = total - manifold.log(p, a) * (1.0 / d)
        return total

    return V


# ---------------------------------------------------------------------------
# library entries
# ---------------------------------------------------------------------------

# limit of the x2-recursion x2 <- (2*mu_k + x2)/(1 + 2*mu_k) from x2=-2 with
# mu_k = mu0/(k+1)^2:  1 - x2_inf = 3 / prod_m (1 + 2*mu0/m^2)
X2_LIMIT_MU1 = 1.0 - 3.0 * math.sqrt(2.0) * math.pi / math.sinh(math.sqrt(2.0) * math.pi)
X2_LIMIT_MU8 = 1.0 - 3.0 * 4.0 * math.pi / math.sinh(4.0 * math.pi)


def _bilevel_quadratic(mu0: float, name: str, description: str, x2_limit: float,
                       tol: float, max_iters: int) -> ProblemSetup:
    E = EuclideanSpace(2)
    phi, gphi = quadratic_scalar_field(E, [1.0, 0.0], [0.0, 0.0])
    Phi, gPhi = quadratic_scalar_field(E, [1.0, 1.0], [1.0, 1.0])
    F = make_minimization_bifunction(E, phi, gphi, "lower-quadratic")
    Q = make_minimization_bifunction(E, Phi, gPhi, "upper-quadratic")
    omega = box_constraint(E, [-5.0, -5.0], [5.0, 5.0])
    ref = E.point([0.0, 1.0])
    return ProblemSetup(
        name=name,
        description=description,
        manifold=E,
        F=F,
        Q=Q,
        omega=omega,
        bregman=sqnorm_bregman(E),
        schedule=Schedule.power(mu0, 2.0, 1.0, 0.0),
        x0=E.point([3.0, -2.0]),
        config=SolverConfig(
            strategy="prox_min",
            tol_inner=1e-10,
            tau_step=1e-6,
            max_iters=max_iters,
            seed=2024,
            references=[ref],
        ),
        expected=ExpectedOutcome(
            np.array([0.0, x2_limit]), tol,
            "limit of the exact subproblem recursion under this schedule",
        ),
        budget_seconds=30.0,
        references=[ref],
    )


def bilevel_quadratic() -> ProblemSetup:
    return _bilevel_quadratic(
        1.0,
        "bilevel_quadratic",
        "two-level quadratic on a box: lower level pins x1=0, upper level "
        "pulls toward (1,1); summable upper-level weights leave a residual "
        "upper-level gap",
        X2_LIMIT_MU1,
        2e-3,
        1500,
    )


def bilevel_quadratic_strong() -> ProblemSetup:
    return _bilevel_quadratic(
        8.0,
        "bilevel_quadratic_strong",
        "same geometry with an eight-fold upper-level weight: the iterates "
        "reach the upper-level optimum (0,1) to 1e-3 and the upper-level "
        "transfer condition holds on the tail",
        X2_LIMIT_MU8,
        1e-3,
        1200,
    )


def routine_formation() -> ProblemSetup:
    setup = _bilevel_quadratic(
        1.0,
        "routine_formation",
        "leader/follower quadratic preference alignment (identical dynamics "
        "to bilevel_quadratic under another name)",
        X2_LIMIT_MU1,
        2e-3,
        1500,
    )
    return setup


def classical_prox() -> ProblemSetup:
    E = EuclideanSpace(2)
    a = np.array([1.0, 2.0])
    phi, gphi = quadratic_scalar_field(E, [1.0, 1.0], a)
    F = make_minimization_bifunction(E, phi, gphi, "quadratic")
    Q = zero_bifunction(E)
    omega = box_constraint(E, [-10.0, -10.0], [10.0, 10.0])
    ref = E.point(a)
    return ProblemSetup(
        name="classical_prox",
        description="single-level quadratic: the run reproduces the "
        "closed-form proximal recursion x+ = (2a + lam*x)/(2 + lam)",
        manifold=E,
        F=F,
        Q=Q,
        omega=omega,
        bregman=sqnorm_bregman(E),
        schedule=Schedule.power(1.0, 2.0, 1.0, 0.0),
        x0=E.point([-4.0, 5.0]),
        config=SolverConfig(
            strategy="prox_min",
            tol_inner=1e-11,
            tau_step=1e-8,
            max_iters=200,
            seed=2024,
            references=[ref],
        ),
        expected=ExpectedOutcome(a, 1e-6, "unique minimizer of the quadratic"),
        budget_seconds=15.0,
        references=[ref],
    )


def hyperbolic_median() -> ProblemSetup:
    H = Hyperboloid(2)
    origin = H.origin()
    c = H.exp(origin, H.project_tangent(origin, np.array([0.0, 0.25, 0.10])))
    e1 = H.project_tangent(c, np.array([0.0, 1.0, 0.0]))
    e1 = e1 * (1.0 / H.norm(e1))
    e2 = H.project_tangent(c, np.array([0.0, 0.0, 1.0]))
    e2 = e2 - e1 * H.inner(c, e2, e1)
    e2 = e2 * (1.0 / H.norm(e2))
    r, psi = 1.2, 0.4
    anchors = [
        H.exp(c, e1 * (r * math.cos(psi + 2.0 * math.pi * i / 3.0))
              + e2 * (r * math.sin(psi + 2.0 * math.pi * i / 3.0)))
        for i in range(3)
    ]
    # three anchors at equal radius, 120 degrees apart: the geodesic median
    # is exactly the center c (the unit directions cancel there)
    F = make_vi_bifunction(H, median_field(H, anchors), declared_class="monotone",
                           name="median-field")
    phi_u, gphi_u = distance_sq_field(H, anchors[0], 0.5)
    Q = make_minimization_bifunction(H, phi_u, gphi_u, "preferred-anchor-pull")
    omega = ball_constraint(H, c, 0.8)
    x0 = H.exp(c, e1 * (0.5 * math.cos(1.0)) + e2 * (0.5 * math.sin(1.0)))
    return ProblemSetup(
        name="hyperbolic_median",
        description="geodesic median of three symmetric anchors on the "
        "hyperboloid with an upper-level pull toward one anchor, solved "
        "inside a geodesic ball",
        manifold=H,
        F=F,
        Q=Q,
        omega=omega,
        bregman=energy_bregman(H, c),
        schedule=Schedule.power(1.0, 2.0, 2.0, 0.0),
        x0=x0,
        config=SolverConfig(
            strategy="extragradient",
            tol_inner=1e-9,
            tau_step=1e-6,
            max_iters=3000,
            seed=2024,
            references=[c],
        ),
        expected=ExpectedOutcome(c.coords.copy(), 5e-3, "median = anchor centroid by symmetry"),
        budget_seconds=60.0,
        references=[c],
    )


PROBLEM_LIBRARY: dict = {
    "bilevel_quadratic": bilevel_quadratic,
    "bilevel_quadratic_strong": bilevel_quadratic_strong,
    "classical_prox": classical_prox,
    "routine_formation": routine_formation,
    "hyperbolic_median": hyperbolic_median,
}


def get_problem(name: str) -> ProblemSetup:
    if name not in PROBLEM_LIBRARY:
        raise KeyError(
            f"unknown problem {name!r}; available: {', '.join(sorted(PROBLEM_LIBRARY))}"
        )
    return PROBLEM_LIBRARY[name]()


def list_problems() -> list:
    """(name, description) pairs for the CLI listing."""
    return [(name, PROBLEM_LIBRARY[name]().description) for name in sorted(PROBLEM_LIBRARY)]
