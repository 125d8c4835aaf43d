"""Bifunctions, constraint sets and equilibrium diagnostics.

An equilibrium problem asks for x* in a closed convex set such that
K(x*, y) >= 0 for every feasible y.  Minimization (K = phi(y) - phi(x)) and
variational inequalities (K = <V(x), log_x y>) are the two structured
families; the regularized bifunction glues a lower-level K, a weighted
upper-level K and a scaled Bregman-gradient term into the inner subproblem
solved at each outer iteration.

Monotonicity checking here is sample-based falsification, never
certification: a pass means no counterexample was found in the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bregman import BregmanFunction
from .descent import geodesic_descent
from .errors import GeometryError, ParameterError
from .geometry import EuclideanSpace, Manifold, Point, TangentVector

MONO_TOL = 1e-10


@dataclass(frozen=True)
class Bifunction:
    """Equilibrium payoff K(x, y) with optional structure oracles.

    ``grad_second`` is the gradient of y -> K(x, y) at y. ``first_field`` is
    the first-argument operator V(x) used by field-based solvers: the VI
    field for VI-type payoffs, grad phi for minimization type.  ``kind``
    records the structured family ("minimization", "vi", "regularized",
    "custom"); strategies use it to decide applicability.
    """

    manifold: Manifold
    pay: Callable[[Point, Point], float]
    kind: str = "custom"
    grad_second: Optional[Callable[[Point, Point], TangentVector]] = None
    first_field: Optional[Callable[[Point], TangentVector]] = None
    declared_class: str = "unknown"
    theta: float = 0.0
    phi: Optional[Callable[[Point], float]] = None
    grad_phi: Optional[Callable[[Point], TangentVector]] = None
    name: str = ""
    components: Optional[dict] = None

    def __call__(self, x: Point, y: Point) -> float:
        return self.pay(x, y)


def make_minimization_bifunction(
    manifold: Manifold,
    phi: Callable[[Point], float],
    grad_phi: Callable[[Point], TangentVector],
    name: str = "minimization",
) -> Bifunction:
    """K(x, y) = phi(y) - phi(x), whose equilibria are the minimizers of phi.

    The symmetry sum vanishes identically, so the payoff is monotone.
    """

    def pay(x, y):
        return phi(y) - phi(x)

    return Bifunction(
        manifold,
        pay,
        kind="minimization",
        grad_second=lambda x, y: grad_phi(y),
        first_field=grad_phi,
        declared_class="monotone",
        phi=phi,
        grad_phi=grad_phi,
        name=name,
    )


def make_vi_bifunction(
    manifold: Manifold,
    V: Callable[[Point], TangentVector],
    declared_class: str = "unknown",
    theta: float = 0.0,
    name: str = "vi",
) -> Bifunction:
    """K(x, y) = <V(x), log_x(y)>: the variational-inequality payoff.

    y -> K(x, y) is linear along geodesics through x, hence convex there;
    the second-argument gradient comes from the adjoint differential of
    log_x, exact on both backends.
    """

    def pay(x, y):
        return manifold.inner(x, V(x), manifold.log(x, y))

    return Bifunction(
        manifold,
        pay,
        kind="vi",
        grad_second=lambda x, y: manifold.pairing_gradient(x, y, V(x)),
        first_field=V,
        declared_class=declared_class,
        theta=theta,
        name=name,
    )


def zero_bifunction(manifold: Manifold, name: str = "zero") -> Bifunction:
    return make_minimization_bifunction(
        manifold, lambda x: 0.0, lambda x: manifold.zero_tangent(x), name=name
    )


def regularized_bifunction(
    F: Bifunction,
    Q: Bifunction,
    mu: float,
    lam: float,
    z: Point,
    b: BregmanFunction,
) -> Bifunction:
    """Inner-subproblem payoff F + mu*Q + lam*<grad D(., z), log_.(y)>.

    The Bregman term uses the transported-gradient formula, which makes the
    payoff monotone whenever F + mu*Q is theta-undermonotone with
    theta <= lam (on the flat backend exactly; on the curved backend up to
    the holonomy carried by grad h at z).  Requires mu, lam > 0.
    """
    if mu <= 0 or lam <= 0:
        raise ParameterError(f"regularization weights must be positive (mu={mu}, lam={lam})")
    m = F.manifold

    def reg_grad(x: Point) -> TangentVector:
        return b.grad_first(x, z)

    def pay(x, y):
        return F(x, y) + mu * Q(x, y) + lam * m.inner(x, reg_grad(x), m.log(x, y))

    grad_second = None
    if F.grad_second is not None and Q.grad_second is not None:
        def grad_second(x, y):
            g = F.grad_second(x, y) + Q.grad_second(x, y) * mu
            return g + m.pairing_gradient(x, y, reg_grad(x)) * lam

    first_field = None
    if F.first_field is not None and Q.first_field is not None:
        def first_field(x):
            return F.first_field(x) + Q.first_field(x) * mu + reg_grad(x) * lam

    return Bifunction(
        m,
        pay,
        kind="regularized",
        grad_second=grad_second,
        first_field=first_field,
        declared_class="monotone" if F.theta + mu * Q.theta <= lam else "unknown",
        name=f"regularized({F.name}+{mu}*{Q.name})",
        components={"F": F, "Q": Q, "mu": mu, "lam": lam, "z": z, "bregman": b},
    )


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    """Closed convex feasible set with membership/projection/sampling oracles."""

    manifold: Manifold
    membership: Callable[[Point], bool]
    project: Callable[[Point], Point]
    sample: Callable[[np.random.Generator], Point]
    description: str = "constraint set"

    def contains(self, p: Point) -> bool:
        return self.membership(p)


def box_constraint(manifold: EuclideanSpace, lo, hi) -> ConstraintSet:
    """Axis-aligned box on the flat backend."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (manifold.dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (manifold.dim,)).copy()
    if manifold.kind != "euclidean":
        raise GeometryError("box constraints require the euclidean backend")
    if np.any(lo >= hi):
        raise ParameterError("box bounds must satisfy lo < hi componentwise")

    def membership(p: Point) -> bool:
        return bool(np.all(p.coords >= lo - 1e-10) and np.all(p.coords <= hi + 1e-10))

    def project(p: Point) -> Point:
        c = p.coords
        if np.all(c >= lo) and np.all(c <= hi):
            return p
        return manifold.point_unchecked(np.clip(c, lo, hi))

    def sample(rng: np.random.Generator) -> Point:
        return manifold.point_unchecked(rng.uniform(lo, hi))

    return ConstraintSet(manifold, membership, project, sample, f"box[{lo}, {hi}]")


def ball_constraint(manifold: Manifold, center: Point, radius: float) -> ConstraintSet:
    """Closed geodesic ball; convex on both backends, closed-form projection."""
    if radius <= 0:
        raise ParameterError("ball radius must be positive")

    def membership(p: Point) -> bool:
        return manifold.dist(p, center) <= radius + 1e-10

    def project(p: Point) -> Point:
        d = manifold.dist(p, center)
        if d <= radius:
            return p
        return manifold.exp(center, manifold.log(center, p) * (radius / d))

    def sample(rng: np.random.Generator) -> Point:
        u = manifold.random_tangent(rng, center, 1.0)
        nu = max(manifold.norm(u), 1e-12)
        r = radius * rng.uniform() ** (1.0 / manifold.dim)
        return manifold.exp(center, u * (r / nu))

    return ConstraintSet(manifold, membership, project, sample, f"geodesic ball(r={radius})")


def halfspace_constraint(manifold: EuclideanSpace, normal, offset: float) -> ConstraintSet:
    """{x : <normal, x> <= offset} on the flat backend (unbounded)."""
    if manifold.kind != "euclidean":
        raise GeometryError("halfspace constraints require the euclidean backend")
    a = np.asarray(normal, dtype=float)
    nn = float(a @ a)
    if nn <= 0:
        raise ParameterError("halfspace normal must be nonzero")

    def membership(p: Point) -> bool:
        return float(a @ p.coords) <= offset + 1e-10

    def project(p: Point) -> Point:
        excess = float(a @ p.coords) - offset
        if excess <= 0:
            return p
        return manifold.point_unchecked(p.coords - (excess / nn) * a)

    def sample(rng: np.random.Generator) -> Point:
        scale = math.exp(rng.uniform(-1.0, 3.0))
        return project(manifold.point(rng.normal(size=manifold.dim) * scale))

    return ConstraintSet(manifold, membership, project, sample, "halfspace")


# ---------------------------------------------------------------------------
# equilibrium residuals and class/assumption diagnostics
# ---------------------------------------------------------------------------


@dataclass
class EPResidual:
    """inf over probes of K(x, y): the sampled equilibrium gap at x.

    gap >= -tol accepts x as an approximate equilibrium; since K(x, x) = 0
    the gap of an exact solution is 0.
    """

    gap: float
    worst_y: Point
    probes: int


def ep_residual(
    K: Bifunction,
    omega: ConstraintSet,
    x: Point,
    probes: int = 64,
    local_minimize: bool = False,
    rng: Optional[np.random.Generator] = None,
    descent_iters: int = 200,
) -> EPResidual:
    """Probe the equilibrium gap of x: random feasible points, optionally
    refined by a descent run on y -> K(x, y) started from the worst probe."""
    rng = rng if rng is not None else np.random.default_rng(0)
    best_val = 0.0  # y = x is always an admissible probe and K(x, x) = 0
    best_y = x
    total = 1
    for _ in range(probes):
        y = omega.sample(rng)
        v = K(x, y)
        total += 1
        if v < best_val:
            best_val, best_y = v, y
    if local_minimize and K.grad_second is not None:
        res = geodesic_descent(
            lambda y: K(x, y),
            lambda y: K.grad_second(x, y),
            omega,
            best_y,
            tol=1e-10,
            max_iters=descent_iters,
        )
        total += res.iterations
        v = K(x, res.x)
        if v < best_val:
            best_val, best_y = v, res.x
    return EPResidual(best_val, best_y, total)


@dataclass
class ClassCheck:
    passed: bool
    max_violation: float
    counterexample: Optional[tuple] = None


@dataclass
class MonotonicityReport:
    """Sampled necessary-condition tests for the three payoff classes.

    A pass reports the absence of counterexamples in the sample budget and
    certifies nothing beyond it.
    """

    monotone: ClassCheck
    pseudomonotone: ClassCheck
    undermonotone: ClassCheck
    theta: float
    samples: int


def check_monotonicity_class(
    K: Bifunction,
    omega: ConstraintSet,
    b: BregmanFunction,
    theta: float,
    samples: int = 500,
    rng: Optional[np.random.Generator] = None,
) -> MonotonicityReport:
    """Hunt for counterexamples to monotone / pseudomonotone /
    theta-undermonotone behaviour over sampled feasible pairs.

    The undermonotone bound uses <-grad h(x) + P_{y->x} grad h(y), log_x y>,
    which equals D_h(x,y) + D_h(y,x) exactly on both backends.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    mono = ClassCheck(True, 0.0)
    pseudo = ClassCheck(True, 0.0)
    under = ClassCheck(True, 0.0)
    for _ in range(samples):
        x, y = omega.sample(rng), omega.sample(rng)
        kxy, kyx = K(x, y), K(y, x)
        s = kxy + kyx
        if s > MONO_TOL and s > mono.max_violation:
            mono = ClassCheck(False, s, (x, y, s))
        if kxy >= 0.0 and kyx > MONO_TOL and kyx > pseudo.max_violation:
            pseudo = ClassCheck(False, kyx, (x, y, kyx))
        bound = theta * b.symmetric_pairing(x, y) + MONO_TOL
        if s > bound and s - bound > under.max_violation:
            under = ClassCheck(False, s - bound, (x, y, s - bound))
    return MonotonicityReport(mono, pseudo, under, theta, samples)


@dataclass
class AssumptionsReport:
    """Advisory finite checks of the solvability conditions.

    ``hull_covering``: sampled geodesic convex combinations of feasible
    points must land in some sublevel set {x : K(y_i, x) <= 0}.
    ``tail_condition``: along feasible sequences escaping to infinity, some
    sampled candidate eventually satisfies K(z_j, x*) <= 0.  Both are finite
    probes of infinite statements.
    """

    hull_covering_passed: bool
    hull_failures: int
    hull_points: int
    tail_passed: bool
    tail_applicable: bool
    detail: str = ""


def check_assumptions_on_samples(
    K: Bifunction,
    omega: ConstraintSet,
    budget: int = 200,
    rng: Optional[np.random.Generator] = None,
    base_point: Optional[Point] = None,
) -> AssumptionsReport:
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    m = K.manifold
    z0 = base_point if base_point is not None else omega.sample(rng)

    # hull covering over balls of growing radius around z0
    failures = 0
    tested = 0
    rounds = max(4, budget // 16)
    for _ in range(rounds):
        radius = float(rng.integers(1, 4))
        members = []
        for _ in range(40):
            y = omega.sample(rng)
            if m.dist(y, z0) <= radius:
                members.append(y)
            if len(members) >= int(rng.integers(3, 6)):
                break
        if len(members) < 2:
            continue
        for _ in range(8):
            # iterated geodesic combination stays in the convex hull
            hull = members[int(rng.integers(len(members)))]
            for yi in members:
                hull = m.geodesic_point(hull, yi, float(rng.uniform(0.0, 1.0)))
            tested += 1
            if not any(K(yi, hull) <= MONO_TOL for yi in members):
                failures += 1

    # tail condition along escaping feasible rays (needs an unbounded set)
    applicable = False
    tail_ok = True
    detail = ""
    directions = [m.random_tangent(rng, z0, 1.0) for _ in range(6)]
    candidates = [z0] + [omega.sample(rng) for _ in range(12)]
    escaping = []
    for u in directions:
        nu = max(m.norm(u), 1e-12)
        ray = [omega.project(m.exp(z0, u * (r / nu))) for r in (4.0, 16.0, 64.0, 256.0)]
        dists = [m.dist(p, z0) for p in ray]
        if dists[-1] > 100.0 and all(d2 > d1 for d1, d2 in zip(dists, dists[1:])):
            escaping.append(ray)
    if escaping:
        applicable = True
        for ray in escaping:
            ok = any(all(K(zj, xs) <= MONO_TOL for zj in ray[1:]) for xs in candidates)
            if not ok:
                tail_ok = False
                detail = "no sampled candidate dominates an escaping sequence"
                break
    else:
        detail = "feasible set bounded within the probe radius; tail condition vacuous"

    return AssumptionsReport(
        hull_covering_passed=failures == 0,
        hull_failures=failures,
        hull_points=tested,
        tail_passed=tail_ok,
        tail_applicable=applicable,
        detail=detail,
    )


@dataclass
class ExistenceReport:
    found: bool
    candidate: Point
    gap: float
    scanned: int


def existence_diagnostic(
    K: Bifunction,
    omega: ConstraintSet,
    budget: int = 64,
    rng: Optional[np.random.Generator] = None,
    tol: float = 1e-6,
) -> ExistenceReport:
    """Grid/sample search for an approximate equilibrium: advisory evidence
    that the problem admits a solution on the feasible set."""
    rng = rng if rng is not None else np.random.default_rng(0)
    best = None
    best_gap = -math.inf
    probes = max(16, budget // 4)
    for _ in range(budget):
        cand = omega.sample(rng)
        res = ep_residual(K, omega, cand, probes=probes, local_minimize=False, rng=rng)
        if res.gap > best_gap:
            best_gap, best = res.gap, cand
    if best is not None and K.grad_second is not None:
        # refine the most promising candidate: equilibria of structured
        # payoffs are fixed points of y -> argmin K(x, y)
        res = geodesic_descent(
            lambda y: K(best, y), lambda y: K.grad_second(best, y), omega, best, tol=1e-10
        )
        gap2 = ep_residual(K, omega, res.x, probes=4 * probes, local_minimize=True, rng=rng).gap
        if gap2 > best_gap:
            best_gap, best = gap2, res.x
    return ExistenceReport(best_gap >= -tol, best, best_gap, budget)
