"""Outer proximal loop and convergence diagnostics.

The solver iterates x_{k+1} into the equilibrium set of the regularized
payoff L_k = F + mu_k*Q + lam_k*<grad D(., x_k), log_.(y)>, warm-starting
each inner solve at x_k, and stops when the step distance collapses and the
iterate passes an equilibrium-residual check for the lower-level payoff.

Diagnostics instrument what the convergence theory bounds: the divergence
to reference equilibria must decay up to summable perturbations
(quasi-Fejer trace), step distances must vanish, and the upper-level
optimality transfer is monitored through the tail of
(lam_k/mu_k) * <grad D(x_{k+1}, x_k), log_{x_{k+1}}(y)> over reference
equilibria.  One solve is inherently sequential; independent solves may run
concurrently (all state is per-run, randomness flows from the seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bregman import BregmanFunction
from .equilibrium import (
    Bifunction,
    ConstraintSet,
    EPResidual,
    ep_residual,
    regularized_bifunction,
)
from .errors import ConfigurationError, DivergenceError
from .geometry import Point
from .subsolver import InnerProblem, InnerSolution, solve_inner


@dataclass(frozen=True)
class Schedule:
    """Outer weight sequences mu_k (upper level) and lam_k (regularizer).

    Valid schedules keep both positive and bounded, lam_k strictly above the
    declared undermonotonicity bound, and sum(mu_k / lam_k) finite.
    """

    mu: Callable[[int], float]
    lam: Callable[[int], float]
    theta_bound: float = 0.0

    @staticmethod
    def power(mu0: float = 1.0, p: float = 2.0, lam0: float = 1.0, theta: float = 0.0) -> "Schedule":
        """mu_k = mu0*(k+1)^-p with constant lam_k = lam0 (summable for p > 1)."""
        return Schedule(
            mu=lambda k: mu0 * (k + 1.0) ** (-p),
            lam=lambda k: lam0,
            theta_bound=theta,
        )


@dataclass
class ScheduleReport:
    ok: bool
    failures: list
    partial_sum: float
    tail_ratio: float
    max_mu: float
    max_lam: float


def validate_schedule(sched: Schedule, horizon: int = 100_000) -> ScheduleReport:
    """Check positivity, boundedness, lam_k > theta and summability of
    mu_k/lam_k over a finite horizon.

    Summability is judged by partial-sum stabilization: the increment over
    the last tenth of the horizon must stay below 1e-6 of the total.
    """
    if horizon < 100:
        raise ConfigurationError("validation horizon must be >= 100")
    failures = []
    ks = np.arange(horizon)
    mus = np.array([sched.mu(int(k)) for k in ks])
    lams = np.array([sched.lam(int(k)) for k in ks])
    if not np.all(np.isfinite(mus)) or not np.all(np.isfinite(lams)):
        failures.append("non-finite schedule values")
    if np.any(mus <= 0):
        failures.append("mu_k must be positive for all k")
    if np.any(lams <= 0):
        failures.append("lam_k must be positive for all k")
    if np.any(lams <= sched.theta_bound):
        k_bad = int(np.argmax(lams <= sched.theta_bound))
        failures.append(
            f"lam_k must strictly exceed the undermonotonicity bound theta="
            f"{sched.theta_bound} (violated at k={k_bad})"
        )
    if mus.max(initial=0.0) > 1e12 or lams.max(initial=0.0) > 1e12:
        failures.append("schedule values explode (boundedness)")
    ratios = mus / lams
    total = float(ratios.sum())
    tail = float(ratios[int(0.9 * horizon):].sum())
    tail_ratio = tail / total if total > 0 else 0.0
    if total > 0 and tail_ratio > 1e-6:
        failures.append(
            f"sum(mu_k/lam_k) does not stabilize (last-decade share {tail_ratio:.2e} > 1e-6)"
        )
    return ScheduleReport(
        not failures, failures, total, tail_ratio, float(mus.max()), float(lams.max())
    )


@dataclass
class InnerSummary:
    iterations: int
    gap: float
    strategy: str
    converged: bool

    @staticmethod
    def of(sol: InnerSolution) -> "InnerSummary":
        return InnerSummary(sol.iterations, sol.residual.gap, sol.strategy, sol.converged)


@dataclass
class IterationTrace:
    """Per-iteration record: the iterate, its step to the next one, the
    divergences to reference points, and the schedule weights used."""

    k: int
    x_k: Point
    step_dist: float
    bregman_step: float
    d_to_refs: dict
    inner: InnerSummary
    mu_k: float
    lambda_k: float
    limsup_term: Optional[float] = None


@dataclass
class SolveResult:
    x_final: Point
    status: str  # stopped_fixed_point | converged_step_tol | max_iters | inner_failure
    traces: list
    ep_f_residual: Optional[EPResidual]
    bilevel_residual: Optional[EPResidual]
    iterations: int = 0
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status in ("stopped_fixed_point", "converged_step_tol")


@dataclass
class SolverConfig:
    strategy: str = "auto"
    tol_inner: float = 1e-9
    max_inner_iters: int = 400
    tau_step: float = 1e-8
    tau_ep: float = 1e-6
    max_iters: int = 1000
    seed: int = 0
    ep_probes: int = 64
    final_probes: int = 200
    step_tol_window: int = 25
    schedule_horizon: int = 100_000
    zone_check_samples: int = 16
    references: list = field(default_factory=list)
    trace_mode: str = "full"  # full | thin (keep every 10th iterate)
    extragradient_step: Optional[float] = None
    divergence_radius: Optional[float] = None


def _limsup_term(b, m, x_next, x_prev, y, mu_k, lam_k) -> float:
    g = b.grad_first(x_next, x_prev)
    return (lam_k / mu_k) * m.inner(x_next, g, m.log(x_next, y))


def solve_bilevel(
    F: Bifunction,
    Q: Bifunction,
    omega: ConstraintSet,
    b: BregmanFunction,
    sched: Schedule,
    x0: Point,
    config: Optional[SolverConfig] = None,
) -> SolveResult:
    """Run the outer proximal loop from a feasible start.

    Stops with ``stopped_fixed_point`` when the step distance falls below
    tau_step and the iterate passes the lower-level equilibrium-residual
    check at tau_ep (the numerical version of "x_{k+1} = x_k and x_k is a
    lower-level equilibrium"); with ``converged_step_tol`` when steps stay
    below tau_step for a full window without passing that check.  Schedule
    violations and infeasible starts are configuration errors raised before
    iteration 0; inner-solver failures surface as ``inner_failure`` with
    partial traces.
    """
    config = config or SolverConfig()
    m = F.manifold
    rng = np.random.default_rng(config.seed)

    sreport = validate_schedule(sched, horizon=config.schedule_horizon)
    if not sreport.ok:
        raise ConfigurationError("invalid schedule: " + "; ".join(sreport.failures))
    if not omega.contains(x0):
        raise ConfigurationError("initial point is not feasible")
    for _ in range(config.zone_check_samples):
        probe = omega.sample(rng)
        if not b.zone.contains(probe):
            raise ConfigurationError(
                f"feasible set is not contained in the zone of {b.name}"
            )

    traces: list = []
    x = omega.project(x0)
    small_steps = 0
    status = "max_iters"
    message = ""
    k_done = 0

    for k in range(config.max_iters):
        mu_k, lam_k = sched.mu(k), sched.lam(k)
        L_k = regularized_bifunction(F, Q, mu_k, lam_k, x, b)
        problem = InnerProblem(
            L_k,
            omega,
            x_init=x,
            tol_inner=config.tol_inner,
            max_inner_iters=config.max_inner_iters,
            divergence_radius=config.divergence_radius,
            extragradient_step=config.extragradient_step,
        )
        try:
            inner = solve_inner(problem, strategy=config.strategy, rng=rng)
        except DivergenceError as exc:
            status, message = "inner_failure", str(exc)
            break
        if not inner.converged:
            status, message = "inner_failure", (
                f"inner solver did not reach tol_inner at k={k} "
                f"(gap {inner.residual.gap:.3e})"
            )
            break
        x_next = inner.x
        step = m.dist(x_next, x)
        bstep = b.distance(x_next, x)
        d_refs = {i: b.distance(ref, x) for i, ref in enumerate(config.references)}
        t_term = None
        if config.references and step > 0:
            t_term = _limsup_term(b, m, x_next, x, config.references[0], mu_k, lam_k)
        if config.trace_mode == "full" or k % 10 == 0:
            traces.append(
                IterationTrace(k, x, step, bstep, d_refs, InnerSummary.of(inner), mu_k, lam_k, t_term)
            )
        k_done = k + 1
        x = x_next
        if step <= config.tau_step:
            res = ep_residual(
                F, omega, x, probes=config.ep_probes, local_minimize=True, rng=rng
            )
            if res.gap >= -config.tau_ep:
                status = "stopped_fixed_point"
                break
            small_steps += 1
            if small_steps >= config.step_tol_window:
                status = "converged_step_tol"
                message = "steps collapsed without passing the equilibrium check"
                break
        else:
            small_steps = 0

    ep_f = ep_residual(F, omega, x, probes=config.final_probes, local_minimize=True, rng=rng)
    bilevel_res = _bilevel_residual(F, Q, omega, x, config, rng)
    return SolveResult(x, status, traces, ep_f, bilevel_res, iterations=k_done, message=message)


def _bilevel_residual(F, Q, omega, x_final, config, rng) -> EPResidual:
    """Upper-level gap of x_final over sampled lower-level equilibria."""
    members = []
    for _ in range(config.final_probes):
        y = omega.sample(rng)
        quick = ep_residual(F, omega, y, probes=16, local_minimize=False, rng=rng)
        if quick.gap >= -config.tau_ep:
            members.append(y)
    gap, worst = 0.0, x_final
    for y in members:
        v = Q(x_final, y)
        if v < gap:
            gap, worst = v, y
    return EPResidual(gap, worst, len(members))


# ---------------------------------------------------------------------------
# audits
# ---------------------------------------------------------------------------


def _iterates(traces, x_final) -> list:
    return [t.x_k for t in traces] + [x_final]


@dataclass
class FejerReport:
    passed: bool
    max_violation: float
    tail_oscillation: float
    rho_sum: float
    n_steps: int
    detail: str = ""


def fejer_audit(
    traces: list,
    x_final: Point,
    reference: Point,
    *,
    F: Bifunction,
    Q: Bifunction,
    omega: ConstraintSet,
    b: BregmanFunction,
    rho: Optional[Callable[[int], float]] = None,
    slack: float = 1e-8,
    tail_tol: float = 1e-3,
    reference_tol: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
) -> FejerReport:
    """Check the quasi-Fejer property of the run against a reference point.

    The reference must pass the lower-level equilibrium-residual check
    (otherwise the audit is refused).  The default perturbation sequence is
    rho_k = (mu_k/lam_k) * Q(x_{k+1}, reference), the exact term bounding
    the divergence increase; the test is

        D(ref, x_{k+1}) <= D(ref, x_k) + rho_k + slack  (for every k),

    plus a stabilization check: the last quarter of D(ref, x_k) must
    oscillate by no more than tail_tol.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    ref_check = ep_residual(F, omega, reference, probes=128, local_minimize=True, rng=rng)
    if ref_check.gap < -reference_tol:
        raise ConfigurationError(
            f"audit refused: reference fails the equilibrium check (gap {ref_check.gap:.3e})"
        )
    xs = _iterates(traces, x_final)
    if len(xs) < 2:
        return FejerReport(True, 0.0, 0.0, 0.0, 0, "insufficient data (single iterate)")
    ds = [b.distance(reference, xk) for xk in xs]
    max_violation = -math.inf
    rho_sum = 0.0
    for i, t in enumerate(traces):
        rho_k = rho(t.k) if rho is not None else (t.mu_k / t.lambda_k) * Q(xs[i + 1], reference)
        rho_sum += max(rho_k, 0.0)
        max_violation = max(max_violation, ds[i + 1] - ds[i] - rho_k)
    tail = ds[-max(2, len(ds) // 4):]
    osc = max(tail) - min(tail)
    passed = max_violation <= slack and osc <= tail_tol
    return FejerReport(passed, max_violation, osc, rho_sum, len(traces))


@dataclass
class StepDecayReport:
    passed: bool
    final_step: float
    final_bregman: float
    window_maxima_decreasing: bool
    insufficient_data: bool = False


def step_decay_audit(
    traces: list,
    tol_step: float = 1e-6,
    tol_bregman: float = 1e-8,
) -> StepDecayReport:
    """Verify that step distances and step divergences vanish.

    Requires the final recorded values to sit below the tolerances and the
    windowed maxima of the step sequence to be nonincreasing.  Runs with
    fewer than 10 iterations pass vacuously, flagged as insufficient data.
    """
    steps = [t.step_dist for t in traces]
    bsteps = [t.bregman_step for t in traces]
    if len(steps) < 10:
        return StepDecayReport(True, steps[-1] if steps else 0.0,
                               bsteps[-1] if bsteps else 0.0, True, insufficient_data=True)
    w = max(5, len(steps) // 10)
    maxima = [max(steps[i: i + w]) for i in range(0, len(steps) - w + 1, w)]
    decreasing = all(b <= a * (1.0 + 1e-9) + 1e-15 for a, b in zip(maxima, maxima[1:]))
    passed = steps[-1] <= tol_step and bsteps[-1] <= tol_bregman and decreasing
    return StepDecayReport(passed, steps[-1], bsteps[-1], decreasing)


@dataclass
class LimsupReport:
    passed: bool
    tail_values: list
    detail: str = ""


def limsup_condition_audit(
    traces: list,
    x_final: Point,
    y_refs: list,
    *,
    F: Bifunction,
    omega: ConstraintSet,
    b: BregmanFunction,
    tol: float = 1e-3,
    reference_tol: float = 1e-6,
    rng: Optional[np.random.Generator] = None,
) -> LimsupReport:
    """Tail check of the upper-level transfer condition.

    For each reference equilibrium y, computes
    t_k = (lam_k/mu_k) * <grad D(x_{k+1}, x_k), log_{x_{k+1}}(y)> and passes
    iff the running maximum over the last quarter of iterations stays below
    ``tol``.  A finite probe of a limit superior: advisory by nature, but
    a clear failure explains a run that reached the lower-level set without
    optimizing the upper level.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    m = F.manifold
    xs = _iterates(traces, x_final)
    tails = []
    for y in y_refs:
        check = ep_residual(F, omega, y, probes=128, local_minimize=True, rng=rng)
        if check.gap < -reference_tol:
            raise ConfigurationError(
                f"audit refused: reference fails the equilibrium check (gap {check.gap:.3e})"
            )
        ts = [
            _limsup_term(b, m, xs[i + 1], xs[i], y, t.mu_k, t.lambda_k)
            for i, t in enumerate(traces)
        ]
        tail = ts[-max(1, len(ts) // 4):]
        tails.append(max(tail))
    passed = all(t <= tol for t in tails)
    return LimsupReport(passed, tails)
