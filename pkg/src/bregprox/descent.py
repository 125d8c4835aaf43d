"""Constrained first-order minimization along geodesics.

Shared primitive for the inner-solver strategies: projected geodesic descent
with Armijo backtracking.  Needs only a value oracle, a gradient oracle, and
an object exposing ``project`` (duck-typed constraint set).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Manifold, Point, TangentVector

# Armijo defaults: initial step, shrink factor, sufficient-decrease slope.
ARMIJO_INIT = 1.0
ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-16
SQRT_EPS = 1.49e-8


@dataclass
class DescentResult:
    x: Point
    converged: bool
    iterations: int
    stationarity: float


def geodesic_descent(
    value: Callable[[Point], float],
    gradient: Callable[[Point], TangentVector],
    omega,
    x0: Point,
    tol: float = 1e-8,
    max_iters: int = 500,
    armijo_init: float = ARMIJO_INIT,
    armijo_shrink: float = ARMIJO_SHRINK,
    armijo_slope: float = ARMIJO_SLOPE,
) -> DescentResult:
    """Minimize a geodesically convex function over a closed convex set.

    Steps follow exp_x(-s * grad f(x)) and are projected back onto the set;
    s is found by backtracking until the projected-step decrease condition

        f(y_s) <= f(x) - (slope / s) * d(x, y_s)^2

    holds.  Convergence is declared when the unit-step projected-gradient
    displacement d(x, project(exp_x(-grad f(x)))) falls below ``tol``.
    Accepted steps never increase the objective.
    """
    m: Manifold = x0.manifold
    x = omega.project(x0)
    fx = value(x)
    stat = float("inf")
    s_warm = armijo_init
    for it in range(max_iters):
        g = gradient(x)
        y_unit = omega.project(m.exp(x, -g))
        stat = m.dist(x, y_unit)
        if stat <= tol:
            return DescentResult(x, True, it, stat)
        if stat <= SQRT_EPS * (1.0 + float(np.abs(x.coords).max())):
            # steps this small sit below the resolution of objective values
            # built from O(|x|^2) terms; only the gradient remains reliable
            return _polish(gradient, omega, m, x, g, stat, s_warm, tol,
                           max_iters - it, it, armijo_shrink)
        # backtrack from the last accepted step (allowed to grow one notch)
        s = min(armijo_init, s_warm / armijo_shrink)
        accepted = None
        while s >= MIN_STEP:
            if s == 1.0:
                y, dxy = y_unit, stat
            else:
                y = omega.project(m.exp(x, g * (-s)))
                dxy = m.dist(x, y)
            fy = value(y)
            required = (armijo_slope / s) * dxy * dxy
            if required <= 32.0 * 2.2e-16 * (abs(fx) + abs(fy)):
                # the certifiable decrease sits below the objective's float
                # noise; value comparisons are meaningless from here on
                return _polish(gradient, omega, m, x, g, stat, s_warm, tol,
                               max_iters - it, it, armijo_shrink)
            if dxy > 0 and fy <= fx - required:
                accepted, fx, s_warm = y, fy, s
                break
            s *= armijo_shrink
        if accepted is None:
            # objective differences fell below the float noise floor; finish
            # with fixed-step gradient polishing judged by stationarity only
            return _polish(gradient, omega, m, x, g, stat, s_warm, tol,
                           max_iters - it, it, armijo_shrink)
        x = accepted
    g = gradient(x)
    stat = m.dist(x, omega.project(m.exp(x, -g)))
    return DescentResult(x, stat <= tol, max_iters, stat)


def _polish(gradient, omega, m, x, g, stat, s, tol, budget, done, shrink) -> DescentResult:
    it = done
    for _ in range(max(budget, 0)):
        it += 1
        y = omega.project(m.exp(x, g * (-s)))
        g_y = gradient(y)
        stat_y = m.dist(y, omega.project(m.exp(y, -g_y)))
        if stat_y >= stat:
            s *= shrink
            if s < MIN_STEP:
                break
            continue
        x, g, stat = y, g_y, stat_y
        if stat <= tol:
            return DescentResult(x, True, it, stat)
    return DescentResult(x, stat <= tol, it, stat)
