"""Independent numerical oracles used to freeze expected values.

These deliberately avoid the library's closed forms: geodesics and parallel
transport are obtained by high-order ODE integration in the ambient space
(DOP853 at rtol/atol 1e-12/1e-13, beyond the 1e-10 the assertions need), and
proximal trajectories come from hand-derived recursions.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp


def mink(a, b) -> float:
    return float(-a[0] * b[0] + a[1:] @ b[1:])


def hyperboloid_geodesic_ode(x0: np.ndarray, v0: np.ndarray, t_end: float = 1.0) -> np.ndarray:
    """Integrate the ambient geodesic equation x'' = <x',x'>_L x."""
    n = x0.size

    def rhs(t, s):
        p, q = s[:n], s[n:]
        return np.concatenate([q, mink(q, q) * p])

    sol = solve_ivp(
        rhs, (0.0, t_end), np.concatenate([x0, v0]),
        method="DOP853", rtol=1e-12, atol=1e-13,
    )
    return sol.y[:n, -1]


def hyperboloid_transport_ode(x0: np.ndarray, v_geo: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """Parallel transport of w0 along the geodesic gamma(t)=exp_{x0}(t v_geo):
    the ambient equation is W' = <W, gamma'>_L gamma."""
    n = x0.size
    speed = np.sqrt(mink(v_geo, v_geo))

    def gamma(t):
        if speed < 1e-14:
            return x0, v_geo
        g = np.cosh(t * speed) * x0 + np.sinh(t * speed) / speed * v_geo
        gp = speed * np.sinh(t * speed) * x0 + np.cosh(t * speed) * v_geo
        return g, gp

    def rhs(t, w):
        g, gp = gamma(t)
        return mink(w, gp) * g

    sol = solve_ivp(rhs, (0.0, 1.0), w0, method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1]


def prox_recursion(a: np.ndarray, x0: np.ndarray, lam_of_k, n_iters: int) -> list:
    """Closed-form proximal trajectory for phi(x) = ||x - a||^2:
    x_{k+1} = (2a + lam_k x_k) / (2 + lam_k)."""
    xs = [np.asarray(x0, dtype=float)]
    for k in range(n_iters):
        lam = lam_of_k(k)
        xs.append((2.0 * a + lam * xs[-1]) / (2.0 + lam))
    return xs


def bilevel_quadratic_recursion(x0, mu_of_k, lam_of_k, n_iters: int) -> list:
    """Exact subproblem solutions for the two-level quadratic
    (lower phi = x1^2, upper Phi = (x1-1)^2 + (x2-1)^2, interior iterates):
    x1 <- (2 mu + lam x1) / (2 + 2 mu + lam),  x2 <- (2 mu + lam x2) / (2 mu + lam)."""
    xs = [np.asarray(x0, dtype=float)]
    for k in range(n_iters):
        mu, lam = mu_of_k(k), lam_of_k(k)
        x1 = (2.0 * mu + lam * xs[-1][0]) / (2.0 + 2.0 * mu + lam)
        x2 = (2.0 * mu + lam * xs[-1][1]) / (2.0 * mu + lam)
        xs.append(np.array([x1, x2]))
    return xs


def central_difference_gradient(fun, m, x, step: float = 1e-5):
    """Tangent-space central differences of a scalar field at x."""
    import math

    basis = []
    for i in range(m.ambient_dim):
        e = np.zeros(m.ambient_dim)
        e[i] = 1.0
        t = m.project_tangent(x, e)
        for b in basis:
            t = t - b * m.inner(x, t, b)
        nn = m.inner(x, t, t)
        if nn > 1e-12:
            basis.append(t * (1.0 / math.sqrt(nn)))
    comps = np.zeros(m.ambient_dim)
    for b in basis:
        d = (fun(m.exp(x, b * step)) - fun(m.exp(x, b * -step))) / (2.0 * step)
        comps = comps + d * b.components
    return m.project_tangent(x, comps)
