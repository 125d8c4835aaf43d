"""Declarative run configuration.

A run is described by a TOML file: manifold backend, Bregman function,
problem (a library entry or inline builders with numeric parameters),
weight schedule, solver settings, and output location.  Parsing is eager
and every violation raises :class:`ConfigurationError` naming the offending
key, before any iteration starts.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bilevel import Schedule, SolverConfig
from .bregman import BregmanFunction, builtin_bregman, coercive_augment
from .equilibrium import (
    Bifunction,
    ConstraintSet,
    ball_constraint,
    box_constraint,
    halfspace_constraint,
    make_minimization_bifunction,
    make_vi_bifunction,
    zero_bifunction,
)
from .errors import ConfigurationError
from .geometry import Manifold, Point, TangentVector, manifold_from_name
from .problems import (
    PROBLEM_LIBRARY,
    ProblemSetup,
    ExpectedOutcome,
    distance_sq_field,
    median_field,
    quadratic_scalar_field,
)

VALID_BREGMAN_NAMES = ("energy", "sqnorm", "negentropy")
VALID_FIELD_TYPES = ("quadratic", "distance_sq", "vi_linear", "vi_scaled", "median", "zero")
VALID_CONSTRAINTS = ("box", "ball", "halfspace")


def _require(cond: bool, key: str, message: str) -> None:
    if not cond:
        raise ConfigurationError(f"[{key}] {message}")


def _point(manifold: Manifold, raw, key: str) -> Point:
    try:
        return manifold.point(np.asarray(raw, dtype=float))
    except Exception as exc:
        raise ConfigurationError(f"[{key}] not a valid {manifold.kind} point: {exc}") from exc


def _build_payoff(manifold: Manifold, spec: dict, key: str) -> Bifunction:
    kind = spec.get("type")
    _require(kind in VALID_FIELD_TYPES, f"{key}.type",
             f"unknown payoff type {kind!r}; valid: {', '.join(VALID_FIELD_TYPES)}")
    if kind == "zero":
        return zero_bifunction(manifold)
    if kind == "quadratic":
        _require(manifold.kind == "euclidean", f"{key}.type",
                 "quadratic payoffs need the euclidean backend")
        phi, grad = quadratic_scalar_field(
            manifold, spec.get("weights", 1.0), spec.get("center", 0.0)
        )
        return make_minimization_bifunction(manifold, phi, grad, name=f"{key}:quadratic")
    if kind == "distance_sq":
        target = _point(manifold, spec["target"], f"{key}.target")
        phi, grad = distance_sq_field(manifold, target, float(spec.get("weight", 0.5)))
        return make_minimization_bifunction(manifold, phi, grad, name=f"{key}:distance_sq")
    if kind == "vi_linear":
        _require(manifold.kind == "euclidean", f"{key}.type",
                 "linear fields need the euclidean backend")
        A = np.asarray(spec["matrix"], dtype=float)
        _require(A.shape == (manifold.dim, manifold.dim), f"{key}.matrix",
                 f"expected a {manifold.dim}x{manifold.dim} matrix")
        offset = np.asarray(spec.get("offset", np.zeros(manifold.dim)), dtype=float)
        sym = 0.5 * (A + A.T)
        theta = max(0.0, -float(np.linalg.eigvalsh(sym).min()))
        return make_vi_bifunction(
            manifold,
            lambda p: TangentVector(p, A @ p.coords + offset),
            declared_class="monotone" if theta == 0.0 else "undermonotone",
            theta=theta,
            name=f"{key}:vi_linear",
        )
    if kind == "vi_scaled":
        _require(manifold.kind == "euclidean", f"{key}.type",
                 "the scaled field needs the euclidean backend")
        return make_vi_bifunction(
            manifold,
            lambda p: TangentVector(p, p.coords / (1.0 + float(p.coords @ p.coords))),
            declared_class="pseudomonotone",
            name=f"{key}:vi_scaled",
        )
    anchors = [_point(manifold, a, f"{key}.anchors") for a in spec["anchors"]]
    _require(len(anchors) >= 2, f"{key}.anchors", "median fields need at least two anchors")
    return make_vi_bifunction(
        manifold, median_field(manifold, anchors), declared_class="monotone",
        name=f"{key}:median",
    )


def _build_constraint(manifold: Manifold, spec: dict, key: str) -> ConstraintSet:
    kind = spec.get("type")
    _require(kind in VALID_CONSTRAINTS, f"{key}.type",
             f"unknown constraint type {kind!r}; valid: {', '.join(VALID_CONSTRAINTS)}")
    if kind == "box":
        return box_constraint(manifold, spec["lo"], spec["hi"])
    if kind == "ball":
        center = _point(manifold, spec["center"], f"{key}.center")
        return ball_constraint(manifold, center, float(spec["radius"]))
    return halfspace_constraint(manifold, spec["normal"], float(spec["offset"]))


def _build_bregman(manifold: Manifold, spec: dict) -> BregmanFunction:
    name = spec.get("name", "energy")
    _require(
        name in VALID_BREGMAN_NAMES,
        "bregman.name",
        f"unknown bregman name {name!r}; valid names: {', '.join(VALID_BREGMAN_NAMES)}",
    )
    anchor = None
    if "anchor" in spec:
        anchor = _point(manifold, spec["anchor"], "bregman.anchor")
    b = builtin_bregman(name, manifold, anchor)
    if "augment" in spec:
        b = coercive_augment(b, _point(manifold, spec["augment"], "bregman.augment"))
    return b


def load_run_config(path) -> ProblemSetup:
    """Parse a TOML run file into a fully assembled problem setup."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}")  # tomllib reports line/column
    return assemble(raw, source=str(path))


def assemble(raw: dict, source: str = "<config>") -> ProblemSetup:
    problem_spec = raw.get("problem", {})
    library_name = problem_spec.get("library")

    if library_name is not None:
        _require(
            library_name in PROBLEM_LIBRARY,
            "problem.library",
            f"unknown problem {library_name!r}; available: {', '.join(sorted(PROBLEM_LIBRARY))}",
        )
        setup = PROBLEM_LIBRARY[library_name]()
        setup = _apply_overrides(setup, raw)
        return _apply_output(setup, raw)

    _require("manifold" in raw, "manifold", "section required for inline problems")
    mspec = raw["manifold"]
    _require("kind" in mspec and "dim" in mspec, "manifold", "needs kind and dim")
    try:
        manifold = manifold_from_name(mspec["kind"], int(mspec["dim"]))
    except Exception as exc:
        raise ConfigurationError(f"[manifold] {exc}") from exc

    bregman = _build_bregman(manifold, raw.get("bregman", {}))
    _require("lower" in problem_spec, "problem.lower", "inline problems need a lower payoff")
    F = _build_payoff(manifold, problem_spec["lower"], "problem.lower")
    Q = (
        _build_payoff(manifold, problem_spec["upper"], "problem.upper")
        if "upper" in problem_spec
        else zero_bifunction(manifold)
    )
    _require("constraint" in problem_spec, "problem.constraint",
             "inline problems need a constraint section")
    omega = _build_constraint(manifold, problem_spec["constraint"], "problem.constraint")

    sspec = raw.get("schedule", {})
    theta = float(sspec.get("theta", max(F.theta, 0.0) + (Q.theta or 0.0)))
    lam0 = float(sspec.get("lambda0", 1.0))
    _require(
        lam0 > theta,
        "schedule.lambda0",
        f"requires lambda0 > theta strictly (lambda0={lam0}, theta={theta}): the "
        "regularization weight must exceed the undermonotonicity bound",
    )
    schedule = Schedule.power(
        mu0=float(sspec.get("mu0", 1.0)),
        p=float(sspec.get("p", 2.0)),
        lam0=lam0,
        theta=theta,
    )

    sol_spec = raw.get("solver", {})
    _require("seed" in sol_spec, "solver.seed", "a seed is required (determinism contract)")
    config = SolverConfig(
        strategy=sol_spec.get("strategy", "auto"),
        tol_inner=float(sol_spec.get("inner_tol", 1e-9)),
        max_inner_iters=int(sol_spec.get("inner_max_iters", 400)),
        tau_step=float(sol_spec.get("step_tol", 1e-8)),
        tau_ep=float(sol_spec.get("ep_tol", 1e-6)),
        max_iters=int(sol_spec.get("max_iters", 1000)),
        seed=int(sol_spec["seed"]),
    )

    _require("initial" in raw and "x0" in raw["initial"], "initial.x0",
             "inline problems need a start point")
    x0 = _point(manifold, raw["initial"]["x0"], "initial.x0")

    expected = None
    if "known_solution" in problem_spec:
        sol = _point(manifold, problem_spec["known_solution"], "problem.known_solution")
        expected = ExpectedOutcome(sol.coords.copy(), float(problem_spec.get("tolerance", 1e-3)))
        config = replace(config, references=[sol])

    setup = ProblemSetup(
        name=raw.get("name", Path(source).stem),
        description=raw.get("description", f"run from {source}"),
        manifold=manifold,
        F=F,
        Q=Q,
        omega=omega,
        bregman=bregman,
        schedule=schedule,
        x0=x0,
        config=config,
        expected=expected,
        references=list(config.references),
    )
    return _apply_output(setup, raw)


def _apply_output(setup: ProblemSetup, raw: dict) -> ProblemSetup:
    ospec = raw.get("output", {})
    if "trace_mode" in ospec:
        mode = ospec["trace_mode"]
        _require(mode in ("full", "thin"), "output.trace_mode", "must be 'full' or 'thin'")
        setup.config = replace(setup.config, trace_mode=mode)
    if "directory" in ospec:
        setup.output_dir = str(ospec["directory"])
    return setup


def _apply_overrides(setup: ProblemSetup, raw: dict) -> ProblemSetup:
    """Library entry + per-file overrides for schedule/solver/start."""
    sspec = raw.get("schedule", {})
    if sspec:
        theta = float(sspec.get("theta", setup.schedule.theta_bound))
        lam0 = float(sspec.get("lambda0", setup.schedule.lam(0)))
        _require(
            lam0 > theta,
            "schedule.lambda0",
            f"requires lambda0 > theta strictly (lambda0={lam0}, theta={theta}): the "
            "regularization weight must exceed the undermonotonicity bound",
        )
        setup.schedule = Schedule.power(
            mu0=float(sspec.get("mu0", setup.schedule.mu(0))),
            p=float(sspec.get("p", 2.0)),
            lam0=lam0,
            theta=theta,
        )
    sol_spec = raw.get("solver", {})
    overrides = {}
    mapping = {
        "strategy": ("strategy", str),
        "inner_tol": ("tol_inner", float),
        "inner_max_iters": ("max_inner_iters", int),
        "step_tol": ("tau_step", float),
        "ep_tol": ("tau_ep", float),
        "max_iters": ("max_iters", int),
        "seed": ("seed", int),
    }
    for key, (attr, cast) in mapping.items():
        if key in sol_spec:
            overrides[attr] = cast(sol_spec[key])
    if overrides:
        setup.config = replace(setup.config, **overrides)
    if "initial" in raw and "x0" in raw["initial"]:
        setup.x0 = _point(setup.manifold, raw["initial"]["x0"], "initial.x0")
    return setup
