"""Generators for the population-inversion protocol families.

Every generator returns a :class:`~invlab.core.ControlField` whose
error-free evolution takes the ground state to the excited state at
t = T (the bare sinusoidal reference being the deliberate exception).

Families
--------
flat_pi / shaped_pi      on-resonance pulses with integrated amplitude pi
sinusoidal_adiabatic     finite-time sweep WR = W0 sin(pi t/T), D = -d0 cos(pi t/T)
transitionless           sinusoidal reference plus the counter-diabatic term
                         WI = Wa = (WR D_dot - WR_dot D) / (WR^2 + D^2)
invariant_engineered     controls inverted from a target angle trajectory:
                             WR = cos(al) sin(th) g_dot - sin(al) th_dot
                             WI = sin(al) sin(th) g_dot + cos(al) th_dot
                             D  = -cos(th) g_dot - al_dot
optimal_noise            minimal noise sensitivity: stationary theta,
                         alpha = n pi/4 (n odd), zero detuning
optimal_systematic       zero systematic sensitivity: gamma = n(2 th - sin 2 th)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .core import ControlField, InvariantAngles, TimeGrid, constant
from .optimal import solve_optimal_theta

PROTOCOL_KINDS = ("flat_pi", "shaped_pi", "sinusoidal_adiabatic", "transitionless",
                  "invariant_engineered", "optimal_noise", "optimal_systematic")

GAUGES = ("zero_omega_i", "explicit")


def make_flat_pi(alpha: float, grid: TimeGrid) -> ControlField:
    """Constant Omega = (pi/T) e^{i alpha}, zero detuning."""
    w = math.pi / grid.duration
    return ControlField.from_functions(
        grid, constant(w * math.cos(alpha)), constant(w * math.sin(alpha)), constant(0.0),
        label=f"flat_pi(alpha={alpha:g})")


def make_shaped_pi(envelope: Callable, alpha: float, grid: TimeGrid) -> ControlField:
    """Nonnegative envelope rescaled so the pulse area is exactly pi."""
    T = grid.duration
    area, _ = quad(envelope, 0.0, T, epsabs=1e-12, epsrel=1e-12, limit=200)
    if area <= 1e-12:
        raise ValueError(f"envelope integrates to {area!r}; cannot normalize to pi")
    if float(np.min(envelope(grid.times))) < -1e-12:
        raise ValueError("envelope must be nonnegative")
    scale = math.pi / area
    ca, sa = math.cos(alpha), math.sin(alpha)

    def omega_r(t):
        return scale * ca * np.asarray(envelope(np.asarray(t, dtype=float)), dtype=float)

    def omega_i(t):
        return scale * sa * np.asarray(envelope(np.asarray(t, dtype=float)), dtype=float)

    return ControlField.from_functions(grid, omega_r, omega_i, constant(0.0),
                                       label=f"shaped_pi(alpha={alpha:g})")


def _sinusoidal_channels(omega0: float, delta0: float, duration: float):
    w = math.pi / duration

    def omega_r(t):
        return omega0 * np.sin(w * np.asarray(t, dtype=float))

    def delta(t):
        return -delta0 * np.cos(w * np.asarray(t, dtype=float))

    def omega_r_dot(t):
        return omega0 * w * np.cos(w * np.asarray(t, dtype=float))

    def delta_dot(t):
        return delta0 * w * np.sin(w * np.asarray(t, dtype=float))

    return omega_r, delta, omega_r_dot, delta_dot


def make_sinusoidal(omega0: float, delta0: float, grid: TimeGrid) -> ControlField:
    """Bare finite-time sinusoidal sweep (no shortcut term)."""
    if omega0 <= 0.0:
        raise ValueError(f"omega0 must be positive, got {omega0}")
    omega_r, delta, _, _ = _sinusoidal_channels(omega0, delta0, grid.duration)
    return ControlField.from_functions(
        grid, omega_r, constant(0.0), delta,
        label=f"sinusoidal_adiabatic(omega0={omega0:g},delta0={delta0:g})")


def make_transitionless(omega0: float, delta0: float, grid: TimeGrid) -> ControlField:
    """Sinusoidal sweep with the counter-diabatic term in the imaginary channel.

    The added coupling Wa = (WR D_dot - WR_dot D)/(WR^2 + D^2) cancels all
    diabatic transitions, so the state tracks the instantaneous eigenstate
    of the reference for any duration.
    """
    if omega0 <= 0.0:
        raise ValueError(f"omega0 must be positive, got {omega0}")
    omega_r, delta, omega_r_dot, delta_dot = _sinusoidal_channels(omega0, delta0, grid.duration)
    gap2 = omega_r(grid.times) ** 2 + delta(grid.times) ** 2
    if float(np.min(gap2)) < 1e-12:
        raise RuntimeError(
            f"singular counter-diabatic denominator: min(WR^2 + D^2) = {float(np.min(gap2))!r}")

    def omega_a(t):
        wr, d = omega_r(t), delta(t)
        return (wr * delta_dot(t) - omega_r_dot(t) * d) / (wr * wr + d * d)

    return ControlField.from_functions(
        grid, omega_r, omega_a, delta,
        label=f"transitionless(omega0={omega0:g},delta0={delta0:g})")


def make_invariant_engineered(angles: InvariantAngles, grid: TimeGrid,
                              label: str = "invariant_engineered") -> ControlField:
    """Invert the angle trajectory into the controls realizing it."""
    angles.check_boundaries(grid.duration)
    s = angles.sample(grid)
    if not angles.has_closed_derivatives:
        sin_t, cos_t = np.sin(s.theta), np.cos(s.theta)
        sin_a, cos_a = np.sin(s.alpha), np.cos(s.alpha)
        return ControlField.from_samples(
            grid,
            cos_a * sin_t * s.gamma_dot - sin_a * s.theta_dot,
            sin_a * sin_t * s.gamma_dot + cos_a * s.theta_dot,
            -cos_t * s.gamma_dot - s.alpha_dot,
            label=label)

    def omega_r(t):
        t = np.asarray(t, dtype=float)
        return (np.cos(angles.alpha(t)) * np.sin(angles.theta(t)) * angles.gamma_dot(t)
                - np.sin(angles.alpha(t)) * angles.theta_dot(t))

    def omega_i(t):
        t = np.asarray(t, dtype=float)
        return (np.sin(angles.alpha(t)) * np.sin(angles.theta(t)) * angles.gamma_dot(t)
                + np.cos(angles.alpha(t)) * angles.theta_dot(t))

    def delta(t):
        t = np.asarray(t, dtype=float)
        return -np.cos(angles.theta(t)) * angles.gamma_dot(t) - angles.alpha_dot(t)

    return ControlField.from_functions(grid, omega_r, omega_i, delta, label=label)


def make_optimal_noise(n: int, grid: TimeGrid) -> ControlField:
    """Protocol with minimal noise sensitivity (n odd).

    theta solves the stationarity ODE; the controls are the pi pulse
    WR = -sin(n pi/4) theta_dot, WI = cos(n pi/4) theta_dot, D = 0,
    so |WR| = |WI| = theta_dot / sqrt(2) with signs set by n.
    """
    if not isinstance(n, (int, np.integer)) or n % 2 == 0:
        raise ValueError(f"n must be an odd integer, got {n!r}")
    sol = solve_optimal_theta(grid)
    # -sin(n pi/4), cos(n pi/4) for odd n are exactly +-sqrt(1/2)
    sign_r, sign_i = {1: (-1, 1), 3: (-1, -1), 5: (1, -1), 7: (1, 1)}[n % 8]
    cr = sign_r * math.sqrt(0.5)
    ci = sign_i * math.sqrt(0.5)

    def omega_r(t):
        return cr * sol.theta_dot_fn(t)

    def omega_i(t):
        return ci * sol.theta_dot_fn(t)

    return ControlField.from_functions(grid, omega_r, omega_i, constant(0.0),
                                       label=f"optimal_noise(n={n})")


def optimal_systematic_angles(n: int, duration: float = 1.0,
                              theta: Callable | None = None,
                              theta_dot: Callable | None = None,
                              gauge: str = "zero_omega_i",
                              alpha: Callable | None = None,
                              alpha_dot: Callable | None = None) -> InvariantAngles:
    """Angle triple of the zero-systematic-sensitivity family.

    gamma = n (2 theta - sin 2 theta) makes q_S vanish for integer n.
    The zero_omega_i gauge fixes alpha = -arccot(4 n sin^3 theta) on the
    continuous branch in (-pi, 0), i.e. alpha = arctan(4 n sin^3 theta) - pi/2,
    with alpha(0) = alpha(T) = -pi/2.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n!r}")
    if gauge not in GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")
    if theta is None:
        theta = lambda t: math.pi * np.asarray(t, dtype=float) / duration
        theta_dot = constant(math.pi / duration)

    def gamma(t):
        th = np.asarray(theta(t), dtype=float)
        return n * (2.0 * th - np.sin(2.0 * th))

    gamma_dot = None
    if theta_dot is not None:
        def gamma_dot(t):
            th = np.asarray(theta(t), dtype=float)
            return 4.0 * n * np.sin(th) ** 2 * np.asarray(theta_dot(t), dtype=float)

    if gauge == "explicit":
        if alpha is None:
            raise ValueError("explicit gauge requires an alpha function")
        return InvariantAngles(theta, alpha, gamma, theta_dot, alpha_dot, gamma_dot)

    def alpha_zero_wi(t):
        th = np.asarray(theta(t), dtype=float)
        return np.arctan(4.0 * n * np.sin(th) ** 3) - 0.5 * math.pi

    alpha_zero_wi_dot = None
    if theta_dot is not None:
        def alpha_zero_wi_dot(t):
            th = np.asarray(theta(t), dtype=float)
            x = 4.0 * n * np.sin(th) ** 3
            return (12.0 * n * np.sin(th) ** 2 * np.cos(th)
                    * np.asarray(theta_dot(t), dtype=float)) / (1.0 + x * x)

    return InvariantAngles(theta, alpha_zero_wi, gamma, theta_dot, alpha_zero_wi_dot, gamma_dot)


def make_optimal_systematic(n: int, grid: TimeGrid,
                            theta: Callable | None = None,
                            theta_dot: Callable | None = None,
                            gauge: str = "zero_omega_i",
                            alpha: Callable | None = None,
                            alpha_dot: Callable | None = None) -> ControlField:
    """Protocol with zero systematic-error sensitivity (integer n >= 1)."""
    angles = optimal_systematic_angles(n, grid.duration, theta, theta_dot,
                                       gauge, alpha, alpha_dot)
    s = angles.sample(grid)
    if np.any(np.diff(s.theta) < -1e-12) or abs(s.theta[0]) > 1e-9 or abs(s.theta[-1] - math.pi) > 1e-9:
        raise ValueError("theta must be monotone from 0 to pi")
    if float(np.max(np.abs(np.diff(s.alpha)))) > 0.5 * math.pi:
        raise RuntimeError("gauge branch is discontinuous on the grid")
    return make_invariant_engineered(
        angles, grid, label=f"optimal_systematic(n={n},gauge={gauge})")


@dataclass(frozen=True)
class ProtocolSpec:
    """Validated recipe (kind + parameters) for building a ControlField."""

    kind: str
    parameters: dict = dfield(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}; expected one of {PROTOCOL_KINDS}")
        p = dict(self.parameters)
        if self.kind == "flat_pi":
            p["alpha"] = float(p.get("alpha", 0.0))
        elif self.kind == "shaped_pi":
            if not callable(p.get("envelope")):
                raise ValueError("shaped_pi requires a callable 'envelope' parameter")
            p["alpha"] = float(p.get("alpha", 0.0))
        elif self.kind in ("sinusoidal_adiabatic", "transitionless"):
            p["omega0"] = float(p.get("omega0", 0.0))
            p["delta0"] = float(p.get("delta0", 0.0))
            if not p["omega0"] > 0.0:
                raise ValueError(f"{self.kind} requires omega0 > 0")
            if p["delta0"] < 0.0:
                raise ValueError(f"{self.kind} requires delta0 >= 0")
        elif self.kind == "optimal_noise":
            n = p.get("n", 7)
            if not isinstance(n, (int, np.integer)) or n % 2 == 0:
                raise ValueError("optimal_noise requires an odd integer n")
            p["n"] = int(n)
        elif self.kind == "optimal_systematic":
            n = p.get("n", 1)
            if not isinstance(n, (int, np.integer)) or n < 1:
                raise ValueError("optimal_systematic requires an integer n >= 1")
            p["n"] = int(n)
            if p.get("gauge", "zero_omega_i") not in GAUGES:
                raise ValueError(f"gauge must be one of {GAUGES}")
        elif self.kind == "invariant_engineered":
            if not isinstance(p.get("angles"), InvariantAngles):
                raise ValueError("invariant_engineered requires an InvariantAngles instance")
        object.__setattr__(self, "parameters", p)

    def build(self, grid: TimeGrid) -> ControlField:
        p = self.parameters
        if self.kind == "flat_pi":
            return make_flat_pi(p["alpha"], grid)
        if self.kind == "shaped_pi":
            return make_shaped_pi(p["envelope"], p["alpha"], grid)
        if self.kind == "sinusoidal_adiabatic":
            return make_sinusoidal(p["omega0"], p["delta0"], grid)
        if self.kind == "transitionless":
            return make_transitionless(p["omega0"], p["delta0"], grid)
        if self.kind == "optimal_noise":
            return make_optimal_noise(p["n"], grid)
        if self.kind == "optimal_systematic":
            return make_optimal_systematic(
                p["n"], grid, p.get("theta"), p.get("theta_dot"),
                p.get("gauge", "zero_omega_i"), p.get("alpha"), p.get("alpha_dot"))
        return make_invariant_engineered(p["angles"], grid)
