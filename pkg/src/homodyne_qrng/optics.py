"""Single-mode Gaussian states and their quadrature statistics.

Convention: the measured quadrature is ``Q(phi) = a exp(-i phi) + a^dag exp(i phi)``,
so the vacuum has unit variance and a coherent state ``|alpha>`` has mean
``2 |alpha| cos(phi - arg alpha)``. ``squeeze_angle`` is the LO phase of
minimum variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import rng

TWO_PI = 2.0 * math.pi


class FitUnderdeterminedError(ValueError):
    """Phase set does not constrain the variance model."""


@dataclass(frozen=True)
class GaussianState:
    displacement: complex = 0j
    squeeze_mag: float = 0.0
    squeeze_angle: float = 0.0
    thermal_occupation: float = 0.0

    def __post_init__(self):
        if self.squeeze_mag < 0:
            raise ValueError(f"squeeze_mag must be >= 0, got {self.squeeze_mag}")
        if self.thermal_occupation < 0:
            raise ValueError(f"thermal_occupation must be >= 0, got {self.thermal_occupation}")
        object.__setattr__(self, "displacement", complex(self.displacement))
        theta = float(self.squeeze_angle) % TWO_PI
        object.__setattr__(self, "squeeze_angle", 0.0 if theta == TWO_PI else theta)

    @classmethod
    def vacuum(cls) -> GaussianState:
        return cls()

    @property
    def variance_extremes(self) -> tuple[float, float]:
        """(minimum, maximum) quadrature variance over all LO phases."""
        purity_factor = 2.0 * self.thermal_occupation + 1.0
        r2 = 2.0 * self.squeeze_mag
        return purity_factor * math.exp(-r2), purity_factor * math.exp(r2)


@dataclass(frozen=True)
class LossChannel:
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmissivity must lie in [0, 1], got {self.eta}")


def quadrature_mean(state: GaussianState, phi: float) -> float:
    alpha = state.displacement
    return 2.0 * abs(alpha) * math.cos(phi - np.angle(alpha))


def quadrature_variance(state: GaussianState, phi):
    """Variance of Q(phi); ``phi`` may be a scalar or an array."""
    v_min, v_max = state.variance_extremes
    d = np.asarray(phi, dtype=float) - state.squeeze_angle
    # written so that v_min == v_max gives that value exactly
    out = v_min + (v_max - v_min) * np.sin(d) ** 2
    return float(out) if out.ndim == 0 else out


def apply_loss(state: GaussianState, channel: LossChannel) -> GaussianState:
    """Mix the state with vacuum on a beamsplitter of transmissivity ``eta``.

    The result is again Gaussian with the same ellipse orientation: every
    quadrature variance maps to ``eta * V + (1 - eta)`` and the displacement
    scales by ``sqrt(eta)``.
    """
    eta = channel.eta
    v_min, v_max = state.variance_extremes
    v_min = eta * v_min + (1.0 - eta)
    v_max = eta * v_max + (1.0 - eta)
    purity_factor = math.sqrt(v_min * v_max)
    return GaussianState(
        displacement=math.sqrt(eta) * state.displacement,
        squeeze_mag=0.25 * math.log(v_max / v_min),
        squeeze_angle=state.squeeze_angle,
        thermal_occupation=max(0.0, 0.5 * (purity_factor - 1.0)),
    )


def sample_quadratures(
    state: GaussianState,
    phi: float,
    channel: LossChannel,
    count: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Draw ``count`` homodyne outcomes for the state after ``channel``."""
    if count <= 0:
        return np.empty(0)
    lossy = apply_loss(state, channel)
    mean = quadrature_mean(lossy, phi)
    std = math.sqrt(quadrature_variance(lossy, phi))
    return mean + std * rng.standard_normals(seed, count, workers=workers)


class PhaseFit(NamedTuple):
    squeeze_mag: float
    squeeze_angle: float
    thermal_occupation: float


def _variance_model(params, phi):
    r, theta, nbar = params
    d = phi - theta
    return (2 * nbar + 1) * (np.exp(-2 * r) * np.cos(d) ** 2 + np.exp(2 * r) * np.sin(d) ** 2)


def _variance_jacobian(params, phi):
    r, theta, nbar = params
    d = phi - theta
    c2, s2 = np.cos(d) ** 2, np.sin(d) ** 2
    em, ep = np.exp(-2 * r), np.exp(2 * r)
    g = 2 * nbar + 1
    return np.column_stack([
        g * (-2 * em * c2 + 2 * ep * s2),
        g * (ep - em) * np.sin(2 * d),
        2 * (em * c2 + ep * s2),
    ])


def phase_scan_fit(points: Sequence[tuple[float, float]]) -> PhaseFit:
    """Recover (r, theta, nbar) from (phase, variance) pairs.

    The model ``V(phi) = A + B cos 2phi + C sin 2phi`` is linear in (A, B, C);
    its closed-form solution seeds a bounded nonlinear least-squares
    refinement in the physical parameters. ``theta`` is reported in [0, pi).
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("points must be a sequence of (phi, variance) pairs")
    phi, var = data[:, 0], data[:, 1]
    design = np.column_stack([np.ones_like(phi), np.cos(2 * phi), np.sin(2 * phi)])
    if len(phi) < 3 or np.linalg.matrix_rank(design, tol=1e-9) < 3:
        raise FitUnderdeterminedError("need at least three phases distinct modulo pi")

    (a, b, c), *_ = np.linalg.lstsq(design, var, rcond=None)
    d = math.hypot(b, c)
    a = max(a, d + 1e-15)
    g = max(1.0, math.sqrt(a * a - d * d))
    r0 = 0.5 * math.atanh(min(d / a, 1 - 1e-15))
    theta0 = (0.5 * math.atan2(-c, -b)) % math.pi if d > 0 else 0.0
    x0 = np.array([r0, theta0, 0.5 * (g - 1.0)])

    sol = least_squares(
        lambda p: _variance_model(p, phi) - var,
        x0,
        jac=lambda p: _variance_jacobian(p, phi),
        bounds=([0.0, -np.inf, 0.0], [np.inf, np.inf, np.inf]),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    r, theta, nbar = sol.x
    # the bounded solver starts strictly inside the box; snap its residue
    if r < 1e-9:
        r, theta = 0.0, 0.0
    if nbar < 1e-9:
        nbar = 0.0
    return PhaseFit(float(r), float(theta % math.pi), float(nbar))
