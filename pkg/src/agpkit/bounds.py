"""Analytic error budget for universal counterdiabatic driving.

All lam-dependent quantities are maximized over the profile's lam grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from agpkit.polyapprox import OddApproximant, geometric_ratio, sup_error
from agpkit.spinchain import SpectrumProfile

EXPONENT_WARN_RATIO = 0.3


def variance_dlh(gs_vector: np.ndarray, dh: np.ndarray) -> float:
    """<dH^2> - <dH>^2 in a normalized state."""
    v = dh @ gs_vector
    mean = np.vdot(gs_vector, v).real
    return float(max(np.vdot(v, v).real - mean * mean, 0.0))


def max_variance(profile: SpectrumProfile, dh: np.ndarray) -> float:
    return max(variance_dlh(g, dh) for g in profile.gs_vectors)


def _log_factor(d: int) -> float:
    return math.log(d) if d >= 2 else 1.0


def eq5_bound(delta: float, omega_big: float, d: int, variance: float, C: float) -> float:
    """C (log d)^2 ratio^(2(d-1)) var, ratio = (1 - delta/Omega)/(1 + delta/Omega).

    log d is replaced by 1 at d = 1.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    return C * _log_factor(d) ** 2 * geometric_ratio(delta, omega_big) ** (2 * (d - 1)) * variance


def asymptotic_exponent(delta: float, omega_big: float, d: int) -> float:
    """-4 delta d / Omega, the small-gap limit of the log of the squared geometric factor."""
    if delta / omega_big > EXPONENT_WARN_RATIO:
        warnings.warn(
            f"delta/Omega = {delta / omega_big:.2f} is outside the small-gap regime", stacklevel=2
        )
    return -4.0 * delta * d / omega_big


def _split(profile: SpectrumProfile, omega_max: float):
    omega = profile.transitions[:, 1:]
    weight = profile.couplings[:, 1:] ** 2
    inside = omega <= omega_max * (1.0 + 1e-12)
    return omega, weight, inside


def eps_poly(approx: OddApproximant, profile: SpectrumProfile, grid_points: int = 2000) -> float:
    """sup |p - 1/omega|^2 on the fit interval times the coupling weight inside it.

    The weight is sum of |<n|dH|0>|^2 over levels with omega_n(lam) <= omega_max,
    maximized over lam.
    """
    _, weight, inside = _split(profile, approx.interval.omega_max)
    return sup_error(approx, grid_points) ** 2 * float(np.max(np.sum(weight * inside, axis=1)))


@dataclass(frozen=True)
class ResidualError:
    actual: float  # uses p(omega_n) itself
    envelope: float  # leading-monomial growth a_d^2 omega^(4d-2)


def eps_res(profile: SpectrumProfile, approx: OddApproximant) -> ResidualError:
    """Error from transitions above omega_max, maximized over lam."""
    omega, weight, inside = _split(profile, approx.interval.omega_max)
    outside = ~inside
    if not outside.any():
        return ResidualError(0.0, 0.0)
    w = np.where(outside, omega, 1.0)
    mismatch = (approx(w) - 1.0 / w) ** 2
    lead = approx.monomial[-1] ** 2 * w ** (4 * approx.d - 2)
    actual = float(np.max(np.sum(mismatch * weight * outside, axis=1)))
    envelope = float(np.max(np.sum(lead * weight * outside, axis=1)))
    return ResidualError(actual, envelope)


@dataclass(frozen=True)
class ErrorBudget:
    eps_poly: float
    eps_res: float
    eps_res_envelope: float
    eq5_bound: float
    variance: float
    asymptotic_exponent: float

    @property
    def total(self) -> float:
        return self.eps_poly + self.eps_res


def error_budget(
    approx: OddApproximant, profile: SpectrumProfile, dh: np.ndarray, C: float = 1.0,
    delta: float | None = None, omega_big: float | None = None,
) -> ErrorBudget:
    delta = profile.delta_coupled if delta is None else delta
    omega_big = profile.omega_coupled if omega_big is None else omega_big
    var = max_variance(profile, dh)
    res = eps_res(profile, approx)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        expo = asymptotic_exponent(delta, omega_big, approx.d)
    return ErrorBudget(
        eps_poly=eps_poly(approx, profile),
        eps_res=res.actual,
        eps_res_envelope=res.envelope,
        eq5_bound=eq5_bound(delta, omega_big, approx.d, var, C),
        variance=var,
        asymptotic_exponent=expo,
    )


@dataclass(frozen=True)
class BoundFit:
    C_envelope: float  # smallest C bounding every point
    C_log_lsq: float  # geometric-mean fit on log scale
    slope_data: float  # fitted d-slope of log infidelity
    slope_bound: float  # 2 log ratio


def fit_eq5_constant(
    ds: Sequence[int], infidelities: Sequence[float], delta: float, omega_big: float, variance: float
) -> BoundFit:
    ds = np.asarray(ds, dtype=int)
    y = np.asarray(infidelities, dtype=float)
    unit = np.array([eq5_bound(delta, omega_big, int(d), variance, 1.0) for d in ds])
    logs = np.log(y / unit)
    slope = float(np.polyfit(ds.astype(float), np.log(y), 1)[0]) if len(ds) > 1 else float("nan")
    return BoundFit(
        C_envelope=float(np.exp(logs.max())),
        C_log_lsq=float(np.exp(logs.mean())),
        slope_data=slope,
        slope_bound=2.0 * math.log(geometric_ratio(delta, omega_big)),
    )
