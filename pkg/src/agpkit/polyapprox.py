"""Near-minimax odd polynomial approximation of 1/omega on [delta, omega_max].

The construction expands 1/y in Chebyshev polynomials on [delta**2, omega_max**2],
truncates after ``d`` terms to get Q(y), and uses P(omega) = omega * Q(omega**2),
an odd polynomial of degree 2d - 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import chebyshev as cheb

# monomial conversion: warn past either limit
MONOMIAL_WARN_DEGREE = 25
MONOMIAL_WARN_CONDITION = 1e12


class ConditioningWarning(UserWarning):
    """Monomial coefficients lose accuracy in double precision."""


@dataclass(frozen=True)
class ApproxInterval:
    delta: float
    omega_max: float

    def __post_init__(self):
        if not (0 < self.delta < self.omega_max):
            raise ValueError(
                f"need 0 < delta < omega_max, got delta={self.delta}, omega_max={self.omega_max}"
            )

    @property
    def half_width(self) -> float:
        return 0.5 * (self.omega_max - self.delta)

    @property
    def center(self) -> float:
        return 0.5 * (self.omega_max + self.delta)

    @property
    def eta(self) -> float:
        return self.center / self.half_width

    def to_unit(self, omega):
        return (np.asarray(omega, dtype=float) - self.center) / self.half_width

    def squared(self) -> "ApproxInterval":
        return ApproxInterval(self.delta**2, self.omega_max**2)


@dataclass(frozen=True)
class ChebyshevSeries:
    interval: ApproxInterval
    coeffs: tuple[float, ...]

    def __call__(self, y):
        return cheb.chebval(self.interval.to_unit(y), self.coeffs)


def decay_ratio(interval: ApproxInterval) -> float:
    """|c_{j+1} / c_j| = 1 / (eta + sqrt(eta**2 - 1)) of the inverse series."""
    eta = interval.eta
    return 1.0 / (eta + math.sqrt(eta * eta - 1.0))


def cheb_inverse_series(interval: ApproxInterval, degree: int) -> ChebyshevSeries:
    """First ``degree + 1`` Chebyshev coefficients of 1/y on ``interval``.

    With eta = center / half_width and rho = decay_ratio(interval),

        c_0 = 1 / (h sqrt(eta**2 - 1)),   c_j = 2 (-rho)**j / (h sqrt(eta**2 - 1)).

    The overall sign is positive (the function is positive on the interval);
    the alternation comes from the pole sitting left of the interval.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    eta = interval.eta
    if eta <= 1.0:
        raise ValueError(f"eta = {eta} <= 1: the pole lies inside the interval")
    scale = 1.0 / (interval.half_width * math.sqrt(eta * eta - 1.0))
    rho = decay_ratio(interval)
    coeffs = [scale] + [2.0 * scale * (-rho) ** j for j in range(1, degree + 1)]
    return ChebyshevSeries(interval, tuple(coeffs))



def _chebyshev_to_power(coeffs, center: float, half_width: float) -> list[Fraction]:
    # exact rational expansion of sum_j c_j T_j((y - center) / half_width) in powers of y
    c0 = Fraction(center)
    h = Fraction(half_width)
    x = [-c0 / h, 1 / h]

    def mul_x(p):
        out = [Fraction(0)] * (len(p) + 1)
        for i, a in enumerate(p):
            out[i] += a * x[0]
            out[i + 1] += a * x[1]
        return out

    total = [Fraction(0)] * len(coeffs)
    t_prev, t_cur = [Fraction(1)], x[:]
    for j, cj in enumerate(coeffs):
        if j == 0:
            tj = t_prev
        elif j == 1:
            tj = t_cur
        else:
            nxt = [2 * a for a in mul_x(t_cur)]
            for i, a in enumerate(t_prev):
                nxt[i] -= a
            t_prev, t_cur = t_cur, nxt
            tj = t_cur
        fc = Fraction(cj)
        for i, a in enumerate(tj):
            total[i] += fc * a
    return total


@dataclass(frozen=True)
class OddApproximant:
    """P(omega) = omega * Q(omega**2) with Q a d-term Chebyshev series.

    ``monomial[k-1]`` multiplies omega**(2k - 1). ``condition`` bounds the
    relative error amplification of evaluating the monomial form on the
    interval; the Chebyshev form is the one used for evaluation.
    """

    d: int
    cheb: ChebyshevSeries
    monomial: tuple[float, ...]
    interval: ApproxInterval
    condition: float

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return omega * self.cheb(omega * omega)

    def eval_monomial(self, omega):
        omega = np.asarray(omega, dtype=float)
        return omega * np.polynomial.polynomial.polyval(omega * omega, self.monomial)


def build_odd_approximant(delta: float, omega_max: float, d: int) -> OddApproximant:
    if d < 1:
        raise ValueError(f"expansion order d must be >= 1, got {d}")
    interval = ApproxInterval(delta, omega_max)
    series = cheb_inverse_series(interval.squared(), d - 1)
    exact = _chebyshev_to_power(series.coeffs, series.interval.center, series.interval.half_width)
    monomial = tuple(float(a) for a in exact)
    if not all(math.isfinite(a) for a in monomial):
        raise FloatingPointError("non-finite monomial coefficient")
    grid = chebyshev_grid(interval, 400)
    y = grid * grid
    absolute = grid * np.polynomial.polynomial.polyval(y, np.abs(monomial))
    value = np.abs(grid * cheb.chebval(series.interval.to_unit(y), series.coeffs))
    condition = float(np.max(absolute / value))
    if d > MONOMIAL_WARN_DEGREE or condition > MONOMIAL_WARN_CONDITION:
        warnings.warn(
            f"monomial form of the d={d} approximant has condition ~{condition:.1e}",
            ConditioningWarning,
            stacklevel=2,
        )
    return OddApproximant(d, series, monomial, interval, condition)


def evaluate(approx: OddApproximant, omega):
    """Clenshaw evaluation of the approximant (defined on the whole real line)."""
    return approx(omega)


def to_monomial(approx: OddApproximant) -> np.ndarray:
    """Coefficients a_k with P(omega) = sum_k a_k omega**(2k - 1)."""
    return np.array(approx.monomial)


def chebyshev_grid(interval: ApproxInterval, n: int) -> np.ndarray:
    """Chebyshev-Lobatto points on the interval, endpoints included."""
    theta = np.linspace(0.0, np.pi, n)
    return interval.center - interval.half_width * np.cos(theta)


def sup_error(approx: OddApproximant, grid_points: int = 2000) -> float:
    if grid_points < 100:
        raise ValueError("grid_points must be >= 100")
    omega = chebyshev_grid(approx.interval, grid_points)
    return float(np.max(np.abs(1.0 / omega - approx(omega))))


def geometric_ratio(delta: float, omega_max: float) -> float:
    r = delta / omega_max
    return (1.0 - r) / (1.0 + r)


def error_bound(delta: float, omega_max: float, d: int, C: float) -> float:
    """C * ratio**(d-1) * log d, with the log factor taken as 1 at d = 1."""
    if d < 1:
        raise ValueError("d must be >= 1")
    log_factor = math.log(d) if d >= 2 else 1.0
    return C * geometric_ratio(delta, omega_max) ** (d - 1) * log_factor


def fit_bound_constant(delta: float, omega_max: float, ds, errors) -> float:
    """Smallest C making error_bound(d, C) >= error for every (d, error)."""
    return max(e / error_bound(delta, omega_max, d, 1.0) for d, e in zip(ds, errors))
