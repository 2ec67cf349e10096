"""Protocol families lam(t) on [0, tau] with exact derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import comb


@dataclass(frozen=True)
class Schedule:
    """kind is "linear", "sin2" or "conv"; ``k`` is the convolution order."""

    kind: str
    tau: float
    k: int = 1

    def __post_init__(self):
        if self.kind not in ("linear", "sin2", "conv"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.kind == "conv" and self.k < 1:
            raise ValueError("convolution order k must be >= 1")

    @classmethod
    def parse(cls, spec: str, tau: float) -> "Schedule":
        """Parse "linear", "sin2" or "conv:k"."""
        spec = spec.strip()
        if spec.startswith("conv:"):
            return cls("conv", tau, int(spec.split(":", 1)[1]))
        if spec in ("linear", "sin2"):
            return cls(spec, tau)
        raise ValueError(f"cannot parse schedule {spec!r}")

    @property
    def spec(self) -> str:
        return f"conv:{self.k}" if self.kind == "conv" else self.kind

    def with_tau(self, tau: float) -> "Schedule":
        return Schedule(self.kind, tau, self.k)

    @property
    def window(self) -> float:
        return self.tau / self.k


def _irwin_hall(x: np.ndarray, k: int, cumulative: bool) -> np.ndarray:
    # density (or cdf) of a sum of k uniforms on [0, 1]
    x = np.clip(x, 0.0, float(k))
    out = np.zeros_like(x)
    power = k if cumulative else k - 1
    norm = math.factorial(power)
    for j in range(k + 1):
        # (x - j)_+ ** power, with the zeroth power read as the step (x > j)
        shifted = np.where(x > j, (x - j) ** power, 0.0)
        out += (-1) ** j * comb(k, j, exact=True) * shifted
    return out / norm


def lambda_at(s: Schedule, t):
    t = np.asarray(t, dtype=float)
    u = np.clip(t / s.tau, 0.0, 1.0)
    if s.kind == "linear":
        out = u
    elif s.kind == "sin2":
        out = np.sin(0.5 * np.pi * np.sin(0.5 * np.pi * u) ** 2) ** 2
    else:
        out = _irwin_hall(u * s.k, s.k, cumulative=True)
    out = np.where(t >= s.tau, 1.0, np.where(t <= 0, 0.0, out))
    return out if out.ndim else float(out)


def dlambda_at(s: Schedule, t):
    t = np.asarray(t, dtype=float)
    u = np.clip(t / s.tau, 0.0, 1.0)
    inside = (t >= 0) & (t <= s.tau)
    if s.kind == "linear":
        out = np.full_like(u, 1.0 / s.tau)
    elif s.kind == "sin2":
        b = 0.5 * np.pi * u
        a = 0.5 * np.pi * np.sin(b) ** 2
        out = np.sin(2 * a) * 0.5 * np.pi * np.sin(2 * b) * 0.5 * np.pi / s.tau
    else:
        out = _irwin_hall(u * s.k, s.k, cumulative=False) / s.window
    out = np.where(inside, out, 0.0)
    return out if out.ndim else float(out)


def fourier_magnitude(s: Schedule, omega: float) -> float:
    """|int_0^tau dlam/dt exp(i omega t) dt|.

    For the convolved family each window contributes
    |2 sin(omega w / 2) / (omega w)| with w = tau / k, raised to the k-th power.
    Other kinds fall back to the direct transform.
    """
    if omega == 0:
        return 1.0
    if s.kind != "conv":
        return direct_fourier_magnitude(s, omega)
    x = 0.5 * omega * s.window
    return abs(math.sin(x) / x) ** s.k


def direct_fourier_magnitude(s: Schedule, omega: float, nodes: int = 64) -> float:
    """Fourier magnitude by piecewise Gauss-Legendre quadrature of dlam/dt."""
    # panels resolve both the oscillation and the piecewise-polynomial breakpoints
    n_osc = int(abs(omega) * s.tau / np.pi) + 1
    n_panels = max(n_osc, s.k if s.kind == "conv" else 1)
    if s.kind == "conv":
        n_panels = s.k * math.ceil(n_panels / s.k)
    edges = np.linspace(0.0, s.tau, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return float(abs(np.sum(wt * dlambda_at(s, t) * np.exp(1j * omega * t))))


def total_weight(s: Schedule) -> float:
    """int_0^tau dlam/dt dt, by adaptive quadrature over the breakpoints."""
    points = [s.window * j for j in range(1, s.k)] if s.kind == "conv" else None
    val, _ = integrate.quad(lambda t: dlambda_at(s, t), 0.0, s.tau, points=points, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val
