"""Orthogonal polynomials for the Laplace weight w(omega) = exp(-gamma |omega|).

The weight is even, so the recurrence has no diagonal part:

    omega L_n = b_{n+1} L_{n+1} + b_n L_{n-1},     L_0 = 1 / sqrt(m_0).

``Recurrence.betas`` stores the off-diagonal entries b_1, b_2, ... . They
scale as b_n(gamma) = b_n(1) / gamma, so everything is built at gamma = 1.

High-degree polynomials are only ever evaluated through the scaled family
psi_n = L_n * exp(-gamma |omega| / 2) with a per-node log scale, which keeps
degrees of several hundred finite in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import gmpy2
import numpy as np
from scipy.linalg import eigh_tridiagonal

# recurrences longer than this default to the multiprecision moment algorithm
EXTENDED_THRESHOLD = 60
ORTHO_FAIL = 1e-6
TAIL_CUTOFF = 1e-14
_RESCALE = 1e150


class QuadratureError(RuntimeError):
    """A quadrature or precision self-check failed."""


@dataclass(frozen=True)
class SymmetricWeight:
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def __call__(self, omega):
        return np.exp(-self.gamma * np.abs(omega))


def laplace_moment(gamma: float, n: int) -> float:
    """int omega**n exp(-gamma |omega|) d omega over the real line."""
    if n < 0:
        raise ValueError("moment order must be >= 0")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n % 2:
        return 0.0
    if n > 150:
        return math.exp(math.log(2.0) + math.lgamma(n + 1) - (n + 1) * math.log(gamma))
    return 2.0 * math.factorial(n) / gamma ** (n + 1)


@dataclass(frozen=True)
class Recurrence:
    gamma: float
    betas: tuple[float, ...]  # b_1 .. b_n
    alpha_zero_by_symmetry: bool = True
    method: str = "stieltjes"
    ortho_residual: float = 0.0

    @property
    def mass(self) -> float:
        return 2.0 / self.gamma

    @property
    def n(self) -> int:
        return len(self.betas)

    def jacobi(self, size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        size = self.n if size is None else size
        if size > self.n:
            raise ValueError(f"recurrence only has {self.n} coefficients")
        return np.zeros(size), np.asarray(self.betas[: size - 1])

    def gauss_rule(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights of the size-point Gauss rule for the weight."""
        diag, off = self.jacobi(size)
        x, v = eigh_tridiagonal(diag, off)
        return x, self.mass * v[0] ** 2

    def evaluate(self, omega, degree: int) -> np.ndarray:
        """Orthonormal L_0..L_degree at ``omega``, shape (degree + 1, len(omega)).

        Unscaled; fine for moderate degree and |omega|.
        """
        if degree > self.n:
            raise ValueError(f"degree {degree} exceeds the {self.n} stored coefficients")
        x = np.atleast_1d(np.asarray(omega, dtype=float))
        out = np.zeros((degree + 1, x.size))
        out[0] = 1.0 / math.sqrt(self.mass)
        if degree >= 1:
            out[1] = x * out[0] / self.betas[0]
        for k in range(1, degree):
            out[k + 1] = (x * out[k] - self.betas[k - 1] * out[k - 1]) / self.betas[k]
        return out


def gauss_laguerre_log(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Laguerre nodes and log-weights for exp(-x) on [0, inf).

    Weights come from the Christoffel sum 1 / sum_k L_k(x)**2, accumulated
    with rescaling; the eigenvector route loses them to underflow.
    """
    k = np.arange(n_nodes, dtype=float)
    x = eigh_tridiagonal(2.0 * k + 1.0, np.arange(1.0, n_nodes), eigvals_only=True)
    p0 = np.ones_like(x)
    p1 = 1.0 - x
    total = p0**2 + p1**2
    log_scale = np.zeros_like(x)
    for j in range(1, n_nodes - 1):
        p0, p1 = p1, ((2 * j + 1 - x) * p1 - j * p0) / (j + 1)
        total += p1**2
        big = np.abs(p1) > _RESCALE
        if big.any():
            f = np.where(big, 1.0 / _RESCALE, 1.0)
            p0 *= f
            p1 *= f
            total *= f * f
            log_scale += np.where(big, 2.0 * math.log(_RESCALE), 0.0)
    return x, -(np.log(total) + log_scale)


def _stieltjes_betas(n: int, n_nodes: int) -> np.ndarray:
    # Lanczos on the mirrored Gauss-Laguerre measure, half line only: vectors of
    # parity k live on x > 0 and are reorthogonalized against equal-parity ones
    x, log_w = gauss_laguerre_log(n_nodes)
    q = np.exp(0.5 * log_w)
    q /= np.linalg.norm(q)
    basis = np.zeros((n + 1, x.size))
    basis[0] = q
    b = np.zeros(n)
    for k in range(n):
        r = x * basis[k]
        if k:
            r -= b[k - 1] * basis[k - 1]
        same = basis[(k + 1) % 2 : k + 1 : 2]
        for _ in range(2):
            r -= same.T @ (same @ r)
        b[k] = np.linalg.norm(r)
        if not b[k] > 0:
            raise QuadratureError(f"Lanczos breakdown at step {k}")
        basis[k + 1] = r / b[k]
    return b


def _chebyshev_betas(n: int, precision: int) -> list:
    # classical Chebyshev algorithm on the raw moments 2 l! (gamma = 1), in mpfr
    ctx = gmpy2.context(gmpy2.get_context(), precision=precision)
    with ctx:
        size = 2 * n + 2
        mu = [gmpy2.mpfr(2) * gmpy2.fac(l) if l % 2 == 0 else gmpy2.mpfr(0) for l in range(size)]
        sig_prev = [gmpy2.mpfr(0)] * size
        sig = mu[:]
        beta = [mu[0]]
        for k in range(1, n + 1):
            new = [gmpy2.mpfr(0)] * size
            for l in range(k, size - k):
                new[l] = sig[l + 1] - beta[k - 1] * sig_prev[l] if k > 1 else sig[l + 1]
            beta.append(new[k] / sig[k - 1])
            sig_prev, sig = sig, new
        return [gmpy2.sqrt(v) for v in beta[1:]]


def _extended_betas(n: int, start_bits: int | None = None, max_bits: int = 1 << 16) -> np.ndarray:
    # double the precision until two successive runs agree to full double accuracy
    bits = start_bits or (4 * n + 128)
    prev = np.array([float(v) for v in _chebyshev_betas(n, bits)])
    while bits <= max_bits:
        bits *= 2
        cur = np.array([float(v) for v in _chebyshev_betas(n, bits)])
        if np.all(np.isfinite(cur)) and np.max(np.abs(cur / prev - 1.0)) < 1e-14:
            return cur
        prev = cur
    raise QuadratureError(f"moment algorithm did not stabilize below {max_bits} bits")


def scaled_family(betas: Sequence[float], mass: float, x: np.ndarray, log_weight: np.ndarray, degree: int):
    """Yield psi_k = L_k(x) * exp(log_weight / 2) for k = 0..degree.

    The recurrence runs on mantissas with a per-node log scale, so neither the
    tiny weight nor the huge polynomial value is ever formed on its own.
    """
    mant_prev = np.zeros_like(x)
    mant = np.full_like(x, 1.0 / math.sqrt(mass))
    log_scale = 0.5 * np.asarray(log_weight, dtype=float).copy()
    yield mant * np.exp(np.maximum(log_scale, -745.0)) * (log_scale > -745.0)
    for k in range(degree):
        nxt = x * mant
        if k:
            nxt -= betas[k - 1] * mant_prev
        nxt /= betas[k]
        mant_prev, mant = mant, nxt
        big = np.abs(mant) > _RESCALE
        if big.any():
            f = np.where(big, 1.0 / _RESCALE, 1.0)
            mant *= f
            mant_prev *= f
            log_scale += np.where(big, math.log(_RESCALE), 0.0)
        yield mant * np.exp(np.minimum(np.maximum(log_scale, -745.0), 700.0)) * (log_scale > -745.0)


def orthonormality_residual(rec: Recurrence, degree: int, n_nodes: int | None = None) -> float:
    """max |<L_i, L_j>_w - delta_ij| for i, j <= degree.

    Uses a mirrored Gauss-Laguerre rule of a size the builder never uses, so it
    is an independent check on the coefficients.
    """
    n_nodes = n_nodes or (degree + 37)
    if n_nodes <= degree:
        raise ValueError("need more nodes than the degree for an exact check")
    x, log_w = gauss_laguerre_log(n_nodes)
    x = x / rec.gamma
    log_w = log_w - math.log(rec.gamma)
    rows = np.array(list(scaled_family(rec.betas, rec.mass, x, log_w, degree)))
    sign = np.where(np.arange(degree + 1) % 2 == 0, 1.0, -1.0)
    # mirrored nodes contribute (-1)**(i + j) times the same product
    gram = rows @ rows.T
    gram = gram + (sign[:, None] * sign[None, :]) * gram
    return float(np.max(np.abs(gram - np.eye(degree + 1))))


def build_recurrence(
    gamma: float, n: int, quadrature_nodes: int | None = None, precision: str = "auto"
) -> Recurrence:
    """Recurrence coefficients b_1..b_n of the orthonormal Laplace family.

    ``precision`` is "double" (discretized Stieltjes/Lanczos on a mirrored
    Gauss-Laguerre rule of ``quadrature_nodes`` points), "extended"
    (multiprecision moment algorithm with self-checked precision) or "auto"
    (extended above ``EXTENDED_THRESHOLD``).

    Raises:
        QuadratureError: if orthonormality of L_0..L_n misses by more than 1e-6.
    """
    SymmetricWeight(gamma)
    if n < 1:
        raise ValueError("need at least one recurrence coefficient")
    if precision not in ("auto", "double", "extended"):
        raise ValueError(f"unknown precision mode {precision!r}")
    mode = precision
    if mode == "auto":
        mode = "extended" if n > EXTENDED_THRESHOLD else "double"
    if mode == "double":
        nodes = quadrature_nodes or max(2 * n, n + 64)
        if nodes <= n:
            raise ValueError("quadrature_nodes must exceed n")
        b = _stieltjes_betas(n, nodes)
    else:
        b = _extended_betas(n)
    rec = Recurrence(gamma, tuple(float(v) / gamma for v in b), True, mode)
    resid = orthonormality_residual(rec, n)
    if not resid < ORTHO_FAIL:
        raise QuadratureError(f"orthonormality residual {resid:.2e} for n={n} ({mode})")
    return Recurrence(rec.gamma, rec.betas, True, mode, resid)


@dataclass(frozen=True)
class LaplaceExpansion:
    """p(omega) = sum_k coeffs[k-1] * L_{2k-1}(omega), k = 1..d."""

    d: int
    coeffs: tuple[float, ...]
    gamma: float
    recurrence: Recurrence

    def __call__(self, omega):
        vals = self.recurrence.evaluate(omega, 2 * self.d - 1)
        return np.asarray(self.coeffs) @ vals[1::2]


def expand_inverse(rec: Recurrence, d: int | None = None) -> LaplaceExpansion:
    """Coefficients c_{2k-1} = <L_{2k-1}, 1/omega>_w.

    Pairing the recurrence with 1/omega gives <omega L_n, 1/omega> = <L_n, 1>,
    which vanishes for n >= 1. Hence c_1 = sqrt(m_0)/b_1 and
    c_{2k+1} = -c_{2k-1} b_{2k} / b_{2k+1}; even coefficients are zero.
    """
    d = (rec.n + 1) // 2 if d is None else d
    if d < 1 or 2 * d - 1 > rec.n:
        raise ValueError(f"d={d} needs {2 * d - 1} recurrence coefficients, have {rec.n}")
    b = rec.betas
    c = [math.sqrt(rec.mass) / b[0]]
    for k in range(1, d):
        c.append(-c[-1] * b[2 * k - 1] / b[2 * k])
    if not all(math.isfinite(v) for v in c):
        raise FloatingPointError("non-finite expansion coefficient")
    return LaplaceExpansion(d, tuple(c), rec.gamma, rec)


def _panels(delta: float, gamma: float, width: float, end: float) -> np.ndarray:
    # geometric panels resolve the 1/omega**2 peak at delta, uniform ones the oscillation
    scale = 1.0 / gamma
    edges = [delta]
    if delta < scale:
        edges = list(np.geomspace(delta, scale, max(4, int(8 * math.log10(scale / delta)) + 1)))
    start = edges[-1]
    count = max(1, int(math.ceil((end - start) / width)))
    edges.extend(start + width * np.arange(1, count + 1))
    return np.asarray(edges)


def _tail_end(rec: Recurrence, degree: int) -> float:
    # beyond the top Gauss node of the degree-sized Jacobi matrix the scaled
    # polynomials decay like exp(-gamma omega / 2); add room for 1e-14 of that
    size = min(rec.n, degree + 1)
    x, _ = rec.gauss_rule(size) if size > 1 else (np.array([0.0]), None)
    top = float(np.max(np.abs(x)))
    return top + 2.0 * math.log(1.0 / TAIL_CUTOFF) / rec.gamma + 10.0 / rec.gamma


def weighted_error_profile(
    rec: Recurrence, delta: float, d_max: int, quadrature_nodes: int = 16, panel_width: float | None = None
) -> np.ndarray:
    """eps_w(delta) for every d = 0..d_max in one sweep (index = d)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if 2 * d_max - 1 > rec.n:
        raise ValueError(f"d_max={d_max} needs {2 * d_max - 1} coefficients")
    exp = expand_inverse(rec, d_max) if d_max >= 1 else None
    gamma = rec.gamma
    width = panel_width or 0.5 / gamma
    edges = _panels(delta, gamma, width, _tail_end(rec, 2 * d_max))
    gx, gw = np.polynomial.legendre.leggauss(quadrature_nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    wq = (half[:, None] * gw[None, :]).ravel()
    log_w = -gamma * x
    resid = np.exp(0.5 * log_w) / x
    out = [2.0 * float(np.sum(wq * resid**2))]
    if d_max == 0:
        return np.array(out)
    for k, psi in enumerate(scaled_family(rec.betas, rec.mass, x, log_w, 2 * d_max - 1)):
        if k % 2 == 1:
            resid = resid - exp.coeffs[k // 2] * psi
            out.append(2.0 * float(np.sum(wq * resid**2)))
    return np.array(out)


def weighted_error(expansion: LaplaceExpansion | None, delta: float, quadrature_nodes: int = 16, rec: Recurrence | None = None) -> float:
    """eps_w(delta) = 2 int_delta^inf (1/omega - p)**2 w d omega.

    ``expansion=None`` is the d = 0 baseline p = 0 (then ``rec`` or a default
    gamma = 1 recurrence supplies the weight). The result is recomputed with
    twice the nodes per panel and must agree to 1e-8 relative.

    Raises:
        QuadratureError: if the refinement check fails.
    """
    if expansion is None:
        rec = rec or build_recurrence(1.0, 1)
        d = 0
    else:
        rec, d = expansion.recurrence, expansion.d
    coarse = weighted_error_profile(rec, delta, d, quadrature_nodes)[-1]
    fine = weighted_error_profile(rec, delta, d, 2 * quadrature_nodes)[-1]
    if not (math.isfinite(fine) and abs(fine - coarse) <= 1e-8 * abs(fine)):
        raise QuadratureError(f"eps_w not converged: {coarse!r} vs {fine!r}")
    return fine


def baseline_error(delta: float, gamma: float = 1.0) -> float:
    """Closed form of the d = 0 error: 2 (exp(-g delta)/delta - g E1(g delta))."""
    from scipy.special import exp1

    return 2.0 * (math.exp(-gamma * delta) / delta - gamma * float(exp1(gamma * delta)))


@dataclass(frozen=True)
class ScalingFit:
    mu: float
    eta: float
    residual: float  # rms of the log fit


def fit_error_scaling(errors: Sequence[tuple[float, float]], d_min: int = 20) -> ScalingFit:
    """Fit 1/r(d) = mu * d**eta to rescaled errors r = eps_w * delta / 2.

    Linear least squares of log(1/r) on log d over points with d >= d_min.
    """
    pts = [(d, r) for d, r in errors if d >= d_min]
    if len(pts) < 5:
        raise ValueError(f"need >= 5 points with d >= {d_min}, got {len(pts)}")
    d = np.array([p[0] for p in pts], dtype=float)
    r = np.array([p[1] for p in pts], dtype=float)
    if np.any(r <= 0):
        raise ValueError("rescaled errors must be positive")
    y = np.log(1.0 / r)
    if np.ptp(y) == 0 or np.ptp(d) == 0:
        raise ValueError("degenerate data: nothing to fit")
    design = np.column_stack([np.ones_like(d), np.log(d)])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    rms = float(np.sqrt(np.mean((design @ sol - y) ** 2)))
    return ScalingFit(mu=float(math.exp(sol[0])), eta=float(sol[1]), residual=rms)
