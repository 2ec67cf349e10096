"""Adiabatic gauge potentials: exact, nested-commutator and spectral constructions.

Conventions used throughout: the Liouvillian is L(X) = [H, X], transition
frequencies are omega_mn = E_m - E_n, and an approximate gauge potential with
odd polynomial p(omega) = sum_k c_k omega**(2k-1) has eigenbasis elements

    <m|A|n> = -i p(omega_mn) <m|dH|n>,

which is A = -i sum_k c_k L^(2k-1)(dH). The exact potential is the limit
p(omega) = 1/omega.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from agpkit.polyapprox import OddApproximant
from agpkit.spinchain import ChainModel, eigh_fixed_phase

log = logging.getLogger(__name__)

COUPLING_TOL = 1e-12
FREQUENCY_TOL = 1e-10
SVD_CUTOFF = 1e-12
KRYLOV_BREAKDOWN = 1e-12


class SingularGaugeError(ValueError):
    """Degenerate levels are coupled by dH, so the exact potential diverges."""


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def trace_inner(a: np.ndarray, b: np.ndarray, dim: int | None = None) -> complex:
    """Normalized trace inner product Tr(a^dag b) / dim."""
    dim = a.shape[0] if dim is None else dim
    return np.vdot(a, b) / dim


def trace_norm(a: np.ndarray, dim: int | None = None) -> float:
    return math.sqrt(max(trace_inner(a, a, dim).real, 0.0))


def frequency_matrix(energies: np.ndarray) -> np.ndarray:
    """omega[m, n] = E_m - E_n."""
    return energies[:, None] - energies[None, :]


def exact_agp(energies: np.ndarray, vecs: np.ndarray, dh: np.ndarray) -> np.ndarray:
    """Exact gauge potential <m|A|n> = -i <m|dH|n> / omega_mn, zero diagonal.

    Pairs with |omega_mn| below ``FREQUENCY_TOL`` are dropped when their
    coupling vanishes and raise ``SingularGaugeError`` otherwise.
    """
    x = vecs.conj().T @ dh @ vecs
    omega = frequency_matrix(energies)
    scale = max(np.abs(x).max(), 1.0)
    coupled = np.abs(x) > COUPLING_TOL * scale
    near = np.abs(omega) < FREQUENCY_TOL
    np.fill_diagonal(near, False)
    if np.any(near & coupled):
        m, n = np.argwhere(near & coupled)[0]
        raise SingularGaugeError(
            f"levels {m} and {n} are degenerate (omega={omega[m, n]:.2e}) "
            f"but coupled (|dH_mn|={abs(x[m, n]):.2e})"
        )
    inv = np.zeros_like(omega)
    keep = coupled & ~near
    np.fill_diagonal(keep, False)
    inv[keep] = 1.0 / omega[keep]
    a_eig = -1j * inv * x
    return vecs @ a_eig @ vecs.conj().T


def spectral_agp(
    energies: np.ndarray, vecs: np.ndarray, dh: np.ndarray, p: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Gauge potential with eigenbasis elements -i p(omega_mn) dH_mn.

    ``p`` must be odd; the diagonal then vanishes and the result is Hermitian.
    Elements with |dH_mn| below ``COUPLING_TOL`` of the largest are treated as
    selection-rule zeros: outside the fit interval p can reach 1e15, and
    rounding noise in such elements would otherwise make A jitter with lam.
    """
    x = vecs.conj().T @ dh @ vecs
    x = np.where(np.abs(x) > COUPLING_TOL * np.abs(x).max(), x, 0.0)
    a_eig = -1j * p(frequency_matrix(energies)) * x
    return vecs @ a_eig @ vecs.conj().T


def nested_commutators(h: np.ndarray, dh: np.ndarray, d: int) -> list[np.ndarray]:
    """[L^1(dH), L^3(dH), ..., L^(2d-1)(dH)] with L = [h, .]."""
    if d < 1:
        raise ValueError("d must be >= 1")
    out = []
    cur = commutator(h, dh)
    out.append(cur)
    for _ in range(d - 1):
        cur = commutator(h, commutator(h, cur))
        out.append(cur)
    return out


def assemble_agp(commutators: Sequence[np.ndarray], coeffs: Sequence[float]) -> np.ndarray:
    """A = -i sum_k c_k L^(2k-1)(dH)."""
    if len(commutators) != len(coeffs):
        raise ValueError(f"{len(coeffs)} coefficients for {len(commutators)} commutators")
    out = np.zeros_like(commutators[0])
    for c, term in zip(coeffs, commutators):
        out += c * term
    return -1j * out


def universal_coeffs(approx: OddApproximant) -> np.ndarray:
    return np.array(approx.monomial)


# -- variational (moment matching) -------------------------------------------


@dataclass(frozen=True)
class MomentTable:
    """Folded response moments Gamma^(k) = 1/2 sum_{m != n} |X_mn|^2 omega_mn^(2k)."""

    lam: float
    gammas: tuple[float, ...]  # index k = 0 .. k_max

    def __getitem__(self, k: int) -> float:
        return self.gammas[k]


def gamma_moments(energies, vecs, dh, k_max: int, lam: float = float("nan")) -> MomentTable:
    x = vecs.conj().T @ dh @ vecs
    omega = np.abs(frequency_matrix(energies))
    weight = np.abs(x) ** 2
    mask = omega > FREQUENCY_TOL
    w, om = weight[mask], omega[mask]
    # log-space so large k cannot overflow before the weights are applied
    gammas = []
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    logom = np.log(om)
    for k in range(k_max + 1):
        expo = logw + 2 * k * logom
        top = expo.max() if expo.size else -np.inf
        total = math.exp(top) * np.exp(expo - top).sum() if np.isfinite(top) else 0.0
        gammas.append(0.5 * float(total))
    return MomentTable(lam, tuple(gammas))


def variational_coeffs(moments: MomentTable, d: int, cutoff: float = SVD_CUTOFF) -> np.ndarray:
    """Solve sum_k c_k Gamma^(k+j) = Gamma^(j), j = 1..d, for c_1..c_d.

    Moments are rescaled by a frequency unit before the SVD solve so the
    relative cutoff acts on a balanced matrix. Singular values below
    ``cutoff`` times the largest are discarded.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if len(moments.gammas) < 2 * d + 1:
        raise ValueError(f"need moments up to order {2 * d}, have {len(moments.gammas) - 1}")
    g = np.array(moments.gammas, dtype=float)
    if g[1] <= 0:
        raise np.linalg.LinAlgError("vanishing moments: dH does not couple any levels")
    unit = math.sqrt(g[2] / g[1])
    gs = g / unit ** (2 * np.arange(len(g)))
    hankel = np.array([[gs[k + j] for k in range(1, d + 1)] for j in range(1, d + 1)])
    rhs = np.array([gs[j] for j in range(1, d + 1)])
    # symmetric diagonal scaling before the SVD
    scale = 1.0 / np.sqrt(np.diag(hankel))
    u, s, vt = np.linalg.svd(hankel * scale[:, None] * scale[None, :])
    keep = s > cutoff * s[0]
    if not keep.any():
        raise np.linalg.LinAlgError("Hankel system is rank deficient")
    cond = s[0] / s[keep][-1]
    log.debug("variational Hankel solve d=%d cond=%.3e rank=%d", d, cond, keep.sum())
    y = vt[keep].T @ ((u[:, keep].T @ (rhs * scale)) / s[keep])
    c = y * scale
    # omega p(omega) = sum_k c_k omega^(2k), so c_k carries unit^(2k)
    return c / unit ** (2 * np.arange(1, d + 1))


def variational_objective(h: np.ndarray, dh: np.ndarray, a: np.ndarray) -> float:
    """S[A] = Tr(G^2) with G = dH - i[H, A]."""
    g = dh - 1j * commutator(h, a)
    return float(np.vdot(g, g).real)


def variational_objective_moments(moments: MomentTable, coeffs: Sequence[float], tr_dh2: float) -> float:
    """S expressed through moments; ``tr_dh2`` is Tr(dH^2)."""
    g = moments.gammas
    s = tr_dh2
    for k, ck in enumerate(coeffs, start=1):
        s -= 4.0 * ck * g[k]
        for j, cj in enumerate(coeffs, start=1):
            s += 2.0 * ck * cj * g[k + j]
    return s


@dataclass(frozen=True)
class VariationalFit:
    """Variational polynomial obtained as a weighted least-squares fit.

    Minimizing S over odd p of degree 2d-1 is the discrete fit of g(s) = p(w)/w,
    s = w**2, to 1/s under the measure |X_mn|^2 s^2 over all transitions. The
    fit is done with orthogonal polynomials of that measure (Lanczos with
    full reorthogonalization), which avoids forming the Hankel system.
    """

    alphas: np.ndarray
    betas: np.ndarray
    coeffs: np.ndarray  # expansion of g in the orthonormal basis
    norm0: float
    scale: float

    @classmethod
    def from_spectrum(cls, energies, vecs, dh, d: int) -> "VariationalFit":
        x = vecs.conj().T @ dh @ vecs
        omega = frequency_matrix(energies)
        mask = omega > FREQUENCY_TOL
        s = omega[mask] ** 2
        wts = 2.0 * np.abs(x[mask]) ** 2 * s**2
        scale = float(s.max())
        t = s / scale
        sw = np.sqrt(wts)
        n = min(d, t.size)
        q = np.zeros((t.size, n))
        alphas, betas = np.zeros(n), np.zeros(n)
        q[:, 0] = sw / np.linalg.norm(sw)
        for j in range(n):
            r = t * q[:, j]
            alphas[j] = q[:, j] @ r
            r -= alphas[j] * q[:, j]
            if j > 0:
                r -= betas[j] * q[:, j - 1]
            r -= q[:, : j + 1] @ (q[:, : j + 1].T @ r)
            if j + 1 < n:
                betas[j + 1] = np.linalg.norm(r)
                if betas[j + 1] <= KRYLOV_BREAKDOWN * np.linalg.norm(t * q[:, j]):
                    n = j + 1
                    q, alphas, betas = q[:, :n], alphas[:n], betas[:n]
                    break
                q[:, j + 1] = r / betas[j + 1]
        # coefficients <pi_j, 1/s> in the measure; pi_j(t_i) = q_ij / sw_i
        target = 1.0 / t
        coeffs = q.T @ (sw * target)
        return cls(alphas, betas, coeffs, float(np.linalg.norm(sw)), scale)

    def g(self, s: np.ndarray) -> np.ndarray:
        t = np.asarray(s, dtype=float) / self.scale
        prev = np.zeros_like(t)
        cur = np.full_like(t, 1.0 / self.norm0)
        total = self.coeffs[0] * cur
        for j in range(1, len(self.coeffs)):
            nxt = ((t - self.alphas[j - 1]) * cur - self.betas[j - 1] * prev) / self.betas[j]
            prev, cur = cur, nxt
            total = total + self.coeffs[j] * cur
        return total / self.scale

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return omega * self.g(omega * omega)


# -- Krylov chain ------------------------------------------------------------


@dataclass(frozen=True)
class KrylovChain:
    b: np.ndarray  # b_1 .. b_n
    ops: list = field(repr=False)  # O_0 .. O_n
    dh_norm: float
    dim: int

    def tridiagonal(self) -> np.ndarray:
        n = len(self.ops)
        t = np.zeros((n, n))
        for i, bi in enumerate(self.b[: n - 1]):
            t[i, i + 1] = t[i + 1, i] = bi
        return t

    def liouvillian_moment(self, k: int) -> float:
        """||L^k O_0||^2 = (T^(2k))_00, valid while the chain is longer than k."""
        if k >= len(self.ops):
            raise ValueError(f"chain of length {len(self.ops)} cannot resolve order {k}")
        t = self.tridiagonal()
        return float(np.linalg.matrix_power(t, 2 * k)[0, 0])


def krylov_chain(h: np.ndarray, dh: np.ndarray, n_max: int, dim: int | None = None) -> KrylovChain:
    """Lanczos chain of L = [h, .] seeded with dH, fully reorthogonalized.

    ``dim`` fixes the trace normalization (defaults to the operator dimension).
    The chain stops early when b_n falls below ``KRYLOV_BREAKDOWN`` times the
    previous coefficient scale.
    """
    dim = h.shape[0] if dim is None else dim
    norm = trace_norm(dh, dim)
    if norm <= 0:
        raise ValueError("dH has zero norm")
    ops = [dh / norm]
    b: list[float] = []
    scale = max(trace_norm(h, dim), 1.0)
    for n in range(1, n_max + 1):
        nxt = commutator(h, ops[-1])
        if n >= 2:
            nxt = nxt - b[-1] * ops[-2]
        for _ in range(2):
            for o in ops:
                nxt = nxt - trace_inner(o, nxt, dim) * o
        bn = trace_norm(nxt, dim)
        if bn < KRYLOV_BREAKDOWN * scale:
            break
        b.append(bn)
        ops.append(nxt / bn)
    return KrylovChain(np.array(b), ops, norm, dim)


# -- gauge potential providers for the integrators ---------------------------


class CommutatorCache:
    """L_lam^k(dH) as polynomials in lam for H(lam) = h0 + lam v.

    ``terms[k][j]`` is the lam**j coefficient of the depth-k commutator.
    """

    def __init__(self, h0: np.ndarray, v: np.ndarray, dh: np.ndarray, depth: int):
        terms = [[dh]]
        for k in range(1, depth + 1):
            prev = terms[-1]
            cur = []
            for j in range(k + 1):
                acc = np.zeros_like(dh)
                if j < len(prev):
                    acc += commutator(h0, prev[j])
                if j >= 1:
                    acc += commutator(v, prev[j - 1])
                cur.append(acc)
            terms.append(cur)
        self.terms = terms
        self.depth = depth

    def depth_at(self, k: int, lam: float) -> np.ndarray:
        out = np.zeros_like(self.terms[0][0])
        for coef in reversed(self.terms[k]):
            out = out * lam + coef
        return out

    def gauge_stack(self, coeffs: Sequence[float]) -> np.ndarray:
        """Stacked lam-power coefficients of -i sum_k c_k L^(2k-1)(dH)."""
        deg = 2 * len(coeffs) - 1
        stack = np.zeros((deg + 1,) + self.terms[0][0].shape, dtype=complex)
        for k, c in enumerate(coeffs, start=1):
            for j, coef in enumerate(self.terms[2 * k - 1]):
                stack[j] += -1j * c * coef
        return stack

    def moment_polys(self, k_max: int, dim: int) -> list[np.ndarray]:
        """Polynomial coefficients in lam of Gamma^(k), k = 0..k_max, via Frobenius norms.

        Gamma^(k) = 1/2 ||L^k dH||_F^2 for k >= 1. Order 0 is left empty (it
        needs the eigenbasis to remove diagonal weight).
        """
        polys = [np.zeros(1)]
        for k in range(1, k_max + 1):
            t = self.terms[k]
            out = np.zeros(2 * len(t) - 1)
            for i, a in enumerate(t):
                for j, b in enumerate(t):
                    out[i + j] += 0.5 * np.vdot(a, b).real
            polys.append(out)
        return polys


@dataclass
class AGPBuild:
    """A gauge-potential family lam -> A_lam ready for the integrators.

    ``method`` is one of "exact", "universal", "variational", "none".
    ``route`` selects how operators are produced: "spectral" diagonalizes
    H(lam) at each call; "commutator" evaluates cached nested commutators and
    never diagonalizes (unavailable for "exact").
    """

    model: ChainModel
    method: str
    d: int = 0
    approx: OddApproximant | None = None
    route: str = "spectral"
    _cache: CommutatorCache | None = field(default=None, init=False, repr=False)
    _stack: np.ndarray | None = field(default=None, init=False, repr=False)
    _moment_polys: list | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.method not in ("exact", "universal", "variational", "none"):
            raise ValueError(f"unknown AGP method {self.method!r}")
        if self.route not in ("spectral", "commutator"):
            raise ValueError(f"unknown route {self.route!r}")
        if self.method == "universal":
            if self.approx is None:
                raise ValueError("universal AGP needs an OddApproximant")
            self.d = self.approx.d
        if self.method == "variational" and self.d < 1:
            raise ValueError("variational AGP needs d >= 1")
        if self.route == "commutator":
            if self.method == "exact":
                raise ValueError("the exact AGP has no finite commutator expansion")
            if self.method in ("universal", "variational"):
                depth = 2 * self.d if self.method == "variational" else 2 * self.d - 1
                self._cache = CommutatorCache(self.model.h0, self.model.v, self.model.dh, depth)
            if self.method == "universal":
                self._stack = self._cache.gauge_stack(universal_coeffs(self.approx))
            if self.method == "variational":
                self._moment_polys = self._cache.moment_polys(2 * self.d, self.model.dim)

    @property
    def coeffs(self) -> np.ndarray | None:
        """Fixed polynomial coefficients; None when they depend on lam."""
        if self.method == "universal":
            return universal_coeffs(self.approx)
        return None

    def variational_coeffs_at(self, lam: float) -> np.ndarray:
        if self._moment_polys is not None:
            gam = [0.0] + [float(np.polynomial.polynomial.polyval(lam, p)) for p in self._moment_polys[1:]]
            return variational_coeffs(MomentTable(lam, tuple(gam)), self.d)
        e, vecs = self.model.eigh(lam)
        return variational_coeffs(gamma_moments(e, vecs, self.model.dh, 2 * self.d, lam), self.d)

    def operator_at(self, lam: float) -> np.ndarray:
        if self.method == "none":
            return np.zeros_like(self.model.h0)
        if self.route == "commutator":
            if self.method == "universal":
                out = np.zeros_like(self.model.h0)
                for coef in self._stack[::-1]:
                    out = out * lam + coef
                return out
            coeffs = self.variational_coeffs_at(lam)
            out = np.zeros_like(self.model.h0)
            for k, c in enumerate(coeffs, start=1):
                out += c * self._cache.depth_at(2 * k - 1, lam)
            return -1j * out
        e, vecs = self.model.eigh(lam)
        return self.spectral_operator(e, vecs)

    def spectral_operator(self, energies, vecs) -> np.ndarray:
        dh = self.model.dh
        if self.method == "none":
            return np.zeros_like(dh)
        if self.method == "exact":
            return exact_agp(energies, vecs, dh)
        if self.method == "universal":
            return spectral_agp(energies, vecs, dh, self.approx)
        fit = VariationalFit.from_spectrum(energies, vecs, dh, self.d)
        return spectral_agp(energies, vecs, dh, fit)


def eigenbasis_elements(h: np.ndarray, op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(omega_mn, <m|op|n>) in the eigenbasis of h."""
    e, vecs = eigh_fixed_phase(h)
    return frequency_matrix(e), vecs.conj().T @ op @ vecs
