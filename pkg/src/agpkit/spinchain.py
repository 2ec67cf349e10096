"""Transverse-field Ising chain: Hamiltonian family, spectra and parity sectors.

    H(lam) = J sum_i sz_i sz_{i+1} + h_z sum_i sz_i + h_x(lam) sum_i sx_i

with an open boundary and a linear ramp h_x(lam) = h_x_start + lam (h_x_end - h_x_start).
Site 1 is the most significant bit of the computational basis index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
DEGENERACY_TOL = 1e-10
COUPLING_TOL = 1e-8  # relative to the largest ground-state coupling

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class IsingParams:
    L: int
    J: float = 1.0
    h_z: float = 1.0 / GOLDEN_RATIO
    h_x_start: float = 0.5
    h_x_end: float = 2.5

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"chain length must be >= 1, got {self.L}")
        if self.J == 0:
            raise ValueError("J sets the energy unit and must be nonzero")

    @classmethod
    def benchmark(cls, L: int, J: float = -1.0, integrable: bool = False) -> "IsingParams":
        """Benchmark chain: h_z = |J|/phi (or 0), h_x ramped from |J|/2 to 5|J|/2.

        The default coupling is ferromagnetic. With J > 0 and h_z != 0 the two
        Neel configurations form a nearly degenerate doublet across the ramp.
        """
        unit = abs(J)
        h_z = 0.0 if integrable else unit / GOLDEN_RATIO
        return cls(L=L, J=J, h_z=h_z, h_x_start=0.5 * unit, h_x_end=2.5 * unit)

    def h_x(self, lam: float) -> float:
        return self.h_x_start + lam * (self.h_x_end - self.h_x_start)

    @property
    def dim(self) -> int:
        return 2**self.L


def site_operator(op: np.ndarray, site: int, L: int) -> np.ndarray:
    """Embed a single-site operator at 0-based ``site`` of an L-site chain."""
    out = np.eye(1, dtype=complex)
    for j in range(L):
        out = np.kron(out, op if j == site else ID2)
    return out


@lru_cache(maxsize=32)
def _terms(L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    zz = np.zeros((2**L, 2**L), dtype=complex)
    for i in range(L - 1):
        zz += site_operator(SZ, i, L) @ site_operator(SZ, i + 1, L)
    z = sum(site_operator(SZ, i, L) for i in range(L))
    x = sum(site_operator(SX, i, L) for i in range(L))
    for arr in (zz, z, x):
        arr.setflags(write=False)
    return zz, z, x


def hamiltonian_parts(params: IsingParams) -> tuple[np.ndarray, np.ndarray]:
    """Return (H0, V) with H(lam) = H0 + lam * V."""
    zz, z, x = _terms(params.L)
    h0 = params.J * zz + params.h_z * z + params.h_x_start * x
    v = (params.h_x_end - params.h_x_start) * x
    return h0, v


def hamiltonian(params: IsingParams, lam: float) -> np.ndarray:
    h0, v = hamiltonian_parts(params)
    return h0 + lam * v


def dlambda_h(params: IsingParams) -> np.ndarray:
    """d H / d lam; constant because the field ramp is linear."""
    return hamiltonian_parts(params)[1]


def parity_operator(L: int) -> np.ndarray:
    """Global spin flip P = sx x sx x ... x sx."""
    out = np.eye(1, dtype=complex)
    for _ in range(L):
        out = np.kron(out, SX)
    return out


@lru_cache(maxsize=32)
def _parity_isometry(L: int) -> np.ndarray:
    # columns (|s> + |~s>)/sqrt2 for every s with the leading bit 0
    dim = 2**L
    half = dim // 2
    iso = np.zeros((dim, half), dtype=complex)
    mask = dim - 1
    for s in range(half):
        iso[s, s] = iso[s ^ mask, s] = 1.0 / math.sqrt(2.0)
    iso.setflags(write=False)
    return iso


def parity_project(op: np.ndarray, L: int, tol: float = 1e-10) -> np.ndarray:
    """Restrict ``op`` to the +1 eigenspace of the global spin flip.

    Raises:
        ValueError: if ``op`` does not commute with the spin flip, in which
            case the restriction would not be a symmetry reduction.
    """
    if op.shape != (2**L, 2**L):
        raise ValueError(f"operator shape {op.shape} does not match L={L}")
    p = parity_operator(L)
    comm = np.linalg.norm(op @ p - p @ op)
    if comm > tol * max(1.0, np.linalg.norm(op)):
        raise ValueError(f"operator breaks spin-flip parity (||[op, P]|| = {comm:.3e})")
    iso = _parity_isometry(L)
    return iso.conj().T @ op @ iso


@dataclass(frozen=True)
class ChainModel:
    """A chain restricted to a symmetry sector: H(lam) = h0 + lam * v, dH = v."""

    params: IsingParams
    sector: str = "full"
    h0: np.ndarray = field(init=False, repr=False, compare=False)
    v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.sector not in ("full", "positive-parity"):
            raise ValueError(f"unknown sector {self.sector!r}")
        h0, v = hamiltonian_parts(self.params)
        if self.sector == "positive-parity":
            h0 = parity_project(h0, self.params.L)
            v = parity_project(v, self.params.L)
        for arr in (h0, v):
            arr.setflags(write=False)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def dh(self) -> np.ndarray:
        return self.v

    def hamiltonian(self, lam: float) -> np.ndarray:
        return self.h0 + lam * self.v

    def eigh(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        return eigh_fixed_phase(self.hamiltonian(lam))


def eigh_fixed_phase(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sorted eigenpairs with each eigenvector's largest component real-positive."""
    energies, vecs = np.linalg.eigh(h)
    idx = np.argmax(np.abs(vecs), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    vecs = vecs * (np.abs(lead) / lead)[np.newaxis, :]
    return energies, vecs


@dataclass(frozen=True)
class SpectrumProfile:
    lambda_grid: np.ndarray
    energies: np.ndarray  # (n_lambda, dim), ascending per row
    gs_vectors: np.ndarray  # (n_lambda, dim)
    couplings: np.ndarray  # (n_lambda, dim), |<n|dH|0>|; column 0 is zero
    delta: float
    omega_big: float
    degenerate: bool
    delta_coupled: float
    omega_coupled: float

    @property
    def transitions(self) -> np.ndarray:
        """omega_n = E_n - E_0 along the grid, shape (n_lambda, dim)."""
        return self.energies - self.energies[:, :1]


def spectrum_profile(model: ChainModel, grid_points: int = 101) -> SpectrumProfile:
    """Diagonalize along a uniform lambda grid and record gap data.

    ``delta`` is the minimum of E_1 - E_0 over the grid and ``omega_big`` the
    maximum of E_max - E_0. ``delta_coupled`` and ``omega_coupled`` restrict
    both to transitions that dH actually drives out of the ground state
    (coupling above ``COUPLING_TOL`` of the largest one); symmetry-forbidden
    levels are skipped. A gap below ``DEGENERACY_TOL`` sets ``degenerate``
    and emits a warning, since the exact gauge potential is then singular.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    grid = np.linspace(0.0, 1.0, grid_points)
    energies, gs, couplings = [], [], []
    dh = model.dh
    for lam in grid:
        e, vecs = model.eigh(lam)
        energies.append(e)
        gs.append(vecs[:, 0])
        row = np.abs(vecs.conj().T @ (dh @ vecs[:, 0]))
        row[0] = 0.0
        couplings.append(row)
    energies = np.array(energies)
    couplings = np.array(couplings)
    omega = energies - energies[:, :1]
    coupled = couplings > COUPLING_TOL * couplings.max()
    gaps = energies[:, 1] - energies[:, 0]
    delta = float(gaps.min())
    degenerate = delta < DEGENERACY_TOL
    if degenerate:
        warnings.warn(f"ground state degenerate on the grid (min gap {delta:.3e})", stacklevel=2)
    return SpectrumProfile(
        lambda_grid=grid,
        energies=energies,
        gs_vectors=np.array(gs),
        couplings=couplings,
        delta=delta,
        omega_big=float((energies[:, -1] - energies[:, 0]).max()),
        degenerate=degenerate,
        delta_coupled=float(omega[coupled].min()) if coupled.any() else math.nan,
        omega_coupled=float(omega[coupled].max()) if coupled.any() else math.nan,
    )


def matrix_element_decay(profile: SpectrumProfile) -> tuple[np.ndarray, np.ndarray]:
    """Protocol-averaged transition frequency and coupling for each excited level.

    Returns (mean omega_n, mean |<n|dH|0>|) for n >= 1, sorted by frequency.
    """
    omega = profile.transitions[:, 1:].mean(axis=0)
    coupling = profile.couplings[:, 1:].mean(axis=0)
    order = np.argsort(omega)
    return omega[order], coupling[order]
