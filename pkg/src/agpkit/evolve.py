"""Counterdiabatic time evolution, fidelities and cutoff optimization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from agpkit.agp import AGPBuild
from agpkit.polyapprox import build_odd_approximant
from agpkit.schedules import Schedule, dlambda_at, fourier_magnitude, lambda_at
from agpkit.spinchain import ChainModel, SpectrumProfile

log = logging.getLogger(__name__)

INFIDELITY_FLOOR = 1e-14


class NormDriftError(RuntimeError):
    """The integrator lost unitarity beyond the configured bound."""


@dataclass(frozen=True)
class EvolutionConfig:
    tolerance: float = 1e-10
    max_step: float = np.inf
    checkpoints: int = 11
    max_norm_drift: float = 1e-6
    method: str = "DOP853"


@dataclass
class TrajectoryResult:
    final_infidelity: float
    fidelity_trace: list[tuple[float, float]]
    norm_drift: float
    populations: list[np.ndarray]
    floored: bool = False
    nfev: int = 0
    final_state: np.ndarray | None = field(default=None, repr=False)


def populations(psi: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """|<phi_n|psi>|^2 for the columns of ``vecs``."""
    return np.abs(vecs.conj().T @ psi) ** 2


def _finish(model: ChainModel, ts, lams, states, cfg: EvolutionConfig, nfev: int) -> TrajectoryResult:
    trace, pops, drift = [], [], 0.0
    for t, lam, psi in zip(ts, lams, states):
        _, vecs = model.eigh(lam)
        pop = populations(psi, vecs)
        pops.append(pop)
        trace.append((float(t), float(pop[0])))
        drift = max(drift, abs(np.linalg.norm(psi) - 1.0))
    if drift > cfg.max_norm_drift:
        raise NormDriftError(
            f"norm drift {drift:.2e} exceeds {cfg.max_norm_drift:.1e}; tighten the integrator tolerance"
        )
    infid = 1.0 - trace[-1][1]
    floored = infid < INFIDELITY_FLOOR
    return TrajectoryResult(
        final_infidelity=max(infid, INFIDELITY_FLOOR),
        fidelity_trace=trace,
        norm_drift=drift,
        populations=pops,
        floored=floored,
        nfev=nfev,
        final_state=states[-1],
    )


def _integrate(rhs: Callable, t_end: float, psi0: np.ndarray, cfg: EvolutionConfig):
    t_eval = np.linspace(0.0, t_end, max(cfg.checkpoints, 2))
    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        psi0.astype(complex),
        method=cfg.method,
        t_eval=t_eval,
        rtol=cfg.tolerance,
        atol=cfg.tolerance * 1e-2,
        max_step=cfg.max_step,
    )
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return sol.t, sol.y.T, sol.nfev


def _gauge_action(agp: AGPBuild) -> Callable[[float, np.ndarray], np.ndarray]:
    # fast path: universal potentials on the commutator route are a fixed matrix polynomial in lam
    if agp.method == "none":
        return lambda lam, psi: np.zeros_like(psi)
    if agp.route == "commutator" and agp.method == "universal":
        stack = agp._stack

        def act(lam, psi):
            vecs = stack @ psi
            out = vecs[-1]
            for row in vecs[-2::-1]:
                out = out * lam + row
            return out

        return act
    return lambda lam, psi: agp.operator_at(lam) @ psi


def evolve_cd(model: ChainModel, agp: AGPBuild | None, schedule: Schedule, cfg: EvolutionConfig = EvolutionConfig()) -> TrajectoryResult:
    """Integrate i dpsi/dt = [H(lam(t)) + dlam/dt A_lam] psi from the ground state of H(0).

    ``agp=None`` is the bare adiabatic protocol. The state is never
    renormalized; the norm drift is reported and checked.
    """
    _, vecs0 = model.eigh(0.0)
    psi0 = vecs0[:, 0]
    h0, v = model.h0, model.v
    act = _gauge_action(agp) if agp is not None else None

    def rhs(t, psi):
        lam = lambda_at(schedule, t)
        out = h0 @ psi + lam * (v @ psi)
        if act is not None:
            rate = dlambda_at(schedule, t)
            if rate != 0.0:
                out = out + rate * act(lam, psi)
        return -1j * out

    ts, states, nfev = _integrate(rhs, schedule.tau, psi0, cfg)
    lams = [lambda_at(schedule, t) for t in ts]
    return _finish(model, ts, lams, states, cfg, nfev)


def evolve_tau_zero(model: ChainModel, agp: AGPBuild, cfg: EvolutionConfig = EvolutionConfig()) -> TrajectoryResult:
    """Sudden limit tau -> 0: i dpsi/dlam = A_lam psi for lam in [0, 1]."""
    _, vecs0 = model.eigh(0.0)
    psi0 = vecs0[:, 0]
    act = _gauge_action(agp)

    def rhs(lam, psi):
        return -1j * act(lam, psi)

    lams, states, nfev = _integrate(rhs, 1.0, psi0, cfg)
    return _finish(model, lams, lams, states, cfg, nfev)


def run_protocol(model, agp, schedule: Schedule | None, cfg: EvolutionConfig) -> TrajectoryResult:
    """Finite-time evolution, or the tau -> 0 limit when ``schedule`` is None."""
    if schedule is None:
        return evolve_tau_zero(model, agp, cfg)
    return evolve_cd(model, agp, schedule, cfg)


@dataclass(frozen=True)
class OmegaScan:
    best_omega_max: float
    best_infidelity: float
    candidates: tuple[float, ...]
    infidelities: tuple[float, ...]


def optimize_omega_max(
    model: ChainModel,
    d: int,
    delta: float,
    scan: Sequence[float],
    schedule: Schedule | None = None,
    cfg: EvolutionConfig = EvolutionConfig(),
    route: str = "spectral",
) -> OmegaScan:
    """Grid scan of the universal cutoff; ties go to the smaller cutoff."""
    if len(scan) == 0:
        raise ValueError("empty omega_max scan")
    cands = sorted(float(w) for w in scan)
    infids = []
    for w in cands:
        approx = build_odd_approximant(delta, w, d)
        agp = AGPBuild(model, "universal", approx=approx, route=route)
        infids.append(run_protocol(model, agp, schedule, cfg).final_infidelity)
    best = int(np.argmin(infids))  # first minimum, i.e. smallest cutoff among ties
    return OmegaScan(cands[best], infids[best], tuple(cands), tuple(infids))


def apt_leakage_estimate(profile: SpectrumProfile, p: Callable | None, schedule: Schedule) -> np.ndarray:
    """Adiabatic-perturbation estimate of final excited populations, n >= 1.

    |alpha_n|^2 ~ |X_n0|_avg^2 |p(w_n) - 1/w_n|^2 |F[dlam/dt](w_n)|^2 with
    protocol-averaged frequencies w_n. ``p=None`` is the bare protocol.
    """
    omega = profile.transitions[:, 1:].mean(axis=0)
    coupling = profile.couplings[:, 1:].mean(axis=0)
    pval = np.zeros_like(omega) if p is None else np.asarray(p(omega), dtype=float)
    mismatch = np.abs(pval - 1.0 / omega)
    ft = np.array([fourier_magnitude(schedule, w) for w in omega])
    return coupling**2 * mismatch**2 * ft**2
