"""Diffusion Monte Carlo for H = -1/2 (lap_x + lap_y) + kappa |x cross y|^2 on R^6.

Walkers diffuse (with drift toward the trial wavefunction in guided mode),
branch on the local energy and are steered by a reference energy with
damped population feedback. The variational energy is an upper bound on
what this should find.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .membrane import KAPPA, config_from_invariants, invariant_values
from .numerics import RngStream, rng_normal, rng_uniform
from .observables import marginal_pdf_u, sample_uv
from .variational import GroundStateModel, VariationalParams, local_energy, minimize_closed, pdf

log = logging.getLogger(__name__)


class DmcError(RuntimeError):
    """Population collapse or explosion."""


@dataclass
class DmcConfig:
    n_walkers: int = 10_000
    tau: float = 0.002
    n_equil: int = 1_000
    n_measure: int = 4_000
    seed: int = 20240917
    guided: bool = True
    kappa: float = KAPPA
    potential: Literal["membrane", "harmonic"] = "membrane"
    eta: float = 0.1
    wall: float = 50.0
    record_every: int = 20
    hist_bins: tuple[int, int] = (40, 40)
    hist_u_max: float | None = None
    hist_v_max: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.tau <= 0.1:
            raise ValueError(f"tau must lie in (0, 0.1], got {self.tau}")
        if self.n_walkers < 100:
            raise ValueError("need at least 100 walkers")
        if self.guided and self.potential != "membrane":
            raise ValueError("guided mode uses the membrane trial function")
        if self.n_measure < 1:
            raise ValueError("need at least one measurement step")


@dataclass
class DmcResult:
    energy: float
    error: float
    tau: float
    guided: bool
    potential: str
    kappa: float
    population: np.ndarray
    e_ref: np.ndarray
    e_step: np.ndarray
    hist: np.ndarray
    u_edges: np.ndarray
    v_edges: np.ndarray
    out_of_range: float
    kills: int
    walker_steps: int
    flagged: bool = False
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if not isinstance(v, np.ndarray)}
        d["final_population"] = int(self.population[-1])
        return d


def blocked_error(series: np.ndarray, min_blocks: int = 16) -> float:
    """Standard error of the mean, maximized over block sizes (Flyvbjerg-Petersen)."""
    x = np.asarray(series, float)
    best = x.std(ddof=1) / math.sqrt(len(x)) if len(x) > 1 else math.inf
    while len(x) // 2 >= min_blocks:
        n = len(x) // 2
        x = 0.5 * (x[: 2 * n : 2] + x[1 : 2 * n : 2])
        best = max(best, x.std(ddof=1) / math.sqrt(n))
    return float(best)


def _split(R):
    return R[:, :3], R[:, 3:]


def _potential(R, cfg: DmcConfig):
    if cfg.potential == "harmonic":
        return 0.5 * np.sum(R * R, axis=1)
    _, V = invariant_values(*_split(R))
    return cfg.kappa * np.maximum(V, 0.0)


def _drift(R, p: VariationalParams):
    """grad ln Psi_T = -mu grad U - nu grad sqrt V."""
    x, y = _split(R)
    xx = np.sum(x * x, axis=1)[:, None]
    yy = np.sum(y * y, axis=1)[:, None]
    xy = np.sum(x * y, axis=1)[:, None]
    c = np.cross(x, y)
    V = np.sum(c * c, axis=1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv2t = np.where(V > 0, 1.0 / (2.0 * np.sqrt(V)), 0.0)
    gx = -p.mu * x - p.nu * inv2t * 2.0 * (yy * x - xy * y)
    gy = -p.mu * y - p.nu * inv2t * 2.0 * (xx * y - xy * x)
    return np.hstack([gx, gy])


def _log_psi(R, p: VariationalParams):
    U, V = invariant_values(*_split(R))
    return -(p.mu * U + p.nu * np.sqrt(np.maximum(V, 0.0)))


def _local_energy(R, p: VariationalParams, kappa: float):
    U, V = invariant_values(*_split(R))
    return local_energy(p, kappa, U, np.maximum(V, 1e-300))


def _initial_walkers(cfg: DmcConfig, model: GroundStateModel, stream: RngStream) -> np.ndarray:
    if cfg.potential == "harmonic":
        # unguided walkers sample psi_0 itself, exp(-r^2/2), not its square
        return rng_normal(stream, (cfg.n_walkers, 6), scale=1.0)
    batch = sample_uv(model, cfg.n_walkers, stream, chunk=1 << 16)
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(7,))))
    rows = []
    for U, V in zip(batch.U, batch.V):
        c = config_from_invariants(float(U), float(V), gen)
        rows.append(np.concatenate([c.x, c.y]))
    return np.array(rows)


def _default_ranges(cfg: DmcConfig, model: GroundStateModel) -> tuple[float, float]:
    u_max = cfg.hist_u_max if cfg.hist_u_max is not None else 8.0 / (2 * model.mu)
    v_max = cfg.hist_v_max if cfg.hist_v_max is not None else u_max * u_max / 4
    return u_max, v_max


def run_dmc(cfg: DmcConfig) -> DmcResult:
    model = minimize_closed(cfg.kappa)
    p = model.params
    stream = RngStream(cfg.seed, 0)
    R = _initial_walkers(cfg, model, stream)
    tau, sqrt_tau = cfg.tau, math.sqrt(cfg.tau)
    cap = 2.0 / sqrt_tau
    target = cfg.n_walkers

    if cfg.guided:
        EL = _local_energy(R, p, cfg.kappa)
        F = _drift(R, p)
        lp = _log_psi(R, p)
        e_est = float(np.median(EL))
    else:
        EL = _potential(R, cfg)
        e_est = float(EL.mean())
    e_ref = e_est

    u_max, v_max = _default_ranges(cfg, model)
    u_edges = np.linspace(0.0, u_max, cfg.hist_bins[0] + 1)
    v_edges = np.linspace(0.0, v_max, cfg.hist_bins[1] + 1)
    hist = np.zeros(cfg.hist_bins)
    recorded = 0
    out_of_range = 0

    n_steps = cfg.n_equil + cfg.n_measure
    pops = np.empty(n_steps, dtype=int)
    erefs = np.empty(n_steps)
    esteps = np.empty(n_steps)
    kills = 0
    walker_steps = 0

    for step in range(n_steps):
        n = len(R)
        chi = rng_normal(stream, (n, 6)) * sqrt_tau
        if cfg.guided:
            Rn = R + tau * F + chi
            Fn = _drift(Rn, p)
            lpn = _log_psi(Rn, p)
            # Metropolis correction for the drift-diffusion Green's function
            fwd = np.sum((Rn - R - tau * F) ** 2, axis=1)
            bwd = np.sum((R - Rn - tau * Fn) ** 2, axis=1)
            log_ratio = 2 * (lpn - lp) - (bwd - fwd) / (2 * tau)
            accept = np.log(rng_uniform(stream, n) + 1e-300) < np.minimum(log_ratio, 0.0)
            ELn = _local_energy(Rn, p, cfg.kappa)
            Rn = np.where(accept[:, None], Rn, R)
            Fn = np.where(accept[:, None], Fn, F)
            lpn = np.where(accept, lpn, lp)
            ELn = np.where(accept, ELn, EL)
            a = np.clip(EL, e_est - cap, e_est + cap)
            b = np.clip(ELn, e_est - cap, e_est + cap)
            w = np.exp(-tau * (0.5 * (a + b) - e_ref))
            est_vals = b
        else:
            Rn = R + chi
            ELn = _potential(Rn, cfg)
            w = np.exp(-tau * (0.5 * (EL + ELn) - e_ref))
            est_vals = ELn

        alive = np.sqrt(np.sum(Rn * Rn, axis=1)) <= cfg.wall
        kills += int(n - alive.sum())
        w = np.where(alive, w, 0.0)
        walker_steps += n

        e_step = float(np.sum(w * est_vals) / np.sum(w)) if np.sum(w) > 0 else math.nan
        copies = np.floor(w + rng_uniform(stream, n)).astype(int)
        R = np.repeat(Rn, copies, axis=0)
        EL = np.repeat(ELn, copies)
        if cfg.guided:
            F = np.repeat(Fn, copies, axis=0)
            lp = np.repeat(lpn, copies)

        n_new = len(R)
        if n_new < 0.1 * target or n_new > 10 * target:
            raise DmcError(
                f"population {n_new} left [0.1, 10] x target {target} at step {step} "
                f"(E_ref={e_ref:.4f}, estimate={e_est:.4f})"
            )
        # running estimate from the most recent steps steers E_ref
        lo = max(0, step - 200)
        window = np.append(esteps[lo:step], e_step)
        e_est = float(np.mean(window))
        e_ref = e_est + cfg.eta * math.log(target / n_new) / tau

        pops[step] = n_new
        erefs[step] = e_ref
        esteps[step] = e_step

        if step >= cfg.n_equil and (step - cfg.n_equil) % cfg.record_every == 0:
            U, V = invariant_values(*_split(R))
            h, _, _ = np.histogram2d(U, np.maximum(V, 0.0), bins=[u_edges, v_edges])
            hist += h
            out_of_range += n_new - int(h.sum())
            recorded += n_new

    meas = esteps[cfg.n_equil :]
    energy = float(np.mean(meas))
    error = blocked_error(meas)
    mass = hist.sum()
    result = DmcResult(
        energy=energy,
        error=error,
        tau=tau,
        guided=cfg.guided,
        potential=cfg.potential,
        kappa=cfg.kappa,
        population=pops,
        e_ref=erefs,
        e_step=esteps,
        hist=hist / mass if mass > 0 else hist,
        u_edges=u_edges,
        v_edges=v_edges,
        out_of_range=out_of_range / recorded if recorded else 0.0,
        kills=kills,
        walker_steps=walker_steps,
    )
    if kills > 1e-4 * walker_steps:
        result.flagged = True
        result.notes.append(f"soft wall removed {kills} walkers (> 0.01% of walker-steps)")
    log.info("dmc tau=%g guided=%s E=%.5f +- %.5f", tau, cfg.guided, energy, error)
    return result


def tau_extrapolate(results: list[DmcResult]) -> tuple[float, float]:
    """Weighted linear fit E(tau) = E0 + c tau; returns (E0, sigma(E0))."""
    taus = np.array([r.tau for r in results])
    E = np.array([r.energy for r in results])
    sig = np.array([r.error for r in results])
    A = np.stack([np.ones_like(taus), taus], axis=1) / sig[:, None]
    cov = np.linalg.inv(A.T @ A)
    coef = cov @ A.T @ (E / sig)
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def _binned_pdf(model: GroundStateModel, u_edges, v_edges, sub: int = 8) -> np.ndarray:
    """Mass of the ground-state density in each bin, by midpoint sub-cells (domain clipped)."""
    du = np.diff(u_edges)[0] / sub
    dv = np.diff(v_edges)[0] / sub
    uc = u_edges[0] + du * (np.arange((len(u_edges) - 1) * sub) + 0.5)
    vc = v_edges[0] + dv * (np.arange((len(v_edges) - 1) * sub) + 0.5)
    dens = pdf(model, uc[:, None], vc[None, :]) * du * dv
    nu_, nv_ = len(u_edges) - 1, len(v_edges) - 1
    return dens.reshape(nu_, sub, nv_, sub).sum(axis=(1, 3))


def uv_histogram(result: DmcResult) -> dict:
    """Normalized walker histogram on (U, V) plus comparison diagnostics.

    The guided walker density is Psi_T Psi_0, not Psi_T^2, so the distances
    reported here are a qualitative check, not a pass/fail criterion.
    """
    model = minimize_closed(result.kappa)
    ref = _binned_pdf(model, result.u_edges, result.v_edges)
    ref = ref / ref.sum()
    u_mid = 0.5 * (result.u_edges[1:] + result.u_edges[:-1])
    walker_mode = float(u_mid[np.argmax(result.hist.sum(axis=1))])
    fine = np.linspace(1e-6, result.u_edges[-1], 4001)
    model_mode = float(fine[np.argmax(marginal_pdf_u(model, fine))])
    return {
        "hist": result.hist,
        "u_edges": result.u_edges,
        "v_edges": result.v_edges,
        "mass": float(result.hist.sum()),
        "tv_distance": float(0.5 * np.abs(result.hist - ref).sum()),
        "u_mode_walkers": walker_mode,
        "u_mode_model": model_mode,
    }
