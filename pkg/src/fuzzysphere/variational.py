"""Rayleigh-Ritz ground state on the invariant (U, V) plane.

Trial family: Psi = sqrt(4 mu (mu+nu)^2) exp(-(mu U + nu sqrt(V))), normalized
with the flat measure dU dV over 0 <= V <= U^2. In these coordinates the
six-dimensional Laplacian becomes

    6 d_U + 8U d_V + 2U d_UU + 8V d_UV + 8UV d_VV,

which is the divergence form of the metric g^UU = 2U, g^UV = 4V, g^VV = 8UV
with constant density; hence the measure is flat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .membrane import KAPPA, invariant_values
from .numerics import ConvergenceError, RngStream, gauss_laguerre, integrate_constrained, rng_normal

SQRT2M1 = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class VariationalParams:
    mu: float
    nu: float

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not self.mu + self.nu > 0:
            raise ValueError("mu + nu must be positive")

    @property
    def norm(self) -> float:
        """Prefactor 4 mu (mu + nu)^2 of Psi^2."""
        return 4.0 * self.mu * (self.mu + self.nu) ** 2


@dataclass(frozen=True)
class GroundStateModel:
    params: VariationalParams
    energy: float
    kappa: float

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def nu(self) -> float:
        return self.params.nu

    def to_dict(self) -> dict:
        return {"mu": self.mu, "nu": self.nu, "energy": self.energy, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: dict) -> "GroundStateModel":
        return cls(VariationalParams(float(d["mu"]), float(d["nu"])), float(d["energy"]), float(d["kappa"]))


def trial_psi(p: VariationalParams, U: float, V: float) -> float:
    if U < 0 or V < 0:
        raise ValueError("U and V must be nonnegative")
    if V > U * U * (1 + 1e-12):
        raise ValueError("V exceeds U^2: outside the constraint surface")
    return math.sqrt(p.norm) * math.exp(-(p.mu * U + p.nu * math.sqrt(V)))


def energy_closed(p: VariationalParams, kappa: float = KAPPA) -> float:
    mu, nu = p.mu, p.nu
    return 0.5 * (3 * mu + 2 * nu + nu * nu / mu + 3 * kappa / (mu + nu) ** 2)


def energy_gradient(p: VariationalParams, kappa: float = KAPPA) -> tuple[float, float]:
    mu, nu = p.mu, p.nu
    c = 6 * kappa / (mu + nu) ** 3
    return 0.5 * (3 - (nu / mu) ** 2 - c), 0.5 * (2 + 2 * nu / mu - c)


def local_energy(p: VariationalParams, kappa: float, U, V):
    """(H Psi) / Psi for the trial family, evaluated analytically.

    With g = ln Psi, H Psi / Psi = -(Lap g + |grad g|^2)/2 + kappa V where
    Lap g = -6 mu - 2 nu U / sqrt(V) and |grad g|^2 = 2U(mu^2 + nu^2) + 4 mu nu sqrt(V).
    Diverges like nu U / sqrt(V) on the needle line V = 0.
    """
    U = np.asarray(U, dtype=float)
    t = np.sqrt(np.asarray(V, dtype=float))
    mu, nu = p.mu, p.nu
    with np.errstate(divide="ignore", invalid="ignore"):
        cusp = np.where(nu == 0.0, 0.0, nu * U / t)
    return 3 * mu + cusp - U * (mu * mu + nu * nu) - 2 * mu * nu * t + kappa * t * t


def _partials(f: Callable[[float, float], float], U: float, V: float, hU: float, hV: float):
    f0 = f(U, V)
    fU = (f(U + hU, V) - f(U - hU, V)) / (2 * hU)
    fV = (f(U, V + hV) - f(U, V - hV)) / (2 * hV)
    fUU = (f(U + hU, V) - 2 * f0 + f(U - hU, V)) / hU**2
    fVV = (f(U, V + hV) - 2 * f0 + f(U, V - hV)) / hV**2
    fUV = (f(U + hU, V + hV) - f(U + hU, V - hV) - f(U - hU, V + hV) + f(U - hU, V - hV)) / (4 * hU * hV)
    return np.array([fU, fV, fUU, fUV, fVV])


def uv_laplacian_apply(
    f: Callable[[float, float], float], U: float, V: float, rel_step: float = 1e-3
) -> float:
    """Six-dimensional Laplacian of f(U(x,y), V(x,y)) expressed on (U, V).

    Partial derivatives use central differences with one Richardson level;
    steps are proportional to each coordinate because sqrt(V)-type
    dependence varies on the scale of V itself.
    """
    hU = rel_step * abs(U)
    hV = rel_step * abs(V)
    if V - 2 * hV <= 0 or U - 2 * hU <= 0 or V + 2 * hV >= (U - 2 * hU) ** 2:
        raise ValueError(f"(U, V) = ({U}, {V}) too close to the domain boundary for the stencil")
    coarse = _partials(f, U, V, 2 * hU, 2 * hV)
    fine = _partials(f, U, V, hU, hV)
    fU, fV, fUU, fUV, fVV = (4 * fine - coarse) / 3
    return 6 * fU + 8 * U * fV + 2 * U * fUU + 8 * V * fUV + 8 * U * V * fVV


def energy_quadrature(p: VariationalParams, kappa: float = KAPPA, tol: float = 1e-12) -> tuple[float, float]:
    """<Psi|H|Psi> by Gauss product quadrature of Psi^2 times the local energy."""
    val, err = integrate_constrained(
        lambda U, t: local_energy(p, kappa, U, t * t), p.mu, p.nu, tol, rule="gauss"
    )
    return p.norm * val, p.norm * err


def minimize_closed(kappa: float = KAPPA) -> GroundStateModel:
    """Stationary point of the closed-form energy: mu^3 = 3 kappa / 4, nu = (sqrt2 - 1) mu."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    mu = (0.75 * kappa) ** (1.0 / 3.0)
    p = VariationalParams(mu, SQRT2M1 * mu)
    return GroundStateModel(p, energy_closed(p, kappa), kappa)


def _energy_ld(mu, nu, kappa):
    mu, nu, kappa = np.longdouble(mu), np.longdouble(nu), np.longdouble(kappa)
    return (3 * mu + 2 * nu + nu * nu / mu + 3 * kappa / (mu + nu) ** 2) / 2


def minimize_numeric(
    kappa: float = KAPPA, init: VariationalParams | None = None, xtol: float = 1e-12, max_iter: int = 20_000
) -> VariationalParams:
    """Nelder-Mead on the closed-form energy.

    A second pass restarts from the first optimum and minimizes the energy
    relative to its value there (in extended precision), so simplex
    comparisons are not swamped by rounding of E itself.
    """
    if init is None:
        init = VariationalParams(1.0, 1.0)
    if init.mu <= 0 or init.nu < 0:
        raise ValueError("init must lie in the positive quadrant")

    def objective(z, shift):
        mu, nu = z
        if mu <= 0 or nu < 0:
            return math.inf
        return float(_energy_ld(mu, nu, kappa) - shift)

    x = np.array([init.mu, init.nu], dtype=float)
    shift = np.longdouble(0)
    for _ in range(2):
        res = minimize(
            objective, x, args=(shift,), method="Nelder-Mead",
            options={"xatol": xtol, "fatol": 0.0, "maxiter": max_iter, "maxfev": 4 * max_iter},
        )
        if not res.success:
            raise ConvergenceError(f"simplex search did not converge: {res.message}")
        x = res.x
        shift = _energy_ld(x[0], x[1], kappa)
    return VariationalParams(float(x[0]), float(x[1]))


def pdf(model: GroundStateModel, U, V):
    """Ground-state density on (U, V); zero off the constraint surface."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    inside = (U >= 0) & (V >= 0) & (V <= U * U)
    Vc = np.where(inside, V, 0.0)
    dens = model.params.norm * np.exp(-2 * (model.mu * U + model.nu * np.sqrt(Vc)))
    out = np.where(inside, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def normalization_quadrature(model: GroundStateModel, tol: float = 1e-12) -> tuple[float, float]:
    """(constrained, unconstrained) integrals of the density.

    The unconstrained value integrates V over all of [0, inf) and equals
    (mu + nu)^2 / nu^2; it shows that the domain restriction is what makes
    the trial prefactor a normalization.
    """
    mu, nu = model.mu, model.nu
    constrained, _ = integrate_constrained(lambda U, t: 1.0, mu, nu, tol, rule="gauss")
    lag = gauss_laguerre(32)
    # int e^{-2 mu U} dU * int_0^inf e^{-2 nu sqrt V} dV, the latter as int 2t e^{-2 nu t} dt
    u_part = lag.integrate(lambda u: np.ones_like(u)) / (2 * mu)
    v_part = lag.integrate(lambda u: 2 * u) / (2 * nu) ** 2 if nu > 0 else math.inf
    return model.params.norm * constrained, model.params.norm * u_part * v_part


def measure_constant(p: VariationalParams, n: int, stream: RngStream) -> tuple[float, float]:
    """Ratio of the R^6 integral of Psi^2 to its (U, V) integral, by Monte Carlo.

    Importance samples x, y from the Gaussian exp(-2 mu U); the weight is then
    norm (pi/mu)^3 exp(-2 nu sqrt V). Returns (estimate, standard error).
    """
    z = rng_normal(stream, (n, 6), scale=math.sqrt(1.0 / (2 * p.mu)))
    _, V = invariant_values(z[:, :3], z[:, 3:])
    w = p.norm * (math.pi / p.mu) ** 3 * np.exp(-2 * p.nu * np.sqrt(np.maximum(V, 0.0)))
    # the (U, V) integral of Psi^2 is exactly 1
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n))
