"""Ground-state expectations of area, eccentricity, perimeter and shape.

Each constant is computed three ways: closed forms in (mu, nu), deterministic
quadrature over the constrained (U, V) domain, and Monte Carlo over exact
draws from the ground-state density. Quadrature is the reference.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .ellipse import ALPHA, BETA
from .numerics import (
    RngStream,
    complete_elliptic_e,
    gamma_fn,
    gauss_legendre,
    hyp2f1,
    integrate_constrained,
    rng_exponential,
    rng_gamma_shape2,
)
from .variational import SQRT2M1, GroundStateModel

SQRT2 = math.sqrt(2.0)

# Printed decimals, in kappa-free units: <A> k^(1/3), <E3>, <L> k^(1/6), <S>.
PRINTED_VALUES = {"area": 4.890, "e3": 0.8337, "perimeter": 6.789, "shape": 2.225}
PRINTED_TOLERANCES = {"area": 1e-3, "e3": 5e-4, "perimeter": 2e-3, "shape": 2e-3}
KAPPA_EXPONENT = {"area": 1 / 3, "e3": 0.0, "perimeter": 1 / 6, "shape": 0.0, "perimeter_exact": 1 / 6}
CLOSED_FORM_RTOL = 1e-4


def _area(U, V):
    return 2 * np.pi * np.sqrt(V)


def _e3(U, V):
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(U > 0, V / (U * U), 0.0)
    return np.clip(1.0 - w, 0.0, 1.0) ** 0.25


def _perimeter(U, V):
    return ALPHA * np.sqrt(U) + BETA * V**0.25


def _shape(U, V):
    return _perimeter(U, V) ** 2 / (4 * np.pi**2 * np.sqrt(V))


_ellipe = np.vectorize(complete_elliptic_e, otypes=[float])


def _perimeter_exact(U, V):
    U, V = np.broadcast_arrays(np.asarray(U, float), np.asarray(V, float))
    d = np.sqrt(np.maximum(U * U - V, 0.0))
    a = np.sqrt(U + d)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(a > 0, 1.0 - V / (U + d) ** 2, 0.0)
    return 4 * a * _ellipe(np.clip(m, 0.0, 1.0))


OBSERVABLES: dict[str, Callable] = {
    "area": _area,
    "e3": _e3,
    "perimeter": _perimeter,
    "shape": _shape,
    "perimeter_exact": _perimeter_exact,
}


@dataclass
class SampleBatch:
    U: np.ndarray
    V: np.ndarray
    mu: float
    nu: float
    seed: int
    stream: int
    n_proposed: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.U) / self.n_proposed if self.n_proposed else math.nan

    def __len__(self) -> int:
        return len(self.U)


@dataclass
class MomentReport:
    name: str
    closed_form: float | None
    quadrature: float
    quadrature_error: float
    mc_mean: float | None = None
    mc_stderr: float | None = None
    mc_n: int = 0
    printed_value: float | None = None
    kappa_exponent: float = 0.0
    kappa: float = 1.0
    closed_form_variants: dict[str, float] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)

    def scaled(self, value: float | None) -> float | None:
        """Value in kappa-free units, comparable to the printed decimals."""
        return None if value is None else value * self.kappa**self.kappa_exponent

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# sampling


def sample_uv(model: GroundStateModel, n: int, stream: RngStream, chunk: int = 1 << 21) -> SampleBatch:
    """Exact draws from the ground-state density by rejection.

    Proposals U ~ Exp(2 mu) and t ~ Gamma(2, 2 nu) have joint density
    proportional to t exp(-2 mu U - 2 nu t); keeping t <= U and setting
    V = t^2 leaves exactly exp(-2 mu U - 2 nu sqrt V) on 0 <= V <= U^2.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if model.nu <= 0:
        raise ValueError("rejection sampler needs nu > 0")
    Us, ts = [], []
    have = 0
    proposed = 0
    while have < n:
        U = rng_exponential(stream, 2 * model.mu, chunk)
        t = rng_gamma_shape2(stream, 2 * model.nu, chunk)
        idx = np.flatnonzero(t <= U)
        need = n - have
        if len(idx) >= need:
            # stop the proposal count at the n-th acceptance
            idx = idx[:need]
            proposed += int(idx[-1]) + 1
        else:
            proposed += chunk
        Us.append(U[idx])
        ts.append(t[idx])
        have += len(idx)
    U = np.concatenate(Us) if Us else np.empty(0)
    t = np.concatenate(ts) if ts else np.empty(0)
    return SampleBatch(U, t * t, model.mu, model.nu, stream.seed, stream.stream, proposed)


def mc_moment(batch: SampleBatch, observable: Callable) -> tuple[float, float]:
    """Sample mean and standard error (std / sqrt n)."""
    n = len(batch)
    if n == 0:
        raise ValueError("empty sample batch")
    vals = np.asarray(np.broadcast_to(observable(batch.U, batch.V), batch.U.shape), dtype=float)
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((vals - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


# ---------------------------------------------------------------------------
# marginal distributions (for sampler checks)


def marginal_cdf_t(model: GroundStateModel, t):
    """CDF of sqrt(V): Gamma(2, 2(mu + nu)) after integrating U over [t, inf)."""
    x = 2 * (model.mu + model.nu) * np.asarray(t, float)
    return np.where(x > 0, -np.expm1(-x) - x * np.exp(-x), 0.0)


def marginal_pdf_u(model: GroundStateModel, U):
    """Density of U: the inner integral of 2t exp(-2 nu t) over [0, U] in closed form."""
    mu, nu = model.mu, model.nu
    U = np.asarray(U, float)
    x = 2 * nu * U
    inner = (-np.expm1(-x) - x * np.exp(-x)) / (2 * nu * nu)
    return model.params.norm * np.exp(-2 * mu * U) * inner


def marginal_cdf_u(model: GroundStateModel, u, order: int = 64):
    """CDF of U by Gauss-Legendre quadrature of :func:`marginal_pdf_u` on [0, u]."""
    gl = gauss_legendre(order)
    u = np.atleast_1d(np.asarray(u, float))
    nodes = 0.5 * u[:, None] * (gl.nodes[None, :] + 1)
    vals = marginal_pdf_u(model, nodes) @ gl.weights * 0.5 * u
    return np.clip(vals, 0.0, 1.0)


# ---------------------------------------------------------------------------
# closed forms


def _is_variational_minimizer(model: GroundStateModel) -> bool:
    return (
        abs(model.nu / model.mu - SQRT2M1) < 1e-12
        and abs(model.mu**3 / (0.75 * model.kappa) - 1) < 1e-12
    )


def area_closed(mu: float, nu: float) -> float:
    return 2 * math.pi / (mu + nu)


def area_substituted(kappa: float) -> float:
    return kappa ** (-1 / 3) * 2 * math.pi * (2 / 9) ** (1 / 6)


def _arccot_reciprocal(x: float) -> float:
    """arccot x = arctan(1/x), range (-pi/2, pi/2]."""
    return math.atan(1.0 / x) if x != 0 else math.pi / 2


def _arccot_continuous(x: float) -> float:
    """arccot x = pi/2 - arctan x, range (0, pi)."""
    return math.pi / 2 - math.atan(x)


def e3_general(
    mu: float, nu: float, *, b2_first: str = "arctan", b3_log_factor: str = "1+", arccot=_arccot_reciprocal
) -> float:
    """The (4/5) mu (mu+nu)^2 [-A + 5 (B1+B2+B3) / (64 nu^(5/2) (mu^2-nu^2)^(7/4))] form.

    ``b2_first`` selects arctan (as typeset) or arccot for the first bracket
    term of B2; ``b3_log_factor="1+"`` keeps B3 = 3 sqrt2 mu^3 {1 + 2nu^2/mu^2 ln[..]}
    as typeset, ``"1-"`` uses 3 sqrt2 mu^3 (1 - 2nu^2/mu^2) ln[..].
    Valid for 0 < nu < mu.
    """
    if not 0 < nu < mu:
        raise ValueError("closed form needs 0 < nu < mu")
    r = mu * mu - nu * nu
    A = (
        3 * math.sqrt(math.pi) * nu * gamma_fn(9 / 4) * hyp2f1(2, 2.5, 2.75, (nu / mu) ** 2)
        / (2 * mu**4 * gamma_fn(11 / 4))
    )
    B1 = 8 / mu * math.sqrt(nu) * (3 * mu * mu - 2 * nu * nu) * r**0.75
    q = math.sqrt(2 * mu / nu) * (1 - (nu / mu) ** 2) ** 0.25
    first = math.atan(1 - q) if b2_first == "arctan" else arccot(1 - q)
    B2 = 6 * SQRT2 * mu * (mu * mu - 2 * nu * nu) * (first - arccot(1 + q))
    s2n, s4r = math.sqrt(2 * nu), r**0.25
    log_term = math.log((nu - s2n * s4r + math.sqrt(r)) / (nu + s2n * s4r + math.sqrt(r)))
    if b3_log_factor == "1+":
        B3 = 3 * SQRT2 * mu**3 * (1 + 2 * nu * nu / (mu * mu) * log_term)
    else:
        B3 = 3 * SQRT2 * mu**3 * (1 - 2 * nu * nu / (mu * mu)) * log_term
    pref = 0.8 * mu * (mu + nu) ** 2
    return pref * (-A + 5 / (64 * nu**2.5 * r**1.75) * (B1 + B2 + B3))


def e3_corrected(mu: float, nu: float) -> float:
    """General form with both B2 terms as arccot and B3 = 3 sqrt2 mu (mu^2 - 2nu^2) ln[..].

    The arccot difference is written as arctan(1+q) - arctan(1-q) - pi, which
    is the branch continuous in q; it coincides with arccot x = arctan(1/x)
    whenever q > 1 (true at the variational minimizer).
    """
    if not 0 < nu < mu:
        raise ValueError("closed form needs 0 < nu < mu")
    r = mu * mu - nu * nu
    A = (
        3 * math.sqrt(math.pi) * nu * gamma_fn(9 / 4) * hyp2f1(2, 2.5, 2.75, (nu / mu) ** 2)
        / (2 * mu**4 * gamma_fn(11 / 4))
    )
    B1 = 8 / mu * math.sqrt(nu) * (3 * mu * mu - 2 * nu * nu) * r**0.75
    q = math.sqrt(2 * mu / nu) * (1 - (nu / mu) ** 2) ** 0.25
    B2 = 6 * SQRT2 * mu * (mu * mu - 2 * nu * nu) * (math.atan(1 + q) - math.atan(1 - q) - math.pi)
    s2n, s4r = math.sqrt(2 * nu), r**0.25
    log_term = math.log((nu - s2n * s4r + math.sqrt(r)) / (nu + s2n * s4r + math.sqrt(r)))
    B3 = 3 * SQRT2 * mu * (mu * mu - 2 * nu * nu) * log_term
    pref = 0.8 * mu * (mu + nu) ** 2
    return pref * (-A + 5 / (64 * nu**2.5 * r**1.75) * (B1 + B2 + B3))


def e3_substituted(arccot=_arccot_reciprocal) -> float:
    """Numerical expression at nu/mu = sqrt2 - 1 (kappa drops out)."""
    c = 2 * (SQRT2 - 1)
    z = 3 - 2 * SQRT2
    rational = (19 + 13 * SQRT2) / 2
    hyper = (
        -3 * (SQRT2 - 1) * math.sqrt(math.pi) * gamma_fn(5 / 4) / gamma_fn(11 / 4)
        * hyp2f1(2, 2.5, 2.75, z)
    )
    pref = 3 / 8 * ((299249 + 211601 * SQRT2) / 2) ** 0.25
    log_part = 0.5 * math.log((2 - 2 * c**0.25 + c**0.5) / (2 + 2 * c**0.25 + c**0.5))
    w = 2**0.75 * (1 + SQRT2) ** 0.25
    return rational + hyper + pref * (log_part + arccot(1 - w) - arccot(1 + w))


def perimeter_closed(mu: float, nu: float) -> float:
    if nu <= 0:
        raise ValueError("closed form needs nu > 0")
    num = (
        -2 * ALPHA * mu**2.5 - 5 * ALPHA * mu**1.5 * nu + 3 * BETA * mu**0.5 * nu**2
        + 2 * ALPHA * (mu + nu) ** 2.5
    )
    return 0.25 * math.sqrt(math.pi / 2) * num / (nu * nu * math.sqrt(mu * (mu + nu)))


def perimeter_substituted(kappa: float) -> float:
    pi = math.pi
    return (
        kappa ** (-1 / 6) * 0.25 * ((10 - 7 * SQRT2) / 3) ** (1 / 6)
        * math.sqrt((41 + 29 * SQRT2) * pi)
        * (4 * (-6 + SQRT2 + 4 * 2**0.25) + 3 * (-4 + 3 * SQRT2) * pi)
    )


def shape_closed(mu: float, nu: float) -> float:
    if nu <= 0:
        raise ValueError("closed form needs nu > 0")
    a, b = ALPHA, BETA
    poly = (a * a * nu * (2 * mu + nu) + a * b * mu * (nu - mu) + b * b * mu * nu) * math.sqrt(nu)
    arc = a * b * math.sqrt(mu) * (mu + nu) ** 2 * math.atan(math.sqrt(nu / mu))
    return (poly + arc) / (mu * nu**1.5) / (4 * math.pi**2)


def shape_substituted() -> float:
    pi = math.pi
    return (
        (16 + 16 * SQRT2 - 4 * pi - 4 * SQRT2 * pi + pi * pi)
        + 2 * math.sqrt(7 + 5 * SQRT2) * (-4 + SQRT2 * pi) * math.atan(math.sqrt(2 * (1 + SQRT2)))
    ) / pi**2


def closed_form_variants(name: str, model: GroundStateModel) -> dict[str, float]:
    """Every printed reading of a closed form, keyed by a short label."""
    mu, nu = model.mu, model.nu
    at_min = _is_variational_minimizer(model)
    out: dict[str, float] = {}
    if name == "area":
        out["general"] = area_closed(mu, nu)
        if at_min:
            out["substituted"] = area_substituted(model.kappa)
    elif name == "e3":
        if 0 < nu < mu:
            out["general, as typeset"] = e3_general(mu, nu)
            out["general, arccot in both B2 terms"] = e3_general(mu, nu, b2_first="arccot")
            out["general, arccot x = pi/2 - arctan x"] = e3_general(mu, nu, arccot=_arccot_continuous)
            out["general, B2 arccot + B3 (1 - 2nu^2/mu^2) ln"] = e3_corrected(mu, nu)
        if at_min:
            out["substituted, arccot x = arctan(1/x)"] = e3_substituted()
            out["substituted, arccot x = pi/2 - arctan x"] = e3_substituted(_arccot_continuous)
    elif name == "perimeter":
        if nu > 0:
            out["general"] = perimeter_closed(mu, nu)
        if at_min:
            out["substituted"] = perimeter_substituted(model.kappa)
    elif name == "shape":
        if nu > 0:
            out["general"] = shape_closed(mu, nu)
        if at_min:
            out["substituted"] = shape_substituted()
    return out


# ---------------------------------------------------------------------------
# expectations


def quadrature_moment(model: GroundStateModel, name: str, tol: float = 1e-10) -> tuple[float, float]:
    f = OBSERVABLES[name]
    val, err = integrate_constrained(lambda U, t: f(U, t * t), model.mu, model.nu, tol)
    return model.params.norm * val, model.params.norm * err


def expectation(
    model: GroundStateModel, name: str, batch: SampleBatch | None = None, tol: float = 1e-10
) -> MomentReport:
    quad, err = quadrature_moment(model, name, tol)
    variants = closed_form_variants(name, model)
    matching = {k: v for k, v in variants.items() if abs(v - quad) <= CLOSED_FORM_RTOL * abs(quad)}
    closed = None
    if matching:
        closed = min(matching.values(), key=lambda v: abs(v - quad))
    report = MomentReport(
        name=name,
        closed_form=closed,
        quadrature=quad,
        quadrature_error=err,
        printed_value=PRINTED_VALUES.get(name),
        kappa_exponent=KAPPA_EXPONENT.get(name, 0.0),
        kappa=model.kappa,
        closed_form_variants=variants,
    )
    report.flags = {
        f"closed form [{k}] matches quadrature": abs(v - quad) <= CLOSED_FORM_RTOL * abs(quad)
        for k, v in variants.items()
    }
    if batch is not None and len(batch) > 1:
        report.mc_mean, report.mc_stderr = mc_moment(batch, OBSERVABLES[name])
        report.mc_n = len(batch)
        report.flags["monte carlo within 3 sigma"] = abs(report.mc_mean - quad) <= 3 * report.mc_stderr
    if report.printed_value is not None and _is_variational_minimizer(model):
        scaled = report.scaled(quad)
        report.flags["quadrature matches printed decimal"] = (
            abs(scaled - report.printed_value) <= PRINTED_TOLERANCES[name]
        )
    return report


def expected_area(model, batch=None, tol=1e-10) -> MomentReport:
    return expectation(model, "area", batch, tol)


def expected_e3(model, batch=None, tol=1e-10) -> MomentReport:
    return expectation(model, "e3", batch, tol)


def expected_perimeter(model, batch=None, tol=1e-10) -> MomentReport:
    return expectation(model, "perimeter", batch, tol)


def expected_shape(model, batch=None, tol=1e-10) -> MomentReport:
    return expectation(model, "shape", batch, tol)


def expected_perimeter_exact(model, batch=None, tol=1e-8) -> MomentReport:
    """Mean of the true elliptic-integral perimeter (no printed counterpart)."""
    return expectation(model, "perimeter_exact", batch, tol)
