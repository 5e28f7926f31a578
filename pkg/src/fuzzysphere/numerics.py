"""Special functions, quadrature, root finding and seeded random streams.

Everything downstream integrates over the constrained domain
``{U >= 0, 0 <= V <= U**2}``; :func:`integrate_constrained` is the one place
that knows how to do that accurately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.polynomial import laguerre, legendre


class ConvergenceError(RuntimeError):
    """Raised when an iterative routine exhausts its budget."""

    def __init__(self, message: str, value: float = math.nan, error: float = math.inf):
        super().__init__(message)
        self.value = value
        self.error = error


# ---------------------------------------------------------------------------
# special functions


def complete_elliptic_e(m: float) -> float:
    """Complete elliptic integral of the second kind E(m), parameter m = k**2.

    Arithmetic-geometric mean with the Legendre correction sum
    E = K * (1 - sum_n 2**(n-1) c_n**2).
    """
    m = float(m)
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"parameter m must lie in [0, 1], got {m!r}")
    if m == 0.0:
        return math.pi / 2
    if m == 1.0:
        return 1.0
    a, b = 1.0, math.sqrt(1.0 - m)
    c = math.sqrt(m)
    total = 0.5 * c * c
    power = 0.5
    for _ in range(64):
        # once a, b agree to a few ulps the remaining c_n**2 terms are below eps**2
        if abs(a - b) <= 4.0 * math.ulp(a):
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        total += power * c * c
    else:  # pragma: no cover - AGM converges quadratically
        raise ConvergenceError("AGM iteration did not converge")
    k = math.pi / (2.0 * a)
    return k * (1.0 - total)


def gamma_fn(x: float) -> float:
    """Gamma function for positive real arguments."""
    if x <= 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x!r}")
    return math.gamma(x)


def hyp2f1(a: float, b: float, c: float, z: float, *, max_terms: int = 10_000) -> float:
    """Gauss hypergeometric 2F1 by direct series, for |z| <= 0.9."""
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a non-positive integer")
    if abs(z) > 0.9:
        raise ValueError(f"series evaluation restricted to |z| <= 0.9, got {z!r}")
    term = 1.0
    terms = [term]
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        terms.append(term)
        if abs(term) < 1e-17 * abs(math.fsum(terms)):
            return math.fsum(terms)
    raise ConvergenceError("hypergeometric series did not converge", math.fsum(terms))


# ---------------------------------------------------------------------------
# quadrature rules


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: Literal["gauss-legendre", "gauss-laguerre", "tanh-sinh", "exp-sinh"]

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return math.fsum(self.weights * np.broadcast_to(f(self.nodes), self.nodes.shape))


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1]."""
    x, w = legendre.leggauss(n)
    return QuadratureRule(x, w, "gauss-legendre")


def gauss_laguerre(n: int) -> QuadratureRule:
    """n-point Gauss-Laguerre rule for int_0^inf f(u) exp(-u) du."""
    x, w = laguerre.laggauss(n)
    return QuadratureRule(x, w, "gauss-laguerre")


def tanh_sinh(h: float, span: float = 3.2) -> QuadratureRule:
    """Double-exponential rule on [0, 1] with step h.

    Tolerates integrable algebraic singularities at both endpoints.
    """
    k = np.arange(-math.floor(span / h), math.floor(span / h) + 1) * h
    y = 0.5 * math.pi * np.sinh(k)
    x = 1.0 / (1.0 + np.exp(-2.0 * y))
    w = h * 0.5 * math.pi * np.cosh(k) / (2.0 * np.cosh(y) ** 2)
    return QuadratureRule(x, w, "tanh-sinh")


def exp_sinh(h: float, lo: float = -4.5, hi: float = 3.5) -> QuadratureRule:
    """Double-exponential rule for int_0^inf g(u) du, weights exclude exp(-u)."""
    k = np.arange(math.ceil(lo / h), math.floor(hi / h) + 1) * h
    x = np.exp(0.5 * math.pi * np.sinh(k))
    w = h * 0.5 * math.pi * np.cosh(k) * x
    return QuadratureRule(x, w, "exp-sinh")


def _constrained_sum(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mu: float,
    nu: float,
    s: np.ndarray,
    ws: np.ndarray,
    u: np.ndarray,
    wu: np.ndarray,
    with_exp: bool,
) -> float:
    # t = U*s, U = u / c(s) with c(s) = 2(mu + nu*s): the exponential becomes exp(-u)
    c = 2.0 * (mu + nu * s)[:, None]
    U = u[None, :] / c
    t = U * s[:, None]
    vals = np.broadcast_to(f(U, t), U.shape)
    integrand = 2.0 * u[None, :] ** 2 * s[:, None] / c**3 * vals
    if with_exp:
        integrand = integrand * np.exp(-u)[None, :]
    terms = ws[:, None] * wu[None, :] * integrand
    return math.fsum(terms.ravel())


def integrate_constrained(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    mu: float,
    nu: float,
    tol: float = 1e-10,
    *,
    rule: Literal["double-exponential", "gauss"] = "double-exponential",
    max_level: int = 8,
) -> tuple[float, float]:
    """int_0^inf dU int_0^U dt 2t f(U, t) exp(-2 mu U - 2 nu t).

    This is the (U, V) integral over 0 <= V <= U**2 with t = sqrt(V).
    ``f`` must accept broadcastable arrays. Refinement doubles the node
    density until successive estimates agree to ``tol`` (relative); returns
    ``(value, error_estimate)``.

    ``rule="gauss"`` uses a Gauss-Legendre x Gauss-Laguerre product, which is
    exact for exponential-polynomial integrands. The default double-exponential
    product copes with the fractional powers in the perimeter, eccentricity
    and shape observables.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if mu + nu <= 0:
        raise ValueError("mu + nu must be positive")
    previous = None
    value = math.nan
    for level in range(max_level + 1):
        if rule == "gauss":
            n = 8 * 2**level
            gl = gauss_legendre(n)
            s, ws = 0.5 * (gl.nodes + 1.0), 0.5 * gl.weights
            lag = gauss_laguerre(min(n, 160))
            value = _constrained_sum(f, mu, nu, s, ws, lag.nodes, lag.weights, False)
        elif rule == "double-exponential":
            h = 0.5**level
            ts, es = tanh_sinh(h), exp_sinh(h)
            value = _constrained_sum(f, mu, nu, ts.nodes, ts.weights, es.nodes, es.weights, True)
        else:
            raise ValueError(f"unknown rule {rule!r}")
        if previous is not None:
            err = abs(value - previous)
            if err <= tol * max(abs(value), 1e-300) or err == 0.0:
                return value, err
        previous = value
    err = abs(value - previous) if previous is not None else math.inf
    raise ConvergenceError(f"constrained quadrature missed tol={tol:g}", value, err)


# ---------------------------------------------------------------------------
# root finding


def bisect_root(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise ValueError(f"interval [{lo}, {hi}] does not bracket a root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
        if mid in (lo, hi) and hi - lo <= 2 * math.ulp(mid):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# random streams


@dataclass
class RngStream:
    """Counter-based (Philox) stream keyed by ``(seed, stream)``.

    Distinct stream ids give independent sequences; the same pair always
    replays the same sequence.
    """

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def spawn(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)

    def random(self, size=None) -> np.ndarray:
        return self._gen.random(size)


def rng_uniform(stream: RngStream, size=None, low: float = 0.0, high: float = 1.0):
    return low + (high - low) * stream.random(size)


def rng_exponential(stream: RngStream, rate: float, size=None):
    if rate <= 0:
        raise ValueError("rate must be positive")
    # 1 - u lies in (0, 1], so the log is finite
    return -np.log1p(-stream.random(size)) / rate


def rng_gamma_shape2(stream: RngStream, rate: float, size=None):
    return rng_exponential(stream, rate, size) + rng_exponential(stream, rate, size)


def rng_normal(stream: RngStream, size=None, loc: float = 0.0, scale: float = 1.0):
    """Box-Muller; consumes two uniforms per pair of normals."""
    n = 1 if size is None else int(np.prod(size))
    m = (n + 1) // 2
    u1 = 1.0 - stream.random(m)
    u2 = stream.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])[:n]
    z = loc + scale * z
    if size is None:
        return float(z[0])
    return z.reshape(size)
