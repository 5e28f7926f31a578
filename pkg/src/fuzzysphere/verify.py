"""Acceptance checks, each an independent pass/fail with a one-line detail."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dmc import DmcConfig, run_dmc, tau_extrapolate
from .ellipse import aspect_ratio_from_shape, perimeter_exact, perimeter_approx, shape_param, shape_param_exact
from .membrane import (
    KAPPA,
    InvariantCoords,
    MembraneConfig,
    commutator_trace_sq,
    commutator_trace_sq_batch,
    gauge_invariance_residual,
    invariant_values,
    invariants,
    random_rotation,
    rotate_so2,
    rotate_so3,
)
from .numerics import RngStream
from .observables import (
    CLOSED_FORM_RTOL,
    PRINTED_TOLERANCES,
    PRINTED_VALUES,
    expectation,
    sample_uv,
)
from .variational import (
    SQRT2M1,
    GroundStateModel,
    VariationalParams,
    energy_closed,
    energy_gradient,
    energy_quadrature,
    measure_constant,
    minimize_closed,
    minimize_numeric,
    normalization_quadrature,
    uv_laplacian_apply,
)


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str
    runtime: float
    budget: float
    info: list[str] = field(default_factory=list)
    parts: dict[str, bool] = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        slow = "" if self.within_budget else f" (over {self.budget:g} s budget)"
        return f"[{tag}] {self.number:2d} {self.title}: {self.detail} [{self.runtime:.2f} s{slow}]"


@dataclass
class VerifyOptions:
    kappa: float = KAPPA
    seed: int = 20240917
    # added to kappa for the model under test only; oracles keep the true value
    kappa_shift: float = 0.0
    mc_samples: int = 1_000_000
    measure_samples: int = 200_000
    quick: bool = False
    skip_dmc: bool = False
    dmc_walkers: int = 10_000
    harmonic_steps: int = 30_000
    membrane_time: float = 8.0
    taus: tuple[float, ...] = (0.004, 0.002, 0.001)


def _model_under_test(opt: VerifyOptions) -> GroundStateModel:
    m = minimize_closed(opt.kappa + opt.kappa_shift)
    # energy re-evaluated at the true coupling, as any caller would see it
    return GroundStateModel(m.params, energy_closed(m.params, opt.kappa), opt.kappa)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# 1 - 3: variational ground state


def check_minimizer(opt: VerifyOptions) -> tuple[bool, str, dict]:
    k = opt.kappa
    m = _model_under_test(opt)
    r_mu = _rel(m.mu**3, 0.75 * k)
    r_nu = _rel(m.nu / m.mu, SQRT2M1)
    g = energy_gradient(m.params, k)
    stationary = max(abs(g[0]), abs(g[1])) <= 1e-10
    stream = RngStream(opt.seed, 101)
    worst = 0.0
    for _ in range(10):
        init = VariationalParams(*(0.2 + 3.0 * stream.random(2)))
        p = minimize_numeric(k, init)
        worst = max(worst, _rel(p.mu, m.mu), _rel(p.nu, m.nu))
    parts = {
        "mu^3 = 3 kappa/4": r_mu <= 1e-12,
        "nu/mu = sqrt2 - 1": r_nu <= 1e-12,
        "gradient vanishes": stationary,
        "numeric minimizer agrees": worst <= 1e-6,
    }
    detail = (
        f"mu={m.mu:.12f} (rel {r_mu:.1e}), nu/mu rel {r_nu:.1e}, "
        f"|grad E|={max(map(abs, g)):.1e}, numeric worst rel {worst:.1e}"
    )
    return all(parts.values()), detail, parts


def check_energy(opt: VerifyOptions) -> tuple[bool, str, dict]:
    k = opt.kappa
    worst = 0.0
    for mu, nu in itertools.product(np.linspace(0.5, 3.0, 5), np.linspace(0.1, 2.0, 5)):
        p = VariationalParams(float(mu), float(nu))
        q, _ = energy_quadrature(p, k)
        worst = max(worst, _rel(q, energy_closed(p, k)))
    m = _model_under_test(opt)
    q_min, _ = energy_quadrature(m.params, k)
    oracle = 3 * (0.75 * k) ** (1 / 3)
    printed = k ** (-1 / 3) * 3 * 0.75 ** (1 / 3)
    flagged = _rel(printed, q_min) > 1e-6
    parts = {
        "grid quadrature = closed form": worst <= 1e-6,
        "minimum = 3(3 kappa/4)^(1/3)": _rel(q_min, oracle) <= 1e-6,
        "printed kappa exponent flagged": flagged,
    }
    detail = (
        f"grid worst rel {worst:.1e}; E_min={q_min:.10f} vs {oracle:.10f}; "
        f"printed kappa^(-1/3) form gives {printed:.6f} (flagged)"
    )
    return all(parts.values()), detail, parts


def check_normalization(opt: VerifyOptions) -> tuple[bool, str, dict]:
    m = _model_under_test(opt)
    inside, unconstrained = normalization_quadrature(m)
    ref = 6 + 4 * math.sqrt(2)
    parts = {
        "constrained integral = 1": abs(inside - 1) <= 1e-8,
        "unconstrained = 6 + 4 sqrt2": _rel(unconstrained, ref) <= 1e-8,
    }
    return all(parts.values()), f"constrained {inside:.12f}, unconstrained {unconstrained:.8f} vs {ref:.8f}", parts


# ---------------------------------------------------------------------------
# 4 - 6: the four constants


def check_constants(opt: VerifyOptions) -> tuple[bool, str, dict]:
    m = _model_under_test(opt)
    parts, bits = {}, []
    for name in ("area", "e3", "perimeter", "shape"):
        rep = expectation(m, name, None, 1e-10)
        val = rep.scaled(rep.quadrature)
        ok = abs(val - PRINTED_VALUES[name]) <= PRINTED_TOLERANCES[name]
        parts[name] = ok
        bits.append(f"{name} {val:.5f} vs {PRINTED_VALUES[name]}{'' if ok else ' MISS'}")
    return all(parts.values()), "; ".join(bits), parts


def check_closed_forms(opt: VerifyOptions) -> tuple[bool, str, dict]:
    """Passes when some printed reading of each formula reproduces quadrature.

    Readings that only match after a correction do not count toward the pass;
    every mismatching reading is reported with its gap.
    """
    m = _model_under_test(opt)
    parts, bits, info = {}, [], []
    for name in ("area", "e3", "perimeter", "shape"):
        rep = expectation(m, name, None, 1e-12)
        printed_ok = False
        for label, v in rep.closed_form_variants.items():
            gap = _rel(v, rep.quadrature)
            if gap <= CLOSED_FORM_RTOL:
                printed_ok = printed_ok or "+ B3" not in label
            else:
                info.append(f"{name} [{label}] flagged, rel gap {gap:.3g}")
        parts[name] = printed_ok
        bits.append(f"{name} {'ok' if printed_ok else 'no printed reading matches'}")
    return all(parts.values()), "; ".join(bits) + f"; {len(info)} readings flagged", parts, info


def check_monte_carlo(opt: VerifyOptions) -> tuple[bool, str, dict]:
    m = _model_under_test(opt)
    batch = sample_uv(m, opt.mc_samples, RngStream(opt.seed, 1))
    parts, bits = {}, []
    for name in ("area", "e3", "perimeter", "shape"):
        rep = expectation(m, name, batch, 1e-10)
        z = (rep.mc_mean - rep.quadrature) / rep.mc_stderr
        parts[name] = abs(z) <= 3
        bits.append(f"{name} z={z:+.2f}")
    acc = (SQRT2M1**2) / 2
    rate = batch.acceptance_rate
    sig = math.sqrt(acc * (1 - acc) / batch.n_proposed)
    parts["acceptance"] = abs(rate - acc) <= 3 * sig
    bits.append(f"acceptance {rate:.6f} vs {acc:.6f} (z={(rate - acc) / sig:+.2f})")
    return all(parts.values()), "; ".join(bits), parts


# ---------------------------------------------------------------------------
# 7 - 11: geometry and symmetry


def check_geometry_bounds(opt: VerifyOptions) -> tuple[bool, str, dict]:
    worst_l = worst_s = 0.0
    for W in np.linspace(0.0, 1.0, 1001)[1:]:
        inv = InvariantCoords(1.0, float(W), float(W))
        d = math.sqrt(1.0 - W)
        a, b = math.sqrt(1 + d), math.sqrt(W / (1 + d))
        worst_l = max(worst_l, _rel(perimeter_approx(inv), perimeter_exact(a, b)))
        worst_s = max(worst_s, _rel(shape_param(inv), shape_param_exact(a, b)))
    needle = _rel(perimeter_approx(InvariantCoords(1.0, 0.0, 0.0)), perimeter_exact(math.sqrt(2.0), 0.0))
    circle_l = _rel(perimeter_approx(InvariantCoords(1.0, 1.0, 1.0)), perimeter_exact(1.0, 1.0))
    circle_s = abs(shape_param(InvariantCoords(1.0, 1.0, 1.0)) - 1.0)
    parts = {
        "perimeter within 4%": worst_l <= 0.04,
        "shape within 8%": worst_s <= 0.08,
        "endpoints exact": max(needle, circle_l, circle_s) <= 1e-12,
    }
    detail = (
        f"max perimeter err {100 * worst_l:.3f}%, max shape err {100 * worst_s:.3f}%, "
        f"endpoint errs {needle:.1e}/{circle_l:.1e}/{circle_s:.1e}"
    )
    return all(parts.values()), detail, parts


def check_aspect_ratio(opt: VerifyOptions) -> tuple[bool, str, dict]:
    r = aspect_ratio_from_shape(2.225)
    ok = abs(r - 4.973) <= 0.005
    return ok, f"aspect ratio at S=2.225 is {r:.5f} (target 4.973 +- 0.005)", {"aspect": ok}


def check_commutator(opt: VerifyOptions) -> tuple[bool, str, dict]:
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(opt.seed, spawn_key=(9,))))
    z = gen.standard_normal((10_000, 6)) * gen.uniform(0.1, 3.0, (10_000, 1))
    _, V = invariant_values(z[:, :3], z[:, 3:])
    tr = commutator_trace_sq_batch(z[:, :3], z[:, 3:])
    worst = float(np.max(np.abs(tr + 8.0 * V) / (8.0 * V)))
    # the scalar path on a subset, so both code routes are exercised
    for v in z[:200]:
        cfg = MembraneConfig(v[:3], v[3:])
        worst = max(worst, _rel(commutator_trace_sq(cfg), -8.0 * float(invariant_values(cfg.x, cfg.y)[1])))
    ok = worst <= 1e-12
    return ok, f"max rel deviation of Tr([X,Y]^2) from -8V: {worst:.2e}", {"identity": ok}


def laplacian_6d(g: Callable[[np.ndarray], float], z: np.ndarray, h: float = 1e-3) -> float:
    """Sum of second derivatives of g on R^6, central differences + Richardson."""

    def second(step):
        f0 = g(z)
        tot = 0.0
        for i in range(6):
            e = np.zeros(6)
            e[i] = step
            tot += g(z + e) - 2 * f0 + g(z - e)
        return tot / step**2

    return (4 * second(h) - second(2 * h)) / 3


_TEST_FUNCTIONS: dict[str, Callable[[float, float], float]] = {
    "exp(-U) (1 + V)": lambda U, V: math.exp(-U) * (1 + V),
    "sqrt(V) exp(-U/2)": lambda U, V: math.sqrt(V) * math.exp(-0.5 * U),
    "U^2 V^(3/4)": lambda U, V: U * U * V**0.75,
    "trial density": lambda U, V: math.exp(-2 * (1.2 * U + 0.5 * math.sqrt(V))),
}


def check_laplacian(opt: VerifyOptions) -> tuple[bool, str, dict]:
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(opt.seed, spawn_key=(10,))))
    worst = 0.0
    n_done = 0
    while n_done < 20:
        z = gen.standard_normal(6)
        U, V = (float(v) for v in invariant_values(z[:3], z[3:]))
        W = V / (U * U)
        if not (0.05 < W < 0.9 and U > 0.2):
            continue  # keep the (U, V) stencil inside the domain
        for f in _TEST_FUNCTIONS.values():
            pulled = lambda w, f=f: f(*(float(c) for c in invariant_values(w[:3], w[3:])))  # noqa: E731
            ref = laplacian_6d(pulled, z)
            got = uv_laplacian_apply(f, U, V)
            worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
        n_done += 1
    ok = worst <= 1e-5
    return ok, f"20 points x {len(_TEST_FUNCTIONS)} functions, max rel gap {worst:.2e}", {"laplacian": ok}


def check_symmetry(opt: VerifyOptions) -> tuple[bool, str, dict]:
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(opt.seed, spawn_key=(11,))))
    worst_inv = 0.0
    worst_gauge = 0.0
    fns = [
        lambda c: invariants(c).U,
        lambda c: invariants(c).V,
        lambda c: math.exp(-invariants(c).U) * math.sqrt(invariants(c).V),
    ]
    for _ in range(200):
        v = gen.standard_normal(6)
        cfg = MembraneConfig(v[:3], v[3:])
        ref = invariants(cfg)
        moved = rotate_so2(rotate_so3(cfg, random_rotation(gen)), float(gen.uniform(0, 2 * math.pi)))
        got = invariants(moved)
        worst_inv = max(worst_inv, *(abs(a - b) / max(abs(b), 1.0) for a, b in
                                     ((got.U, ref.U), (got.V, ref.V), (got.W, ref.W))))
        for f in fns:
            worst_gauge = max(worst_gauge, gauge_invariance_residual(f, cfg, 1e-4))
    parts = {"invariants": worst_inv <= 1e-10, "gauge residual": worst_gauge < 1e-7}
    return all(parts.values()), f"max invariant change {worst_inv:.1e}, max gauge residual {worst_gauge:.1e}", parts


# ---------------------------------------------------------------------------
# 12 - 13: DMC and measure


def check_dmc(opt: VerifyOptions) -> tuple[bool, str, dict]:
    harm = run_dmc(
        DmcConfig(
            n_walkers=opt.dmc_walkers, tau=0.002, n_equil=1000, n_measure=opt.harmonic_steps,
            seed=opt.seed, guided=False, potential="harmonic",
        )
    )
    z = (harm.energy - 3.0) / harm.error
    results = []
    for tau in opt.taus:
        steps = int(round(opt.membrane_time / tau))
        results.append(
            run_dmc(
                DmcConfig(
                    n_walkers=opt.dmc_walkers, tau=tau, n_equil=max(steps // 4, 200), n_measure=steps,
                    seed=opt.seed + 1, guided=True, kappa=opt.kappa,
                )
            )
        )
    e0, s0 = tau_extrapolate(results)
    bound = 3 * (0.75 * opt.kappa) ** (1 / 3)
    ordered = sorted(results, key=lambda r: r.tau)
    monotone = all(
        b.energy - a.energy >= -3 * math.hypot(a.error, b.error) for a, b in zip(ordered, ordered[1:])
    ) or all(b.energy - a.energy <= 3 * math.hypot(a.error, b.error) for a, b in zip(ordered, ordered[1:]))
    info = [f"membrane estimates {'are' if monotone else 'are not'} monotone in tau within errors"]
    info += [note for r in results + [harm] for note in r.notes]
    parts = {
        "harmonic within 3 sigma": abs(z) <= 3,
        "harmonic within 2%": _rel(harm.energy, 3.0) <= 0.02,
        "membrane below variational bound": 0 < e0 <= bound + 3 * s0,
    }
    per_tau = ", ".join(f"tau={r.tau:g}: {r.energy:.4f}+-{r.error:.4f}" for r in results)
    detail = (
        f"harmonic {harm.energy:.4f}+-{harm.error:.4f} (z={z:+.2f}); {per_tau}; "
        f"extrapolated {e0:.4f}+-{s0:.4f} vs bound {bound:.4f}"
    )
    return all(parts.values()), detail, parts, info


def check_measure(opt: VerifyOptions) -> tuple[bool, str, dict]:
    settings = [(1.0, 0.3), (1.6369, 0.678), (0.8, 0.8), (2.0, 0.1), (1.2, 1.5)]
    vals = []
    for i, (mu, nu) in enumerate(settings):
        vals.append(measure_constant(VariationalParams(mu, nu), opt.measure_samples, RngStream(opt.seed, 200 + i)))
    worst = 0.0
    for (a, sa), (b, sb) in itertools.combinations(vals, 2):
        worst = max(worst, abs(a - b) / math.sqrt(sa * sa + sb * sb))
    C = np.array([v for v, _ in vals])
    w = 1 / np.array([s for _, s in vals]) ** 2
    mean = float(np.sum(w * C) / np.sum(w))
    ok = worst <= 3
    detail = f"C = {mean:.3f} (4 pi^3 = {4 * math.pi**3:.3f}); worst pairwise gap {worst:.2f} combined sigma"
    return ok, detail, {"consistent": ok}


CHECKS: list[tuple[int, str, Callable, float]] = [
    (1, "minimizer", check_minimizer, 1.0),
    (2, "energy consistency", check_energy, 10.0),
    (3, "normalization", check_normalization, 5.0),
    (4, "printed constants (quadrature)", check_constants, 30.0),
    (5, "closed-form evaluators", check_closed_forms, 1.0),
    (6, "monte carlo route", check_monte_carlo, 60.0),
    (7, "geometry bounds", check_geometry_bounds, 5.0),
    (8, "typical ellipse aspect ratio", check_aspect_ratio, 1.0),
    (9, "commutator identity", check_commutator, 1.0),
    (10, "invariant-plane laplacian", check_laplacian, 5.0),
    (11, "symmetry and gauge", check_symmetry, 5.0),
    (12, "diffusion monte carlo", check_dmc, 600.0),
    (13, "measure proportionality", check_measure, 120.0),
]


def run_check(number: int, opt: VerifyOptions) -> CheckResult:
    _, title, fn, budget = CHECKS[number - 1]
    t0 = time.perf_counter()
    out = fn(opt)
    dt = time.perf_counter() - t0
    passed, detail, parts = out[:3]
    info = out[3] if len(out) > 3 else []
    return CheckResult(number, title, bool(passed), detail, dt, budget, list(info), dict(parts))


def run_all(opt: VerifyOptions, only: list[int] | None = None) -> list[CheckResult]:
    results = []
    for number, *_ in CHECKS:
        if only is not None and number not in only:
            continue
        if number == 12 and opt.skip_dmc:
            continue
        results.append(run_check(number, opt))
    return results


def quick_options(**kw) -> VerifyOptions:
    """Reduced sample counts for smoke runs; not the acceptance settings."""
    base = dict(mc_samples=100_000, measure_samples=50_000, skip_dmc=True, quick=True)
    base.update(kw)
    return VerifyOptions(**base)
