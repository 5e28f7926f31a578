from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from fuzzysphere.numerics import RngStream
from fuzzysphere.observables import (
    OBSERVABLES,
    SampleBatch,
    area_closed,
    area_substituted,
    closed_form_variants,
    e3_corrected,
    e3_general,
    e3_substituted,
    expectation,
    expected_area,
    expected_e3,
    expected_perimeter,
    expected_perimeter_exact,
    expected_shape,
    marginal_cdf_t,
    marginal_cdf_u,
    marginal_pdf_u,
    mc_moment,
    perimeter_closed,
    quadrature_moment,
    sample_uv,
    shape_closed,
)
from fuzzysphere.variational import GroundStateModel, VariationalParams, energy_closed, minimize_closed


def _scipy_moment(mu, nu, f):
    norm = 4 * mu * (mu + nu) ** 2
    val, _ = integrate.dblquad(
        lambda t, U: norm * 2 * t * float(f(U, t * t)) * math.exp(-2 * mu * U - 2 * nu * t),
        0, np.inf, 0, lambda U: U, epsabs=1e-12, epsrel=1e-10,
    )
    return val


def _model(mu, nu, kappa=1.0):
    p = VariationalParams(mu, nu)
    return GroundStateModel(p, energy_closed(p, kappa), kappa)


@pytest.fixture(scope="module")
def batch(model):
    return sample_uv(model, 200_000, RngStream(99, 1))


class TestPointwise:
    def test_circle_values(self):
        U = np.array([2.0])
        assert OBSERVABLES["e3"](U, U**2)[0] == 0.0
        assert OBSERVABLES["shape"](U, U**2)[0] == pytest.approx(1.0)
        assert OBSERVABLES["perimeter_exact"](U, U**2)[0] == pytest.approx(2 * math.pi * math.sqrt(2))

    def test_approximate_shape_bound_on_samples(self, batch):
        s = OBSERVABLES["shape"](batch.U, batch.V)
        assert np.all(s >= 0.9)


class TestSampler:
    def test_domain_and_determinism(self, model, batch):
        assert len(batch) == 200_000
        assert np.all(batch.V <= batch.U**2) and np.all(batch.V >= 0)
        again = sample_uv(model, 1000, RngStream(99, 1))
        assert np.array_equal(again.U, batch.U[:1000])

    def test_exact_replay(self, model):
        a = sample_uv(model, 5000, RngStream(3, 4))
        b = sample_uv(model, 5000, RngStream(3, 4))
        assert np.array_equal(a.U, b.U) and a.n_proposed == b.n_proposed

    def test_acceptance_rate(self, batch):
        acc = (math.sqrt(2) - 1) ** 2 / 2
        sig = math.sqrt(acc * (1 - acc) / batch.n_proposed)
        assert abs(batch.acceptance_rate - acc) < 4 * sig

    def test_marginals_ks(self, model):
        b = sample_uv(model, 100_000, RngStream(2024, 5))
        p_u = stats.kstest(b.U, lambda u: marginal_cdf_u(model, u)).pvalue
        p_t = stats.kstest(np.sqrt(b.V), lambda t: marginal_cdf_t(model, t)).pvalue
        assert p_u > 1e-3 and p_t > 1e-3

    def test_marginal_pdf_integrates_to_one(self, model):
        val, _ = integrate.quad(lambda u: float(marginal_pdf_u(model, u)), 0, np.inf)
        assert val == pytest.approx(1.0, rel=1e-10)
        assert float(marginal_cdf_u(model, 40.0)[0]) == pytest.approx(1.0, abs=1e-12)

    def test_guards(self, model):
        with pytest.raises(ValueError):
            sample_uv(model, -1, RngStream(1))
        with pytest.raises(ValueError):
            sample_uv(_model(1.0, 0.0), 10, RngStream(1))
        assert len(sample_uv(model, 0, RngStream(1))) == 0


class TestMcMoment:
    def test_constant(self, batch):
        assert mc_moment(batch, lambda U, V: 1.0) == (1.0, 0.0)

    def test_empty(self):
        empty = SampleBatch(np.empty(0), np.empty(0), 1.0, 0.5, 0, 0, 0)
        with pytest.raises(ValueError):
            mc_moment(empty, OBSERVABLES["area"])

    def test_area_within_three_sigma(self, model, batch):
        mean, se = mc_moment(batch, OBSERVABLES["area"])
        assert abs(mean - area_closed(model.mu, model.nu)) < 3 * se


class TestClosedForms:
    @pytest.mark.parametrize("name,fn", [("area", area_closed), ("perimeter", perimeter_closed), ("shape", shape_closed)])
    @pytest.mark.parametrize("mu,nu", [(1.0, 0.3), (0.8, 1.2), (2.0, 0.5)])
    def test_against_scipy(self, name, fn, mu, nu):
        assert fn(mu, nu) == pytest.approx(_scipy_moment(mu, nu, OBSERVABLES[name]), rel=1e-7)

    @pytest.mark.parametrize("mu,nu", [(1.0, 0.3), (1.0, 0.05), (1.0, 0.9), (2.5, 1.0)])
    def test_corrected_e3_against_scipy(self, mu, nu):
        assert e3_corrected(mu, nu) == pytest.approx(_scipy_moment(mu, nu, OBSERVABLES["e3"]), rel=1e-7)

    def test_typeset_e3_is_off(self, model):
        q, _ = quadrature_moment(model, "e3", 1e-12)
        assert abs(e3_general(model.mu, model.nu) / q - 1) > 1.0

    def test_substituted_e3(self, model):
        q, _ = quadrature_moment(model, "e3", 1e-12)
        assert e3_substituted() == pytest.approx(q, rel=1e-12)
        assert e3_substituted() == pytest.approx(0.8337, abs=5e-4)

    def test_area_examples(self):
        assert area_closed(1.0, math.sqrt(2) - 1) == pytest.approx(2 * math.pi / math.sqrt(2))
        m = minimize_closed()
        assert area_substituted(m.kappa) == pytest.approx(area_closed(m.mu, m.nu), rel=1e-14)

    def test_variants_only_at_minimizer(self):
        v = closed_form_variants("e3", _model(1.0, 0.3))
        assert not any(k.startswith("substituted") for k in v)
        with pytest.raises(ValueError):
            e3_general(1.0, 1.5)


class TestExpectations:
    def test_three_routes(self, model, batch):
        for fn in (expected_area, expected_e3, expected_perimeter, expected_shape):
            rep = fn(model, batch)
            assert rep.closed_form == pytest.approx(rep.quadrature, rel=1e-6)
            assert abs(rep.mc_mean - rep.quadrature) <= 3.5 * rep.mc_stderr

    def test_printed_decimals(self, model):
        assert expected_area(model).scaled(expected_area(model).quadrature) == pytest.approx(4.890, abs=1e-3)
        assert expected_e3(model).quadrature == pytest.approx(0.8337, abs=5e-4)
        assert expected_shape(model).quadrature == pytest.approx(2.225, abs=2e-3)

    def test_perimeter_decimal_is_flagged(self, model):
        rep = expected_perimeter(model)
        # both printed closed forms reproduce quadrature; the printed decimal does not
        assert rep.scaled(rep.quadrature) == pytest.approx(6.76916, abs=1e-5)
        assert rep.flags["quadrature matches printed decimal"] is False

    def test_exact_perimeter_close_to_approximation(self, model):
        exact = expected_perimeter_exact(model)
        approx = expected_perimeter(model)
        assert abs(exact.quadrature / approx.quadrature - 1) < 0.04

    def test_bounds(self, model):
        e3 = expected_e3(model).quadrature
        assert 0 <= e3 <= 1
        assert expected_shape(model).quadrature >= 1

    @pytest.mark.parametrize("name", ["area", "e3", "perimeter", "shape"])
    def test_kappa_scaling(self, name):
        vals = []
        for kappa in (0.5, 1.0, 2.0):
            rep = expectation(minimize_closed(kappa), name)
            vals.append(rep.scaled(rep.quadrature))
        assert max(vals) - min(vals) <= 1e-9 * abs(vals[0])

    def test_mc_columns_absent_without_batch(self, model):
        rep = expected_area(model)
        assert rep.mc_mean is None and rep.mc_n == 0
        assert rep.to_dict()["name"] == "area"
