import math

import numpy as np
import pytest
import sympy as sp
from scipy import integrate

from relgs.bounds import (
    BoundsRangeError,
    BoundsReport,
    admissible_m_max,
    lower_bound_witness,
    tent,
    tent_norms,
    upper_bound_delta,
    weight_integrals,
    weight_integrals_quad,
    with_lower_witness,
)
from relgs.solver import SolverConfig, continuation_m, solve_ground_state
from relgs.spectral import Grid, ModelParams


def sympy_tent_l2_3d():
    r = sp.symbols("r", positive=True)
    return 4 * sp.pi * (sp.integrate(r**2, (r, 0, 1)) + sp.integrate((2 - r) ** 2 * r**2, (r, 1, 2)))


class TestTent:
    def test_profile(self):
        np.testing.assert_array_equal(tent([0, 1, 1.5, 2, 3, -1.5]), [1, 1, 0.5, 0, 0, 0.5])

    def test_one_dimension(self):
        l2, grad, lp = tent_norms(1, 4)
        assert (l2, grad) == (8 / 3, 2.0)
        assert lp == pytest.approx(12 / 5, rel=1e-15)

    def test_one_dimension_against_quadrature(self):
        l2, _, lp = tent_norms(1, 3.3)
        for q, ref in ((2, l2), (3.3, lp)):
            val, _ = integrate.quad(lambda x: tent(x) ** q, -3, 3, points=[-2, -1, 1, 2], epsabs=0)
            assert val == pytest.approx(ref, rel=1e-12)

    def test_two_dimension_gradient(self):
        assert tent_norms(2, 3)[1] == pytest.approx(3 * math.pi, rel=1e-14)

    def test_three_dimension_l2(self):
        exact = float(sympy_tent_l2_3d())
        assert tent_norms(3, 3)[0] == pytest.approx(exact, rel=1e-10)

    def test_three_dimension_lp_sympy(self):
        r = sp.symbols("r", positive=True)
        exact = 4 * sp.pi * (sp.Rational(1, 3) + sp.integrate((2 - r) ** 4 * r**2, (r, 1, 2)))
        assert tent_norms(3, 4)[2] == pytest.approx(float(exact), rel=1e-10)

    def test_invalid(self):
        with pytest.raises(ValueError):
            tent_norms(0, 3)


class TestWeightIntegrals:
    def test_half(self):
        A, B = weight_integrals(0.5)
        assert A == pytest.approx(1.0, rel=1e-14)
        assert B == pytest.approx(1 / 3, rel=1e-14)

    def test_quarter(self):
        assert weight_integrals(0.25)[0] == pytest.approx(math.pi / 2, rel=1e-14)

    def test_quadrature_point_nine(self):
        np.testing.assert_allclose(weight_integrals_quad(0.9), weight_integrals(0.9), rtol=1e-10)

    @pytest.mark.parametrize("s", np.linspace(0.05, 0.95, 20))
    def test_quadrature_grid(self, s):
        np.testing.assert_allclose(weight_integrals_quad(s), weight_integrals(s), rtol=1e-10)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.2])
    def test_domain(self, s):
        with pytest.raises(ValueError):
            weight_integrals(s)


class TestUpperBound:
    def test_exact_value(self):
        # sympy arithmetic: C = 50/9, delta = (1/4)(50/9 + 16/3)^2 / (12/5)
        C = 1 * (2 + sp.Rational(8, 3)) + sp.Rational(1, 3) * sp.Rational(8, 3)
        delta = sp.Rational(1, 4) * (C + 2 * sp.Rational(8, 3)) ** 2 / sp.Rational(12, 5)
        assert C == sp.Rational(50, 9) and delta == sp.Rational(12005, 972)
        rep = upper_bound_delta(ModelParams(s=0.5, m=0.5, mu=2, p=4))
        assert rep.C == pytest.approx(50 / 9, rel=1e-14)
        assert rep.delta == pytest.approx(12005 / 972, rel=1e-13)
        assert rep.m_max == pytest.approx(1.0)

    def test_random_positive(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            N = int(rng.integers(1, 4))
            s = rng.uniform(0.1, 0.9)
            crit = 2 * N / (N - 2 * s) if N > 2 * s else 8.0
            mu = rng.uniform(0.1, 5)
            params = ModelParams(s=s, m=0, mu=mu, p=rng.uniform(2.1, crit - 0.01), N=N)
            params = params.with_mass(rng.uniform(0, 1) * admissible_m_max(params))
            rep = upper_bound_delta(params)
            assert all(v > 0 and math.isfinite(v) for v in (rep.A, rep.B, rep.C, rep.delta))

    def test_independent_of_m(self):
        base = ModelParams(s=0.4, m=0, mu=1.5, p=3)
        d0 = upper_bound_delta(base).delta
        d1 = upper_bound_delta(base.with_mass(0.3 * admissible_m_max(base))).delta
        assert d0 == d1

    def test_range_error(self):
        with pytest.raises(BoundsRangeError, match="mu/2"):
            upper_bound_delta(ModelParams(s=0.5, m=1.5, mu=2, p=3))

    def test_report_text_and_csv(self):
        rep = upper_bound_delta(ModelParams(s=0.5, m=0, mu=2, p=4))
        assert len(rep.csv_row()) == len(BoundsReport.csv_header())
        assert "delta" in rep.as_text()
        assert math.isnan(rep.lower_witness)


@pytest.fixture(scope="module")
def sweep():
    params = ModelParams(s=0.5, m=0.49, mu=1, p=3)
    m_values = [0.49, 0.3, 0.15, 0.05, 0.01]
    results = continuation_m(params, m_values, Grid(4096, 160.0), SolverConfig())
    return params, m_values, results


class TestLowerWitness:
    def test_equality_on_manifold(self):
        params = ModelParams(s=0.5, m=1, mu=2, p=3)
        res = solve_ground_state(params, Grid(2048, 80.0))
        c_emp = lower_bound_witness(res, params)
        lp_p = res.energy.lp_p
        assert res.energy.norm_e_sq == pytest.approx(lp_p, rel=1e-8)
        assert res.c_m == pytest.approx((0.5 - 1 / 3) * c_emp ** 3, rel=1e-8)

    def test_report_copy(self):
        params = ModelParams(s=0.5, m=0.4, mu=1, p=3)
        res = solve_ground_state(params, Grid(2048, 160.0))
        rep = with_lower_witness(upper_bound_delta(params), res, params)
        assert rep.lower_witness == pytest.approx(res.c_m, rel=1e-8)
        assert rep.lower_constant > 0

    def test_not_converged(self):
        params = ModelParams(s=0.5, m=1, mu=2, p=3)
        res = solve_ground_state(params, Grid(512, 40.0), SolverConfig(max_iters=2))
        with pytest.raises(ValueError, match="converged"):
            lower_bound_witness(res, params)

    def test_sweep_floor(self, sweep):
        params, m_values, results = sweep
        delta = upper_bound_delta(params).delta
        consts = [lower_bound_witness(r, params.with_mass(m)) for r, m in zip(results, m_values)]
        assert (max(consts) - min(consts)) / max(consts) < 0.2
        assert all(0 < r.c_m <= delta for r in results)
