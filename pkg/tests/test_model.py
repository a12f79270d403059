import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import standgrowth as sg


def make_params(**kw):
    base = dict(q=1.6, A=0.001, n_min=100.0, e_max=40.0, t_star=150.0)
    base.update(kw)
    return sg.StandParams(**base)


class TestRdi:
    def test_unit_density(self):
        p = make_params()
        assert sg.rdi(p, 1000.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_vanishes_with_s(self):
        p = make_params()
        assert sg.rdi(p, 1000.0, 1e-12) < 1e-9

    def test_power_evaluation_matches_log_form(self):
        # Oracle: log r = log A + log n + (q/2) log s.
        p = make_params()
        expected = math.exp(math.log(0.001) + math.log(1000.0) + 0.8 * math.log(0.05))
        assert expected == pytest.approx(0.09102821015130401, rel=1e-12)
        assert sg.rdi(p, 1000.0, 0.05) == pytest.approx(expected, rel=1e-12)

    def test_domain_errors(self):
        p = make_params()
        with pytest.raises(ValueError):
            sg.rdi(p, -1.0, 0.05)
        with pytest.raises(ValueError):
            sg.rdi(p, 100.0, 0.0)

    @given(n=st.floats(1.0, 1e5), s=st.floats(1e-4, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_log_form_identity(self, n, s):
        p = make_params()
        direct = sg.rdi(p, n, s)
        via_logs = math.exp(math.log(p.A) + math.log(n) + p.q / 2.0 * math.log(s))
        assert direct == pytest.approx(via_logs, rel=1e-12)


class TestGrowthFunction:
    def test_endpoints(self):
        assert sg.g_eval(sg.GrowthFunction.fagacees(2.0), 1.0) == pytest.approx(1.0)
        assert sg.g_eval(sg.GrowthFunction.power(0.3), 0.0) == pytest.approx(0.0)

    def test_fagacees_direct_substitution(self):
        g = sg.GrowthFunction.fagacees(2.0)
        assert sg.g_eval(g, 0.5) == pytest.approx(3.0 * 0.5 / 2.5, rel=1e-15)

    def test_domain(self):
        g = sg.GrowthFunction.power(0.3)
        with pytest.raises(ValueError):
            sg.g_eval(g, 1.5)
        with pytest.raises(ValueError):
            sg.g_eval(g, -0.1)
        with pytest.raises(ValueError):
            sg.script_g(g, 0.0)
        with pytest.raises(ValueError):
            sg.gamma(g, 0.0)

    def test_script_g_fagacees_constant(self):
        for p_shape in (0.5, 2.0, 7.0):
            g = sg.GrowthFunction.fagacees(p_shape)
            rs = np.linspace(0.05, 1.0, 25)
            np.testing.assert_allclose(sg.script_g(g, rs), 1.0 / (1.0 + p_shape),
                                       rtol=1e-14)

    def test_script_g_power_matches_derivative_of_r_over_g(self):
        # Oracle: central finite difference of r/g(r) = r**theta.
        g = sg.GrowthFunction.power(0.35)
        for r in (0.1, 0.4, 0.9):
            eps = 1e-6
            fd = ((r + eps) ** 0.35 - (r - eps) ** 0.35) / (2.0 * eps)
            assert sg.script_g(g, r) == pytest.approx(fd, rel=1e-8)
            assert sg.script_g(g, r) == pytest.approx(0.35 * r ** (0.35 - 1.0), rel=1e-14)

    def test_script_g_linear_is_zero(self):
        g = sg.GrowthFunction.linear()
        assert sg.script_g(g, 0.3) == 0.0

    def test_gamma_closed_forms(self):
        assert sg.gamma(sg.GrowthFunction.power(0.3), 0.77) == pytest.approx(0.7)
        assert sg.gamma(sg.GrowthFunction.linear(), 0.2) == pytest.approx(1.0)
        assert sg.gamma(sg.GrowthFunction.fagacees(2.0), 0.5) == pytest.approx(0.8)

    @given(r=st.floats(1e-3, 1.0), p_shape=st.floats(0.2, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_gamma_is_elasticity(self, r, p_shape):
        g = sg.GrowthFunction.fagacees(p_shape)
        assert sg.gamma(g, r) == pytest.approx(r * g.g_prime(r) / g.g(r), rel=1e-12)

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            sg.GrowthFunction.fagacees(-1.0)
        with pytest.raises(ValueError):
            sg.GrowthFunction.power(1.0)


class TestGrowthInvariants:
    """Sampled shape properties of every admissible competition function."""

    FUNCS = [sg.GrowthFunction.fagacees(0.7), sg.GrowthFunction.fagacees(3.0),
             sg.GrowthFunction.power(0.2), sg.GrowthFunction.power(0.65)]

    def test_amplification_monotonicity_concavity(self, rng):
        rs = rng.uniform(1e-4, 1.0 - 1e-4, size=1000)
        eps = 1e-5
        for g in self.FUNCS:
            vals = g.g(rs)
            assert np.all(vals > rs)
            assert np.all(g.g_prime(rs) > 0.0)
            second = g.g(rs + eps) + g.g(rs - eps) - 2.0 * vals
            assert np.all(second <= 1e-12)

    def test_script_g_product_and_gamma_bounds(self, rng):
        rs = rng.uniform(1e-4, 1.0, size=1000)
        for g in self.FUNCS + [sg.GrowthFunction.linear()]:
            prod = g.script_g(rs) * g.g(rs)
            assert np.all(prod <= 1.0 + 1e-12)
            if g.kind != "linear":
                assert np.all(prod > 0.0)
            assert np.all(g.gamma(rs) <= 1.0 + 1e-12)

    def test_r_over_g_nondecreasing(self, rng):
        rs = np.sort(rng.uniform(1e-4, 1.0, size=1000))
        for g in self.FUNCS:
            ratio = rs / g.g(rs)
            assert np.all(np.diff(ratio) >= -1e-15)

    def test_gamma_bracket(self, rng):
        rs = rng.uniform(1e-4, 1.0, size=1000)
        for g in self.FUNCS:
            vals = g.gamma(rs)
            assert np.all(vals >= g.gamma_lower)
            assert np.all(vals <= g.gamma_upper)
            assert 0.0 < g.gamma_lower <= g.gamma_upper <= 1.0


class TestEnvironment:
    def test_energy_closed_form(self):
        env = sg.Environment(v=sg.GrowthEnergy("exponential", 1.0, 0.05),
                             h0=sg.DominantHeight(30.0, 20.0))
        # Oracle: antiderivative (1 - exp(-lam T)) v0 / lam.
        assert sg.energy(env, 0.0, 10.0) == pytest.approx(7.8693868057473315, rel=1e-12)

    def test_energy_empty_interval(self):
        env = sg.Environment(v=sg.GrowthEnergy("hyperbolic", 2.0, 0.1),
                             h0=sg.DominantHeight(30.0, 20.0))
        assert sg.energy(env, 3.0, 3.0) == 0.0

    def test_energy_additivity(self):
        env = sg.Environment(v=sg.GrowthEnergy("hyperbolic", 2.0, 0.1),
                             h0=sg.DominantHeight(30.0, 20.0))
        total = sg.energy(env, 0.0, 25.0)
        assert sg.energy(env, 0.0, 7.0) + sg.energy(env, 7.0, 25.0) == \
            pytest.approx(total, rel=1e-13)

    @pytest.mark.parametrize("family,lam", [("exponential", 0.05), ("hyperbolic", 0.08)])
    def test_energy_matches_quadrature(self, family, lam):
        from standgrowth.model import energy_quad
        env = sg.Environment(v=sg.GrowthEnergy(family, 1.7, lam),
                             h0=sg.DominantHeight(30.0, 20.0))
        for t0, t1 in [(0.0, 12.0), (5.0, 90.0)]:
            assert sg.energy(env, t0, t1) == pytest.approx(
                energy_quad(env, t0, t1), rel=1e-10)

    def test_v_convex_midpoint(self, rng):
        for family in ("exponential", "hyperbolic"):
            v = sg.GrowthEnergy(family, 2.0, 0.04)
            a = rng.uniform(0.0, 150.0, size=500)
            b = rng.uniform(0.0, 150.0, size=500)
            assert np.all(v((a + b) / 2.0) <= (v(a) + v(b)) / 2.0 + 1e-14)

    def test_constant_energy_flagged(self):
        with pytest.warns(UserWarning):
            v = sg.GrowthEnergy("exponential", 1.0, 0.0)
        assert v.weakly_decreasing
        assert sg.GrowthEnergy("exponential", 1.0, 0.01).weakly_decreasing is False

    def test_height_family_shape(self):
        h = sg.DominantHeight(30.0, 20.0)
        ts = np.linspace(0.5, 120.0, 200)
        vals = h(ts)
        assert np.all(np.diff(vals) > 0.0)
        assert np.all(np.diff(np.diff(vals)) < 0.0)
        assert h(0.0) == 0.0


class TestBoundaryControl:
    def make_env(self, v0=2.0, lam=0.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return sg.Environment(v=sg.GrowthEnergy("exponential", v0, lam),
                                  h0=sg.DominantHeight(30.0, 20.0))

    def test_direct_formula(self):
        p = make_params()
        env = self.make_env(v0=2.0)
        assert sg.boundary_control(p, env, 0.1, 0.0) == pytest.approx(16.0, rel=1e-14)

    def test_zero_energy_limit(self):
        p = make_params()
        env = self.make_env(v0=1e-300)
        assert sg.boundary_control(p, env, 0.1, 3.0) == pytest.approx(0.0, abs=1e-290)

    def test_freezes_density_on_ceiling(self):
        p = make_params(A=0.01741, n_min=150.0)
        env = self.make_env(v0=2.0, lam=0.02)
        growth = sg.GrowthFunction.power(0.3)
        scn = sg.Scenario(params=p, growth=growth, env=env,
                          initial=sg.StandState(t=0.0, s=0.08, n=300.0))
        # A state sitting exactly on the ceiling: n chosen so r = 1.
        s = 0.12
        n = 1.0 / (p.A * s ** (p.q / 2.0))
        e = sg.boundary_control(p, env, s, 5.0)
        state = sg.StandState(t=5.0, s=s, n=n)
        assert sg.drdt(scn, state, e) == pytest.approx(0.0, abs=1e-14)


class TestScenarioValidation:
    def test_q_range_cited_in_message(self):
        with pytest.raises(ValueError, match="1 < q < 2"):
            make_params(q=2.5)

    def test_initial_density_must_be_below_one(self):
        p = make_params(A=0.01741, n_min=150.0)
        env = sg.Environment(v=sg.GrowthEnergy("exponential", 2.0, 0.02),
                             h0=sg.DominantHeight(30.0, 20.0))
        with pytest.raises(ValueError, match="RDI"):
            sg.Scenario(params=p, growth=sg.GrowthFunction.linear(), env=env,
                        initial=sg.StandState(t=0.0, s=0.4, n=500.0))

    def test_initial_time_must_be_zero(self):
        p = make_params(A=0.01741, n_min=150.0)
        env = sg.Environment(v=sg.GrowthEnergy("exponential", 2.0, 0.02),
                             h0=sg.DominantHeight(30.0, 20.0))
        with pytest.raises(ValueError, match="t = 0"):
            sg.Scenario(params=p, growth=sg.GrowthFunction.linear(), env=env,
                        initial=sg.StandState(t=1.0, s=0.05, n=300.0))
