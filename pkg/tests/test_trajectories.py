import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad

import standgrowth as sg
from standgrowth.trajectories import arc_count


def with_env(loaded, v0=None, lam=None):
    scn = loaded.scenario
    v = scn.env.v
    new_v = sg.GrowthEnergy(v.family, v0 if v0 is not None else v.v0,
                            lam if lam is not None else v.lam)
    return dataclasses.replace(scn, env=dataclasses.replace(scn.env, v=new_v))


class TestTimeToCount:
    def test_linear_rate(self, convex_price):
        p = convex_price.scenario.params
        assert sg.time_to_count(p, 1000.0, 600.0) == pytest.approx(10.0)
        assert sg.time_to_count(p, 300.0, 300.0) == 0.0

    def test_rejects_growth_targets(self, convex_price):
        with pytest.raises(ValueError):
            sg.time_to_count(convex_price.scenario.params, 300.0, 400.0)


class TestCeilingHitTime:
    def test_linear_growth_closed_form(self, linear_growth):
        # With a linear competition factor the ceiling-hit time solves
        # s0**(1-q/2) + A (1-q/2) Energy(0,t) = sbar0**(1-q/2) in closed form.
        scn = linear_growth.scenario
        p = scn.params
        expo = 1.0 - p.q / 2.0
        sbar0 = (p.A * scn.initial.n) ** (-2.0 / p.q)
        target = (sbar0 ** expo - scn.initial.s ** expo) / (p.A * expo)
        # Invert the exponential-energy antiderivative directly.
        lam, v0 = scn.env.v.lam, scn.env.v.v0
        expected = -np.log(1.0 - lam * target / v0) / lam
        assert sg.t_sup0(scn) == pytest.approx(expected, abs=1e-7)

    def test_fagacees_antiderivative_oracle(self, fagacees):
        # Oracle: exact antiderivative of u**(2/q-1) (u+p)/((1+p)u) compared
        # against the quadrature-based solver through the energy inverse.
        scn = fagacees.scenario
        p = scn.params
        shape = scn.growth.p
        r0 = scn.rdi0

        def antider(u):
            # Int u**0.25 (u+p)/((1+p)u) du for q = 1.6.
            return (0.8 * u ** 1.25 + 4.0 * shape * u ** 0.25) / (1.0 + shape)

        rhs = antider(1.0) - antider(r0)
        coeff = p.q / 2.0 * scn.initial.n ** (2.0 / p.q - 1.0) * p.A ** (2.0 / p.q)
        lam, v0 = scn.env.v.lam, scn.env.v.v0
        expected = -np.log(1.0 - lam * rhs / coeff / v0) / lam
        assert sg.t_sup0(scn) == pytest.approx(expected, rel=1e-9)

    def test_zero_policy_event_matches(self, convex_price):
        scn = convex_price.scenario
        t_up = sg.t_sup0(scn)
        traj = sg.integrate(scn, sg.Policy.zero(), 20.0, step=20.0 / 4096)
        stop = [ev for ev in traj.events if ev.kind == "RdiHitOne"]
        assert len(stop) == 1
        assert stop[0].time == pytest.approx(t_up, abs=1e-6)

    def test_near_ceiling_start_gives_tiny_time(self, convex_price):
        scn = convex_price.scenario
        p = scn.params
        s0 = 0.08
        n0 = 0.999999 / (p.A * s0 ** (p.q / 2.0))
        scn2 = dataclasses.replace(scn, initial=sg.StandState(t=0.0, s=s0, n=n0))
        assert sg.t_sup0(scn2) < 1e-3

    def test_unreachable_when_energy_too_small(self, low_energy):
        scn = with_env(low_energy, v0=0.01)
        assert sg.is_unreachable(sg.t_sup0(scn))


class TestCeilingExhaustion:
    def test_degenerate_start_at_floor(self, convex_price):
        scn = convex_price.scenario
        scn2 = dataclasses.replace(
            scn, initial=sg.StandState(t=0.0, s=0.08, n=scn.params.n_min))
        assert sg.t_cap0(scn2) == pytest.approx(sg.t_sup0(scn2), abs=1e-12)

    def test_esup_exit_event_matches(self, convex_price):
        scn = convex_price.scenario
        t_ex = sg.t_cap0(scn)
        traj = sg.integrate(scn, sg.build_policy(scn, "esup"), 50.0)
        assert traj.exited
        assert traj.validity_end == pytest.approx(t_ex, abs=1e-5)

    def test_doubling_energy_speeds_exhaustion(self, convex_price):
        scn = convex_price.scenario
        fast = with_env(convex_price, v0=2.0 * scn.env.v.v0)
        assert sg.t_cap0(fast) < sg.t_cap0(scn)


class TestBuildPolicy:
    def test_cut_first_shape(self):
        params = sg.StandParams(q=1.6, A=0.001, n_min=400.0, e_max=40.0, t_star=150.0)
        env = sg.Environment(v=sg.GrowthEnergy("exponential", 2.0, 0.02),
                             h0=sg.DominantHeight(30.0, 20.0))
        scn = sg.Scenario(params=params, growth=sg.GrowthFunction.power(0.3), env=env,
                          initial=sg.StandState(t=0.0, s=0.05, n=1000.0))
        pol = sg.build_policy(scn, "e0")
        assert pol.breakpoints == (15.0,)
        assert pol.levels == (40.0, 0.0)

    def test_exact_target_at_cut_time_reduces_to_cut_first(self, convex_price):
        scn = convex_price.scenario
        t0n = sg.time_to_count(scn.params, scn.initial.n, scn.params.n_min)
        assert sg.build_policy(scn, "et", T=t0n) == sg.build_policy(scn, "e0")

    def test_exact_target_at_exhaustion_reduces_to_ceiling(self, convex_price):
        scn = convex_price.scenario
        t_ex = sg.t_cap0(scn)
        assert sg.build_policy(scn, "et", T=t_ex).kind == "esup"

    def test_exact_target_beyond_exhaustion_rejected(self, convex_price):
        scn = convex_price.scenario
        with pytest.raises(ValueError):
            sg.build_policy(scn, "et", T=sg.t_cap0(scn) + 1.0)

    def test_short_horizon_switch_time(self, convex_price):
        scn = convex_price.scenario
        t0n = sg.time_to_count(scn.params, scn.initial.n, scn.params.n_min)
        t_up = sg.t_sup0(scn)
        T = t0n + 0.5 * t_up
        pol = sg.build_policy(scn, "et", T=T)
        assert pol.breakpoints == (pytest.approx(T - t0n),)
        assert pol.levels == (0.0, scn.params.e_max)
        traj = sg.integrate(scn, pol, T)
        assert traj.n[-1] == pytest.approx(scn.params.n_min, rel=1e-9)

    def test_long_horizon_switch_consistency(self, convex_price):
        # The arc-leaving time satisfies both the count relation along the
        # ceiling and the exact-depletion condition at the horizon.
        scn = convex_price.scenario
        p = scn.params
        T = 30.0
        pol = sg.build_policy(scn, "et", T=T)
        md = pol.meta_dict()
        t_switch = md["t_switch"]
        n_at_switch = arc_count(scn, scn.initial.n, md["t_rdi_one"], t_switch)
        assert (T - t_switch) * p.e_max == pytest.approx(n_at_switch - p.n_min,
                                                         rel=1e-9)
        traj = sg.integrate(scn, pol, T)
        assert traj.n[-1] == pytest.approx(p.n_min, rel=1e-7)
        assert traj.interp_n(t_switch) == pytest.approx(n_at_switch, rel=1e-7)


class TestExtremalTimes:
    def test_linear_growth_times_coincide(self, linear_growth):
        scn = linear_growth.scenario
        p = scn.params
        ext = sg.extremal_times(scn)
        expo = 1.0 - p.q / 2.0
        target = (p.s_bar ** expo - scn.initial.s ** expo) / (p.A * expo)
        lam, v0 = scn.env.v.lam, scn.env.v.v0
        expected = -np.log(1.0 - lam * target / v0) / lam
        assert ext.t_upper == pytest.approx(expected, abs=1e-7)
        assert ext.t_lower == pytest.approx(expected, rel=1e-5)
        assert not ext.t_lower_heuristic

    def test_ordering_power(self, convex_price):
        ext = sg.extremal_times(convex_price.scenario)
        assert ext.t_lower <= ext.t_upper
        assert not ext.t_lower_heuristic

    def test_fagacees_lower_time_is_heuristic(self, fagacees):
        assert sg.extremal_times(fagacees.scenario).t_lower_heuristic

    def test_random_policy_exits_bracketed(self, concave_price, rng):
        scn = concave_price.scenario
        ext = sg.extremal_times(scn)
        lo, hi = ext.t_lower, ext.t_upper
        tol = 1e-5 * hi
        seen = 0
        policies = sg.sample_policies(scn, 120, rng, scn.params.t_star) + \
            sg.sample_policies(scn, 80, rng, scn.params.t_star, terminal=True)
        for policy in policies:
            traj = sg.integrate(scn, policy, scn.params.t_star,
                                step=scn.params.t_star / 2048)
            if traj.exited:
                seen += 1
                assert lo - tol <= traj.validity_end <= hi + tol
        assert seen >= 40   # the sweep must actually exercise exits


class TestCharacteristicTimes:
    def test_bundle_consistency(self, convex_price):
        ct = sg.characteristic_times(convex_price.scenario, T=30.0)
        assert ct.t_sup0 < ct.t_cap0
        assert ct.t_lower <= ct.t_upper
        assert ct.t_upper == pytest.approx(sg.t_cap0(convex_price.scenario))
        assert ct.t_star_switch is not None
        d = ct.to_json_dict()
        assert set(d) == {"t0_n_min", "t_sup0", "t_cap0", "t_lower", "t_upper",
                          "t_lower_heuristic", "t_star_switch"}

    def test_unreachable_encoding(self, low_energy):
        ct = sg.characteristic_times(low_energy.scenario)
        assert sg.is_unreachable(ct.t_upper)
        assert ct.to_json_dict()["t_upper"] is None


class TestValidityDiagnostics:
    def test_low_energy_unreachable(self, low_energy):
        diag = sg.validity_diagnostics(low_energy.scenario)
        assert diag.classification == "unreachable"

    def test_energy_scaling_flips_to_reachable(self, low_energy):
        scn = with_env(low_energy, v0=10.0 * low_energy.scenario.env.v.v0)
        diag = sg.validity_diagnostics(scn)
        assert diag.classification == "reachable"

    def test_never_both(self, convex_price, low_energy):
        for scn in (convex_price.scenario, low_energy.scenario):
            d = sg.validity_diagnostics(scn)
            assert not (d.exit_reachable and d.exit_unreachable)

    def test_reachable_agrees_with_integrator(self, convex_price):
        # Guaranteed-reachable diagnosis must be backed by an actual exit.
        diag = sg.validity_diagnostics(convex_price.scenario)
        assert diag.classification == "reachable"
        traj = sg.integrate(convex_price.scenario,
                            sg.build_policy(convex_price.scenario, "esup"),
                            convex_price.scenario.params.t_star)
        assert traj.exited


class TestPowerClosedForm:
    def test_basal_area_reconstruction(self, convex_price, rng):
        # Oracle: quadrature of V/n**theta over the integrated count path.
        scn = convex_price.scenario
        p = scn.params
        theta = scn.growth.theta
        m = 1.0 - p.q / 2.0 * (1.0 - theta)
        for policy in sg.sample_policies(scn, 3, rng, 25.0):
            traj = sg.integrate(scn, policy, 25.0)

            def integrand(u):
                return scn.env.v(u) / traj.interp_n(u) ** theta

            for t_probe in (6.0, 14.0, min(24.0, traj.validity_end)):
                if t_probe > traj.validity_end:
                    continue
                val, _ = quad(integrand, 0.0, t_probe, limit=300,
                              points=[b for b in traj.breaks if b < t_probe])
                expected = (scn.initial.s ** m
                            + p.A ** (1.0 - theta) * m * val) ** (1.0 / m)
                assert traj.interp_s(t_probe) == pytest.approx(expected, rel=1e-5)
