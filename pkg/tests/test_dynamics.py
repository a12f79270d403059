import csv
import json

import numpy as np
import pytest

import standgrowth as sg


def small_stand(n_min=100.0, e_max=40.0, A=0.001, growth=None, v0=2.0, lam=0.02,
                n0=1000.0, s0=0.05):
    params = sg.StandParams(q=1.6, A=A, n_min=n_min, e_max=e_max, t_star=150.0)
    env = sg.Environment(v=sg.GrowthEnergy("exponential", v0, lam),
                         h0=sg.DominantHeight(30.0, 20.0))
    return sg.Scenario(params=params, growth=growth or sg.GrowthFunction.power(0.3),
                       env=env, initial=sg.StandState(t=0.0, s=s0, n=n0))


class TestRhs:
    def test_full_density_growth_is_energy_over_count(self, convex_price):
        scn = convex_price.scenario
        p = scn.params
        s = 0.12
        n = 1.0 / (p.A * s ** (p.q / 2.0))   # r = 1 exactly
        ds, _ = sg.rhs(scn, sg.StandState(t=2.0, s=s, n=n), 0.0)
        assert ds == pytest.approx(scn.env.v(2.0) / n, rel=1e-12)

    def test_zero_cutting_keeps_count(self, convex_price):
        _, dn = sg.rhs(convex_price.scenario, sg.StandState(t=1.0, s=0.1, n=250.0), 0.0)
        assert dn == 0.0

    def test_linear_growth_is_count_free(self):
        scn = small_stand(growth=sg.GrowthFunction.linear())
        p = scn.params
        for n in (150.0, 400.0, 900.0):
            ds, _ = sg.rhs(scn, sg.StandState(t=3.0, s=0.06, n=n), 5.0)
            expected = p.A * 0.06 ** (p.q / 2.0) * scn.env.v(3.0)
            assert ds == pytest.approx(expected, rel=1e-12)

    def test_rejects_out_of_range_rate(self, convex_price):
        with pytest.raises(ValueError):
            sg.rhs(convex_price.scenario, sg.StandState(t=0.0, s=0.08, n=300.0), 99.0)


class TestDrdt:
    def test_positive_under_free_growth(self, convex_price):
        scn = convex_price.scenario
        assert sg.drdt(scn, sg.StandState(t=0.0, s=0.08, n=300.0), 0.0) > 0.0

    def test_finite_difference_consistency(self, convex_price):
        # Oracle: centered differences of sampled r along a trajectory; the
        # mismatch against the analytic rate must shrink as O(step**2).
        scn = convex_price.scenario
        policy = sg.Policy.piecewise([3.0], [10.0, 0.0])
        errs = []
        for steps in (64, 128):
            traj = sg.integrate(scn, policy, 8.0, step=8.0 / steps)
            t, r, dr = traj.t, traj.r, traj.drdt
            inner = slice(2, len(t) - 2)
            fd = (r[3:-1] - r[1:-3]) / (t[3:-1] - t[1:-3])
            mask = np.abs(t[inner] - 3.0) > 3 * 8.0 / steps  # skip the kink
            errs.append(np.max(np.abs(fd - dr[inner])[mask]))
        ratio = errs[0] / errs[1]
        assert 2.5 < ratio < 6.0


class TestIntegrate:
    def test_zero_policy_keeps_count(self, convex_price):
        traj = sg.integrate(convex_price.scenario, sg.Policy.zero(), 8.0)
        assert np.all(traj.n == traj.n[0])

    def test_linear_growth_closed_form(self):
        scn = small_stand(growth=sg.GrowthFunction.linear())
        p = scn.params
        expo = 1.0 - p.q / 2.0
        policy = sg.Policy.piecewise([4.0, 9.0], [0.0, 25.0, 5.0])
        traj = sg.integrate(scn, policy, 20.0, step=20.0 / 4096)
        expected = np.array([
            (scn.initial.s ** expo + p.A * expo * sg.energy(scn.env, 0.0, t)) ** (1 / expo)
            for t in traj.t])
        np.testing.assert_allclose(traj.s, expected, rtol=1e-6)

    def test_max_policy_linear_depletion(self):
        scn = small_stand()
        traj = sg.integrate(scn, sg.Policy.max_rate(40.0), 10.0)
        assert traj.n[-1] == pytest.approx(600.0, abs=1e-9)

    def test_n_min_event_time(self):
        scn = small_stand(n_min=600.0)
        traj = sg.integrate(scn, sg.Policy.max_rate(40.0), 12.0)
        hits = [ev for ev in traj.events if ev.kind == "NMinHit"]
        assert len(hits) == 1
        assert hits[0].time == pytest.approx(10.0, abs=1e-9)
        # Clamp holds the count at the floor afterwards.
        assert traj.n[-1] == pytest.approx(600.0, abs=1e-12)

    def test_n_min_error_mode(self):
        scn = small_stand(n_min=600.0)
        with pytest.raises(sg.NonViable):
            sg.integrate(scn, sg.Policy.max_rate(40.0), 12.0, on_n_min="error")

    def test_fourth_order_convergence(self, convex_price):
        scn = convex_price.scenario
        ref = sg.integrate(scn, sg.Policy.zero(), 8.0, step=8.0 / 2048)
        errs = []
        for steps in (32, 64):
            traj = sg.integrate(scn, sg.Policy.zero(), 8.0, step=8.0 / steps)
            errs.append(abs(traj.s[-1] - ref.s[-1]))
        ratio = errs[0] / errs[1]
        assert 10.0 < ratio < 24.0

    def test_fourth_order_holds_through_ceiling_arc(self, convex_price):
        # The per-step projection onto r = 1 must not degrade the order.
        scn = convex_price.scenario
        pol = sg.build_policy(scn, "esup")
        ref = sg.integrate(scn, pol, 20.0, step=20.0 / 4096)
        errs = []
        for steps in (32, 64):
            traj = sg.integrate(scn, pol, 20.0, step=20.0 / steps)
            errs.append(abs(traj.n[-1] - ref.n[-1]))
        ratio = errs[0] / errs[1]
        assert 10.0 < ratio < 24.0

    def test_constraints_respected_along_random_policies(self, convex_price, rng):
        scn = convex_price.scenario
        p = scn.params
        for policy in sg.sample_policies(scn, 20, rng, 30.0):
            traj = sg.integrate(scn, policy, 30.0, step=30.0 / 1024)
            assert np.all(traj.r <= 1.0 + 1e-6)
            assert np.all(traj.n >= p.n_min - 1e-6)
            assert np.all(np.diff(traj.n) <= 1e-12)
            assert np.all(np.diff(traj.s) > -1e-9 * traj.s[:-1])

    def test_growth_per_tree_nondecreasing(self, convex_price, rng):
        scn = convex_price.scenario
        p = scn.params
        for policy in sg.sample_policies(scn, 10, rng, 30.0):
            traj = sg.integrate(scn, policy, 30.0, step=30.0 / 1024)
            gpt = scn.growth.g(traj.r) / traj.n
            assert np.all(np.diff(gpt) >= -1e-9 * gpt[:-1])

    def test_growth_per_tree_decreasing_in_count(self, convex_price, rng):
        scn = convex_price.scenario
        p = scn.params
        s, t = 0.1, 5.0
        ns = np.sort(rng.uniform(p.n_min, 1.0 / (p.A * s ** (p.q / 2.0)), size=200))
        vals = scn.growth.g(sg.rdi(p, ns, s)) / ns
        assert np.all(np.diff(vals) < 0.0)

    def test_infeasible_boundary_raises(self):
        scn = small_stand(A=0.01741, n0=300.0, s0=0.08, e_max=1.0, n_min=150.0)
        with pytest.raises(sg.InfeasibleBoundary):
            sg.integrate(scn, sg.Policy.boundary_hold(), 40.0)

    def test_horizon_beyond_validity_rejected(self, convex_price):
        with pytest.raises(ValueError):
            sg.integrate(convex_price.scenario, sg.Policy.zero(), 200.0)

    def test_policy_rate_above_e_max_rejected(self, convex_price):
        policy = sg.Policy.piecewise([], [60.0])
        with pytest.raises(ValueError):
            sg.integrate(convex_price.scenario, policy, 10.0)


class TestExports:
    def test_csv_header_and_events_roundtrip(self, convex_price, tmp_path):
        scn = convex_price.scenario
        traj = sg.integrate(scn, sg.build_policy(scn, "esup"), 40.0)
        csv_path = tmp_path / "traj.csv"
        json_path = tmp_path / "traj.events.json"
        sg.write_trajectory_csv(traj, scn.env, csv_path)
        sg.write_events_json(traj, json_path)

        with open(csv_path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "s", "n", "r", "e", "h"]
        final = [float(x) for x in rows[-1]]
        assert final[3] == pytest.approx(1.0, abs=1e-6)          # r at the corner
        assert final[2] == pytest.approx(scn.params.n_min, abs=1e-6)
        # Height column reproduces the dominant height at the sample times.
        assert final[5] == pytest.approx(scn.env.h0(final[0]), rel=1e-9)

        payload = json.loads(json_path.read_text())
        assert payload["exited"] is True
        kinds = [ev["kind"] for ev in payload["events"]]
        assert "RdiHitOne" in kinds and "ExitPoint" in kinds
        assert payload["validity_end"] == pytest.approx(traj.validity_end)

    def test_esup_control_matches_ceiling_rate(self, convex_price):
        scn = convex_price.scenario
        p = scn.params
        traj = sg.integrate(scn, sg.build_policy(scn, "esup"), 40.0)
        arc = traj.on_arc
        expected = sg.boundary_control(p, scn.env, traj.s[arc], traj.t[arc])
        np.testing.assert_allclose(traj.e[arc], expected, rtol=1e-12)
