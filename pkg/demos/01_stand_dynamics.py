"""Integrate a stand under the three canonical thinning policies.

The stand starts at 300 trees of 0.08 m² basal area.  Density is capped by
the self-thinning rule r = A n s^(q/2) <= 1; thinning is limited to 40
trees/year and must stop at 150 trees.  We follow:

* e0    cut hard first, then let the survivors grow,
* esup  grow freely, then ride the density ceiling down to the floor,
* et:25 grow, ride the ceiling, and finish cutting exactly at t = 25.
"""

import pathlib

import numpy as np

import standgrowth as sg

HERE = pathlib.Path(__file__).resolve().parent
scenario = sg.load_scenario(HERE.parent / "scenarios" / "convex_price_power.ini").scenario

print(f"initial density r0 = {scenario.rdi0:.3f}, "
      f"ceiling basal area = {scenario.params.s_bar:.3f} m²")

for spec in ("e0", "esup", "et"):
    policy = sg.build_policy(scenario, spec, T=25.0) if spec == "et" \
        else sg.build_policy(scenario, spec)
    traj = sg.integrate(scenario, policy, 40.0)
    print(f"\npolicy {spec}: valid to t = {traj.validity_end:.2f}"
          f"{' (left through the exit corner)' if traj.exited else ''}")
    for ev in traj.events:
        print(f"  event {ev.kind:<12} at t = {ev.time:8.3f}")
    for t_probe in (5.0, 15.0, 25.0, 35.0):
        if t_probe > traj.validity_end:
            continue
        i = int(np.argmin(np.abs(traj.t - t_probe)))
        print(f"  t={traj.t[i]:5.1f}  s={traj.s[i]:.4f}  n={traj.n[i]:7.2f}  "
              f"r={traj.r[i]:.3f}  e={traj.e[i]:6.2f}")
    out = HERE / f"trajectory_{spec}.csv"
    sg.write_trajectory_csv(traj, scenario.env, out)
    sg.write_events_json(traj, out.with_suffix(".events.json"))
    print(f"  wrote {out.name} (columns t,s,n,r,e,h) and the events sidecar")

print("\nThe ceiling-riding run ends exactly at (r, n) = (1, n_min): the only")
print("corner through which a stand can leave its validity domain.")
