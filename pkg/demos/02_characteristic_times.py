"""Characteristic times and reachability of the exit corner.

Every admissible trajectory moves right and down in the (s, n) phase plane
and can only leave the validity domain through the corner (r, n) =
(1, n_min).  The time of that departure is bracketed by [t_lower, t_upper]:
the cut-first policy reaches the corner soonest, the ceiling-riding policy
last.  Whether the corner is reachable at all depends on the cumulative
growth energy.
"""

import dataclasses
import pathlib

import standgrowth as sg

HERE = pathlib.Path(__file__).resolve().parent
SCN = HERE.parent / "scenarios"


def show(name):
    scenario = sg.load_scenario(SCN / name).scenario
    times = sg.characteristic_times(scenario, T=25.0)
    diag = sg.validity_diagnostics(scenario)
    print(f"\n{name}")
    for key, val in times.to_json_dict().items():
        print(f"  {key:<20} {val if val is not None else 'unreachable'}")
    print(f"  energy diagnostic    {diag.classification}")
    return scenario


show("convex_price_power.ini")
show("linear_growth.ini")       # t_lower == t_upper: cutting-independent
low = show("low_energy.ini")    # corner provably unreachable

scaled = dataclasses.replace(
    low, env=dataclasses.replace(
        low.env, v=sg.GrowthEnergy(low.env.v.family, 10.0 * low.env.v.v0,
                                   low.env.v.lam)))
print(f"\nlow_energy with 10x the energy supply: "
      f"{sg.validity_diagnostics(scaled).classification}")

print("\nCross-check: the ceiling-riding exit event matches the root of the")
scenario = sg.load_scenario(SCN / "convex_price_power.ini").scenario
traj = sg.integrate(scenario, sg.build_policy(scenario, "esup"), 50.0)
print(f"count relation: integrator {traj.validity_end:.6f} vs "
      f"root {sg.t_cap0(scenario):.6f}")
