"""Watch the five energy parts decay along a disk trajectory.

Runs the default double-well system from smoothed random data and prints a
table of the energy split, the dissipation recorded per step, and the final
balance check E(0) - E(T) vs the integrated dissipation.
"""

import numpy as np

from bsac import RunConfig, make_spec, run_trajectory

config = RunConfig(geometry="disk", n_r=32, n_theta=64, t_final=8.0,
                   dt=0.02, seed=4, checkpoint_every=0, spec=make_spec())
record = run_trajectory(config)

parts = record.energy_parts  # bulk dirichlet/potential, surface ditto, penalty
print(f"{'t':>7} {'bulk grad':>10} {'bulk pot':>10} {'surf grad':>10} "
      f"{'surf pot':>10} {'penalty':>10} {'total':>11}")
stride = max(1, len(record.times) // 16)
for i in range(0, len(record.times), stride):
    row = parts[i]
    print(f"{record.times[i]:7.3f} " + " ".join(f"{v:10.3e}" for v in row)
          + f" {record.energy_total[i]:11.6f}")

drop = record.energy_total[0] - record.energy_total[-1]
# columns hold per-step velocity norms; the identity integrates their squares
steps = np.diff(record.times)
dissipated = np.sum(steps * (record.dissipation_bulk[1:] ** 2
                             + record.dissipation_surface[1:] ** 2))
print(f"\nenergy drop        {drop:.8f}")
print(f"integrated rate    {dissipated:.8f}")
print(f"numerical surplus  {drop - dissipated:+.2e}  (nonnegative, O(dt))")
assert np.all(np.diff(record.energy_total) <= 1e-12)
print("monotone decay: every accepted step decreased the energy")
