"""Link budget and the two Taylor bounds used by the trajectory update.

Run from the repository root:  python demos/01_link_budget.py
"""

import numpy as np

from uavmec.model import Trajectory, offload_rate, reference_scenario
from uavmec.sca import expand_at, rate_lower, rate_upper

# one GBS at the origin, UAV at 50 m altitude, 1 W into -60 dBm noise
sc = reference_scenario([(0.0, 0.0)], (0.0, 0.0), (0.0, 0.0))
print(f"reference SNR rho = {sc.snr_ref:.6g} m^2")
print(f"compute per GBS per slot = {sc.slot_capacity_bits[0]:.6g} bits")

# rate against horizontal offset: overhead the link carries ~3.5x what the
# server can execute in one slot, so hovering alone is capacity-bound
for x in (0, 50, 100, 200, 400, 800):
    print(f"  offset {x:4d} m  rate {offload_rate((x, 0), 0, sc) / 1e6:7.4f} Mbit/s")

# expand at a point 100 m away and compare the bounds along a line through it
local = np.array([100.0, 0.0])
ex = expand_at(Trajectory(np.vstack([local, local])), sc)
print(f"\nexpansion at x = 100 m: b = {ex.b[0, 0]:.6g} bit/s per m^2")
print("     x    lower     exact    upper  (Mbit/s)")
for x in (-75, 0, 50, 100, 150, 300):
    u = (float(x), 0.0)
    try:
        up = f"{rate_upper(u, 0, 0, ex, sc) / 1e6:7.4f}"
    except ValueError:
        up = "    n/a"  # linearized distance not positive: outside the guard
    print(f"  {x:4d}  {rate_lower(u, 0, 0, ex, sc) / 1e6:7.4f}  "
          f"{offload_rate(u, 0, sc) / 1e6:7.4f}  {up}")
# the lower bound drives the objective (safe to maximize), the upper bound
# enters the capacity rows (safe to constrain)
