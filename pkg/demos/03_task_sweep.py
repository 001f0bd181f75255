"""Mission time against task size for the three schemes, written as CSV.

Run from the repository root:  python demos/03_task_sweep.py [out.csv]

Takes a few minutes; the largest task dominates.
"""

import logging
import sys

from uavmec.cli import load_scenario, run_sweep

logging.basicConfig(level=logging.INFO, format="%(message)s")

sc = load_scenario("scenarios/golden.toml")
table = run_sweep(sc, [1e8, 2e8, 3e8, 5e8])
text = table.to_csv()
if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as fh:
        fh.write(text)
print(text)

# small tasks: straight flight is hard to beat since detours cost travel time;
# large tasks: hovering over the servers wins and the proposed design
# interpolates between the two
for scheme in ("proposed", "straight", "hover-fly"):
    print(f"{scheme:>10}:", table.column(scheme))
