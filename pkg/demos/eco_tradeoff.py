"""How the ECO efficiency scalar s trades energy against flush risk.

A small s keeps every block efficient but spends close to the bound; a large
s defers data that cannot be sent efficiently, which the final block must
then push through at whatever its channel costs.

    python3 demos/eco_tradeoff.py [trials]
"""
import dataclasses
import sys

import numpy as np

from coop_rsma.harness import load_preset, run_preset

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 8
preset = load_preset("fig4").with_overrides(trials=trials, fixed={"n_mues": 2})
preset = dataclasses.replace(preset, grid=(0.1, 0.4, 0.7, 0.9))
table = run_preset(preset)

print(f"{'s':>5} {'mean [J]':>11} {'IQR [J]':>11} {'bound [J]':>11} {'flush share':>12}")
for row in table.agg:
    print(f"{row['value']:>5} {float(row['mean_energy']):11.4e} {float(row['iqr_energy']):11.4e} "
          f"{float(row['eco_bound']):11.4e} {float(row['mean_flush_share']):12.3f}")
worst = max(table.raw, key=lambda r: float(r["energy"]) if int(r["feasible"]) else -np.inf)
print(f"\nmost expensive trial: s={worst['value']} seed={worst['seed']} energy={float(worst['energy']):.3e} J, "
      f"flush share {float(worst['flush_share']):.2f}")
