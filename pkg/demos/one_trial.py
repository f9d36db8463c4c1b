"""Walk through one channel realization with every scheduler.

Prints the blockage pattern, then each algorithm's total energy, how much of
it the final flush block needed, and whether the plan verifies.

    python3 demos/one_trial.py [seed]
"""
import sys

import numpy as np

from coop_rsma.algorithms.efficiency import compute_delta, eco_energy_bound
from coop_rsma.harness import run_trial
from coop_rsma.harness.trial import trial_realization
from coop_rsma.scenario import SystemConfig

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
cfg = SystemConfig(n_antennas=8, n_mues=3, n_blocks=10)
ch = trial_realization(cfg, seed)

print(f"K={cfg.n_mues} mUEs, T={cfg.n_blocks} blocks, N={cfg.n_antennas} antennas, p={cfg.blockage_p}")
print("AP->mUE links per block (1 = clear), last column is the dUE path count:")
for t in range(cfg.n_blocks):
    relays = int(np.sum(ch.ap_mask[t] & ch.due_mask[t]))
    print(f"  t={t:2d}  {''.join(str(int(v)) for v in ch.ap_mask[t])}  relays={relays}")

profile = compute_delta(cfg)
print(f"\ncalibrated efficiency {profile.delta:.3e} bit/s/Hz per J, "
      f"ECO bound at s={cfg.eco_s}: {eco_energy_bound(cfg, profile):.3e} J\n")
print(f"{'algorithm':>9} {'energy [J]':>12} {'flush share':>12} {'feasible':>9}")
for algo in ("genie", "decrs", "eco", "edt", "crs"):
    r = run_trial(cfg, algo, seed, profile=profile if algo == "eco" else None, channels=ch)
    print(f"{algo:>9} {r.energy:12.4e} {r.flush_share:12.3f} {str(r.feasible):>9}")
