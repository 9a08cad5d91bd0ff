"""Doppler cooling of a single trapped ion to near the Doppler limit.

One ion, two counterpropagating axial beams (S = 5e-3, detuned -gamma_0/2)
plus the offset perpendicular beam.  The axial kinetic temperature settles
within a factor of two of hbar gamma_0 / 2 k_B ~ 0.43 mK in a few ms.

Run:  python3 demos/04_single_ion_cooling.py    (seconds)
"""

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from penningmd import (BERYLLIUM_9, ForceField, SystemState, TrapConfig,
                       default_beams, doppler_limit, run_lab,
                       sample_mb_velocities)
from penningmd.constants import K_BOLTZMANN

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

ion = BERYLLIUM_9
trap = TrapConfig(4.4588, 2 * math.pi * 1.59e6, 0.0104, 2 * math.pi * 200e3)
beams = default_beams(ion)

v0 = sample_mb_velocities(1, 5e-3, ion, np.random.default_rng(11))
state = SystemState(np.zeros((1, 3)), v0, 0.0, "lab")
final, rec = run_lab(state, ForceField(trap, ion), 1e-9, 5_000_000,
                     beams=beams, seed=99, rec_every=2_000)

t_par = ion.mass * rec["ke_par_sum"] / K_BOLTZMANN
t_d = doppler_limit(ion)
tail = t_par[int(0.6 * len(t_par)):].mean()
print(f"Doppler limit: {t_d * 1e3:.3f} mK")
print(f"tail-averaged axial temperature: {tail * 1e3:.3f} mK "
      f"({tail / t_d:.2f} x T_Doppler)")

fig, ax = plt.subplots(figsize=(6, 3.5))
ax.semilogy(rec["t"] * 1e3, t_par * 1e3, lw=0.5, label="instantaneous T_par")
ax.axhline(t_d * 1e3, color="k", ls="--", label="Doppler limit")
ax.axhline(2 * t_d * 1e3, color="gray", ls=":", label="2 x limit")
ax.set_xlabel("time (ms)")
ax.set_ylabel("T_par (mK)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "single_ion_cooling.png"), dpi=130)
print(f"figure in {OUT}/")
