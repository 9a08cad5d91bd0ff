"""Penning trap basics: derived frequencies, the confinement ratio beta,
cold-fluid crystal shapes, and the closed-form mode-gap estimates.

Run:  python3 demos/01_trap_basics.py
"""

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from penningmd import (BERYLLIUM_9, TrapConfig, derived_quantities, doppler_limit,
                       fluid_extents, gap_estimates, spheroid_aspect_ratio)

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

ion = BERYLLIUM_9
B = 4.4588
omega_z = 2 * math.pi * 1.59e6


def trap(fr_hz, delta=0.0104):
    return TrapConfig(B, omega_z, delta, 2 * math.pi * fr_hz)


d = derived_quantities(trap(200e3), ion)
print(f"9Be+ at B = {B} T:")
print(f"  cyclotron frequency  omega_c/2pi = {d.omega_c / 2 / math.pi / 1e6:.3f} MHz")
print(f"  omega_c / gamma_0           = {d.omega_c / ion.natural_linewidth:.3f}")
print(f"  Doppler limit               = {doppler_limit(ion) * 1e3:.3f} mK")

# beta controls the 2D <-> 3D shape transition; sweep the wall frequency
freqs = np.linspace(150e3, 2.2e6, 200)
betas = [derived_quantities(trap(f), ion).beta for f in freqs]
aspects = [spheroid_aspect_ratio(b) if b > 0.0104 else np.nan for b in betas]

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(freqs / 1e3, betas)
ax[0].axhline(1.0, ls=":", c="gray")
ax[0].set_xlabel("rotation frequency (kHz)")
ax[0].set_ylabel("beta")
ax[1].plot(freqs / 1e3, aspects)
ax[1].axhline(1.0, ls=":", c="gray", label="sphere")
ax[1].set_xlabel("rotation frequency (kHz)")
ax[1].set_ylabel("fluid aspect ratio Z/R")
ax[1].legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "beta_and_aspect.png"), dpi=130)

# frequency-gap estimates for an N = 1000 crystal: the highest ExB-branch
# frequency rises with omega_r while the lowest axial-branch frequency falls,
# crossing near 500 kHz and closing the gap for prolate crystals
n_ions = 1000
rows = []
for fr in np.linspace(200e3, 900e3, 40):
    t = trap(fr)
    radius, z_half, a_ws, _ = fluid_extents(t, ion, n_ions)
    g = gap_estimates(t, ion, radius, z_half, a_ws)
    rows.append((fr, g.omega_e_max, g.omega_par_min, g.valid))

rows = [(f, e, p) for f, e, p, ok in rows if ok]
arr = np.array(rows)
fig, ax = plt.subplots(figsize=(5, 3.5))
ax.plot(arr[:, 0] / 1e3, arr[:, 1] / 2 / math.pi / 1e6, label="max ExB estimate")
ax.plot(arr[:, 0] / 1e3, arr[:, 2] / 2 / math.pi / 1e6, label="min axial estimate")
ax.set_xlabel("rotation frequency (kHz)")
ax.set_ylabel("frequency (MHz)")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "gap_estimates.png"), dpi=130)

cross = arr[np.argmin(np.abs(arr[:, 1] - arr[:, 2])), 0]
print(f"  estimated branch-gap crossing near {cross / 1e3:.0f} kHz (N = {n_ions})")
print(f"figures in {OUT}/")
