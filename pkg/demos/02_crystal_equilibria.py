"""Equilibrium crystal shapes across the 2D-3D transition.

Relaxes N = 100 crystals at several wall rotation frequencies and plots
their r-z profiles.  Below the buckling point the crystal is a single
plane; past it the axial extent grows and concentric shells appear.

Run:  python3 demos/02_crystal_equilibria.py    (about a minute)
"""

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from penningmd import BERYLLIUM_9, TrapConfig, local_equilibrium

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

ion = BERYLLIUM_9
n_ions = 100
freqs_khz = [176, 190, 220, 400, 700]

fig, axes = plt.subplots(1, len(freqs_khz), figsize=(3 * len(freqs_khz), 3),
                         sharey=True)
for ax, fr in zip(axes, freqs_khz):
    trap = TrapConfig(4.4588, 2 * math.pi * 1.59e6, 0.0104, 2 * math.pi * fr * 1e3)
    eq = local_equilibrium(trap, ion, n_ions, seed=42, max_steps=150_000)
    pos = eq.positions * 1e6
    r = np.hypot(pos[:, 0], pos[:, 1])
    ax.plot(r, pos[:, 2], "o", ms=3)
    ax.set_title(f"{fr} kHz\nmax|z| = {np.abs(pos[:, 2]).max():.1f} um")
    ax.set_xlabel("r (um)")
    print(f"omega_r = {fr:5.1f} kHz: energy = {eq.energy:.6e} J, "
          f"max|z| = {np.abs(pos[:, 2]).max():6.2f} um, "
          f"residual force = {eq.residual_force_max:.1e} N")
axes[0].set_ylabel("z (um)")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "crystal_shapes.png"), dpi=130)
print(f"figure in {OUT}/")
