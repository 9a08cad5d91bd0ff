"""Normal-mode spectrum of a 3D crystal: branch structure, axial fractions,
and potential/kinetic energy ratios.

The 3N modes split into ExB (low frequency, potential dominated), axial,
and cyclotron (high frequency, kinetic dominated) branches.  In 3D crystals
the ExB modes pick up a large axial component, which is what lets the axial
cooling beams reach them.

Run:  python3 demos/03_normal_modes.py    (about a minute)
"""

import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from penningmd import (BERYLLIUM_9, TrapConfig, build_linearization,
                       local_equilibrium, solve_modes)
from penningmd.io import write_mode_table

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

ion = BERYLLIUM_9
n_ions = 100

fig, axes = plt.subplots(2, 3, figsize=(12, 6), sharex="col")
for col, fr in enumerate([220e3, 400e3, 700e3]):
    trap = TrapConfig(4.4588, 2 * math.pi * 1.59e6, 0.0104, 2 * math.pi * fr)
    eq = local_equilibrium(trap, ion, n_ions, seed=42, max_steps=150_000)
    lin = build_linearization(eq.positions, trap, ion)
    ms = solve_modes(lin, ion)
    idx = np.arange(1, len(ms) + 1)
    axes[0, col].semilogy(idx, ms.frequencies / 2 / math.pi / 1e6, ".")
    axes[0, col].set_title(f"omega_r = {fr / 1e3:.0f} kHz")
    axes[1, col].plot(idx, ms.axial_fractions, ".", ms=3)
    axes[1, col].set_xlabel("mode number")
    for label in ("ExB", "axial", "cyclotron"):
        sel = ms.branches == label
        print(f"fr={fr / 1e3:5.0f} kHz {label:9s}: "
              f"{ms.frequencies[sel].min() / 2 / math.pi / 1e3:8.1f} - "
              f"{ms.frequencies[sel].max() / 2 / math.pi / 1e3:8.1f} kHz, "
              f"mean f_z = {ms.axial_fractions[sel].mean():.3f}, "
              f"median R = {np.median(ms.pe_ke_ratios[sel]):.2f}")
    exb_max = ms.frequencies[ms.branches == "ExB"].max()
    ax_min = ms.frequencies[ms.branches == "axial"].min()
    print(f"              ExB/axial gap: {(ax_min - exb_max) / 2 / math.pi / 1e3:.1f} kHz")
    write_mode_table(os.path.join(OUT, f"modes_{int(fr / 1e3)}khz.csv"), ms)
axes[0, 0].set_ylabel("frequency (MHz)")
axes[1, 0].set_ylabel("axial fraction f_z")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "mode_spectra.png"), dpi=130)
print(f"mode tables and figure in {OUT}/")
