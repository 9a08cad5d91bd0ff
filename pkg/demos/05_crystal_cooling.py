"""Full cooling pipeline on a reduced-N crystal.

equilibrate -> thermalize at 10 mK -> 2 ms of Doppler cooling, through the
same experiment harness the CLI drives.  Produces the temperature CSV, the
final confinement report, and the cooling curves.

At reduced N the laser torque outweighs the rotating-wall torque unless the
perpendicular beam power is scaled down with the crystal area; this spec
uses S_perp = 0.05 for N = 100 to stay in the wall-locked regime.

Run:  python3 demos/05_crystal_cooling.py    (a couple of minutes)
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from penningmd import parse_spec_text, run_pipeline, spec_from_dict

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

SPEC = """
n_ions = 100
pipeline = equilibrate, thermalize, cool
trap.b_field_tesla = 4.4588
trap.omega_z_hz = 1.59e6
trap.omega_r_hz = 400e3
trap.delta = 0.104
beams.perp.detuning_hz = -55e6
beams.perp.offset_um = 9.4
beams.perp.saturation = 0.05
sim.dt_ns = 1.0
sim.seed = 1234
sim.snapshot_interval = 10000
thermalize.target_mk = 10.0
cool.duration_ms = 2.0
cool.rms_window_ms = 1.0
"""

spec = spec_from_dict(parse_spec_text(SPEC), raw_text=SPEC)
record = run_pipeline(spec, output_dir=os.path.join(OUT, "run400"))

t = np.array([s.t for s in record.samples]) * 1e3
t_pe = np.array([s.t_pe for s in record.samples]) * 1e3
t_perp = np.array([s.t_ke_perp for s in record.samples]) * 1e3
t_par = np.array([s.t_ke_par for s in record.samples]) * 1e3

print(f"final: T_pe = {t_pe[-1]:.2f} mK, T_perp = {t_perp[-1]:.2f} mK, "
      f"T_par = {t_par[-1]:.3f} mK")
conf = record.final_confinement
print(f"median rms displacement over the last ms: "
      f"dx = {np.median(conf.dx_rms) * 1e6:.3f} um, "
      f"dz = {np.median(conf.dz_rms) * 1e6:.3f} um")

fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(t, t_pe, label="PE")
ax[0].plot(t, t_perp, label="KE perp")
ax[0].plot(t, t_par, label="KE par")
ax[0].set_xlabel("time (ms)")
ax[0].set_ylabel("temperature (mK)")
ax[0].legend()
ax[1].hist(conf.dx_rms * 1e6, bins=20, alpha=0.7, label="dx_rms")
ax[1].hist(conf.dz_rms * 1e6, bins=20, alpha=0.7, label="dz_rms")
ax[1].set_xlabel("rms displacement (um)")
ax[1].set_ylabel("ions")
ax[1].legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "crystal_cooling.png"), dpi=130)
print(f"outputs in {OUT}/")
