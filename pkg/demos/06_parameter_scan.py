"""Scan the perpendicular-beam detuning and offset grid.

Every grid point runs the full pipeline with identical seeds, so the table
is a controlled comparison; points whose temperatures have not settled are
flagged.  Keep the grid small: each point is an independent MD run.

Run:  python3 demos/06_parameter_scan.py    (a few minutes)
"""

import os

from penningmd import parse_spec_text, run_scan, spec_from_dict

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

SPEC = """
n_ions = 60
trap.omega_r_hz = 400e3
trap.delta = 0.104
beams.perp.saturation = 0.05
sim.seed = 7
sim.snapshot_interval = 5000
thermalize.target_mk = 10.0
scan.perp_detuning_hz = -20e6, -55e6, -120e6
scan.offset_um = 3.0, 8.0
scan.duration_ms = 1.0
"""

spec = spec_from_dict(parse_spec_text(SPEC), raw_text=SPEC)
rows = run_scan(spec, output_dir=OUT)

print(f"{'det (MHz)':>10} {'d (um)':>7} {'T_pe':>8} {'T_perp':>8} "
      f"{'T_par':>8}  settled")
for det, off, t_pe, t_perp, t_par, ok in rows:
    print(f"{det / 2 / 3.141592653589793 / 1e6:10.1f} {off * 1e6:7.1f} "
          f"{t_pe * 1e3:8.2f} {t_perp * 1e3:8.2f} {t_par * 1e3:8.3f}  "
          f"{'yes' if ok else 'NO'}")
print(f"table in {OUT}/scan.csv")
