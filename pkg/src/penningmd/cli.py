"""Command-line interface.

Subcommands: equilibrate, thermalize, cool, modes, scan, estimate.  Each
reads a spec file plus optional overrides; outputs land in --output-dir.
Exit codes: 0 success, 2 bad configuration, 3 runtime/convergence failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys


def _apply_threads(n):
    if n is None:
        return
    import numba
    try:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        pass


def _load(args):
    from .harness import load_spec, parse_spec_text, spec_from_dict
    spec = load_spec(args.spec)
    overrides = dict(getattr(args, "set", None) or [])
    if args.seed is not None:
        overrides["sim.seed"] = str(args.seed)
    if overrides:
        base = parse_spec_text(spec.raw_text)
        base.update(parse_spec_text("\n".join(f"{k} = {v}" for k, v in overrides.items())))
        text = "\n".join(f"{k} = {v if not isinstance(v, tuple) else ', '.join(map(str, v))}"
                         for k, v in sorted(base.items()))
        spec = spec_from_dict(base, raw_text=text)
    return spec


def _kv(pair):
    if "=" not in pair:
        raise argparse.ArgumentTypeError("--set expects key=value")
    k, v = pair.split("=", 1)
    return k.strip(), v.strip()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="penningmd",
        description="Doppler laser cooling simulations of Penning-trap ion crystals")
    parser.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("spec", help="experiment spec file (dotted keys)")
        p.add_argument("--seed", type=int, default=None, help="override sim.seed")
        p.add_argument("--threads", type=int, default=None,
                       help="numba thread cap (results are thread-count invariant)")
        p.add_argument("--output-dir", default="out", help="directory for outputs")
        p.add_argument("--set", action="append", type=_kv, metavar="KEY=VALUE",
                       help="override any spec key")

    for name in ("equilibrate", "thermalize", "cool", "modes", "scan"):
        common(sub.add_parser(name))
    sub.choices["cool"].add_argument("--checkpoint-every", type=int, default=None,
                                     help="steps between cool-stage checkpoints")
    sub.choices["cool"].add_argument("--restore", default=None,
                                     help="resume the cool stage from a checkpoint")

    est = sub.add_parser("estimate",
                         help="closed-form beta / gap / Doppler-limit calculators")
    common(est)

    args = parser.parse_args(argv)
    _apply_threads(args.threads)
    try:
        spec = _load(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    from dataclasses import replace
    from .harness import run_pipeline, run_scan, run_equilibrate, spec_hash
    out = args.output_dir

    try:
        if args.command == "estimate":
            return _estimate(spec)
        os.makedirs(out, exist_ok=True)
        if args.command == "scan":
            if spec.scan is None:
                print("error: spec has no scan.* grid", file=sys.stderr)
                return 2
            rows = run_scan(spec, output_dir=out)
            bad = sum(1 for r in rows if not r[5])
            print(f"scan: {len(rows)} points -> {os.path.join(out, 'scan.csv')}"
                  f" ({bad} not equilibrated)")
            return 0
        if args.command == "modes":
            from .io import write_mode_table
            from .modes import build_linearization, solve_modes
            eq = run_equilibrate(spec)
            lin = build_linearization(eq.positions, spec.trap, spec.ion)
            ms = solve_modes(lin, spec.ion)
            path = os.path.join(out, "modes.csv")
            write_mode_table(path, ms)
            print(f"modes: N={spec.n_ions} -> {len(ms)} modes "
                  f"({ms.zero_mode_count} zero eigenvalues), stable={lin.stable} "
                  f"-> {path}")
            return 0 if lin.stable else 3
        stages = {"equilibrate": ("equilibrate",),
                  "thermalize": ("equilibrate", "thermalize"),
                  "cool": ("equilibrate", "thermalize", "cool")}[args.command]
        spec = replace(spec, pipeline=stages)
        record = run_pipeline(
            spec, output_dir=out,
            checkpoint_every=getattr(args, "checkpoint_every", None),
            resume_from=getattr(args, "restore", None))
        if record.failure:
            print(f"failure: {record.failure}", file=sys.stderr)
            return 3
        if record.samples:
            last = record.samples[-1]
            print(f"cool: {len(record.samples)} samples, final "
                  f"T_pe={last.t_pe * 1e3:.3f} mK "
                  f"T_perp={last.t_ke_perp * 1e3:.3f} mK "
                  f"T_par={last.t_ke_par * 1e3:.3f} mK -> {out}")
        else:
            print(f"{args.command}: done (spec {spec_hash(spec)}) -> {out}")
        return 0
    except Exception as exc:  # runtime failure class
        print(f"failure: {exc}", file=sys.stderr)
        return 3


def _estimate(spec) -> int:
    from .diagnostics import doppler_limit, gap_estimates
    from .equilibrium import fluid_extents
    from .model import derived_quantities
    d = derived_quantities(spec.trap, spec.ion)
    print(f"omega_c/2pi = {d.omega_c / (2 * math.pi) / 1e6:.4f} MHz")
    print(f"Omega_v/2pi = {d.omega_v / (2 * math.pi) / 1e6:.4f} MHz")
    print(f"beta        = {d.beta:.4f}")
    print(f"T_Doppler   = {doppler_limit(spec.ion) * 1e3:.4f} mK")
    try:
        radius, z_half, a_ws, n0 = fluid_extents(spec.trap, spec.ion, spec.n_ions)
    except ValueError as exc:
        print(f"(no fluid spheroid: {exc})")
        return 0
    print(f"fluid R = {radius * 1e6:.2f} um, Z = {z_half * 1e6:.2f} um, "
          f"a_ws = {a_ws * 1e6:.3f} um, n0 = {n0:.3e} m^-3")
    g = gap_estimates(spec.trap, spec.ion, radius, z_half, a_ws)
    print(f"omega_p/2pi       = {g.omega_p / (2 * math.pi) / 1e6:.4f} MHz")
    print(f"omega_Emax/2pi    = {g.omega_e_max / (2 * math.pi) / 1e6:.4f} MHz")
    print(f"omega_par_min/2pi = {g.omega_par_min / (2 * math.pi) / 1e6:.4f} MHz")
    if not g.valid:
        print(f"warning: {g.message}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
