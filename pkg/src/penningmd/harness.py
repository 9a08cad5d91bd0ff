"""Experiment orchestration: spec files, the equilibrate/thermalize/cool
pipeline, parameter scans, and checkpointed long runs.

Spec files are plain text with dotted keys (frequencies in Hz, lengths in
micrometers at the boundary; SI internally):

    n_ions = 100
    pipeline = equilibrate, thermalize, cool
    trap.b_field_tesla = 4.4588
    trap.omega_z_hz = 1.59e6
    trap.omega_r_hz = 220e3
    trap.delta = 0.0104
    beams.perp.detuning_hz = -75e6
    beams.perp.offset_um = 1.0
    sim.dt_ns = 1.0
    sim.seed = 12345
    cool.duration_ms = 3.0
    scan.perp_detuning_hz = -20e6, -50e6
    scan.offset_um = 5.0, 10.0

Stage seeds derive from sim.seed (equilibrate: seed, thermalize: seed+1,
cool: seed+2) so each stage owns an independent reproducible stream.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .cooling import (AXIAL_SATURATION, PERP_DETUNING, PERP_OFFSET, PERP_SATURATION,
                      PERP_WAIST_Y, PERP_WAIST_Z, BeamSet, default_beams)
from .diagnostics import (ConfinementReport, TemperatureSample, record_to_samples,
                          rms_displacement)
from .equilibrium import EquilibriumResult, local_equilibrium
from .forces import ForceField
from .integrator import run_lab
from .io import (load_checkpoint, save_checkpoint, write_confinement_csv,
                 write_snapshot, write_timeseries_csv)
from .model import (LAB, ROTATING, BERYLLIUM_9, IonSpecies, SimConfig, SystemState,
                    TrapConfig, check_timestep, rotating_to_lab)
from .thermalize import ThermalizeConfig, thermalize_state

VALID_STAGES = ("equilibrate", "thermalize", "cool")


@dataclass(frozen=True)
class ScanSpec:
    perp_detunings: tuple   # rad/s
    offsets: tuple          # m
    duration: float         # s


@dataclass(frozen=True)
class ExperimentSpec:
    trap: TrapConfig
    ion: IonSpecies
    beams: BeamSet
    sim: SimConfig
    thermalize: ThermalizeConfig
    n_ions: int
    pipeline: tuple = VALID_STAGES
    cool_duration: float = 3e-3       # s
    rms_window: float = 1e-3          # s
    equilibrate_max_steps: int = 200_000
    equilibrate_force_tol: float = 1e-18
    equilibrate_damping: float = 1e-4
    equilibrate_refine: bool | None = None
    scan: ScanSpec | None = None
    raw_text: str = ""

    def __post_init__(self):
        if self.n_ions < 1:
            raise ValueError("n_ions must be >= 1")
        order = [VALID_STAGES.index(s) for s in self.pipeline]
        if any(s not in VALID_STAGES for s in self.pipeline) or order != sorted(order):
            raise ValueError(
                f"pipeline must be an ordered subset of {VALID_STAGES}")


@dataclass
class CoolingRecord:
    samples: list                     # TemperatureSample, strictly increasing t
    final_confinement: ConfinementReport | None
    metadata: dict
    failure: str | None = None

    def __post_init__(self):
        times = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("samples must be strictly increasing in t")


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        v = float(text)
        return int(v) if v.is_integer() and "e" not in low and "." not in text else v
    except ValueError:
        return text


def parse_spec_text(text: str) -> dict:
    """Dotted-key lines into a flat dict; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value': {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if "," in value:
            out[key] = tuple(_parse_scalar(v) for v in value.split(",") if v.strip())
        else:
            out[key] = _parse_scalar(value)
    return out


def _get(d: dict, key: str, default):
    return d.get(key, default)


def spec_from_dict(kv: dict, raw_text: str = "") -> ExperimentSpec:
    ion = IonSpecies(
        mass=float(_get(kv, "ion.mass_kg", BERYLLIUM_9.mass)),
        charge=float(_get(kv, "ion.charge_c", BERYLLIUM_9.charge)),
        transition_wavelength=float(_get(kv, "ion.wavelength_nm", 313.13)) * 1e-9,
        natural_linewidth=2.0 * math.pi * float(_get(kv, "ion.linewidth_hz", 18e6)),
    )
    trap = TrapConfig(
        b_field=float(_get(kv, "trap.b_field_tesla", 4.4588)),
        omega_z=2.0 * math.pi * float(_get(kv, "trap.omega_z_hz", 1.59e6)),
        wall_delta=float(_get(kv, "trap.delta", 0.0104)),
        omega_r=2.0 * math.pi * float(_get(kv, "trap.omega_r_hz", 220e3)),
    )
    axial_det = _get(kv, "beams.axial.detuning_hz", None)
    beams = default_beams(
        ion,
        perp_detuning=2.0 * math.pi * float(_get(kv, "beams.perp.detuning_hz",
                                                 PERP_DETUNING / (2 * math.pi))),
        perp_offset=float(_get(kv, "beams.perp.offset_um", PERP_OFFSET * 1e6)) * 1e-6,
        perp_saturation=float(_get(kv, "beams.perp.saturation", PERP_SATURATION)),
        waist_y=float(_get(kv, "beams.perp.waist_y_um", PERP_WAIST_Y * 1e6)) * 1e-6,
        waist_z=float(_get(kv, "beams.perp.waist_z_um", PERP_WAIST_Z * 1e6)) * 1e-6,
        axial_saturation=float(_get(kv, "beams.axial.saturation", AXIAL_SATURATION)),
        axial_detuning=None if axial_det is None else 2.0 * math.pi * float(axial_det),
        include_perp=bool(_get(kv, "beams.perp.enabled", True)),
        include_axial=bool(_get(kv, "beams.axial.enabled", True)),
    )
    sim = SimConfig(
        dt=float(_get(kv, "sim.dt_ns", 1.0)) * 1e-9,
        n_steps=0,
        rng_seed=int(_get(kv, "sim.seed", 0)),
        coulomb_method=str(_get(kv, "sim.coulomb_method", "direct")),
        tree_theta=float(_get(kv, "sim.tree_theta", 0.3)),
        tree_order=int(_get(kv, "sim.tree_order", 2)),
        snapshot_interval=int(_get(kv, "sim.snapshot_interval", 10_000)),
    )
    therm = ThermalizeConfig(
        target_temperature=float(_get(kv, "thermalize.target_mk", 10.0)) * 1e-3,
        mh_step=float(_get(kv, "thermalize.mh_step_um", 0.5)) * 1e-6,
        mh_scans=int(_get(kv, "thermalize.mh_scans", 1000)),
        langevin_gamma=None,
        langevin_steps=int(_get(kv, "thermalize.langevin_steps", 100_000)),
        method=str(_get(kv, "thermalize.method", "mh")),
    )
    pipeline = _get(kv, "pipeline", VALID_STAGES)
    if isinstance(pipeline, str):
        pipeline = (pipeline,)
    scan = None
    if "scan.perp_detuning_hz" in kv or "scan.offset_um" in kv:
        dets = kv.get("scan.perp_detuning_hz", (PERP_DETUNING / (2 * math.pi),))
        offs = kv.get("scan.offset_um", (PERP_OFFSET * 1e6,))
        dets = dets if isinstance(dets, tuple) else (dets,)
        offs = offs if isinstance(offs, tuple) else (offs,)
        scan = ScanSpec(
            perp_detunings=tuple(2.0 * math.pi * float(v) for v in dets),
            offsets=tuple(float(v) * 1e-6 for v in offs),
            duration=float(_get(kv, "scan.duration_ms", 2.0)) * 1e-3,
        )
    refine = _get(kv, "equilibrate.refine", None)
    if isinstance(refine, str):
        refine = None if refine == "auto" else refine == "true"
    return ExperimentSpec(
        trap=trap, ion=ion, beams=beams, sim=sim, thermalize=therm,
        n_ions=int(_get(kv, "n_ions", 100)),
        pipeline=tuple(pipeline),
        cool_duration=float(_get(kv, "cool.duration_ms", 3.0)) * 1e-3,
        rms_window=float(_get(kv, "cool.rms_window_ms", 1.0)) * 1e-3,
        equilibrate_max_steps=int(_get(kv, "equilibrate.max_steps", 200_000)),
        equilibrate_force_tol=float(_get(kv, "equilibrate.force_tol", 1e-18)),
        equilibrate_damping=float(_get(kv, "equilibrate.damping_fraction", 1e-4)),
        equilibrate_refine=refine,
        scan=scan,
        raw_text=raw_text,
    )


def load_spec(path) -> ExperimentSpec:
    with open(path) as f:
        text = f.read()
    return spec_from_dict(parse_spec_text(text), raw_text=text)


def spec_hash(spec: ExperimentSpec) -> str:
    body = spec.raw_text if spec.raw_text else repr(spec)
    return hashlib.sha256(body.encode()).hexdigest()[:16]


def _metadata(spec: ExperimentSpec) -> dict:
    return {"spec_hash": spec_hash(spec), "seed": spec.sim.rng_seed,
            "code_version": __version__}


def run_equilibrate(spec: ExperimentSpec) -> EquilibriumResult:
    return local_equilibrium(
        spec.trap, spec.ion, spec.n_ions, seed=spec.sim.rng_seed,
        damping_fraction=spec.equilibrate_damping, dt=spec.sim.dt,
        max_steps=spec.equilibrate_max_steps,
        force_tol=spec.equilibrate_force_tol, refine=spec.equilibrate_refine)


def run_thermalize(spec: ExperimentSpec, equilibrium: np.ndarray) -> SystemState:
    return thermalize_state(equilibrium, spec.thermalize, spec.trap, spec.ion,
                            seed=spec.sim.rng_seed + 1)


def run_pipeline(spec: ExperimentSpec, output_dir=None,
                 checkpoint_every: int | None = None,
                 resume_from=None) -> CoolingRecord:
    """Execute the configured stages; returns the cooling record.

    With output_dir set, writes equilibrium/thermalized/final snapshots, the
    temperature CSV, and the confinement CSV there.  checkpoint_every (in
    steps) writes cool-stage checkpoints; resume_from restarts one.
    """
    check_timestep(spec.sim.dt, spec.trap, spec.ion)
    meta = _metadata(spec)
    out = None if output_dir is None else str(output_dir)
    if out:
        os.makedirs(out, exist_ok=True)

    failure = None
    eq = run_equilibrate(spec)
    if not eq.converged:
        failure = "equilibrate did not converge"
    if out:
        write_snapshot(os.path.join(out, "equilibrium.snap"),
                       SystemState(eq.positions, np.zeros_like(eq.positions),
                                   0.0, ROTATING),
                       dict(meta, stage="equilibrate",
                            residual_force_max=eq.residual_force_max,
                            energy=eq.energy, method=eq.method))
    samples = []
    confinement = None
    if "thermalize" in spec.pipeline or "cool" in spec.pipeline:
        therm = run_thermalize(spec, eq.positions)
        if out:
            write_snapshot(os.path.join(out, "thermalized.snap"), therm,
                           dict(meta, stage="thermalize"))
    if "cool" in spec.pipeline and failure is None:
        dt = spec.sim.dt
        n_total = int(round(spec.cool_duration / dt))
        rec_every = spec.sim.snapshot_interval
        ring_every = max(1, rec_every // 10)
        window_slots = max(2, int(round(spec.rms_window / (ring_every * dt))))
        field = ForceField(spec.trap, spec.ion, spec.sim.coulomb_method,
                           spec.sim.tree_theta, spec.sim.tree_order)
        seed_cool = spec.sim.rng_seed + 2

        if resume_from is not None:
            payload, ck_meta = load_checkpoint(resume_from,
                                               expect_spec_hash=meta["spec_hash"],
                                               expect_version=meta["code_version"])
            state = SystemState(payload["positions"], payload["velocities"],
                                float(ck_meta["time_s"]), LAB)
            step0 = int(ck_meta["step"])
            rings = (payload["ring_x"], payload["ring_z"])
            chunks = [payload[f"rec_{k}"] for k in
                      ("t", "epot_rot", "etot_rot", "ke_par_sum", "ke_perp_sum")]
            records = {k: v for k, v in zip(
                ("t", "epot_rot", "etot_rot", "ke_par_sum", "ke_perp_sum"), chunks)}
        else:
            state = rotating_to_lab(therm, spec.trap)
            step0 = 0
            rings = (np.zeros((window_slots, spec.n_ions)),
                     np.zeros((window_slots, spec.n_ions)))
            records = {k: np.zeros(0) for k in
                       ("t", "epot_rot", "etot_rot", "ke_par_sum", "ke_perp_sum")}

        chunk = checkpoint_every if checkpoint_every else n_total
        while step0 < n_total:
            n_now = min(chunk, n_total - step0)
            state, rec = run_lab(state, field, dt, n_now, beams=spec.beams,
                                 seed=seed_cool, step0=step0, t_origin=0.0,
                                 rec_every=rec_every, ring_every=ring_every,
                                 ring_buffers=rings)
            for k in records:
                records[k] = np.concatenate([records[k], rec[k]])
            step0 += n_now
            if out and checkpoint_every and step0 < n_total:
                payload = {"positions": state.positions,
                           "velocities": state.velocities,
                           "ring_x": rings[0], "ring_z": rings[1]}
                payload.update({f"rec_{k}": v for k, v in records.items()})
                save_checkpoint(os.path.join(out, f"checkpoint_{step0}.npz"),
                                payload,
                                dict(meta, step=step0, time_s=state.time))
        samples = record_to_samples(records, spec.n_ions, spec.ion, eq.energy)
        window = window_slots * ring_every * dt
        try:
            if n_total * dt < window:  # buffer never filled a full window
                raise ValueError("run shorter than the rms window")
            dx = rms_displacement(rings[0], "x", window, spec.trap.omega_r)
            dz = rms_displacement(rings[1], "z", window, spec.trap.omega_r)
            confinement = ConfinementReport(dx, dz, window)
        except ValueError:
            confinement = None
        if out:
            write_snapshot(os.path.join(out, "final.snap"), state,
                           dict(meta, stage="cool"))
            write_timeseries_csv(os.path.join(out, "cooling.csv"), samples)
            if confinement is not None:
                write_confinement_csv(os.path.join(out, "confinement.csv"),
                                      confinement)
    return CoolingRecord(samples, confinement, meta, failure)


def _equilibrated(samples) -> bool:
    """Heuristic flag: the trailing deciles of every temperature series agree."""
    if len(samples) < 10:
        return False
    arr = np.array([[s.t_pe, s.t_ke_perp, s.t_ke_par] for s in samples])
    n = arr.shape[0]
    last = arr[int(0.9 * n):].mean(axis=0)
    prev = arr[int(0.8 * n):int(0.9 * n)].mean(axis=0)
    tol = np.maximum(0.1 * np.abs(last), 0.02e-3)
    return bool(np.all(np.abs(last - prev) <= tol))


def run_scan(spec: ExperimentSpec, output_dir=None):
    """Independent pipeline runs over the (detuning, offset) grid.

    Every grid point reuses the same seeds for a controlled comparison.
    Rows are (detuning_rad_s, offset_m, T_pe, T_perp, T_par, equilibrated);
    per-point failures are isolated and reported as non-equilibrated rows
    with NaN temperatures.
    """
    if spec.scan is None:
        raise ValueError("spec has no scan grid")
    perp_ref = next((b for b in spec.beams
                     if math.isfinite(b.waist_y) or math.isfinite(b.waist_z)),
                    None)
    perp_sat = perp_ref.peak_saturation if perp_ref else PERP_SATURATION
    rows = []
    for det in spec.scan.perp_detunings:
        for off in spec.scan.offsets:
            beams = default_beams(
                spec.ion, perp_detuning=det, perp_offset=off,
                perp_saturation=perp_sat)
            point = replace(spec, beams=beams, cool_duration=spec.scan.duration,
                            scan=None, pipeline=VALID_STAGES)
            try:
                record = run_pipeline(point)
                tail = record.samples[max(0, int(0.9 * len(record.samples))):]
                t_pe = float(np.mean([s.t_pe for s in tail]))
                t_perp = float(np.mean([s.t_ke_perp for s in tail]))
                t_par = float(np.mean([s.t_ke_par for s in tail]))
                ok = _equilibrated(record.samples) and record.failure is None
                rows.append((det, off, t_pe, t_perp, t_par, ok))
            except Exception:
                rows.append((det, off, math.nan, math.nan, math.nan, False))
    if output_dir is not None:
        from .io import write_scan_csv
        os.makedirs(str(output_dir), exist_ok=True)
        write_scan_csv(os.path.join(str(output_dir), "scan.csv"), rows)
    return rows
