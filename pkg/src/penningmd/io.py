"""File formats: temperature CSV, binary snapshots, mode tables, checkpoints.

Snapshot layout: one little-endian int64 ion count, then the x, y, z, vx,
vy, vz columns as contiguous float64 arrays, plus a JSON sidecar
(<path>.json) with the clock, frame, and run metadata.  All text output is
ASCII with round-trippable float formatting, so identical runs produce
identical bytes.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .model import SystemState


def _fmt(x: float) -> str:
    return repr(float(x))


def write_timeseries_csv(path, samples) -> None:
    """samples: iterable of TemperatureSample."""
    lines = ["t_s,T_pe_mK,T_ke_perp_mK,T_ke_par_mK"]
    for s in samples:
        lines.append(",".join([_fmt(s.t), _fmt(s.t_pe * 1e3),
                               _fmt(s.t_ke_perp * 1e3), _fmt(s.t_ke_par * 1e3)]))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def read_timeseries_csv(path) -> np.ndarray:
    """Returns a (T, 4) array of [t_s, T_pe_mK, T_ke_perp_mK, T_ke_par_mK]."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_snapshot(path, state: SystemState, metadata: dict | None = None) -> None:
    n = state.n_ions
    with open(path, "wb") as f:
        f.write(np.int64(n).astype("<i8").tobytes())
        for col in range(3):
            f.write(np.ascontiguousarray(state.positions[:, col], dtype="<f8").tobytes())
        for col in range(3):
            f.write(np.ascontiguousarray(state.velocities[:, col], dtype="<f8").tobytes())
    side = {"time_s": state.time, "frame": state.frame, "n_ions": n}
    if metadata:
        side.update(metadata)
    with open(str(path) + ".json", "w") as f:
        json.dump(side, f, indent=1, sort_keys=True)
        f.write("\n")


def read_snapshot(path) -> tuple[SystemState, dict]:
    with open(path, "rb") as f:
        n = int(np.frombuffer(f.read(8), dtype="<i8")[0])
        cols = [np.frombuffer(f.read(8 * n), dtype="<f8") for _ in range(6)]
    sidecar = str(path) + ".json"
    meta = {}
    if os.path.exists(sidecar):
        with open(sidecar) as f:
            meta = json.load(f)
    state = SystemState(np.column_stack(cols[:3]), np.column_stack(cols[3:]),
                        float(meta.get("time_s", 0.0)),
                        meta.get("frame", "lab"))
    return state, meta


def write_mode_table(path, modes) -> None:
    """CSV: index, frequency in Hz, axial fraction, PE/KE ratio, branch."""
    lines = ["index,freq_hz,f_z,R_n,branch"]
    for i in range(len(modes)):
        lines.append(",".join([
            str(i + 1),
            _fmt(modes.frequencies[i] / (2.0 * np.pi)),
            _fmt(modes.axial_fractions[i]),
            _fmt(modes.pe_ke_ratios[i]),
            str(modes.branches[i]),
        ]))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def write_confinement_csv(path, report) -> None:
    lines = ["ion,dx_rms_m,dz_rms_m"]
    for i in range(report.dx_rms.shape[0]):
        lines.append(f"{i},{_fmt(report.dx_rms[i])},{_fmt(report.dz_rms[i])}")
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def write_scan_csv(path, rows) -> None:
    """rows: iterables of (detuning_hz, offset_m, T_pe, T_perp, T_par, equilibrated)."""
    lines = ["perp_detuning_hz,offset_um,T_pe_mK,T_ke_perp_mK,T_ke_par_mK,equilibrated"]
    for det, off, t_pe, t_perp, t_par, ok in rows:
        lines.append(",".join([_fmt(det), _fmt(off * 1e6), _fmt(t_pe * 1e3),
                               _fmt(t_perp * 1e3), _fmt(t_par * 1e3),
                               "1" if ok else "0"]))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, payload: dict, meta: dict) -> None:
    """Arrays plus a JSON metadata blob in one npz container."""
    np.savez(path, __meta__=np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **payload)


def load_checkpoint(path, expect_spec_hash: str | None = None,
                    expect_version: str | None = None) -> tuple[dict, dict]:
    try:
        with np.load(path) as z:
            payload = {k: z[k] for k in z.files if k != "__meta__"}
            meta = json.loads(bytes(z["__meta__"].tobytes()).decode())
    except Exception as exc:
        raise CheckpointError(f"corrupt or unreadable checkpoint: {exc}") from exc
    if expect_spec_hash is not None and meta.get("spec_hash") != expect_spec_hash:
        raise CheckpointError("checkpoint refused: spec hash mismatch")
    if expect_version is not None and meta.get("code_version") != expect_version:
        raise CheckpointError("checkpoint refused: code version mismatch")
    return payload, meta
