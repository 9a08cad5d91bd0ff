"""Thermometry and confinement diagnostics.

Potential-energy temperature compares the rotating-frame potential of a
state against a reference equilibrium: T = (2/3) dE / (N k_B).  Kinetic
temperatures subtract the rigid co-rotation of the crystal with the wall
(v_rigid = -omega_r z x r in the lab) so a perfectly wall-locked cold
crystal reads zero; slip against the wall therefore shows up as T_perp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, K_BOLTZMANN
from .forces import ForceField, total_potential_energy
from .model import ROTATING, IonSpecies, SystemState, TrapConfig, derived_quantities, lab_to_rotating


@dataclass(frozen=True)
class TemperatureSample:
    t: float          # s
    t_pe: float       # K, may be negative after strong cooling
    t_ke_perp: float  # K
    t_ke_par: float   # K


@dataclass
class ConfinementReport:
    dx_rms: np.ndarray   # (N,) m, rotating-frame x scatter per ion
    dz_rms: np.ndarray   # (N,) m
    window: float        # s


@dataclass(frozen=True)
class GapEstimates:
    omega_p: float        # rad/s plasma frequency
    omega_e_max: float    # rad/s max ExB-branch estimate (inf at Brillouin)
    omega_par_min: float  # rad/s min axial-branch estimate
    valid: bool           # Z > a and below the Brillouin limit
    message: str = ""


def pe_temperature(state: SystemState, reference_positions: np.ndarray,
                   trap: TrapConfig, ion: IonSpecies,
                   field: ForceField | None = None) -> float:
    """(2/3) [E_pot(state) - E_pot(reference)] / (N k_B), rotating frame.

    Negative values are reported as-is; they occur when cooling finds a
    configuration below the reference local minimum.
    """
    rot = state if state.frame == ROTATING else lab_to_rotating(state, trap)
    if field is None:
        field = ForceField(trap, ion)
    ref = SystemState(reference_positions, np.zeros_like(reference_positions),
                      rot.time, ROTATING)
    de = (total_potential_energy(rot, trap, ion, field)
          - total_potential_energy(ref, trap, ion, field))
    return (2.0 / 3.0) * de / (state.n_ions * K_BOLTZMANN)


def thermal_velocities(state: SystemState, trap: TrapConfig) -> np.ndarray:
    """Velocities with the rigid wall-locked rotation removed.

    In the rotating frame these are the velocities themselves; in the lab,
    v - v_rigid with v_rigid = -omega_r z x r.
    """
    if state.frame == ROTATING:
        return state.velocities.copy()
    v_rigid = -trap.omega_r * np.cross([0.0, 0.0, 1.0], state.positions)
    return state.velocities - v_rigid


def ke_temperatures(state: SystemState, trap: TrapConfig, ion: IonSpecies):
    """(T_perp, T_par) in kelvin from equipartition of thermal velocities."""
    v = thermal_velocities(state, trap)
    n = state.n_ions
    t_par = ion.mass * float(np.sum(v[:, 2] ** 2)) / (n * K_BOLTZMANN)
    t_perp = ion.mass * float(np.sum(v[:, 0] ** 2 + v[:, 1] ** 2)) / (2 * n * K_BOLTZMANN)
    return t_perp, t_par


def rms_displacement(window_positions: np.ndarray, component: str,
                     window_duration: float, omega_r: float) -> np.ndarray:
    """Per-ion rms scatter of a rotating-frame coordinate over a window.

    window_positions: (T, N) samples of the chosen coordinate, or (T, N, 3)
    full positions with component 'x' or 'z'.  The window must span more
    than one rotation period worth of time, 1/omega_r.
    """
    if window_duration <= 1.0 / omega_r:
        raise ValueError("window too short: need duration > 1/omega_r")
    w = np.asarray(window_positions, dtype=float)
    if w.ndim == 3:
        col = {"x": 0, "z": 2}[component]
        w = w[:, :, col]
    elif component not in ("x", "z"):
        raise ValueError("component must be 'x' or 'z'")
    if w.shape[0] < 2:
        raise ValueError("window too short: need at least 2 samples")
    return w.std(axis=0)


def doppler_limit(ion: IonSpecies) -> float:
    """Doppler cooling limit hbar gamma_0 / (2 k_B), in kelvin."""
    return HBAR * ion.natural_linewidth / (2.0 * K_BOLTZMANN)


def dispersion_relation(k_z: float, k_perp: float, omega_p: float) -> float:
    """Magnetized-plasma wave frequency: omega = omega_p k_z / sqrt(k_z^2+k_perp^2)."""
    if k_z == 0.0 and k_perp == 0.0:
        raise ValueError("k_z and k_perp cannot both vanish")
    return omega_p * abs(k_z) / math.hypot(k_z, k_perp)


def gap_estimates(trap: TrapConfig, ion: IonSpecies, radius: float,
                  z_half: float, a_ws: float, c_coefficient: float = 2.0) -> GapEstimates:
    """Spheroid estimates of the branch-gap frequencies.

    omega_p^2 = 2 omega_r (omega_c - omega_r); the highest ExB-branch
    frequency is about omega_p^2 / (2 Omega_v) and the lowest axial-branch
    frequency about C omega_p a / Z with C ~ 2.  Valid for Z > a.
    """
    d = derived_quantities(trap, ion)
    omega_p = math.sqrt(2.0 * trap.omega_r * (d.omega_c - trap.omega_r))
    msg = ""
    valid = True
    if d.omega_v <= 0.0:
        omega_e_max = math.inf
        valid = False
        msg = "at/beyond the Brillouin limit: omega_e_max diverges"
    else:
        omega_e_max = omega_p**2 / (2.0 * d.omega_v)
    omega_par_min = c_coefficient * omega_p * a_ws / z_half if z_half > 0 else math.inf
    if z_half <= a_ws:
        valid = False
        msg = (msg + "; " if msg else "") + "Z <= a: spheroid theory out of range"
    return GapEstimates(omega_p, omega_e_max, omega_par_min, valid, msg)


def crystal_extents(positions: np.ndarray):
    """(R, Z, a_ws) measured from a configuration: maximum cylindrical radius,
    maximum |z|, and the Wigner-Seitz radius of the mean ellipsoid density."""
    pos = np.asarray(positions, dtype=float)
    radius = float(np.max(np.hypot(pos[:, 0], pos[:, 1])))
    z_half = float(np.max(np.abs(pos[:, 2])))
    n = pos.shape[0]
    if radius == 0.0 or z_half == 0.0:
        return radius, z_half, math.nan
    volume = (4.0 / 3.0) * math.pi * radius**2 * z_half
    a_ws = (3.0 * volume / (4.0 * math.pi * n)) ** (1.0 / 3.0)
    return radius, z_half, a_ws


def record_to_samples(records: dict, n_ions: int, ion: IonSpecies,
                      reference_epot: float):
    """Convert raw run_lab records into TemperatureSample rows."""
    out = []
    for k in range(records["t"].shape[0]):
        t_pe = (2.0 / 3.0) * (records["epot_rot"][k] - reference_epot) / (n_ions * K_BOLTZMANN)
        t_par = ion.mass * records["ke_par_sum"][k] / (n_ions * K_BOLTZMANN)
        t_perp = ion.mass * records["ke_perp_sum"][k] / (2 * n_ions * K_BOLTZMANN)
        out.append(TemperatureSample(records["t"][k], t_pe, t_perp, t_par))
    return out
