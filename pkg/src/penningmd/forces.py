"""Trap, rotating-wall, and inter-ion Coulomb forces in both frames.

Lab frame: the ion sees the static quadrupole, the wall rotating at omega_r,
and the Coulomb field of the other ions (the magnetic force lives in the
integrator).  Rotating frame: the single-particle terms acquire the
centrifugal and magnetic corrections and become the time-independent
potential used for relaxation, thermalization, and mode analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .constants import COULOMB_K
from .model import LAB, ROTATING, IonSpecies, SystemState, TrapConfig, derived_quantities, lab_to_rotating


class SingularConfigurationError(ValueError):
    """Two ions occupy the same point; the Coulomb field is undefined."""


@njit(cache=True, fastmath=True)
def coulomb_soa(px, py, pz, kq2, fx, fy, fz):
    """Pairwise Coulomb forces and total potential, SoA layout.

    Symmetric accumulation: forces are exactly antisymmetric per pair.
    Returns (potential, ok); ok = False flags a zero pair distance.
    """
    n = px.shape[0]
    for i in range(n):
        fx[i] = 0.0
        fy[i] = 0.0
        fz[i] = 0.0
    pot = 0.0
    for i in range(n):
        xi = px[i]
        yi = py[i]
        zi = pz[i]
        gx = 0.0
        gy = 0.0
        gz = 0.0
        for j in range(i + 1, n):
            dx = xi - px[j]
            dy = yi - py[j]
            dz = zi - pz[j]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                return 0.0, False
            inv2 = 1.0 / r2
            inv = math.sqrt(inv2)
            s = kq2 * inv2 * inv
            ax = dx * s
            ay = dy * s
            az = dz * s
            gx += ax
            gy += ay
            gz += az
            fx[j] -= ax
            fy[j] -= ay
            fz[j] -= az
            pot += kq2 * inv
        fx[i] += gx
        fy[i] += gy
        fz[i] += gz
    return pot, True


def coulomb_direct(positions: np.ndarray, charge: float):
    """Exact pairwise Coulomb forces (N, 3) and total potential energy (J)."""
    pos = np.ascontiguousarray(positions, dtype=float)
    n = pos.shape[0]
    fx = np.empty(n)
    fy = np.empty(n)
    fz = np.empty(n)
    kq2 = COULOMB_K * charge * charge
    pot, ok = coulomb_soa(np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]),
                          np.ascontiguousarray(pos[:, 2]), kq2, fx, fy, fz)
    if not ok:
        raise SingularConfigurationError("singular configuration: coincident ions")
    return np.column_stack((fx, fy, fz)), pot


def rotating_spring_constants(trap: TrapConfig, ion: IonSpecies):
    """Single-particle spring constants (k_x, k_y, k_z) of the rotating-frame
    potential: k_x = m omega_z^2 (beta + delta), k_y = m omega_z^2 (beta - delta),
    k_z = m omega_z^2.  The wall confines along x_r and weakens y_r."""
    d = derived_quantities(trap, ion)
    mw2 = ion.mass * trap.omega_z**2
    return mw2 * (d.beta + trap.wall_delta), mw2 * (d.beta - trap.wall_delta), mw2


def trap_wall_force(x, t: float, frame: str, trap: TrapConfig, ion: IonSpecies):
    """Trap + rotating-wall force on each ion (no Coulomb, no magnetic force)."""
    pos = np.atleast_2d(np.asarray(x, dtype=float))
    mw2 = ion.mass * trap.omega_z**2
    out = np.empty_like(pos)
    if frame == LAB:
        c2 = math.cos(2.0 * trap.omega_r * t)
        s2 = math.sin(2.0 * trap.omega_r * t)
        d = trap.wall_delta
        out[:, 0] = mw2 * (0.5 * pos[:, 0] - d * (pos[:, 0] * c2 - pos[:, 1] * s2))
        out[:, 1] = mw2 * (0.5 * pos[:, 1] + d * (pos[:, 1] * c2 + pos[:, 0] * s2))
        out[:, 2] = -mw2 * pos[:, 2]
    elif frame == ROTATING:
        kx, ky, kz = rotating_spring_constants(trap, ion)
        out[:, 0] = -kx * pos[:, 0]
        out[:, 1] = -ky * pos[:, 1]
        out[:, 2] = -kz * pos[:, 2]
    else:
        raise ValueError(f"unknown frame {frame!r}")
    return out.reshape(np.shape(x))


def trap_wall_potential(x, t: float, frame: str, trap: TrapConfig, ion: IonSpecies) -> float:
    """Potential energy of the single-particle terms, summed over ions (J)."""
    pos = np.atleast_2d(np.asarray(x, dtype=float))
    mw2 = ion.mass * trap.omega_z**2
    xx = pos[:, 0]
    yy = pos[:, 1]
    zz = pos[:, 2]
    if frame == LAB:
        c2 = math.cos(2.0 * trap.omega_r * t)
        s2 = math.sin(2.0 * trap.omega_r * t)
        d = trap.wall_delta
        trap_term = 0.25 * mw2 * np.sum(2.0 * zz**2 - xx**2 - yy**2)
        wall_term = 0.5 * mw2 * d * np.sum((xx**2 - yy**2) * c2 - 2.0 * xx * yy * s2)
        return float(trap_term + wall_term)
    if frame == ROTATING:
        kx, ky, kz = rotating_spring_constants(trap, ion)
        return float(0.5 * np.sum(kx * xx**2 + ky * yy**2 + kz * zz**2))
    raise ValueError(f"unknown frame {frame!r}")


@dataclass(frozen=True)
class ForceField:
    """Bundles the trap, ion, and Coulomb solver choice behind one interface."""

    trap: TrapConfig
    ion: IonSpecies
    coulomb_method: str = "direct"  # "direct" | "tree"
    tree_theta: float = 0.3
    tree_order: int = 2
    leaf_capacity: int = 64

    def __post_init__(self):
        if self.coulomb_method not in ("direct", "tree"):
            raise ValueError(f"unknown coulomb_method {self.coulomb_method!r}")

    def coulomb(self, positions: np.ndarray):
        if self.coulomb_method == "tree" and positions.shape[0] > self.leaf_capacity:
            from .treecode import coulomb_tree
            return coulomb_tree(positions, self.ion.charge, self.tree_theta,
                                self.tree_order, self.leaf_capacity)
        return coulomb_direct(positions, self.ion.charge)

    def force_and_potential(self, positions: np.ndarray, t: float, frame: str):
        f_c, pot_c = self.coulomb(positions)
        f_t = trap_wall_force(positions, t, frame, self.trap, self.ion)
        pot_t = trap_wall_potential(positions, t, frame, self.trap, self.ion)
        return f_c + f_t, pot_c + pot_t

    def force(self, positions: np.ndarray, t: float, frame: str) -> np.ndarray:
        return self.force_and_potential(positions, t, frame)[0]

    def potential(self, positions: np.ndarray, t: float, frame: str) -> float:
        _, pot_c = self.coulomb(positions)
        return pot_c + trap_wall_potential(positions, t, frame, self.trap, self.ion)


def total_potential_energy(state: SystemState, trap: TrapConfig, ion: IonSpecies,
                           field: ForceField | None = None) -> float:
    """Total potential energy of a state in its own frame (J)."""
    if field is None:
        field = ForceField(trap, ion)
    return field.potential(state.positions, state.time, state.frame)


def rotating_frame_energy(state: SystemState, trap: TrapConfig, ion: IonSpecies,
                          field: ForceField | None = None) -> float:
    """Conserved energy: rotating-frame kinetic plus rotating-frame potential.

    For lab-frame dynamics with the wall on, this is the invariant
    H - omega_r L_z expressed in co-rotating coordinates; the magnetic and
    vortex forces do no work on it.
    """
    rot = state if state.frame == ROTATING else lab_to_rotating(state, trap)
    if field is None:
        field = ForceField(trap, ion)
    ke = 0.5 * ion.mass * float(np.sum(rot.velocities**2))
    return ke + field.potential(rot.positions, rot.time, ROTATING)
