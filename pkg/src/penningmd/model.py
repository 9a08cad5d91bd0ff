"""Configuration types and the evolving system state.

Everything downstream works in SI units and lab/rotating Cartesian frames.
The rotating frame co-rotates with the wall potential, whose minimum moves
clockwise (at -omega_r about +z) for a positive ion in B = +B z.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import ELEMENTARY_CHARGE

LAB = "lab"
ROTATING = "rotating"

_FRAMES = (LAB, ROTATING)


class FrameError(ValueError):
    """Operation received a state in the wrong frame."""


@dataclass(frozen=True)
class IonSpecies:
    """A single ion species: mass, charge, and its cooling transition."""

    mass: float                   # kg
    charge: float                 # C
    transition_wavelength: float  # m
    natural_linewidth: float      # rad/s, gamma_0 of the cycling transition

    def __post_init__(self):
        if self.mass <= 0 or self.charge <= 0:
            raise ValueError("ion mass and charge must be positive")
        if self.transition_wavelength <= 0 or self.natural_linewidth <= 0:
            raise ValueError("transition wavelength and linewidth must be positive")

    @property
    def wavenumber(self) -> float:
        """Photon wavenumber |k| = 2 pi / lambda."""
        return 2.0 * math.pi / self.transition_wavelength

    def cyclotron_frequency(self, b_field: float) -> float:
        return self.charge * b_field / self.mass


# 9Be+ with the 2s -> 2p cycling transition used for Doppler cooling.
BERYLLIUM_9 = IonSpecies(
    mass=1.4965e-26,
    charge=ELEMENTARY_CHARGE,
    transition_wavelength=313.13e-9,
    natural_linewidth=2.0 * math.pi * 18e6,
)


@dataclass(frozen=True)
class TrapConfig:
    """Static trap environment: axial potential, magnetic field, rotating wall."""

    b_field: float     # T, along +z
    omega_z: float     # rad/s, axial center-of-mass frequency
    wall_delta: float  # dimensionless rotating-wall strength
    omega_r: float     # rad/s, rotating-wall rotation frequency

    def __post_init__(self):
        if self.b_field <= 0 or self.omega_z <= 0:
            raise ValueError("b_field and omega_z must be positive")
        if self.omega_r <= 0:
            raise ValueError("omega_r must be positive")
        if self.wall_delta < 0:
            raise ValueError("wall_delta must be non-negative")

    def k_z(self, ion: IonSpecies) -> float:
        """Quadrupole strength k_z = m omega_z^2 / q (V/m^2)."""
        return ion.mass * self.omega_z**2 / ion.charge


@dataclass(frozen=True)
class BeamConfig:
    """One cooling beam.

    The Gaussian envelope is defined on the lab (y, z) coordinates with the
    offset applied along y, matching a beam propagating along +x.  Uniform
    beams use infinite waists, which makes the envelope identically 1.
    """

    k_direction: tuple     # unit 3-vector
    detuning: float        # rad/s, from atomic resonance
    peak_saturation: float
    waist_y: float = math.inf  # m
    waist_z: float = math.inf  # m
    offset: float = 0.0        # m, beam displacement along +y

    def __post_init__(self):
        k = np.asarray(self.k_direction, dtype=float)
        norm = float(np.linalg.norm(k))
        if not math.isclose(norm, 1.0, rel_tol=1e-9):
            raise ValueError("k_direction must be a unit vector")
        if self.peak_saturation < 0:
            raise ValueError("peak_saturation must be non-negative")
        if self.waist_y <= 0 or self.waist_z <= 0:
            raise ValueError("waists must be positive (or infinite)")
        object.__setattr__(self, "k_direction", tuple(float(c) for c in k))


@dataclass(frozen=True)
class SimConfig:
    """Time stepping and solver choices for a dynamics run."""

    dt: float                    # s
    n_steps: int
    rng_seed: int = 0
    coulomb_method: str = "direct"   # "direct" | "tree"
    tree_theta: float = 0.3
    tree_order: int = 2
    snapshot_interval: int = 1000    # steps between recorded samples

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.coulomb_method not in ("direct", "tree"):
            raise ValueError(f"unknown coulomb_method {self.coulomb_method!r}")
        if not 0 < self.tree_theta <= 1:
            raise ValueError("tree_theta must be in (0, 1]")
        if self.tree_order < 0:
            raise ValueError("tree_order must be >= 0")
        if self.snapshot_interval <= 0:
            raise ValueError("snapshot_interval must be positive")


def check_timestep(dt: float, trap: TrapConfig, ion: IonSpecies) -> float:
    """Return omega_c * dt, warning when it exceeds the stability guideline."""
    x = ion.cyclotron_frequency(trap.b_field) * dt
    if x > 0.1:
        warnings.warn(
            f"omega_c*dt = {x:.3f} > 0.1; energy conservation degrades and the "
            "integrator becomes unstable near omega_c*dt ~ 0.24",
            RuntimeWarning,
            stacklevel=2,
        )
    return x


@dataclass
class SystemState:
    """N ion positions/velocities plus the simulation clock and frame tag."""

    positions: np.ndarray   # (N, 3) m
    velocities: np.ndarray  # (N, 3) m/s
    time: float = 0.0
    frame: str = LAB

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float)
        self.velocities = np.array(self.velocities, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have the same shape")
        if self.positions.shape[0] < 1:
            raise ValueError("need at least one ion")
        if self.frame not in _FRAMES:
            raise ValueError(f"frame must be one of {_FRAMES}")

    @property
    def n_ions(self) -> int:
        return self.positions.shape[0]

    def copy(self) -> "SystemState":
        return SystemState(self.positions.copy(), self.velocities.copy(),
                           self.time, self.frame)

    def require_frame(self, frame: str):
        if self.frame != frame:
            raise FrameError(f"expected a {frame}-frame state, got {self.frame}")


class DerivedQuantities(NamedTuple):
    omega_c: float  # rad/s, cyclotron frequency qB/m
    k_z: float      # V/m^2, trap quadrupole strength
    omega_v: float  # rad/s, vortex frequency omega_c - 2 omega_r
    beta: float     # radial/axial confinement ratio


def derived_quantities(trap: TrapConfig, ion: IonSpecies) -> DerivedQuantities:
    """Cyclotron frequency, trap strength, vortex frequency, and beta.

    beta = omega_r (omega_c - omega_r) / omega_z^2 - 1/2 measures the radial
    confinement of the co-rotating crystal relative to the axial one; beta > 0
    is required for radial trapping at wall_delta = 0.
    """
    omega_c = ion.cyclotron_frequency(trap.b_field)
    beta = trap.omega_r * (omega_c - trap.omega_r) / trap.omega_z**2 - 0.5
    return DerivedQuantities(
        omega_c=omega_c,
        k_z=trap.k_z(ion),
        omega_v=omega_c - 2.0 * trap.omega_r,
        beta=beta,
    )


def rotation_matrix(theta: float) -> np.ndarray:
    """In-plane rotation by theta about +z, acting on (N, 3) row vectors."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def lab_to_rotating(state: SystemState, trap: TrapConfig) -> SystemState:
    """Transform into the frame co-rotating with the wall.

    A crystal rigidly co-rotating with the wall (v_lab = -omega_r z x r) maps
    to zero rotating-frame velocity.
    """
    state.require_frame(LAB)
    theta = trap.omega_r * state.time
    rot = rotation_matrix(theta)
    x_r = state.positions @ rot.T
    v_r = state.velocities @ rot.T + trap.omega_r * np.cross([0.0, 0.0, 1.0], x_r)
    return SystemState(x_r, v_r, state.time, ROTATING)


def rotating_to_lab(state: SystemState, trap: TrapConfig) -> SystemState:
    """Inverse of :func:`lab_to_rotating`."""
    state.require_frame(ROTATING)
    theta = trap.omega_r * state.time
    rot = rotation_matrix(-theta)
    v_lab = (state.velocities
             - trap.omega_r * np.cross([0.0, 0.0, 1.0], state.positions)) @ rot.T
    return SystemState(state.positions @ rot.T, v_lab, state.time, LAB)
