"""Stochastic Doppler cooling: saturation profiles, scattering, recoil kicks.

Photon scattering per ion, beam, and timestep is a Poisson process with mean
gamma_l * dt.  Each absorbed photon kicks the ion by hbar*k along the beam;
each emission recoils in an isotropic random direction.  All beams deliver
one aggregate velocity kick per ion per step, applied between integrator
steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .constants import HBAR
from .model import LAB, BeamConfig, IonSpecies, SystemState
from .rng import next_poisson, next_unit_vector, spawn_seed, stream_key


@dataclass(frozen=True)
class BeamSet:
    """The cooling geometry: any number of beams acting independently."""

    beams: tuple

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        if not all(isinstance(b, BeamConfig) for b in self.beams):
            raise TypeError("BeamSet takes BeamConfig instances")

    def __len__(self):
        return len(self.beams)

    def __iter__(self):
        return iter(self.beams)


AXIAL_SATURATION = 5e-3
PERP_SATURATION = 0.5
PERP_WAIST_Y = 20e-6 * math.sqrt(2.0)
PERP_WAIST_Z = 100e-6 * math.sqrt(2.0)
PERP_DETUNING = -2.0 * math.pi * 50e6
PERP_OFFSET = 8.2e-6


def default_beams(ion: IonSpecies,
                  perp_detuning: float = PERP_DETUNING,
                  perp_offset: float = PERP_OFFSET,
                  perp_saturation: float = PERP_SATURATION,
                  waist_y: float = PERP_WAIST_Y,
                  waist_z: float = PERP_WAIST_Z,
                  axial_saturation: float = AXIAL_SATURATION,
                  axial_detuning: float | None = None,
                  include_perp: bool = True,
                  include_axial: bool = True) -> BeamSet:
    """Two counterpropagating uniform axial beams plus one offset Gaussian
    perpendicular beam along +x.  Axial detuning defaults to -gamma_0/2."""
    if axial_detuning is None:
        axial_detuning = -0.5 * ion.natural_linewidth
    beams = []
    if include_axial:
        beams.append(BeamConfig((0.0, 0.0, 1.0), axial_detuning, axial_saturation))
        beams.append(BeamConfig((0.0, 0.0, -1.0), axial_detuning, axial_saturation))
    if include_perp:
        beams.append(BeamConfig((1.0, 0.0, 0.0), perp_detuning, perp_saturation,
                                waist_y=waist_y, waist_z=waist_z, offset=perp_offset))
    return BeamSet(tuple(beams))


def saturation(x, beam: BeamConfig):
    """Saturation parameter at position(s) x: S0 times the Gaussian envelope."""
    pos = np.atleast_2d(np.asarray(x, dtype=float))
    s = np.full(pos.shape[0], beam.peak_saturation)
    if math.isfinite(beam.waist_y):
        s = s * np.exp(-2.0 * (pos[:, 1] - beam.offset) ** 2 / beam.waist_y**2)
    if math.isfinite(beam.waist_z):
        s = s * np.exp(-2.0 * pos[:, 2] ** 2 / beam.waist_z**2)
    return s if np.ndim(x) == 2 else float(s[0])


def scattering_rate(x, v, beam: BeamConfig, ion: IonSpecies):
    """Photon scattering rate (1/s): Lorentzian in the Doppler-shifted detuning,
    power-broadened by the local saturation."""
    pos = np.atleast_2d(np.asarray(x, dtype=float))
    vel = np.atleast_2d(np.asarray(v, dtype=float))
    s = np.atleast_1d(saturation(pos, beam))
    g0 = ion.natural_linewidth
    half2 = (0.5 * g0) ** 2
    k_vec = ion.wavenumber * np.asarray(beam.k_direction)
    det = beam.detuning - vel @ k_vec
    rate = s * g0 * half2 / (half2 * (1.0 + 2.0 * s) + det**2)
    return rate if np.ndim(x) == 2 else float(rate[0])


@njit(cache=True)
def _poisson_count(seed, a, b, c, mean):
    st = stream_key(seed, a, b, c)
    st, k = next_poisson(st, mean)
    return k


def sample_photon_count(rate: float, dt: float, rng: np.random.Generator) -> int:
    """One Poisson draw with mean rate*dt from the simulation's sampler."""
    if rate < 0 or not math.isfinite(rate * dt):
        raise ValueError("rate*dt must be finite and non-negative")
    return int(_poisson_count(spawn_seed(rng), 0, 0, 0, rate * dt))


@njit(cache=True)
def _poisson_batch_keyed(seed, mean, out):
    for i in range(out.shape[0]):
        st = stream_key(seed, i, 0, 0)
        st, k = next_poisson(st, mean)
        out[i] = k


def sample_photon_counts(rate: float, dt: float, n: int, seed: int) -> np.ndarray:
    """n independent Poisson draws with mean rate*dt (for statistical tests)."""
    out = np.empty(n, dtype=np.int64)
    _poisson_batch_keyed(np.uint64(seed), rate * dt, out)
    return out


def pack_beams(beams: BeamSet, ion: IonSpecies):
    """Flatten a BeamSet into the arrays the jitted kick kernel consumes."""
    nb = len(beams)
    kx = np.empty(nb)
    ky = np.empty(nb)
    kz = np.empty(nb)
    det = np.empty(nb)
    s0 = np.empty(nb)
    iwy2 = np.empty(nb)
    iwz2 = np.empty(nb)
    off = np.empty(nb)
    for i, b in enumerate(beams):
        kx[i], ky[i], kz[i] = b.k_direction
        det[i] = b.detuning
        s0[i] = b.peak_saturation
        iwy2[i] = 0.0 if math.isinf(b.waist_y) else 1.0 / b.waist_y**2
        iwz2[i] = 0.0 if math.isinf(b.waist_z) else 1.0 / b.waist_z**2
        off[i] = b.offset
    return kx, ky, kz, det, s0, iwy2, iwz2, off


@njit(cache=True)
def kick_ion(x, y, z, vx, vy, vz, seed, ion_idx, step,
             bkx, bky, bkz, bdet, bs0, biwy2, biwz2, boff,
             gamma0, kmag, recoil, dt):
    """Aggregate recoil velocity change for one ion over one timestep."""
    dvx = 0.0
    dvy = 0.0
    dvz = 0.0
    half2 = 0.25 * gamma0 * gamma0
    for l in range(bkx.shape[0]):
        s = bs0[l]
        if biwy2[l] > 0.0:
            dy = y - boff[l]
            s *= math.exp(-2.0 * dy * dy * biwy2[l])
        if biwz2[l] > 0.0:
            s *= math.exp(-2.0 * z * z * biwz2[l])
        if s <= 0.0:
            continue
        dop = bdet[l] - kmag * (bkx[l] * vx + bky[l] * vy + bkz[l] * vz)
        rate = s * gamma0 * half2 / (half2 * (1.0 + 2.0 * s) + dop * dop)
        st = stream_key(seed, ion_idx, step, l)
        st, nph = next_poisson(st, rate * dt)
        if nph > 0:
            dvx += nph * recoil * bkx[l]
            dvy += nph * recoil * bky[l]
            dvz += nph * recoil * bkz[l]
            for _ in range(nph):
                st, ux, uy, uz = next_unit_vector(st)
                dvx += recoil * ux
                dvy += recoil * uy
                dvz += recoil * uz
    return dvx, dvy, dvz


@njit(cache=True)
def _kick_all(px, py, pz, vx, vy, vz, seed, step,
              bkx, bky, bkz, bdet, bs0, biwy2, biwz2, boff,
              gamma0, kmag, recoil, dt):
    for i in range(px.shape[0]):
        dvx, dvy, dvz = kick_ion(px[i], py[i], pz[i], vx[i], vy[i], vz[i],
                                 seed, i, step,
                                 bkx, bky, bkz, bdet, bs0, biwy2, biwz2, boff,
                                 gamma0, kmag, recoil, dt)
        vx[i] += dvx
        vy[i] += dvy
        vz[i] += dvz


def cooling_kick(state: SystemState, beams: BeamSet, dt: float, ion: IonSpecies,
                 seed: int, step: int = 0) -> SystemState:
    """Apply one step's worth of photon recoil to every ion (lab frame)."""
    state.require_frame(LAB)
    out = state.copy()
    if len(beams) == 0:
        return out
    px, py, pz = (np.ascontiguousarray(out.positions[:, i]) for i in range(3))
    vx, vy, vz = (np.ascontiguousarray(out.velocities[:, i]) for i in range(3))
    packed = pack_beams(beams, ion)
    recoil = HBAR * ion.wavenumber / ion.mass
    _kick_all(px, py, pz, vx, vy, vz, np.uint64(seed), step, *packed,
              ion.natural_linewidth, ion.wavenumber, recoil, dt)
    out.velocities = np.column_stack((vx, vy, vz))
    return out
