"""Initialize a crystal at a target temperature.

Velocities: Maxwell-Boltzmann.  Positions: Metropolis-Hastings sweeps about
the equilibrium (excites the potential-energy-dominated modes that velocity
initialization cannot reach), or, for large N, a rotating-frame Langevin
thermostat that excites kinetic and potential energy together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .constants import COULOMB_K, K_BOLTZMANN
from .forces import rotating_spring_constants
from .integrator import run_rotating
from .model import ROTATING, IonSpecies, SystemState, TrapConfig
from .rng import next_uniform, next_unit_vector, stream_key


@dataclass(frozen=True)
class ThermalizeConfig:
    target_temperature: float          # K
    mh_step: float = 0.5e-6            # m, max displacement per move
    mh_scans: int = 1000
    langevin_gamma: float | None = None  # kg/s; default sets m/gamma = 10 us
    langevin_steps: int = 100_000
    langevin_dt: float = 1e-9
    method: str = "mh"                 # "mh" | "langevin"

    def __post_init__(self):
        if self.target_temperature < 0:
            raise ValueError("target temperature must be >= 0")
        if self.mh_step <= 0:
            raise ValueError("mh_step must be positive")
        if self.method not in ("mh", "langevin"):
            raise ValueError(f"unknown thermalize method {self.method!r}")

    def gamma_for(self, ion: IonSpecies) -> float:
        if self.langevin_gamma is not None:
            return self.langevin_gamma
        return ion.mass / 10e-6


def sample_mb_velocities(n: int, temperature: float, ion: IonSpecies,
                         rng) -> np.ndarray:
    """(N, 3) velocities with each component ~ N(0, k_B T / m)."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    sigma = math.sqrt(K_BOLTZMANN * temperature / ion.mass)
    return rng.normal(0.0, sigma, size=(n, 3)) if sigma > 0 else np.zeros((n, 3))


@njit(cache=True)
def metropolis_accept(state, de, kt):
    """The acceptance rule: always take downhill moves; take uphill moves
    with probability exp(-dE / k_B T).  Returns (state, accepted)."""
    if de < 0.0:
        return state, True
    if kt <= 0.0:
        return state, False
    state, u = next_uniform(state)
    return state, u < math.exp(-de / kt)


@njit(cache=True)
def _mh_scans(pos, kx, ky, kz, kq2, kt, step_max, n_scans, seed):
    """Sequential Metropolis-Hastings sweeps; returns acceptance count.

    Each move displaces one ion in a uniform random direction by a distance
    uniform in (0, step_max); the energy change is evaluated incrementally
    in O(N).
    """
    n = pos.shape[0]
    accepted = 0
    for scan in range(n_scans):
        for i in range(n):
            st = stream_key(seed, i, scan, 11)
            st, ux, uy, uz = next_unit_vector(st)
            st, ur = next_uniform(st)
            r = ur * step_max
            xo = pos[i, 0]
            yo = pos[i, 1]
            zo = pos[i, 2]
            xn = xo + r * ux
            yn = yo + r * uy
            zn = zo + r * uz
            de = 0.5 * (kx * (xn * xn - xo * xo) + ky * (yn * yn - yo * yo)
                        + kz * (zn * zn - zo * zo))
            for j in range(n):
                if j == i:
                    continue
                dxo = xo - pos[j, 0]
                dyo = yo - pos[j, 1]
                dzo = zo - pos[j, 2]
                dxn = xn - pos[j, 0]
                dyn = yn - pos[j, 1]
                dzn = zn - pos[j, 2]
                ro = math.sqrt(dxo * dxo + dyo * dyo + dzo * dzo)
                rn = math.sqrt(dxn * dxn + dyn * dyn + dzn * dzn)
                de += kq2 * (1.0 / rn - 1.0 / ro)
            st, accept = metropolis_accept(st, de, kt)
            if accept:
                pos[i, 0] = xn
                pos[i, 1] = yn
                pos[i, 2] = zn
                accepted += 1
    return accepted


@njit(cache=True)
def _acceptance_trials(de_over_kt, n_trials, seed):
    """Empirical acceptance frequency of a fixed-dE uphill move."""
    hits = 0
    for k in range(n_trials):
        st = stream_key(seed, k, 0, 13)
        st, ok = metropolis_accept(st, de_over_kt, 1.0)
        if ok:
            hits += 1
    return hits


def acceptance_frequency(de_over_kt: float, n_trials: int, seed: int = 0) -> float:
    """Monte Carlo estimate of the acceptance probability at fixed dE/k_B T."""
    return _acceptance_trials(float(de_over_kt), int(n_trials),
                              np.uint64(seed)) / n_trials


def mh_position_init(equilibrium: np.ndarray, temperature: float,
                     cfg: ThermalizeConfig, trap: TrapConfig, ion: IonSpecies,
                     seed: int = 0):
    """Perturb an equilibrium so the potential energy samples temperature T.

    Returns (positions, acceptance_fraction).
    """
    pos = np.array(equilibrium, dtype=float)
    kx, ky, kz = rotating_spring_constants(trap, ion)
    accepted = _mh_scans(pos, kx, ky, kz, COULOMB_K * ion.charge**2,
                         K_BOLTZMANN * temperature, cfg.mh_step,
                         cfg.mh_scans, np.uint64(seed))
    return pos, accepted / (pos.shape[0] * max(cfg.mh_scans, 1))


def langevin_sigma(gamma: float, temperature: float, dt: float) -> float:
    """Per-component noise-force std dev: sqrt(2 gamma k_B T / dt)."""
    return math.sqrt(2.0 * gamma * K_BOLTZMANN * temperature / dt)


def langevin_thermalize(state: SystemState, temperature: float, gamma: float,
                        steps: int, trap: TrapConfig, ion: IonSpecies,
                        seed: int = 0, dt: float = 1e-9) -> SystemState:
    """Evolve m x'' = F - gamma x' + sqrt(2 gamma k_B T) xi in the rotating
    frame; with T = 0 this reduces to pure drag (damping dynamics)."""
    state.require_frame(ROTATING)
    sigma = langevin_sigma(gamma, temperature, dt)
    final, _, _, _ = run_rotating(state, trap, ion, dt, steps, gamma=gamma,
                                  noise_sigma=sigma, seed=seed)
    return final


def langevin_free_particles(n: int, temperature: float, gamma: float,
                            steps: int, ion: IonSpecies, seed: int = 0,
                            dt: float = 1e-9) -> np.ndarray:
    """Thermostat n non-interacting free particles (F = 0); returns final
    velocities.  Fluctuation-dissipation fixes their stationary variance at
    k_B T / m per component."""
    from .integrator import _run_rotating

    px = np.zeros(n)
    py = np.zeros(n)
    pz = np.zeros(n)
    vx = np.zeros(n)
    vy = np.zeros(n)
    vz = np.zeros(n)
    sigma = langevin_sigma(gamma, temperature, dt)
    rec = np.zeros(1)
    _run_rotating(px, py, pz, vx, vy, vz, 0, steps, dt, ion.mass,
                  0.0, 0.0, 0.0, 0.0, 1.0, gamma, sigma, np.uint64(seed),
                  0.0, steps + 1, 0, rec, rec.copy())
    return np.column_stack((vx, vy, vz))


def thermalize_state(equilibrium: np.ndarray, cfg: ThermalizeConfig,
                     trap: TrapConfig, ion: IonSpecies, seed: int = 0) -> SystemState:
    """Build a rotating-frame state at cfg.target_temperature from an
    equilibrium configuration, using the configured method."""
    n = equilibrium.shape[0]
    rng = np.random.default_rng(seed)
    if cfg.method == "mh":
        pos, _ = mh_position_init(equilibrium, cfg.target_temperature, cfg,
                                  trap, ion, seed=seed)
        vel = sample_mb_velocities(n, cfg.target_temperature, ion, rng)
        return SystemState(pos, vel, 0.0, ROTATING)
    start = SystemState(equilibrium, np.zeros((n, 3)), 0.0, ROTATING)
    out = langevin_thermalize(start, cfg.target_temperature,
                              cfg.gamma_for(ion), cfg.langevin_steps, trap,
                              ion, seed=seed, dt=cfg.langevin_dt)
    out.time = 0.0
    return out
