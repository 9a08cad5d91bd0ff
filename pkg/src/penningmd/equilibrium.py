"""Minimum-energy crystal configurations in the rotating frame.

Pipeline: seed a random cloud inside the cold-fluid spheroid predicted by
the trap parameters, relax it dynamically by bleeding kinetic energy out of
rotating-frame Verlet steps, then (for modest N) polish with a quasi-Newton
minimizer of the rotating-frame potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import brentq, minimize

from .constants import COULOMB_K, EPSILON_0
from .forces import rotating_spring_constants
from .integrator import run_rotating
from .model import ROTATING, IonSpecies, SystemState, TrapConfig, derived_quantities


class ConfinementError(ValueError):
    """The rotating-frame potential does not confine (beta <= wall_delta)."""


@dataclass
class EquilibriumResult:
    positions: np.ndarray        # (N, 3), rotating frame
    residual_force_max: float    # N
    energy: float                # J, rotating-frame potential
    method: str
    converged: bool
    n_steps: int = 0


def check_confinement(trap: TrapConfig, ion: IonSpecies):
    d = derived_quantities(trap, ion)
    if d.beta <= trap.wall_delta:
        raise ConfinementError(
            f"no radial confinement: beta={d.beta:.4g} must exceed "
            f"wall_delta={trap.wall_delta:.4g}")
    return d


def axial_depolarization(gamma: float) -> float:
    """Depolarization factor a_z of a spheroid with aspect ratio gamma = Z/R."""
    if gamma <= 0:
        raise ValueError("aspect ratio must be positive")
    if abs(gamma - 1.0) < 1e-8:
        return 1.0 / 3.0
    if gamma < 1.0:  # oblate
        e = math.sqrt(1.0 - gamma * gamma)
        return (1.0 - gamma * math.asin(e) / e) / (e * e)
    e = math.sqrt(1.0 - 1.0 / (gamma * gamma))  # prolate
    return (1.0 - e * e) / e**3 * (math.atanh(e) - e)


def spheroid_aspect_ratio(beta: float) -> float:
    """Aspect ratio Z/R of the zero-temperature fluid spheroid.

    The uniform-density spheroid is self-consistent when its axial
    depolarization factor equals omega_z^2/omega_p^2 = 1/(1+2 beta); beta = 1
    gives a sphere, smaller beta an oblate crystal, larger a prolate one.
    """
    if beta <= 0:
        raise ValueError("beta must be positive for a confined spheroid")
    target = 1.0 / (1.0 + 2.0 * beta)
    log_gamma = brentq(lambda g: axial_depolarization(math.exp(g)) - target,
                       math.log(1e-5), math.log(1e5), xtol=1e-13)
    return math.exp(log_gamma)


def fluid_extents(trap: TrapConfig, ion: IonSpecies, n: int):
    """Cold-fluid predictions (R, Z, a_ws, n0) for an n-ion crystal."""
    d = check_confinement(trap, ion)
    omega_p2 = 2.0 * trap.omega_r * (d.omega_c - trap.omega_r)
    n0 = EPSILON_0 * ion.mass * omega_p2 / ion.charge**2
    a_ws = (3.0 / (4.0 * math.pi * n0)) ** (1.0 / 3.0)
    aspect = spheroid_aspect_ratio(d.beta)
    radius = (3.0 * n / (4.0 * math.pi * n0 * aspect)) ** (1.0 / 3.0)
    return radius, aspect * radius, a_ws, n0


def seed_cloud(n: int, trap: TrapConfig, ion: IonSpecies, rng) -> np.ndarray:
    """Uniform random positions inside the expected crystal ellipsoid.

    Deterministic for a given seed.  The axial semi-axis is floored at half
    the Wigner-Seitz radius so planar crystals still get a 3D starting cloud.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    radius, z_half, a_ws, _ = fluid_extents(trap, ion, n)
    z_half = max(z_half, 0.5 * a_ws)
    semi = np.array([radius, radius, z_half])
    out = np.empty((n, 3))
    have = 0
    while have < n:
        pts = rng.uniform(-1.0, 1.0, size=(2 * (n - have) + 8, 3))
        keep = pts[np.sum(pts**2, axis=1) <= 1.0]
        take = min(n - have, keep.shape[0])
        out[have:have + take] = keep[:take] * semi
        have += take
    return out


@njit(cache=True)
def _phi_r_grad(pos, kx, ky, kz, kq2, grad):
    """Rotating-frame potential and gradient; pos and grad are (N, 3)."""
    n = pos.shape[0]
    e = 0.0
    for i in range(n):
        x = pos[i, 0]
        y = pos[i, 1]
        z = pos[i, 2]
        e += 0.5 * (kx * x * x + ky * y * y + kz * z * z)
        grad[i, 0] = kx * x
        grad[i, 1] = ky * y
        grad[i, 2] = kz * z
    for i in range(n):
        xi = pos[i, 0]
        yi = pos[i, 1]
        zi = pos[i, 2]
        for j in range(i + 1, n):
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            inv = 1.0 / math.sqrt(r2)
            e += kq2 * inv
            s = kq2 * inv / r2
            grad[i, 0] -= s * dx
            grad[i, 1] -= s * dy
            grad[i, 2] -= s * dz
            grad[j, 0] += s * dx
            grad[j, 1] += s * dy
            grad[j, 2] += s * dz
    return e


def rotating_potential_and_gradient(positions: np.ndarray, trap: TrapConfig,
                                    ion: IonSpecies):
    """phi_r (J) and its gradient (N/m... J/m) at the given configuration."""
    pos = np.ascontiguousarray(positions, dtype=float)
    grad = np.empty_like(pos)
    kx, ky, kz = rotating_spring_constants(trap, ion)
    e = _phi_r_grad(pos, kx, ky, kz, COULOMB_K * ion.charge**2, grad)
    return e, grad


def damped_relax(positions: np.ndarray, trap: TrapConfig, ion: IonSpecies,
                 damping_fraction: float = 1e-4, dt: float = 1e-9,
                 max_steps: int = 300_000, force_tol: float = 1e-18,
                 check_every: int = 200) -> EquilibriumResult:
    """Relax toward a local minimum by scaling each ion's velocity by
    sqrt(1 - damping_fraction) after every rotating-frame Verlet step."""
    check_confinement(trap, ion)
    state = SystemState(positions, np.zeros_like(positions), 0.0, ROTATING)
    scale = math.sqrt(1.0 - damping_fraction)
    final, steps, fmax, _ = run_rotating(
        state, trap, ion, dt, max_steps, vel_scale=scale,
        force_tol=force_tol, check_every=check_every)
    energy, _ = rotating_potential_and_gradient(final.positions, trap, ion)
    return EquilibriumResult(final.positions, fmax, energy, "damping",
                             converged=fmax < force_tol, n_steps=steps)


def quasi_newton_refine(positions: np.ndarray, trap: TrapConfig, ion: IonSpecies,
                        grad_tol: float = 1e-23,
                        max_iter: int = 20_000) -> EquilibriumResult:
    """Polish a configuration with L-BFGS on the rotating-frame potential.

    Coordinates and energies are non-dimensionalized by the Wigner-Seitz
    scale so the optimizer sees O(1) numbers.
    """
    check_confinement(trap, ion)
    pos0 = np.ascontiguousarray(positions, dtype=float)
    n = pos0.shape[0]
    _, _, a_ws, _ = fluid_extents(trap, ion, n)
    length0 = a_ws
    energy0 = COULOMB_K * ion.charge**2 / length0
    kx, ky, kz = rotating_spring_constants(trap, ion)
    kq2_s = 1.0
    spring = np.array([kx, ky, kz]) * length0**2 / energy0

    grad_buf = np.empty_like(pos0)

    def objective(flat):
        pos = np.ascontiguousarray(flat.reshape(n, 3))
        e = _phi_r_grad(pos, spring[0], spring[1], spring[2], kq2_s, grad_buf)
        return e, grad_buf.ravel().copy()

    res = minimize(objective, (pos0 / length0).ravel(), jac=True,
                   method="L-BFGS-B",
                   options={"maxiter": max_iter, "maxfun": 10 * max_iter,
                            "gtol": grad_tol * length0 / energy0,
                            "ftol": 1e-14, "maxcor": 25})
    out = res.x.reshape(n, 3) * length0
    energy, grad = rotating_potential_and_gradient(out, trap, ion)
    fmax = float(np.max(np.linalg.norm(grad, axis=1)))
    in_energy, _ = rotating_potential_and_gradient(pos0, trap, ion)
    if energy > in_energy:
        out = pos0
        energy = in_energy
        _, grad = rotating_potential_and_gradient(out, trap, ion)
        fmax = float(np.max(np.linalg.norm(grad, axis=1)))
    return EquilibriumResult(out, fmax, energy, "quasi_newton",
                             converged=fmax < grad_tol or bool(res.success),
                             n_steps=int(res.nit))


def local_equilibrium(trap: TrapConfig, ion: IonSpecies, n: int, seed: int = 0,
                      damping_fraction: float = 1e-4, dt: float = 1e-9,
                      max_steps: int = 300_000, force_tol: float = 1e-18,
                      refine: bool | None = None,
                      grad_tol: float = 1e-23) -> EquilibriumResult:
    """seed_cloud -> damped_relax -> optional quasi_newton_refine."""
    cloud = seed_cloud(n, trap, ion, np.random.default_rng(seed))
    relaxed = damped_relax(cloud, trap, ion, damping_fraction, dt,
                           max_steps, force_tol)
    if refine is None:
        refine = n <= 2000
    if not refine:
        return relaxed
    polished = quasi_newton_refine(relaxed.positions, trap, ion, grad_tol)
    polished.method = "damping+refine"
    polished.n_steps += relaxed.n_steps
    return polished
