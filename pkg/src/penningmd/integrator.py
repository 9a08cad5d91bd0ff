"""Symplectic time stepping.

Lab frame: the cyclotronic step splits each timestep into a half electric
kick, an exact helical drift under B alone (velocity rotated about z by
-omega_c*dt with the analytically integrated position update), and a second
half kick.  Rotating frame: velocity Verlet for the electrostatic dynamics
with optional linear drag and per-step noise forces (damping relaxation and
the Langevin thermostat), where the effective magnetic field is dropped.

Timestamps are always computed as t_origin + step*dt from the global step
index, never accumulated, so a checkpointed run resumes bit-exactly.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .constants import COULOMB_K, HBAR
from .cooling import BeamSet, kick_ion, pack_beams
from .forces import ForceField, SingularConfigurationError, coulomb_soa, rotating_spring_constants
from .model import LAB, ROTATING, IonSpecies, SystemState, TrapConfig, derived_quantities
from .rng import next_gaussian_pair, stream_key
from .treecode import _build, _mac_scale, _moments, _traverse


@njit(cache=True)
def _eval_forces(px, py, pz, t, mw2, delta, omega_r, kq2,
                 use_tree, theta, order, leaf, fx, fy, fz):
    """Coulomb plus lab-frame trap/wall forces at time t.

    Returns (coulomb potential, ok).
    """
    n = px.shape[0]
    if use_tree and n > leaf:
        cap = 1 + 8 * (2 * n // leaf + 128)
        cx = np.empty(cap)
        cy = np.empty(cap)
        cz = np.empty(cap)
        half = np.empty(cap)
        start = np.empty(cap, np.int64)
        count = np.empty(cap, np.int64)
        child0 = np.empty(cap, np.int64)
        depth = np.empty(cap, np.int64)
        perm = np.empty(n, np.int64)
        n_nodes = _build(px, py, pz, leaf, cx, cy, cz, half, start, count,
                         child0, depth, perm)
        if n_nodes <= 0:
            return 0.0, False
        ctr = np.empty((n_nodes, 3))
        s6 = np.empty((n_nodes, 6))
        t10 = np.empty((n_nodes, 10))
        bmax = np.empty(n_nodes)
        _moments(px, py, pz, perm, n_nodes, start, count, ctr, s6, t10, bmax)
        psi = np.empty(n)
        ok = _traverse(px, py, pz, perm, n_nodes, start, count, child0,
                       ctr, s6, t10, bmax, theta, order, fx, fy, fz, psi)
        if not ok:
            return 0.0, False
        pot = 0.0
        for i in range(n):
            fx[i] *= kq2
            fy[i] *= kq2
            fz[i] *= kq2
            pot += psi[i]
        pot *= 0.5 * kq2
    else:
        pot, ok = coulomb_soa(px, py, pz, kq2, fx, fy, fz)
        if not ok:
            return 0.0, False
    c2 = math.cos(2.0 * omega_r * t)
    s2 = math.sin(2.0 * omega_r * t)
    for i in range(n):
        x = px[i]
        y = py[i]
        fx[i] += mw2 * (0.5 * x - delta * (x * c2 - y * s2))
        fy[i] += mw2 * (0.5 * y + delta * (y * c2 + x * s2))
        fz[i] -= mw2 * pz[i]
    return pot, True


@njit(cache=True)
def _run_lab(px, py, pz, vx, vy, vz,
             t_origin, step0, n_steps, dt,
             m, mw2, delta, omega_r, omega_c, kq2, kx_rot, ky_rot, kz_rot,
             use_tree, theta, order, leaf,
             cooling_on, seed,
             bkx, bky, bkz, bdet, bs0, biwy2, biwz2, boff, gamma0, kmag, recoil,
             rec_every, rec_t, rec_epot, rec_etot, rec_kepar, rec_keperp,
             ring_every, ring_x, ring_z):
    """Cyclotronic stepping with optional interleaved cooling kicks.

    Records rotating-frame energy/temperature sums every rec_every global
    steps and rotating-frame (x, z) coordinates every ring_every steps into
    a circular window buffer.  Returns (samples written, ok).
    """
    n = px.shape[0]
    h2 = 0.5 * dt / m
    ang = omega_c * dt
    cc = math.cos(ang)
    sc = math.sin(ang)
    fx = np.empty(n)
    fy = np.empty(n)
    fz = np.empty(n)
    n_ring = ring_x.shape[0]

    t = t_origin + step0 * dt
    cpot, ok = _eval_forces(px, py, pz, t, mw2, delta, omega_r, kq2,
                            use_tree, theta, order, leaf, fx, fy, fz)
    if not ok:
        return 0, False

    n_samples = 0
    if step0 == 0 and rec_every > 0:
        theta_r = omega_r * t
        cr = math.cos(theta_r)
        sr = math.sin(theta_r)
        epot = cpot
        ke = 0.0
        kepar = 0.0
        keperp = 0.0
        for i in range(n):
            xr = cr * px[i] - sr * py[i]
            yr = sr * px[i] + cr * py[i]
            vxr = cr * vx[i] - sr * vy[i] - omega_r * yr
            vyr = sr * vx[i] + cr * vy[i] + omega_r * xr
            epot += 0.5 * (kx_rot * xr * xr + ky_rot * yr * yr + kz_rot * pz[i] * pz[i])
            ke += vxr * vxr + vyr * vyr + vz[i] * vz[i]
            kepar += vz[i] * vz[i]
            keperp += vxr * vxr + vyr * vyr
        rec_t[0] = t
        rec_epot[0] = epot
        rec_etot[0] = epot + 0.5 * m * ke
        rec_kepar[0] = kepar
        rec_keperp[0] = keperp
        n_samples = 1

    for k in range(n_steps):
        g = step0 + k
        for i in range(n):
            vx[i] += h2 * fx[i]
            vy[i] += h2 * fy[i]
            vz[i] += h2 * fz[i]
        for i in range(n):
            ux = vx[i]
            uy = vy[i]
            px[i] += (sc * ux + (1.0 - cc) * uy) / omega_c
            py[i] += (-(1.0 - cc) * ux + sc * uy) / omega_c
            pz[i] += vz[i] * dt
            vx[i] = cc * ux + sc * uy
            vy[i] = -sc * ux + cc * uy
        t = t_origin + (g + 1) * dt
        cpot, ok = _eval_forces(px, py, pz, t, mw2, delta, omega_r, kq2,
                                use_tree, theta, order, leaf, fx, fy, fz)
        if not ok:
            return n_samples, False
        for i in range(n):
            vx[i] += h2 * fx[i]
            vy[i] += h2 * fy[i]
            vz[i] += h2 * fz[i]
        if cooling_on:
            for i in range(n):
                dvx, dvy, dvz = kick_ion(px[i], py[i], pz[i], vx[i], vy[i], vz[i],
                                         seed, i, g,
                                         bkx, bky, bkz, bdet, bs0, biwy2, biwz2,
                                         boff, gamma0, kmag, recoil, dt)
                vx[i] += dvx
                vy[i] += dvy
                vz[i] += dvz
        gp = g + 1
        need_rec = rec_every > 0 and gp % rec_every == 0
        need_ring = ring_every > 0 and gp % ring_every == 0
        if need_rec or need_ring:
            theta_r = omega_r * t
            cr = math.cos(theta_r)
            sr = math.sin(theta_r)
            if need_ring:
                slot = (gp // ring_every - 1) % n_ring
            else:
                slot = 0
            epot = cpot
            ke = 0.0
            kepar = 0.0
            keperp = 0.0
            for i in range(n):
                xr = cr * px[i] - sr * py[i]
                yr = sr * px[i] + cr * py[i]
                vxr = cr * vx[i] - sr * vy[i] - omega_r * yr
                vyr = sr * vx[i] + cr * vy[i] + omega_r * xr
                epot += 0.5 * (kx_rot * xr * xr + ky_rot * yr * yr
                               + kz_rot * pz[i] * pz[i])
                ke += vxr * vxr + vyr * vyr + vz[i] * vz[i]
                kepar += vz[i] * vz[i]
                keperp += vxr * vxr + vyr * vyr
                if need_ring:
                    ring_x[slot, i] = xr
                    ring_z[slot, i] = pz[i]
            if need_rec:
                rec_t[n_samples] = t
                rec_epot[n_samples] = epot
                rec_etot[n_samples] = epot + 0.5 * m * ke
                rec_kepar[n_samples] = kepar
                rec_keperp[n_samples] = keperp
                n_samples += 1
    return n_samples, True


@njit(cache=True)
def _rot_forces(px, py, pz, kx, ky, kz, kq2, fx, fy, fz):
    if kq2 == 0.0:  # uncharged test particles: no pair interaction
        pot = 0.0
        for i in range(px.shape[0]):
            fx[i] = 0.0
            fy[i] = 0.0
            fz[i] = 0.0
    else:
        pot, ok = coulomb_soa(px, py, pz, kq2, fx, fy, fz)
        if not ok:
            return 0.0, False
    for i in range(px.shape[0]):
        fx[i] -= kx * px[i]
        fy[i] -= ky * py[i]
        fz[i] -= kz * pz[i]
    return pot, True


@njit(cache=True)
def _run_rotating(px, py, pz, vx, vy, vz,
                  step0, n_steps, dt, m,
                  kx, ky, kz, kq2,
                  vel_scale, gamma, noise_sigma, seed,
                  force_tol, check_every,
                  rec_every, rec_epot, rec_ke):
    """Velocity Verlet for m x'' = F - gamma v + noise, with optional per-step
    velocity rescaling (numerical damping) and early exit on max |F| < tol.

    Returns (steps done, max |F| at exit, samples, ok).
    """
    n = px.shape[0]
    fx = np.empty(n)
    fy = np.empty(n)
    fz = np.empty(n)
    ex = np.empty(n)
    ey = np.empty(n)
    ez = np.empty(n)
    noisy = noise_sigma > 0.0
    h2 = 0.5 * dt / m
    denom = 1.0 + 0.5 * gamma * dt / m

    cpot, ok = _rot_forces(px, py, pz, kx, ky, kz, kq2, fx, fy, fz)
    if not ok:
        return 0, 0.0, 0, False
    n_samples = 0
    steps_done = 0
    for k in range(n_steps):
        g = step0 + k
        if noisy:
            for i in range(n):
                st = stream_key(seed, i, g, 7)
                st, g1, g2 = next_gaussian_pair(st)
                st, g3, g4 = next_gaussian_pair(st)
                ex[i] = noise_sigma * g1
                ey[i] = noise_sigma * g2
                ez[i] = noise_sigma * g3
        else:
            for i in range(n):
                ex[i] = 0.0
                ey[i] = 0.0
                ez[i] = 0.0
        for i in range(n):
            ax = fx[i] + ex[i] - gamma * vx[i]
            ay = fy[i] + ey[i] - gamma * vy[i]
            az = fz[i] + ez[i] - gamma * vz[i]
            vx[i] += h2 * ax
            vy[i] += h2 * ay
            vz[i] += h2 * az
            px[i] += dt * vx[i]
            py[i] += dt * vy[i]
            pz[i] += dt * vz[i]
        cpot, ok = _rot_forces(px, py, pz, kx, ky, kz, kq2, fx, fy, fz)
        if not ok:
            return steps_done, 0.0, n_samples, False
        for i in range(n):
            vx[i] = (vx[i] + h2 * (fx[i] + ex[i])) / denom
            vy[i] = (vy[i] + h2 * (fy[i] + ey[i])) / denom
            vz[i] = (vz[i] + h2 * (fz[i] + ez[i])) / denom
        if vel_scale != 1.0:
            for i in range(n):
                vx[i] *= vel_scale
                vy[i] *= vel_scale
                vz[i] *= vel_scale
        steps_done = k + 1
        if rec_every > 0 and (g + 1) % rec_every == 0:
            epot = cpot
            ke = 0.0
            for i in range(n):
                epot += 0.5 * (kx * px[i] * px[i] + ky * py[i] * py[i]
                               + kz * pz[i] * pz[i])
                ke += vx[i] * vx[i] + vy[i] * vy[i] + vz[i] * vz[i]
            rec_epot[n_samples] = epot
            rec_ke[n_samples] = 0.5 * m * ke
            n_samples += 1
        if force_tol > 0.0 and (k + 1) % check_every == 0:
            fmax2 = 0.0
            for i in range(n):
                f2 = fx[i] * fx[i] + fy[i] * fy[i] + fz[i] * fz[i]
                if f2 > fmax2:
                    fmax2 = f2
            if math.sqrt(fmax2) < force_tol:
                return steps_done, math.sqrt(fmax2), n_samples, True
    fmax2 = 0.0
    for i in range(n):
        f2 = fx[i] * fx[i] + fy[i] * fy[i] + fz[i] * fz[i]
        if f2 > fmax2:
            fmax2 = f2
    return steps_done, math.sqrt(fmax2), n_samples, True


def _soa(state: SystemState):
    p = state.positions
    v = state.velocities
    return (np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
            np.ascontiguousarray(p[:, 2]), np.ascontiguousarray(v[:, 0]),
            np.ascontiguousarray(v[:, 1]), np.ascontiguousarray(v[:, 2]))


def _from_soa(px, py, pz, vx, vy, vz, time, frame):
    return SystemState(np.column_stack((px, py, pz)),
                       np.column_stack((vx, vy, vz)), time, frame)


_EMPTY_BEAMS = (np.empty(0), np.empty(0), np.empty(0), np.empty(0),
                np.empty(0), np.empty(0), np.empty(0), np.empty(0))


def run_lab(state: SystemState, field: ForceField, dt: float, n_steps: int,
            beams: BeamSet | None = None, seed: int = 0, step0: int = 0,
            t_origin: float | None = None, rec_every: int = 0,
            ring_every: int = 0, ring_slots: int = 0, ring_buffers=None):
    """Drive the cyclotronic loop; returns (final state, records dict).

    The records dict carries raw sums (see keys); temperature conversion
    lives in diagnostics.  With rec_every=0 nothing is recorded.  Passing
    ring_buffers=(ring_x, ring_z) reuses caller-owned window storage so a
    run split into chunks fills the same circular buffer.
    """
    state.require_frame(LAB)
    trap, ion = field.trap, field.ion
    d = derived_quantities(trap, ion)
    kx, ky, kz = rotating_spring_constants(trap, ion)
    px, py, pz, vx, vy, vz = _soa(state)
    if t_origin is None:
        t_origin = state.time - step0 * dt
    max_samples = (1 if step0 == 0 else 0) + n_steps // max(rec_every, 1) + 1
    rec_t = np.zeros(max_samples)
    rec_epot = np.zeros(max_samples)
    rec_etot = np.zeros(max_samples)
    rec_kepar = np.zeros(max_samples)
    rec_keperp = np.zeros(max_samples)
    if ring_buffers is not None:
        ring_x, ring_z = ring_buffers
    else:
        nring = max(ring_slots, 1)
        ring_x = np.zeros((nring, state.n_ions))
        ring_z = np.zeros((nring, state.n_ions))
    if beams is not None and len(beams) > 0:
        packed = pack_beams(beams, ion)
        cooling_on = True
    else:
        packed = _EMPTY_BEAMS
        cooling_on = False
    recoil = HBAR * ion.wavenumber / ion.mass
    n_samples, ok = _run_lab(
        px, py, pz, vx, vy, vz,
        t_origin, step0, n_steps, dt,
        ion.mass, ion.mass * trap.omega_z**2, trap.wall_delta, trap.omega_r,
        d.omega_c, COULOMB_K * ion.charge**2, kx, ky, kz,
        field.coulomb_method == "tree",
        field.tree_theta * _mac_scale(field.tree_order), field.tree_order,
        field.leaf_capacity,
        cooling_on, np.uint64(seed), *packed,
        ion.natural_linewidth, ion.wavenumber, recoil,
        rec_every, rec_t, rec_epot, rec_etot, rec_kepar, rec_keperp,
        ring_every, ring_x, ring_z)
    if not ok:
        raise SingularConfigurationError("singular configuration during run")
    final = _from_soa(px, py, pz, vx, vy, vz,
                      t_origin + (step0 + n_steps) * dt, LAB)
    records = {
        "t": rec_t[:n_samples],
        "epot_rot": rec_epot[:n_samples],
        "etot_rot": rec_etot[:n_samples],
        "ke_par_sum": rec_kepar[:n_samples],
        "ke_perp_sum": rec_keperp[:n_samples],
        "ring_x": ring_x,
        "ring_z": ring_z,
        "ring_every": ring_every,
    }
    return final, records


def cyclotronic_step(state: SystemState, field: ForceField, dt: float) -> SystemState:
    """One second-order cyclotronic step (half kick, helical drift, half kick)."""
    state.require_frame(LAB)
    out, _ = run_lab(state, field, dt, 1)
    return out


def verlet_step(state: SystemState, force_fn, dt: float, drag: float = 0.0,
                noise: np.ndarray | None = None) -> SystemState:
    """One velocity-Verlet step of m x'' = F - drag*v + noise (rotating frame).

    force_fn(positions, t) -> (N, 3) conservative forces; noise is an (N, 3)
    force held constant across the step.  Plain Verlet when drag and noise
    vanish.  This is the pure reference path; the jitted loops follow the
    same update.
    """
    state.require_frame(ROTATING)
    m = getattr(force_fn, "mass", None)
    if m is None:
        raise TypeError("force_fn must carry a 'mass' attribute (kg)")
    x = state.positions.copy()
    v = state.velocities.copy()
    eta = np.zeros_like(x) if noise is None else np.asarray(noise, dtype=float)
    f0 = force_fn(x, state.time)
    a0 = (f0 + eta - drag * v) / m
    v_half = v + 0.5 * dt * a0
    x_new = x + dt * v_half
    f1 = force_fn(x_new, state.time + dt)
    v_new = (v_half + 0.5 * dt * (f1 + eta) / m) / (1.0 + 0.5 * drag * dt / m)
    return SystemState(x_new, v_new, state.time + dt, ROTATING)


def run_rotating(state: SystemState, trap: TrapConfig, ion: IonSpecies,
                 dt: float, n_steps: int, vel_scale: float = 1.0,
                 gamma: float = 0.0, noise_sigma: float = 0.0, seed: int = 0,
                 step0: int = 0, force_tol: float = 0.0, check_every: int = 200,
                 rec_every: int = 0):
    """Drive the rotating-frame Verlet loop (damping / Langevin / plain)."""
    state.require_frame(ROTATING)
    px, py, pz, vx, vy, vz = _soa(state)
    kx, ky, kz = rotating_spring_constants(trap, ion)
    max_samples = n_steps // max(rec_every, 1) + 1
    rec_epot = np.zeros(max_samples)
    rec_ke = np.zeros(max_samples)
    steps, fmax, n_samples, ok = _run_rotating(
        px, py, pz, vx, vy, vz, step0, n_steps, dt, ion.mass,
        kx, ky, kz, COULOMB_K * ion.charge**2,
        vel_scale, gamma, noise_sigma, np.uint64(seed),
        force_tol, check_every, rec_every, rec_epot, rec_ke)
    if not ok:
        raise SingularConfigurationError("singular configuration during run")
    final = _from_soa(px, py, pz, vx, vy, vz, state.time + steps * dt, ROTATING)
    records = {"epot": rec_epot[:n_samples], "ke": rec_ke[:n_samples]}
    return final, steps, fmax, records
