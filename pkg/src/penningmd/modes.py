"""Normal modes of the rotating-frame dynamics about an equilibrium.

Coordinates are blocked: index (a, i) -> a*N + i with a = 0, 1, 2 for x, y, z.
The linearized equations are d/dt (dx, v) = [[0, 1], [-K/m, -2W/m]] (dx, v),
with K the Hessian of the rotating-frame potential (real symmetric) and W
the per-ion vortex block (m Omega_v / 2) [z x] (real antisymmetric).  Stable
spectra come in +/- i omega pairs; modes are reported with omega > 0,
position parts normalized to unit norm, and velocity parts satisfying
u_v = -i omega u_r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .constants import COULOMB_K
from .forces import rotating_spring_constants
from .model import ROTATING, IonSpecies, SystemState, TrapConfig, derived_quantities

EXB = "ExB"
AXIAL = "axial"
CYCLOTRON = "cyclotron"


@njit(cache=True)
def _hessian(pos, kx, ky, kz, kq2, hess):
    n = pos.shape[0]
    for i in range(n):
        hess[i, i] += kx
        hess[n + i, n + i] += ky
        hess[2 * n + i, 2 * n + i] += kz
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            r = math.sqrt(r2)
            inv3 = kq2 / (r2 * r)
            c5 = 3.0 * inv3 / r2
            bxx = c5 * dx * dx - inv3
            byy = c5 * dy * dy - inv3
            bzz = c5 * dz * dz - inv3
            bxy = c5 * dx * dy
            bxz = c5 * dx * dz
            byz = c5 * dy * dz
            # diagonal blocks accumulate +B, off-diagonal blocks are -B
            hess[i, i] += bxx
            hess[n + i, n + i] += byy
            hess[2 * n + i, 2 * n + i] += bzz
            hess[i, n + i] += bxy
            hess[n + i, i] += bxy
            hess[i, 2 * n + i] += bxz
            hess[2 * n + i, i] += bxz
            hess[n + i, 2 * n + i] += byz
            hess[2 * n + i, n + i] += byz
            hess[j, j] += bxx
            hess[n + j, n + j] += byy
            hess[2 * n + j, 2 * n + j] += bzz
            hess[j, n + j] += bxy
            hess[n + j, j] += bxy
            hess[j, 2 * n + j] += bxz
            hess[2 * n + j, j] += bxz
            hess[n + j, 2 * n + j] += byz
            hess[2 * n + j, n + j] += byz
            hess[i, j] -= bxx
            hess[j, i] -= bxx
            hess[n + i, n + j] -= byy
            hess[n + j, n + i] -= byy
            hess[2 * n + i, 2 * n + j] -= bzz
            hess[2 * n + j, 2 * n + i] -= bzz
            hess[i, n + j] -= bxy
            hess[n + j, i] -= bxy
            hess[n + i, j] -= bxy
            hess[j, n + i] -= bxy
            hess[i, 2 * n + j] -= bxz
            hess[2 * n + j, i] -= bxz
            hess[2 * n + i, j] -= bxz
            hess[j, 2 * n + i] -= bxz
            hess[n + i, 2 * n + j] -= byz
            hess[2 * n + j, n + i] -= byz
            hess[2 * n + i, n + j] -= byz
            hess[n + j, 2 * n + i] -= byz


@dataclass
class Linearization:
    stiffness: np.ndarray    # (3N, 3N) symmetric, J/m^2
    lorentz: np.ndarray      # (3N, 3N) antisymmetric, kg/s
    equilibrium: np.ndarray  # (N, 3)
    stable: bool
    min_stiffness_eigenvalue: float
    zero_pairs: int = 0      # symmetry zero modes (rotation when delta = 0)

    @property
    def n_ions(self) -> int:
        return self.equilibrium.shape[0]


def build_linearization(equilibrium: np.ndarray, trap: TrapConfig,
                        ion: IonSpecies) -> Linearization:
    """Analytic K (trap + wall + Coulomb second derivatives) and vortex W."""
    pos = np.ascontiguousarray(equilibrium, dtype=float)
    n = pos.shape[0]
    kx, ky, kz = rotating_spring_constants(trap, ion)
    hess = np.zeros((3 * n, 3 * n))
    _hessian(pos, kx, ky, kz, COULOMB_K * ion.charge**2, hess)
    hess = 0.5 * (hess + hess.T)

    d = derived_quantities(trap, ion)
    c = 0.5 * ion.mass * d.omega_v
    w = np.zeros((3 * n, 3 * n))
    idx = np.arange(n)
    w[idx, n + idx] = -c
    w[n + idx, idx] = c

    # with no wall the crystal orientation is free: one rotational zero pair
    # whenever any ion sits off the z axis
    off_axis = float(np.max(np.hypot(pos[:, 0], pos[:, 1]))) > 1e-12
    zero_pairs = 1 if (trap.wall_delta == 0.0 and off_axis) else 0

    eigvals = np.linalg.eigvalsh(hess)
    scale = float(np.max(np.abs(eigvals)))
    min_eig = float(eigvals[0])
    # symmetry zeros may sit slightly negative (finite equilibrium residual);
    # instability is judged on the spectrum beyond them
    if zero_pairs:
        stable = (eigvals[zero_pairs] > -1e-8 * scale
                  and abs(min_eig) < 1e-5 * scale)
    else:
        stable = min_eig > -1e-8 * scale
    return Linearization(hess, w, pos, bool(stable), min_eig, zero_pairs)


@dataclass
class ModeSet:
    frequencies: np.ndarray       # (M,) rad/s ascending
    position_parts: np.ndarray    # (3N, M) complex, unit norm columns
    velocity_parts: np.ndarray    # (3N, M) complex, -i omega * position part
    axial_fractions: np.ndarray   # (M,)
    pe_ke_ratios: np.ndarray      # (M,)
    branches: np.ndarray          # (M,) str
    residuals: np.ndarray         # (M,) eigen residual, scaled units
    zero_mode_count: int          # count of |lambda| ~ 0 eigenvalues (pairs x2)
    n_ions: int
    _basis: np.ndarray = field(repr=False, default=None)       # (6N, 6N) eig basis
    _mode_columns: np.ndarray = field(repr=False, default=None)
    _mode_scale: np.ndarray = field(repr=False, default=None)
    _omega0: float = field(repr=False, default=1.0)

    def __len__(self):
        return self.frequencies.shape[0]


def axial_fraction(position_part: np.ndarray, n_ions: int) -> float:
    """<u_z|u_z> / <u_r|u_r> of a mode's position eigenvector."""
    u = np.asarray(position_part)
    total = float(np.vdot(u, u).real)
    if total == 0.0:
        raise ValueError("zero position norm")
    uz = u[2 * n_ions:3 * n_ions]
    return float(np.vdot(uz, uz).real) / total


def pe_ke_ratio(position_part: np.ndarray, velocity_part: np.ndarray,
                stiffness: np.ndarray, mass: float) -> float:
    """<u_r|K|u_r> / (m <u_v|u_v>): potential over kinetic energy in a mode."""
    vnorm = float(np.vdot(velocity_part, velocity_part).real)
    if vnorm == 0.0:
        return math.inf
    pe = float(np.vdot(position_part, stiffness @ position_part).real)
    return pe / (mass * vnorm)


def classify_branches(frequencies: np.ndarray, ratios: np.ndarray,
                      n_ions: int) -> np.ndarray:
    """ExB: the N largest-R modes; cyclotron: the N highest-frequency of the
    rest; axial: the remainder.  Missing zero modes shrink the ExB count."""
    m = frequencies.shape[0]
    n = n_ions
    labels = np.empty(m, dtype="<U9")
    n_exb = max(0, n - max(0, 3 * n - m))
    order_r = np.argsort(ratios)
    exb_idx = set(order_r[m - n_exb:].tolist()) if n_exb > 0 else set()
    rest = [i for i in range(m) if i not in exb_idx]
    rest_sorted = sorted(rest, key=lambda i: frequencies[i])
    n_cyc = min(n, len(rest_sorted))
    cyc_idx = set(rest_sorted[len(rest_sorted) - n_cyc:])
    for i in range(m):
        if i in exb_idx:
            labels[i] = EXB
        elif i in cyc_idx:
            labels[i] = CYCLOTRON
        else:
            labels[i] = AXIAL
    return labels


def solve_modes(lin: Linearization, ion: IonSpecies) -> ModeSet:
    """Eigen-decompose the 6N dynamics and keep the omega > 0 half-spectrum.

    Symmetry zero modes (counted at build time) are the lin.zero_pairs
    lowest-|omega| eigen-pairs; they are dropped from the mode list and
    reported via zero_mode_count.
    """
    if not lin.stable:
        raise ValueError("unstable equilibrium: stiffness matrix has a "
                         "negative eigenvalue beyond tolerance")
    n = lin.n_ions
    dim = 3 * n
    m_ion = ion.mass
    k_over_m = lin.stiffness / m_ion
    scale_w2 = float(np.max(np.abs(np.diag(k_over_m))))
    omega0 = math.sqrt(scale_w2) if scale_w2 > 0 else 1.0

    dmat = np.zeros((2 * dim, 2 * dim))
    dmat[:dim, dim:] = omega0 * np.eye(dim)
    dmat[dim:, :dim] = -k_over_m / omega0
    dmat[dim:, dim:] = -2.0 * lin.lorentz / m_ion

    eigvals, eigvecs = np.linalg.eig(dmat)
    half = [k for k in range(2 * dim) if eigvals[k].imag < 0]
    freqs = np.array([-eigvals[k].imag for k in half])
    order = np.argsort(freqs)
    # numerically a symmetry-zero pair may split along the real or the
    # imaginary axis; either way the retained count is 3N - zero_pairs
    drop = max(0, len(half) - (dim - lin.zero_pairs))
    retained = [half[k] for k in order[drop:]]
    freqs = freqs[order[drop:]]
    n_zero = 2 * lin.zero_pairs

    mcount = len(retained)
    u_r = np.empty((dim, mcount), dtype=complex)
    u_v = np.empty((dim, mcount), dtype=complex)
    residuals = np.empty(mcount)
    scales = np.empty(mcount, dtype=complex)
    for out_i, k in enumerate(retained):
        col = eigvecs[:, k]
        resid = np.linalg.norm(dmat @ col - eigvals[k] * col)
        top = col[:dim] / omega0
        norm = np.linalg.norm(top)
        phase_ref = top[np.argmax(np.abs(top))]
        phase = phase_ref / abs(phase_ref) if abs(phase_ref) > 0 else 1.0
        c = 1.0 / (norm * phase)
        u_r[:, out_i] = top * c
        u_v[:, out_i] = col[dim:] * c
        residuals[out_i] = resid / max(np.abs(eigvals[k]), 1e-12 * omega0)
        scales[out_i] = c
    f_z = np.array([axial_fraction(u_r[:, i], n) for i in range(mcount)])
    ratios = np.array([pe_ke_ratio(u_r[:, i], u_v[:, i], lin.stiffness, m_ion)
                       for i in range(mcount)])
    branches = classify_branches(freqs, ratios, n)
    return ModeSet(freqs, u_r, u_v, f_z, ratios, branches, residuals, n_zero, n,
                   _basis=eigvecs, _mode_columns=np.array(retained),
                   _mode_scale=scales, _omega0=omega0)


def project_amplitudes(state: SystemState, modes: ModeSet,
                       equilibrium: np.ndarray):
    """Complex amplitudes A_n of each retained mode in a rotating-frame state.

    Solves in the full (non-normal) eigenbasis, so the dual/left eigenvectors
    are used implicitly.  Returns (amplitudes, reconstruction_residual); the
    residual is the relative error of rebuilding the state from all 6N basis
    vectors and grows when the basis is near-defective.
    """
    state.require_frame(ROTATING)
    n = modes.n_ions
    dx = (state.positions - equilibrium)
    q = np.concatenate([
        modes._omega0 * dx[:, 0], modes._omega0 * dx[:, 1], modes._omega0 * dx[:, 2],
        state.velocities[:, 0], state.velocities[:, 1], state.velocities[:, 2]])
    coeffs = np.linalg.solve(modes._basis, q)
    recon = modes._basis @ coeffs
    scale = np.linalg.norm(q)
    residual = float(np.linalg.norm(recon - q) / scale) if scale > 0 else 0.0
    amps = coeffs[modes._mode_columns] / modes._mode_scale
    return amps, residual


def reconstruct_state(modes: ModeSet, amplitudes: np.ndarray,
                      equilibrium: np.ndarray, t: float = 0.0) -> SystemState:
    """Rebuild (positions, velocities) from mode amplitudes at time t."""
    phases = np.exp(-1j * modes.frequencies * t)
    dr = modes.position_parts @ (amplitudes * phases)
    dv = modes.velocity_parts @ (amplitudes * phases)
    n = modes.n_ions
    dx = 2.0 * np.column_stack([dr[:n].real, dr[n:2 * n].real, dr[2 * n:].real])
    vel = 2.0 * np.column_stack([dv[:n].real, dv[n:2 * n].real, dv[2 * n:].real])
    return SystemState(equilibrium + dx, vel, t, ROTATING)


def mode_energies(modes: ModeSet, amplitudes: np.ndarray,
                  lin: Linearization, ion: IonSpecies) -> np.ndarray:
    """Energy carried by each mode: 2 |A_n|^2 (pe_n + ke_n) for unit-norm modes."""
    out = np.empty(len(modes))
    for i in range(len(modes)):
        ur = modes.position_parts[:, i]
        uv = modes.velocity_parts[:, i]
        pe = float(np.vdot(ur, lin.stiffness @ ur).real)
        ke = ion.mass * float(np.vdot(uv, uv).real)
        out[i] = (abs(amplitudes[i]) ** 2) * (pe + ke)
    return out


def linearized_energy(state: SystemState, lin: Linearization,
                      ion: IonSpecies) -> float:
    """Quadratic energy (1/2) dx^T K dx + (1/2) m |v|^2 about the equilibrium."""
    n = lin.n_ions
    dx = (state.positions - lin.equilibrium)
    flat = np.concatenate([dx[:, 0], dx[:, 1], dx[:, 2]])
    pe = 0.5 * float(flat @ lin.stiffness @ flat)
    ke = 0.5 * ion.mass * float(np.sum(state.velocities**2))
    return pe + ke
