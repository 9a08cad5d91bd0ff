import math

import numpy as np
import pytest

from penningmd import (ForceField, FrameError, SystemState, TrapConfig,
                       coulomb_direct, cyclotronic_step,
                       rotating_spring_constants, run_lab, run_rotating,
                       verlet_step)
from conftest import base_trap


def drift_only_trap():
    # axial frequency so small the electric force is negligible over the run
    return TrapConfig(4.4588, 1e-3, 0.0, 1.0)


def test_pure_magnetic_drift_exact(ion):
    trap = drift_only_trap()
    field = ForceField(trap, ion)
    v0 = 5.0
    st = SystemState([[0.0, 0.0, 0.0]], [[v0, 0.0, 0.0]], 0.0, "lab")
    out, _ = run_lab(st, field, 1e-9, 20_000)
    speed = np.linalg.norm(out.velocities[0])
    assert speed == pytest.approx(v0, rel=1e-11)
    r_gyro = ion.mass * v0 / (ion.charge * trap.b_field)
    # positive ions gyrate clockwise: center sits at (0, -r_gyro)
    r = np.linalg.norm(out.positions[0, :2] - [0.0, -r_gyro])
    assert r == pytest.approx(r_gyro, rel=1e-11)


def test_axial_energy_no_secular_drift(ion):
    # pure axial oscillation, 1e6 steps at 1 ns
    trap = base_trap(220e3, delta=0.0)
    field = ForceField(trap, ion)
    st = SystemState([[0.0, 0.0, 2e-6]], [[0.0, 0.0, 0.0]], 0.0, "lab")
    out, rec = run_lab(st, field, 1e-9, 1_000_000, rec_every=10_000)
    e = rec["etot_rot"]
    drift = abs(e[-10:].mean() - e[:10].mean()) / abs(e).max()
    assert drift < 1e-9


def test_cyclotronic_second_order_convergence(ion):
    # dt -> dt/2 shrinks the trajectory error by ~4 against a fine reference
    trap = base_trap(220e3)
    field = ForceField(trap, ion)
    pos = np.array([[4e-6, 0.0, 1e-6], [-4e-6, 0.0, -1e-6]])
    vel = np.array([[0.0, 1.0, 0.5], [0.0, -1.0, -0.5]])
    horizon = 10e-6

    def run(dt):
        st = SystemState(pos, vel, 0.0, "lab")
        out, _ = run_lab(st, field, dt, int(round(horizon / dt)))
        return out.positions

    ref = run(0.01e-9)
    err1 = np.abs(run(1e-9) - ref).max()
    err2 = np.abs(run(0.5e-9) - ref).max()
    assert 3.0 < err1 / err2 < 5.0


def test_energy_conservation_small_crystal(ion):
    # all fields on, cooling off: conserved rotating-frame energy
    from penningmd import local_equilibrium, sample_mb_velocities
    from penningmd.model import rotating_to_lab
    trap = base_trap(220e3)
    eq = local_equilibrium(trap, ion, 20, seed=3, max_steps=100_000)
    vel = sample_mb_velocities(20, 5e-3, ion, np.random.default_rng(0))
    st = rotating_to_lab(SystemState(eq.positions, vel, 0.0, "rotating"), trap)
    out, rec = run_lab(st, ForceField(trap, ion), 1e-9, 20_000, rec_every=200)
    e = rec["etot_rot"]
    drift = abs(e[-5:].mean() - e[:5].mean()) / abs(e.mean())
    assert drift < 1e-7


def test_cyclotronic_step_matches_run_lab(ion):
    trap = base_trap(300e3)
    field = ForceField(trap, ion)
    st = SystemState([[2e-6, -1e-6, 0.5e-6], [-2e-6, 1e-6, -0.5e-6]],
                     np.full((2, 3), 0.3), 0.0, "lab")
    a = cyclotronic_step(st, field, 1e-9)
    b, _ = run_lab(st, field, 1e-9, 1)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.velocities, b.velocities)


def test_cyclotronic_requires_lab_frame(ion):
    field = ForceField(base_trap(300e3), ion)
    st = SystemState(np.zeros((1, 3)), np.zeros((1, 3)), 0.0, "rotating")
    with pytest.raises(FrameError):
        cyclotronic_step(st, field, 1e-9)


class SpringForce:
    """Isotropic spring for verlet reference tests."""

    def __init__(self, mass, k):
        self.mass = mass
        self.k = k

    def __call__(self, x, t):
        return -self.k * x


def test_verlet_exponential_damping(ion):
    fn = SpringForce(ion.mass, 0.0)
    gamma = ion.mass / 10e-6
    st = SystemState(np.zeros((1, 3)), [[1.0, 0.0, 0.0]], 0.0, "rotating")
    dt = 1e-9
    for _ in range(1000):
        st = verlet_step(st, fn, dt, drag=gamma)
    expected = math.exp(-gamma * 1000 * dt / ion.mass)
    assert st.velocities[0, 0] == pytest.approx(expected, rel=0.01)


def test_verlet_requires_rotating_frame(ion):
    fn = SpringForce(ion.mass, 1e-12)
    st = SystemState(np.zeros((1, 3)), np.zeros((1, 3)), 0.0, "lab")
    with pytest.raises(FrameError):
        verlet_step(st, fn, 1e-9)


def test_verlet_harmonic_energy_bounded(ion):
    # plain Verlet on the rotating-frame crystal potential, 1e6 steps
    trap = base_trap(400e3)
    st = SystemState([[3e-6, 0.0, 0.0]], np.zeros((1, 3)), 0.0, "rotating")
    out, steps, fmax, rec = run_rotating(st, trap, ion, 1e-9, 1_000_000,
                                         rec_every=10_000)
    e = rec["epot"] + rec["ke"]
    oscillation = (e.max() - e.min()) / abs(e).max()
    drift = abs(e[-10:].mean() - e[:10].mean()) / abs(e).max()
    assert oscillation < 1e-4
    assert drift < 5e-8  # well inside the bounded oscillation, no growth


def test_verlet_second_order_convergence(ion):
    # Richardson check against the analytic harmonic solution
    k = 1e-12
    omega = math.sqrt(k / ion.mass)
    fn = SpringForce(ion.mass, k)
    x0 = 1e-6
    # 1.3 periods so the endpoint is generic (not at a turning point)
    horizon = 1.3 * 2.0 * math.pi / omega

    def err(n):
        dt = horizon / n
        st = SystemState([[x0, 0.0, 0.0]], np.zeros((1, 3)), 0.0, "rotating")
        for _ in range(n):
            st = verlet_step(st, fn, dt)
        exact = x0 * math.cos(omega * horizon)
        return abs(st.positions[0, 0] - exact)

    e1 = err(65)
    e2 = err(130)
    assert 3.0 < e1 / e2 < 5.0


def test_run_rotating_matches_verlet_step_with_coulomb(ion):
    trap = base_trap(220e3)
    kx, ky, kz = rotating_spring_constants(trap, ion)

    class CrystalForce:
        mass = ion.mass

        def __call__(self, x, t):
            fc, _ = coulomb_direct(x, ion.charge)
            return fc - x * np.array([kx, ky, kz])

    st = SystemState([[5e-6, 0, 1e-6], [-5e-6, 1e-6, 0]], np.zeros((2, 3)),
                     0.0, "rotating")
    ref = st.copy()
    fn = CrystalForce()
    for _ in range(50):
        ref = verlet_step(ref, fn, 1e-9)
    fin, steps, _, _ = run_rotating(st, trap, ion, 1e-9, 50)
    np.testing.assert_allclose(fin.positions, ref.positions, rtol=0, atol=1e-18)
    np.testing.assert_allclose(fin.velocities, ref.velocities, rtol=0, atol=1e-12)


def test_tree_force_path_in_run_loop(ion):
    # the jitted loop's tree branch agrees with the direct branch within the
    # accuracy contract over a short trajectory (N above the leaf capacity)
    trap = base_trap(250e3)
    rng = np.random.default_rng(12)
    pos = rng.normal(0, 3e-5, (80, 3))
    vel = rng.normal(0, 1.0, (80, 3))
    st = SystemState(pos, vel, 0.0, "lab")
    direct, _ = run_lab(st, ForceField(trap, ion), 1e-9, 200)
    tree, _ = run_lab(st, ForceField(trap, ion, coulomb_method="tree",
                                     leaf_capacity=16), 1e-9, 200)
    scale = np.abs(direct.positions).max()
    assert np.abs(tree.positions - direct.positions).max() < 1e-6 * scale
    assert np.abs(tree.positions - direct.positions).max() > 0  # tree engaged


def test_run_restart_is_bit_exact(ion):
    # splitting a run at a step boundary reproduces the uninterrupted result
    from penningmd import default_beams
    trap = base_trap(250e3)
    field = ForceField(trap, ion)
    beams = default_beams(ion)
    rng = np.random.default_rng(4)
    st = SystemState(rng.normal(0, 5e-6, (4, 3)), rng.normal(0, 2, (4, 3)),
                     0.0, "lab")
    full, rec_full = run_lab(st, field, 1e-9, 4000, beams=beams, seed=11,
                             rec_every=500)
    half1, rec1 = run_lab(st, field, 1e-9, 2500, beams=beams, seed=11,
                          rec_every=500)
    half2, rec2 = run_lab(half1, field, 1e-9, 1500, beams=beams, seed=11,
                          step0=2500, t_origin=0.0, rec_every=500)
    np.testing.assert_array_equal(full.positions, half2.positions)
    np.testing.assert_array_equal(full.velocities, half2.velocities)
    np.testing.assert_array_equal(
        rec_full["epot_rot"], np.concatenate([rec1["epot_rot"], rec2["epot_rot"]]))
