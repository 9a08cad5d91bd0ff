import math

import numpy as np
import pytest

from penningmd import (COULOMB_K, ConfinementError, SystemState,
                       damped_relax, fluid_extents, local_equilibrium,
                       quasi_newton_refine, rotating_spring_constants,
                       run_rotating, seed_cloud, spheroid_aspect_ratio)
from penningmd.equilibrium import axial_depolarization, rotating_potential_and_gradient
from conftest import base_trap


def test_aspect_ratio_limits():
    assert spheroid_aspect_ratio(1.0) == pytest.approx(1.0, abs=1e-6)
    assert spheroid_aspect_ratio(0.1) < 1.0   # weak radial spring: oblate
    assert spheroid_aspect_ratio(3.0) > 1.0   # strong radial spring: prolate
    assert axial_depolarization(1.0) == pytest.approx(1.0 / 3.0)


def test_seed_cloud_deterministic_and_inside(ion):
    trap = base_trap(400e3)
    a = seed_cloud(100, trap, ion, np.random.default_rng(9))
    b = seed_cloud(100, trap, ion, np.random.default_rng(9))
    assert np.array_equal(a, b)
    radius, z_half, _, _ = fluid_extents(trap, ion, 100)
    scaled = a / [radius, radius, max(z_half, 1e-12)]
    assert np.all(np.sum(scaled**2, axis=1) <= 1.0 + 1e-12)
    # all points pairwise distinct
    d = np.linalg.norm(a[:, None] - a[None, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 0.0


def test_seed_cloud_single_ion(ion):
    pt = seed_cloud(1, base_trap(400e3), ion, np.random.default_rng(0))
    assert pt.shape == (1, 3)


def test_single_ion_relaxes_to_origin(ion):
    trap = base_trap(400e3, delta=0.0)
    res = damped_relax(np.array([[3e-6, -2e-6, 1e-6]]), trap, ion,
                       force_tol=1e-20)
    assert res.converged
    assert res.residual_force_max < 1e-20
    # displacement consistent with the force tolerance over the spring
    kx, _, _ = rotating_spring_constants(trap, ion)
    assert np.linalg.norm(res.positions) < 1e-20 / kx * 1.5


def test_two_ion_separation_analytic(ion):
    # force balance q^2/(4 pi eps0 (2r)^2) = k_radial r at delta = 0
    trap = base_trap(400e3, delta=0.0)
    kx, _, _ = rotating_spring_constants(trap, ion)
    r = (COULOMB_K * ion.charge**2 / (4.0 * kx)) ** (1.0 / 3.0)
    start = np.array([[1e-6, 2e-6, 0.5e-6], [-2e-6, -1e-6, -0.5e-6]])
    relaxed = damped_relax(start, trap, ion)
    refined = quasi_newton_refine(relaxed.positions, trap, ion)
    sep = np.linalg.norm(refined.positions[0] - refined.positions[1])
    assert sep == pytest.approx(2.0 * r, rel=1e-5)
    assert abs(refined.positions[0, 2]) < 1e-9


def test_refine_lowers_energy(ion):
    trap = base_trap(220e3)
    cloud = seed_cloud(50, trap, ion, np.random.default_rng(2))
    relaxed = damped_relax(cloud, trap, ion, max_steps=40_000)
    refined = quasi_newton_refine(relaxed.positions, trap, ion)
    assert refined.energy <= relaxed.energy
    assert refined.residual_force_max < relaxed.residual_force_max


def test_refine_noop_at_minimum(ion):
    trap = base_trap(400e3, delta=0.0)
    kx, _, _ = rotating_spring_constants(trap, ion)
    r = (COULOMB_K * ion.charge**2 / (4.0 * kx)) ** (1.0 / 3.0)
    exact = np.array([[r, 0.0, 0.0], [-r, 0.0, 0.0]])
    res = quasi_newton_refine(exact, trap, ion)
    assert np.abs(res.positions - exact).max() < 1e-12


def test_energy_non_increasing_during_damping(ion):
    trap = base_trap(220e3)
    cloud = seed_cloud(40, trap, ion, np.random.default_rng(5))
    state = SystemState(cloud, np.zeros_like(cloud), 0.0, "rotating")
    scale = math.sqrt(1.0 - 1e-4)
    _, _, _, rec = run_rotating(state, trap, ion, 1e-9, 60_000,
                                vel_scale=scale, rec_every=500)
    e = rec["epot"] + rec["ke"]
    jumps = np.diff(e)
    assert e[-1] < e[0]
    # transient upticks stay bounded by a tiny fraction of the total decay
    assert jumps.max() < 0.01 * (e[0] - e[-1])


def test_independent_seeds_close_energies(ion):
    trap = base_trap(400e3)
    energies = []
    for seed in (1, 2):
        eq = local_equilibrium(trap, ion, 60, seed=seed, max_steps=120_000)
        energies.append(eq.energy)
    spread = abs(energies[0] - energies[1]) / abs(np.mean(energies))
    assert spread < 0.005


def test_unconfined_trap_raises(ion):
    # wall stronger than the radial confinement: beta < delta
    trap = base_trap(176e3, delta=0.05)  # beta ~ 0.017
    with pytest.raises(ConfinementError):
        damped_relax(np.zeros((2, 3)) + 1e-6, trap, ion)


def test_gradient_consistency(ion, rng):
    trap = base_trap(300e3)
    pos = rng.normal(0, 2e-5, (10, 3))
    e, grad = rotating_potential_and_gradient(pos, trap, ion)
    h = 1e-10
    for check in ((3, 0), (7, 2)):
        i, a = check
        up = pos.copy()
        up[i, a] += h
        dn = pos.copy()
        dn[i, a] -= h
        eu, _ = rotating_potential_and_gradient(up, trap, ion)
        ed, _ = rotating_potential_and_gradient(dn, trap, ion)
        assert grad[i, a] == pytest.approx((eu - ed) / (2 * h), rel=1e-5)
