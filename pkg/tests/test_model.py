import math

import numpy as np
import pytest

from penningmd import (FrameError, IonSpecies, SystemState, TrapConfig,
                       check_timestep, derived_quantities, lab_to_rotating,
                       rotating_to_lab)
from conftest import base_trap


def test_cyclotron_frequency_matches_nist_values(ion):
    d = derived_quantities(base_trap(176e3), ion)
    assert d.omega_c / (2 * math.pi) == pytest.approx(7.60e6, rel=2e-3)
    assert d.omega_c / ion.natural_linewidth == pytest.approx(0.42, abs=0.01)


def test_vortex_frequency_vanishes_at_brillouin(ion):
    omega_c = ion.charge * 4.4588 / ion.mass
    trap = TrapConfig(4.4588, 2 * math.pi * 1.59e6, 0.0, omega_c / 2)
    assert derived_quantities(trap, ion).omega_v == 0.0


def test_beta_value_near_planar_transition(ion):
    # evaluating the confinement ratio at 176 kHz lands just below the
    # 178.15 kHz transition value
    beta = derived_quantities(base_trap(176e3), ion).beta
    assert beta == pytest.approx(0.017, abs=5e-4)
    assert beta < derived_quantities(base_trap(178.15e3), ion).beta


def test_beta_monotone_in_rotation_frequency(ion):
    omega_c = derived_quantities(base_trap(200e3), ion).omega_c
    freqs = np.linspace(0.02, 0.98, 25) * omega_c / 2
    betas = [derived_quantities(
        TrapConfig(4.4588, 2 * math.pi * 1.59e6, 0.0, f), ion).beta
        for f in freqs]
    assert all(b2 > b1 for b1, b2 in zip(betas, betas[1:]))


def test_derived_quantities_deterministic(ion):
    t = base_trap(300e3)
    assert derived_quantities(t, ion) == derived_quantities(t, ion)


def test_k_z_definition(ion):
    t = base_trap(200e3)
    assert t.k_z(ion) == pytest.approx(ion.mass * t.omega_z**2 / ion.charge)


def test_ion_validation():
    with pytest.raises(ValueError):
        IonSpecies(mass=-1.0, charge=1.6e-19, transition_wavelength=3e-7,
                   natural_linewidth=1e8)
    with pytest.raises(ValueError):
        IonSpecies(mass=1e-26, charge=1.6e-19, transition_wavelength=3e-7,
                   natural_linewidth=0.0)


def test_state_validation():
    with pytest.raises(ValueError):
        SystemState(np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        SystemState(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        SystemState(np.zeros((1, 3)), np.zeros((1, 3)), frame="galactic")
    st = SystemState(np.zeros((1, 3)), np.zeros((1, 3)), frame="lab")
    with pytest.raises(FrameError):
        st.require_frame("rotating")


def test_frame_round_trip(ion, rng):
    trap = base_trap(330e3)
    st = SystemState(rng.normal(0, 2e-5, (7, 3)), rng.normal(0, 3.0, (7, 3)),
                     time=1.7e-5, frame="lab")
    back = rotating_to_lab(lab_to_rotating(st, trap), trap)
    np.testing.assert_allclose(back.positions, st.positions, rtol=1e-12)
    np.testing.assert_allclose(back.velocities, st.velocities, rtol=1e-12, atol=1e-18)


def test_rigid_corotation_maps_to_rest(ion, rng):
    # a crystal locked to the wall has velocity -omega_r z x r in the lab
    trap = base_trap(330e3)
    t = 3.3e-6
    import penningmd.model as model
    rot = model.rotation_matrix(-trap.omega_r * t)
    x0 = rng.normal(0, 2e-5, (5, 3))
    x_lab = x0 @ rot.T
    v_lab = -trap.omega_r * np.cross([0, 0, 1.0], x_lab)
    st = SystemState(x_lab, v_lab, time=t, frame="lab")
    r = lab_to_rotating(st, trap)
    np.testing.assert_allclose(r.positions, x0, atol=1e-18)
    np.testing.assert_allclose(r.velocities, 0.0, atol=1e-9)


def test_timestep_warning(ion):
    trap = base_trap(200e3)
    with pytest.warns(RuntimeWarning):
        check_timestep(5e-9, trap, ion)
    assert check_timestep(1e-9, trap, ion) < 0.1
