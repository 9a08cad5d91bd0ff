import math

import numpy as np
import pytest

from penningmd import (K_BOLTZMANN, SystemState, TrapConfig, crystal_extents,
                       derived_quantities, dispersion_relation, doppler_limit,
                       gap_estimates, ke_temperatures, pe_temperature,
                       rms_displacement, sample_mb_velocities)
from penningmd.model import IonSpecies
from conftest import base_trap


def test_pe_temperature_zero_at_reference(ion):
    trap = base_trap(300e3)
    ref = np.array([[2e-6, 0.0, 0.0], [-2e-6, 0.0, 0.0]])
    st = SystemState(ref, np.zeros((2, 3)), 0.0, "rotating")
    assert pe_temperature(st, ref, trap, ion) == 0.0


def test_pe_temperature_axial_displacement(ion):
    # dz = 1 um at omega_z = 2 pi x 1.59 MHz: T = (2/3)(m w_z^2 dz^2/2)/k_B
    trap = base_trap(300e3)
    dz = 1e-6
    ref = np.zeros((1, 3))
    st = SystemState([[0.0, 0.0, dz]], np.zeros((1, 3)), 0.0, "rotating")
    t = pe_temperature(st, ref, trap, ion)
    expected = (2.0 / 3.0) * 0.5 * ion.mass * trap.omega_z**2 * dz**2 / K_BOLTZMANN
    assert t == pytest.approx(expected, rel=1e-12)
    assert t == pytest.approx(36e-3, rel=2e-3)


def test_pe_temperature_can_be_negative(ion):
    trap = base_trap(300e3)
    # reference displaced axially; the state sits lower
    ref = np.array([[0.0, 0.0, 1e-6]])
    st = SystemState(np.zeros((1, 3)), np.zeros((1, 3)), 0.0, "rotating")
    assert pe_temperature(st, ref, trap, ion) < 0.0


def test_pe_temperature_frame_invariance(ion, rng):
    # evaluating a co-rotated lab state at any time matches the rotating frame
    from penningmd.model import rotating_to_lab
    trap = base_trap(280e3)
    pos = rng.normal(0, 1.5e-5, (8, 3))
    ref = rng.normal(0, 1.5e-5, (8, 3))
    values = []
    for t in (0.0, 0.37e-6, 2.1e-6):
        st_rot = SystemState(pos, np.zeros((8, 3)), t, "rotating")
        values.append(pe_temperature(st_rot, ref, trap, ion))
        st_lab = rotating_to_lab(st_rot, trap)
        values.append(pe_temperature(st_lab, ref, trap, ion))
    assert np.ptp(values) < 1e-12 * abs(values[0]) + 1e-15


def test_ke_temperatures_wall_locked_crystal_reads_zero(ion, rng):
    trap = base_trap(350e3)
    x = rng.normal(0, 2e-5, (12, 3))
    v = -trap.omega_r * np.cross([0, 0, 1.0], x)
    st = SystemState(x, v, 0.0, "lab")
    t_perp, t_par = ke_temperatures(st, trap, ion)
    assert t_perp == pytest.approx(0.0, abs=1e-18)
    assert t_par == 0.0


def test_ke_temperatures_thermal_on_rigid_rotation(ion):
    trap = base_trap(350e3)
    n = 20_000
    rng = np.random.default_rng(8)
    x = rng.normal(0, 2e-5, (n, 3))
    t_set = 10e-3
    v_th = sample_mb_velocities(n, t_set, ion, rng)
    v = -trap.omega_r * np.cross([0, 0, 1.0], x) + v_th
    t_perp, t_par = ke_temperatures(SystemState(x, v, 0.0, "lab"), trap, ion)
    sigma = t_set * math.sqrt(2.0 / (2 * n))
    assert t_perp == pytest.approx(t_set, abs=4 * sigma)
    assert t_par == pytest.approx(t_set, abs=4 * t_set * math.sqrt(2.0 / n))


def test_ke_temperatures_pure_axial(ion):
    trap = base_trap(350e3)
    x = np.array([[1e-5, 0.0, 0.0]])
    v = -trap.omega_r * np.cross([0, 0, 1.0], x) + [[0.0, 0.0, 2.0]]
    t_perp, t_par = ke_temperatures(SystemState(x, v, 0.0, "lab"), trap, ion)
    assert t_perp == pytest.approx(0.0, abs=1e-18)
    assert t_par > 0


def test_ke_perp_quadratic_in_slip(ion, rng):
    # spinning the crystal at omega != omega_r reads as T_perp ~ (d_omega r)^2
    trap = base_trap(350e3)
    x = rng.normal(0, 2e-5, (500, 3))
    out = []
    for scale in (1.0, 2.0):
        d_omega = scale * 2 * math.pi * 1e3
        v = -(trap.omega_r + d_omega) * np.cross([0, 0, 1.0], x)
        t_perp, _ = ke_temperatures(SystemState(x, v, 0.0, "lab"), trap, ion)
        out.append(t_perp)
    assert out[1] / out[0] == pytest.approx(4.0, rel=1e-9)


def test_rms_displacement_stationary_and_sinusoid(ion):
    omega_r = 2 * math.pi * 200e3
    n_t = 400
    t = np.linspace(0, 40e-6, n_t, endpoint=False)
    amp = 3e-7
    window = np.zeros((n_t, 2, 3))
    window[:, 1, 0] = amp * np.sin(2 * math.pi * 1e6 * t[:, None])[:, 0]
    out = rms_displacement(window, "x", 40e-6, omega_r)
    assert out[0] == 0.0
    assert out[1] == pytest.approx(amp / math.sqrt(2), rel=0.01)
    with pytest.raises(ValueError):
        rms_displacement(window, "x", 1e-7, omega_r)


def test_gap_estimates_paper_values(ion):
    # omega_p/2pi ~ 2.40 MHz and omega_Emax/2pi ~ 0.42 MHz at 400 kHz
    trap = base_trap(400e3)
    d = derived_quantities(trap, ion)
    omega_p = math.sqrt(2 * trap.omega_r * (d.omega_c - trap.omega_r))
    g = gap_estimates(trap, ion, radius=60e-6, z_half=45e-6, a_ws=6e-6)
    assert g.omega_p == pytest.approx(omega_p)
    assert g.omega_p / (2 * math.pi) == pytest.approx(2.40e6, rel=2e-3)
    assert g.omega_e_max / (2 * math.pi) == pytest.approx(0.42e6, rel=0.01)
    assert g.omega_par_min == pytest.approx(2.0 * omega_p * 6e-6 / 45e-6)
    assert g.valid


def test_gap_estimates_brillouin_pole(ion):
    omega_c = ion.charge * 4.4588 / ion.mass
    trap = TrapConfig(4.4588, 2 * math.pi * 1.59e6, 0.0, omega_c / 2)
    g = gap_estimates(trap, ion, 40e-6, 60e-6, 5e-6)
    assert math.isinf(g.omega_e_max)
    assert not g.valid


def test_gap_estimates_thin_crystal_flagged(ion):
    trap = base_trap(400e3)
    g = gap_estimates(trap, ion, 60e-6, 2e-6, 6e-6)
    assert not g.valid
    assert "Z <= a" in g.message


def test_doppler_limit(ion):
    t = doppler_limit(ion)
    assert t == pytest.approx(0.43e-3, rel=5e-3)
    heavy = IonSpecies(ion.mass, ion.charge, ion.transition_wavelength,
                       2 * ion.natural_linewidth)
    assert doppler_limit(heavy) == pytest.approx(2 * t, rel=1e-12)
    narrow = IonSpecies(ion.mass, ion.charge, ion.transition_wavelength, 1e-12)
    assert doppler_limit(narrow) < 1e-14


def test_dispersion_relation_limits():
    omega_p = 2 * math.pi * 2.4e6
    assert dispersion_relation(1e5, 0.0, omega_p) == pytest.approx(omega_p)
    assert dispersion_relation(0.0, 1e5, omega_p) == 0.0
    assert dispersion_relation(1e5, 1e5, omega_p) == pytest.approx(
        omega_p / math.sqrt(2))
    with pytest.raises(ValueError):
        dispersion_relation(0.0, 0.0, omega_p)


def test_crystal_extents(ion):
    pos = np.array([[3e-5, 0, 1e-5], [-3e-5, 0, -1e-5], [0, 2e-5, 0.5e-5]])
    radius, z_half, a_ws = crystal_extents(pos)
    assert radius == pytest.approx(3e-5)
    assert z_half == pytest.approx(1e-5)
    expected_a = (3e-5**2 * 1e-5 / 3) ** (1 / 3)
    assert a_ws == pytest.approx(expected_a, rel=1e-12)
