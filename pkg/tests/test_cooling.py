import math

import numpy as np
import pytest

from penningmd import (BeamConfig, SystemState, cooling_kick, default_beams,
                       sample_photon_count, sample_photon_counts, saturation,
                       scattering_rate)
from penningmd.constants import HBAR


def perp_beam(ion, detuning=None, offset=8.2e-6):
    if detuning is None:
        detuning = -0.5 * ion.natural_linewidth
    return BeamConfig((1.0, 0.0, 0.0), detuning, 0.5,
                      waist_y=20e-6 * math.sqrt(2), waist_z=100e-6 * math.sqrt(2),
                      offset=offset)


def test_saturation_profile(ion):
    b = perp_beam(ion)
    assert saturation(np.array([0.0, b.offset, 0.0]), b) == pytest.approx(0.5)
    assert saturation(np.array([3e-5, b.offset + b.waist_y, 0.0]), b) \
        == pytest.approx(0.5 * math.exp(-2), rel=1e-12)
    axial = BeamConfig((0.0, 0.0, 1.0), -0.5 * ion.natural_linewidth, 5e-3)
    for x in ([0, 0, 0], [1e-4, -2e-4, 5e-5]):
        assert saturation(np.array(x, dtype=float), axial) == 5e-3


def test_scattering_rate_on_resonance(ion):
    # Doppler-compensated detuning: rate = S g0 / (1 + 2S) = g0/4 at S = 1/2
    b = perp_beam(ion, detuning=0.0)
    x = np.array([0.0, b.offset, 0.0])
    v = np.zeros(3)
    assert scattering_rate(x, v, b, ion) == pytest.approx(
        ion.natural_linewidth / 4.0, rel=1e-12)
    # moving ion whose Doppler shift cancels the detuning peaks the rate
    det = -0.5 * ion.natural_linewidth
    b2 = perp_beam(ion, detuning=det)
    v_res = det / ion.wavenumber  # k.v = det
    rates = [scattering_rate(x, np.array([v_res * f, 0, 0]), b2, ion)
             for f in (0.5, 0.9, 1.0, 1.1, 2.0)]
    assert np.argmax(rates) == 2


def test_scattering_rate_axial_half_detuned(ion):
    s = 5e-3
    beam = BeamConfig((0.0, 0.0, 1.0), -0.5 * ion.natural_linewidth, s)
    rate = scattering_rate(np.zeros(3), np.zeros(3), beam, ion)
    expected = s * ion.natural_linewidth / (2.0 + 2.0 * s)
    assert rate == pytest.approx(expected, rel=1e-12)
    assert rate == pytest.approx(2.81e5, rel=5e-3)


def test_zero_saturation_zero_rate(ion):
    beam = BeamConfig((0.0, 0.0, 1.0), -0.5 * ion.natural_linewidth, 0.0)
    assert scattering_rate(np.zeros(3), np.ones(3), beam, ion) == 0.0


def test_photon_count_zero_rate(rng):
    assert sample_photon_count(0.0, 1e-9, rng) == 0


def test_photon_count_statistics_small_mean():
    mean = 2.8e-4
    n = 10_000_000
    counts = sample_photon_counts(2.8e5, 1e-9, n, seed=42)
    sigma = math.sqrt(mean / n)
    assert counts.mean() == pytest.approx(mean, abs=3 * sigma)
    # Poisson: variance equals the mean
    var_sigma = math.sqrt(mean / n)  # leading order for small mean
    assert counts.var() == pytest.approx(mean, abs=3 * var_sigma)


def test_photon_count_statistics_large_mean():
    # exercises the rejection sampler branch
    mean = 300.0
    n = 200_000
    counts = sample_photon_counts(300.0, 1.0, n, seed=9)
    assert counts.mean() == pytest.approx(mean, abs=4 * math.sqrt(mean / n))
    assert counts.var() == pytest.approx(mean, rel=0.02)


def test_kick_noop_without_scattering(ion):
    beams = default_beams(ion, perp_saturation=0.0, axial_saturation=0.0)
    st = SystemState([[0.0, 0.0, 0.0]], [[1.0, -2.0, 3.0]], 0.0, "lab")
    out = cooling_kick(st, beams, 1e-9, ion, seed=5)
    np.testing.assert_array_equal(out.velocities, st.velocities)


def test_kick_determinism(ion):
    beams = default_beams(ion)
    st = SystemState([[0.0, 2e-6, 0.0]], [[0.5, 0.0, -0.3]], 0.0, "lab")
    # dt long enough that several photons scatter every step
    dt = 2e-6
    a = cooling_kick(st, beams, dt, ion, seed=7, step=3)
    b = cooling_kick(st, beams, dt, ion, seed=7, step=3)
    c = cooling_kick(st, beams, dt, ion, seed=8, step=3)
    np.testing.assert_array_equal(a.velocities, b.velocities)
    assert not np.array_equal(a.velocities, c.velocities)


def _accumulate_kicks(ion, beams, steps, dt=1e-9, seed=101):
    """Sum of velocity kicks for a stationary ion re-pinned each step."""
    st = SystemState([[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]], 0.0, "lab")
    total = np.zeros(3)
    for step in range(steps):
        out = cooling_kick(st, beams, dt, ion, seed=seed, step=step)
        total += out.velocities[0]
    return total


def test_mean_kick_along_single_beam(ion):
    # absorption kicks average to +z at hbar k / m per scatter; emission is
    # isotropic and averages out
    s = 0.2
    det = -0.5 * ion.natural_linewidth
    beam = BeamConfig((0.0, 0.0, 1.0), det, s)
    from penningmd import BeamSet
    beams = BeamSet((beam,))
    dt = 1e-9
    rate = scattering_rate(np.zeros(3), np.zeros(3), beam, ion)
    steps = 400_000
    total = _accumulate_kicks(ion, beams, steps, dt=dt)
    recoil = HBAR * ion.wavenumber / ion.mass
    n_exp = rate * dt * steps
    # absorption mean: n_exp * recoil in z; emission adds sqrt(2 n) recoil noise
    sigma = recoil * math.sqrt(2.0 * n_exp)
    assert total[2] == pytest.approx(n_exp * recoil, abs=4 * sigma)
    assert abs(total[0]) < 4 * sigma
    assert abs(total[1]) < 4 * sigma


def test_counterpropagating_beams_cancel_on_average(ion):
    beams = default_beams(ion, include_perp=False)
    steps = 400_000
    total = _accumulate_kicks(ion, beams, steps, seed=77)
    rate = scattering_rate(np.zeros(3), np.zeros(3), beams.beams[0], ion)
    recoil = HBAR * ion.wavenumber / ion.mass
    n_exp = rate * 1e-9 * steps
    sigma = recoil * math.sqrt(2.0 * 2.0 * n_exp)
    assert abs(total[2]) < 4 * sigma
