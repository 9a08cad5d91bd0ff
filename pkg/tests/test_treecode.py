import numpy as np
import pytest

from penningmd import SingularConfigurationError, coulomb_direct, coulomb_tree


def cloud(n, seed=7, aspect=(60e-6, 60e-6, 40e-6)):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, (n, 3)) * np.array(aspect)


def test_degenerate_small_n_is_bit_identical(ion):
    pos = cloud(40, seed=3)
    fd, pd = coulomb_direct(pos, ion.charge)
    ft, pt = coulomb_tree(pos, ion.charge, leaf_capacity=64)
    assert np.array_equal(fd, ft)
    assert pd == pt


def test_accuracy_contract_at_default_settings(ion):
    pos = cloud(400, seed=11)
    fd, pd = coulomb_direct(pos, ion.charge)
    ft, pt = coulomb_tree(pos, ion.charge, theta=0.3, order=2)
    rel = np.linalg.norm(ft - fd, axis=1) / np.linalg.norm(fd, axis=1)
    assert rel.max() <= 1e-4
    assert abs(pt - pd) <= 1e-5 * abs(pd)


def test_error_monotone_in_theta(ion):
    pos = cloud(500, seed=5)
    fd, _ = coulomb_direct(pos, ion.charge)
    fmag = np.linalg.norm(fd, axis=1)
    errs = []
    for theta in (0.8, 0.5, 0.3):
        ft, _ = coulomb_tree(pos, ion.charge, theta=theta, order=2)
        errs.append((np.linalg.norm(ft - fd, axis=1) / fmag).max())
    assert errs[0] > errs[1] > errs[2]


def test_higher_order_helps_at_fixed_geometry(ion):
    # same geometric opening ratio: retaining the octupole must not hurt
    pos = cloud(500, seed=9)
    fd, _ = coulomb_direct(pos, ion.charge)
    fmag = np.linalg.norm(fd, axis=1)
    err = {}
    for order in (0, 2, 3):
        # order 2 and 3 rescale the MAC internally; compare 0 vs 2 at the
        # same delivered setting instead
        ft, _ = coulomb_tree(pos, ion.charge, theta=0.3, order=order)
        err[order] = (np.linalg.norm(ft - fd, axis=1) / fmag).max()
    assert err[2] < err[0]
    assert err[3] < err[0]


def test_momentum_conservation_within_contract(ion):
    pos = cloud(600, seed=13)
    ft, _ = coulomb_tree(pos, ion.charge, theta=0.3, order=2)
    fd, _ = coulomb_direct(pos, ion.charge)
    budget = 1e-4 * np.linalg.norm(fd, axis=1).max() * np.sqrt(pos.shape[0])
    assert np.abs(ft.sum(axis=0)).max() < budget
    assert np.abs(fd.sum(axis=0)).max() < 1e-12 * np.abs(fd).max()


def test_tree_detects_coincident_ions(ion):
    pos = cloud(200, seed=1)
    pos[137] = pos[12]
    with pytest.raises(SingularConfigurationError):
        coulomb_tree(pos, ion.charge, theta=0.3, order=2, leaf_capacity=8)


def test_parameter_validation(ion):
    pos = cloud(100)
    with pytest.raises(ValueError):
        coulomb_tree(pos, ion.charge, theta=0.0)
    with pytest.raises(ValueError):
        coulomb_tree(pos, ion.charge, theta=1.5)
    with pytest.raises(ValueError):
        coulomb_tree(pos, ion.charge, order=-1)
