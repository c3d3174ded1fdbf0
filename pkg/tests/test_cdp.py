import numpy as np
import pytest

from cimcs import cdp
from cimcs.coupling import RankDeficiencyError
from cimcs.problem import InstanceParams, synthesize


@pytest.fixture
def inst():
    return synthesize(InstanceParams(60, 0.5, 0.2, beta=0.05, seed=3))


def test_matches_support_least_squares(inst, rng):
    sigma = (rng.random(60) < 0.3).astype(np.int8)
    r = cdp.solve_signal(inst, sigma)
    idx = np.flatnonzero(sigma)
    ref = np.linalg.lstsq(inst.a_mat[:, idx], inst.y, rcond=None)[0]
    assert r[idx] == pytest.approx(ref, abs=1e-10)
    assert np.all(r[sigma == 0] == 0.0)
    assert np.max(np.abs(cdp.energy_gradient(inst, r, sigma))) < 1e-10


def test_solution_minimizes_energy_on_support(inst, rng):
    sigma = inst.xi_true
    r = cdp.solve_signal(inst, sigma)
    e0 = cdp.residual_energy(inst, r, sigma, 0.1)
    for _ in range(20):
        assert cdp.residual_energy(inst, r + 1e-3 * rng.standard_normal(60), sigma, 0.1) > e0


def test_empty_support(inst):
    assert np.all(cdp.solve_signal(inst, np.zeros(60)) == 0)


def test_rank_deficient_support(inst):
    sigma = np.ones(60, dtype=np.int8)
    with pytest.raises(RankDeficiencyError):
        cdp.solve_signal(inst, sigma)
    r = cdp.solve_signal(inst, sigma, fallback=True)
    assert inst.a_mat @ r == pytest.approx(inst.y, abs=1e-9)


def test_duplicate_column_is_rank_deficient(inst):
    from cimcs.coupling import DenseCoupling
    a = np.array(inst.a_mat)
    a[:, 1] = a[:, 0]
    cpl = DenseCoupling(a, inst.y)
    sigma = np.zeros(60)
    sigma[:2] = 1
    with pytest.raises(RankDeficiencyError):
        cdp.solve_signal(cpl, sigma)


def test_shape_check(inst):
    with pytest.raises(ValueError):
        cdp.solve_signal(inst, np.ones(5))
