import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from cimcs.metrics import direction_cosine, hamiltonian, ks_one_sided, rmse
from cimcs.problem import InstanceParams, synthesize

from oracles import brute_force_energy


def test_rmse_basic():
    assert rmse([1, 2], [1, 0], [1, 2], [1, 1]) == pytest.approx(np.sqrt(2.0))
    assert rmse([3.0], [1], [3.0], [1]) == 0.0
    with pytest.raises(ValueError):
        rmse([1], [1, 0], [1], [1])


def test_direction_cosine_cases():
    assert direction_cosine([0, 0], [0, 0]) == 1.0
    assert direction_cosine([1, 0], [0, 0]) == 0.0
    assert direction_cosine([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.5)


@given(st.lists(st.booleans(), min_size=1, max_size=40), st.lists(st.booleans(), min_size=1, max_size=40))
def test_direction_cosine_bounds(a, b):
    k = min(len(a), len(b))
    v = direction_cosine(a[:k], b[:k])
    assert 0.0 <= v <= 1.0
    assert direction_cosine(a[:k], a[:k]) == 1.0


def test_hamiltonian_matches_brute_force(rng):
    inst = synthesize(InstanceParams(n=30, alpha=0.6, a=0.3, seed=5))
    sigma = rng.integers(0, 2, 30)
    r = rng.standard_normal(30)
    assert hamiltonian(inst, r, sigma, 0.01) == pytest.approx(
        brute_force_energy(inst.a_mat, inst.y, r, sigma, 0.01), abs=1e-12)


@pytest.mark.parametrize("shift", [0.0, 0.3, 1.0])
def test_ks_statistic_matches_scipy(shift):
    r = np.random.default_rng(1)
    a = r.normal(shift, 1, 150)
    b = r.normal(0, 1, 120)
    d, p = ks_one_sided(a, b)
    # scipy's "less": the CDF of the first sample lies below that of the second
    ref = stats.ks_2samp(a, b, alternative="less", method="asymp")
    assert d == pytest.approx(ref.statistic, abs=1e-12)
    assert 0 <= p <= 1
    if shift >= 1.0:
        assert p < 1e-6


def test_ks_direction():
    low = np.linspace(0, 1, 50)
    high = low + 2
    assert ks_one_sided(high, low)[1] < 1e-6
    assert ks_one_sided(low, high) == (0.0, 1.0)
