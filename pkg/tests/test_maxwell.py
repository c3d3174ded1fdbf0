import numpy as np
import pytest
from hypothesis import given, strategies as st

from cimcs import cdp
from cimcs.coupling import Coupling, DenseCoupling
from cimcs.maxwell import maxwell_support
from cimcs.problem import Chi

from oracles import brute_force_energy


def _random_coupling(seed, n=24, m=14):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n))
    a /= np.linalg.norm(a, axis=0)
    x = np.where(rng.random(n) < 0.25, rng.standard_normal(n), 0.0)
    return DenseCoupling(a, a @ x + 0.05 * rng.standard_normal(m)), rng


class _ColumnOnly(Coupling):
    def __init__(self, inner):
        self.inner, self.n, self.zeeman, self.diag = inner, inner.n, inner.zeeman, inner.diag

    def matvec(self, v):
        return self.inner.matvec(v)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([Chi.SIGNED, Chi.NONNEG]), st.floats(0.01, 0.6))
def test_every_logged_update_lowers_energy(seed, chi, eta):
    cpl, rng = _random_coupling(seed)
    r0 = np.where(rng.random(cpl.n) < 0.5, rng.standard_normal(cpl.n), 0.0)
    if chi is Chi.NONNEG:
        # descent only holds from a feasible start
        r0 = np.abs(r0)
    lam = eta * eta / 2
    sigma, r, info = maxwell_support(cpl, r0, eta, chi, rng, log_updates=10_000)
    assert info["converged"]
    # replay the log: every update is an energy descent step
    cur_r, cur_s = r0.copy(), (r0 != 0).astype(int)
    e = brute_force_energy(cpl.a_mat, cpl.y, cur_r, cur_s, lam)
    for i, s_i, r_i in zip(*info["log"]):
        cur_s[i], cur_r[i] = s_i, r_i
        e_new = brute_force_energy(cpl.a_mat, cpl.y, cur_r, cur_s, lam)
        assert e_new <= e + 1e-12
        e = e_new
    assert np.array_equal(cur_s, sigma) and np.allclose(cur_r, r)
    assert np.all(r[sigma == 0] == 0)
    if chi is Chi.NONNEG:
        assert r.min() >= 0


def test_column_fallback_matches_dense():
    cpl, rng = _random_coupling(7, n=40, m=25)
    r0 = rng.standard_normal(40)
    s1, r1, i1 = maxwell_support(cpl, r0, 0.2, Chi.SIGNED, np.random.default_rng(1), log_updates=500)
    s2, r2, i2 = maxwell_support(_ColumnOnly(cpl), r0, 0.2, Chi.SIGNED, np.random.default_rng(1), log_updates=500)
    assert np.array_equal(s1, s2)
    assert np.allclose(r1, r2, atol=1e-12)
    assert i1["sweeps"] == i2["sweeps"]
    assert np.array_equal(i1["log"][0], i2["log"][0])


def test_maxwell_then_cdp_lowers_energy():
    cpl, rng = _random_coupling(11, n=60, m=36)
    sigma, r, _ = maxwell_support(cpl, np.zeros(60), 0.1, Chi.SIGNED, rng)
    e1 = cdp.residual_energy(cpl, r, sigma, 0.005)
    r2 = cdp.solve_signal(cpl, sigma, fallback=True)
    assert cdp.residual_energy(cpl, r2, sigma, 0.005) <= e1 + 1e-12


def test_shape_check(rng):
    cpl, _ = _random_coupling(0)
    with pytest.raises(ValueError):
        maxwell_support(cpl, np.zeros(3), 0.1, Chi.SIGNED, rng)
