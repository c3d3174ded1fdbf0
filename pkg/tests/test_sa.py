import itertools
import math

import numpy as np
import pytest

from cimcs.coupling import DenseCoupling
from cimcs.sa import CoolingKind, CoolingSchedule, acceptance_ratio, run_sa
from cimcs.problem import InstanceParams, synthesize

from oracles import brute_force_energy


@pytest.mark.parametrize("kind", [CoolingKind.EXP, CoolingKind.INV_LINEAR, CoolingKind.INV_LOG])
def test_schedule_endpoints(kind):
    sched = CoolingSchedule(kind, 0.02, 2e-5, 1e4)
    assert float(sched(0.0)) == pytest.approx(0.02)
    assert float(sched(1e4)) == pytest.approx(2e-5, rel=1e-9)
    t = np.linspace(0, 1e4, 50)
    assert np.all(np.diff(sched(t)) < 0)


def test_zero_schedule_and_validation():
    assert np.all(CoolingSchedule()(np.arange(5.0)) == 0)
    with pytest.raises(ValueError):
        CoolingSchedule(CoolingKind.EXP, 0.01, 0.02)


def test_acceptance_ratio_matches_energy_difference(rng):
    inst = synthesize(InstanceParams(10, 0.6, 0.3, seed=2))
    r = rng.standard_normal(10)
    sigma = (rng.random(10) < 0.5).astype(int)
    lam, temp = 0.01, 0.05
    for i in range(10):
        flipped = sigma.copy()
        flipped[i] ^= 1
        de = (brute_force_energy(inst.a_mat, inst.y, r, flipped, lam)
              - brute_force_energy(inst.a_mat, inst.y, r, sigma, lam))
        assert acceptance_ratio(inst, r, sigma, i, lam, temp) == pytest.approx(math.exp(-de / temp), rel=1e-9)
        zero = acceptance_ratio(inst, r, sigma, i, lam, 0.0)
        assert zero == (0.0 if de > 0 else math.inf)


def test_zero_temperature_ends_in_single_flip_minimum():
    inst = synthesize(InstanceParams(6, 0.5, 0.5, seed=9))
    r = inst.x_true.copy()
    lam = 0.01
    energies = {bits: brute_force_energy(inst.a_mat, inst.y, r, np.array(bits), lam)
                for bits in itertools.product((0, 1), repeat=6)}
    for seed in range(20):
        res = run_sa(inst, r, lam, CoolingSchedule(), np.random.default_rng(seed))
        bits = tuple(int(v) for v in res.sigma)
        for i in range(6):
            nb = list(bits)
            nb[i] ^= 1
            assert energies[tuple(nb)] >= energies[bits] - 1e-12


def test_reproducible_and_trace_shape():
    inst = synthesize(InstanceParams(50, 0.6, 0.2, seed=4))
    sched = CoolingSchedule(CoolingKind.EXP, 0.02, 2e-5, 200)
    a = run_sa(inst, inst.x_true, 1e-3, sched, np.random.default_rng(3), trace_every=10)
    b = run_sa(inst, inst.x_true, 1e-3, sched, np.random.default_rng(3), trace_every=10)
    assert np.array_equal(a.sigma, b.sigma)
    assert a.trace.shape == (20,)
    assert np.all((0 <= a.trace) & (a.trace <= 1))


def test_needs_dense_coupling():
    class Lazy(DenseCoupling):
        @property
        def dense(self):
            return None

    with pytest.raises(ValueError):
        run_sa(Lazy(np.eye(3), np.ones(3)), np.ones(3), 0.1, CoolingSchedule(), np.random.default_rng(0))
