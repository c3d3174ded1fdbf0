import numpy as np
import pytest

from cimcs import cdp
from cimcs.cim import CimConfig
from cimcs.hybrid import (Backend, HybridConfig, RInit, initial_signal, run_hybrid, threshold_at)
from cimcs.lasso import run_ista
from cimcs.metrics import direction_cosine, rmse
from cimcs.problem import Chi, InstanceParams, SourceDistribution, synthesize


@pytest.fixture(scope="module")
def easy():
    return synthesize(InstanceParams(100, 0.6, 0.15, dist=SourceDistribution.half_gaussian(), seed=8))


def test_threshold_schedule():
    cfg = HybridConfig(eta_init=0.4, eta_end=0.1, outer_iters=4)
    assert [threshold_at(cfg, t) for t in range(4)] == pytest.approx([0.4, 0.3, 0.2, 0.1])
    with pytest.raises(ValueError):
        HybridConfig(eta_init=0.01, eta_end=0.1)
    with pytest.raises(ValueError):
        HybridConfig(outer_iters=0)


def test_initial_signals(easy):
    assert np.all(initial_signal(easy, HybridConfig()) == 0)
    assert np.array_equal(initial_signal(easy, HybridConfig(r_init=RInit.TRUTH)), easy.signal)
    cfg = HybridConfig(r_init=RInit.LASSO, eta_init=0.1, eta_end=0.05, cim=CimConfig(chi=Chi.NONNEG))
    ref = run_ista(easy, 0.1, Chi.NONNEG, tol=1e-12, max_iters=50_000).x
    assert initial_signal(easy, cfg) == pytest.approx(ref, abs=1e-7)
    with pytest.raises(ValueError):
        initial_signal(easy.coupling, HybridConfig(r_init=RInit.TRUTH))


@pytest.mark.parametrize("backend", [Backend.MAXWELL, Backend.SDE])
def test_recovers_easy_instance(easy, backend):
    cim = CimConfig.algorithm_default(1e7, Chi.NONNEG)
    cfg = HybridConfig(0.3, 0.05, outer_iters=10, cim=cim, backend=backend)
    res = run_hybrid(easy, cfg, np.random.default_rng(0))
    assert res.trace[-1].rmse == pytest.approx(rmse(res.r, res.sigma, easy.x_true, easy.xi_true))
    assert res.trace[-1].rmse < 0.01
    # components below the final threshold may be dropped
    assert direction_cosine(easy.xi_true, res.sigma) > 0.95
    # every round ends on the CDP optimum for its support
    assert res.r == pytest.approx(cdp.solve_signal(easy, res.sigma))


def test_trace_and_reproducibility(easy):
    cfg = HybridConfig(0.2, 0.05, outer_iters=6, backend=Backend.MAXWELL, cim=CimConfig(chi=Chi.NONNEG))
    a = run_hybrid(easy, cfg, np.random.default_rng(5))
    b = run_hybrid(easy, cfg, np.random.default_rng(5))
    assert len(a.trace) == 6
    assert [row.eta for row in a.trace] == pytest.approx([threshold_at(cfg, t) for t in range(6)])
    assert np.array_equal(a.sigma, b.sigma) and a.energy == b.energy
    assert a.energy == pytest.approx(cdp.residual_energy(easy, a.r, a.sigma, 0.05 ** 2 / 2))
