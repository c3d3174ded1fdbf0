import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from cimcs.problem import (Chi, InstanceParams, Kind, ParameterError, SourceDistribution, load_instance,
                           read_matrix, sample_source, save_instance, second_moment, synthesize, write_matrix)

DISTS = [SourceDistribution.gaussian(), SourceDistribution.half_gaussian(0.5),
         SourceDistribution.gamma(2.0, 0.4), SourceDistribution.bilateral_gamma(3.0, 0.3)]


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: d.kind.value)
def test_pdf_normalized_and_second_moment(dist):
    lo, hi = dist.support()
    mass = integrate.quad(dist.pdf, lo, hi, points=[0.0] if lo < 0 else None, limit=200)[0]
    m2 = integrate.quad(lambda x: x * x * dist.pdf(x), lo, hi, points=[0.0] if lo < 0 else None, limit=200)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert second_moment(dist) == pytest.approx(m2, rel=1e-8)


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: d.kind.value)
def test_samples_match_moment_and_sign(dist, rng):
    x = sample_source(dist, 200_000, rng)
    assert np.mean(x * x) == pytest.approx(second_moment(dist), rel=0.02)
    if not dist.signed:
        assert x.min() >= 0
    else:
        assert (x < 0).mean() == pytest.approx(0.5, abs=0.01)


def test_chi_follows_distribution():
    assert SourceDistribution.gaussian().chi is Chi.SIGNED
    assert SourceDistribution.gamma().chi is Chi.NONNEG
    assert Chi.parse("±") is Chi.SIGNED and Chi.parse("+") is Chi.NONNEG
    with pytest.raises(ParameterError):
        Chi.parse("x")


@pytest.mark.parametrize("kw", [dict(n=0, alpha=0.5, a=0.1), dict(n=10, alpha=0.0, a=0.1),
                                dict(n=10, alpha=0.5, a=1.5), dict(n=10, alpha=0.5, a=0.1, beta=-1)])
def test_invalid_params_rejected(kw):
    with pytest.raises(ParameterError):
        InstanceParams(**kw)


def test_chi_mismatch_rejected():
    with pytest.raises(ParameterError):
        InstanceParams(10, 0.5, 0.1, dist=SourceDistribution.half_gaussian(), chi=Chi.SIGNED)


def test_synthesize_shapes_and_columns():
    p = InstanceParams(n=300, alpha=0.4, a=0.1, beta=0.01, dist=SourceDistribution.gaussian(), seed=7)
    inst = synthesize(p)
    assert inst.a_mat.shape == (120, 300)
    assert np.allclose(np.linalg.norm(inst.a_mat, axis=0), 1.0)
    assert inst.xi_true.sum() == 30
    resid = inst.y - inst.a_mat @ inst.signal
    assert np.std(resid) == pytest.approx(0.01, rel=0.25)


def test_synthesize_reproducible():
    p = InstanceParams(n=50, alpha=0.6, a=0.2, seed=3)
    a, b = synthesize(p), synthesize(p)
    assert np.array_equal(a.a_mat, b.a_mat) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, synthesize(InstanceParams(n=50, alpha=0.6, a=0.2, seed=4)).y)


@given(st.integers(1, 6), st.integers(1, 6))
def test_matrix_roundtrip(tmp_path_factory, m, n):
    mat = np.random.default_rng(m * 10 + n).standard_normal((m, n))
    path = tmp_path_factory.mktemp("mat") / "a.bin"
    write_matrix(path, mat)
    assert np.array_equal(read_matrix(path), mat)


def test_instance_roundtrip(tmp_path):
    inst = synthesize(InstanceParams(n=40, alpha=0.5, a=0.25, dist=SourceDistribution.gamma(), seed=11))
    save_instance(inst, tmp_path / "inst")
    back = load_instance(tmp_path / "inst")
    assert back.params == inst.params
    for name in ("a_mat", "y", "x_true", "xi_true"):
        assert np.array_equal(getattr(back, name), getattr(inst, name))


def test_params_json_roundtrip():
    p = InstanceParams(n=20, alpha=0.5, a=0.1, beta=0.1, dist=SourceDistribution.bilateral_gamma(1.5, 0.2), seed=2**63)
    assert InstanceParams.from_json(p.to_json()) == p


def test_kind_values_stable():
    assert {k.value for k in Kind} == {"gaussian", "half_gaussian", "gamma", "bilateral_gamma"}
    assert math.isclose(second_moment(SourceDistribution.gamma(2.0, 0.4)), 6 * 0.16)
