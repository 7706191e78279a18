import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigcomplex.errors import EmptySubset, IndexOutOfRange, SignatureTooShort
from sigcomplex.preprocess import ProcessedSignature
from sigcomplex.timefunctions import (
    ALL_CHANNELS,
    CHANNEL_NAMES,
    FeatureSubset,
    compute_time_functions,
    raw_time_functions,
    select_channels,
)

DT = 0.005


def ch(name):
    return CHANNEL_NAMES.index(name)


def test_diagonal_line_angles():
    n = 50
    s = np.arange(n) * 0.3
    m = raw_time_functions(s, s, DT)
    np.testing.assert_allclose(m[ch("theta")], math.pi / 4, atol=1e-12)
    np.testing.assert_allclose(m[ch("alpha")], math.pi / 4, atol=1e-12)
    np.testing.assert_allclose(m[ch("sin_alpha")], math.sin(math.pi / 4), atol=1e-12)
    np.testing.assert_allclose(m[ch("cos_alpha")], math.cos(math.pi / 4), atol=1e-12)


def test_circle_speed_constant():
    n = 400
    w = 2 * math.pi / (n * DT)  # one revolution
    t = np.arange(n) * DT
    m = raw_time_functions(np.cos(w * t), np.sin(w * t), DT)
    v = m[ch("v")]
    # analytic speed is w everywhere, endpoints included
    assert np.max(np.abs(v / w - 1)) < 1e-3


def _finite_difference(f, dt):
    # independent oracle: explicit central / one-sided formulas
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dt)
    out[0] = (f[1] - f[0]) / dt
    out[-1] = (f[-1] - f[-2]) / dt
    return out


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_derivative_channels(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 200))
    x = np.cumsum(rng.normal(size=n))
    y = np.cumsum(rng.normal(size=n))
    m = raw_time_functions(x, y, DT)
    for k in range(6):
        np.testing.assert_allclose(m[6 + k], _finite_difference(m[k], DT), rtol=1e-9,
                                   atol=1e-9 * max(1.0, np.abs(m[6 + k]).max()))


def _processed(x, y):
    return ProcessedSignature(np.asarray(x, float), np.asarray(y, float), DT, None, ())


def test_full_subset_is_identity():
    rng = np.random.default_rng(3)
    m = compute_time_functions(_processed(rng.normal(size=30).cumsum(),
                                          rng.normal(size=30).cumsum()))
    sel = select_channels(m, range(1, 22))
    np.testing.assert_array_equal(sel.values, m.values)
    assert sel.channel_ids == tuple(ALL_CHANNELS)


def test_office_all_subset_rows():
    rng = np.random.default_rng(4)
    m = compute_time_functions(_processed(rng.normal(size=30).cumsum(),
                                          rng.normal(size=30).cumsum()))
    sel = select_channels(m, {15, 12})
    assert sel.channel_ids == (12, 15)
    np.testing.assert_array_equal(sel.values[0], m.channel(12))
    np.testing.assert_array_equal(sel.values[1], m.channel(15))
    assert (CHANNEL_NAMES[11], CHANNEL_NAMES[14]) == ("da", "vr")


def test_empty_and_bad_subsets():
    with pytest.raises(EmptySubset):
        FeatureSubset([])
    with pytest.raises(IndexOutOfRange):
        FeatureSubset([0, 3])
    with pytest.raises(IndexOutOfRange):
        FeatureSubset([22])
    assert FeatureSubset.parse("7,2") == (2, 7)


def test_too_short():
    with pytest.raises(SignatureTooShort):
        raw_time_functions(np.arange(5.0), np.arange(5.0), DT)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_channels_finite_and_normalized(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 300))
    m = compute_time_functions(_processed(rng.normal(size=n).cumsum(),
                                          rng.normal(size=n).cumsum()))
    assert m.values.shape == (21, n)
    assert np.all(np.isfinite(m.values))
    for row in m.values:
        assert abs(row.mean()) < 1e-9
        assert row.std() == pytest.approx(1, abs=1e-9) or row.std() < 1e-9
