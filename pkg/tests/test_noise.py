import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from liesde.noise import (
    IndivisibleSteps,
    NoiseIncrement,
    aggregate,
    build_table,
    coarsen,
    increments_from_normals,
    load_table,
    path_stream,
    sample_increment,
    save_table,
    standard_normals,
)


def moments_within(dW, dZ, h, k=5.0):
    """Each sample moment within k standard errors of (0, h, h^3/3, h^2/2)."""
    checks = [
        (dW, 0.0),
        (dW * dW, h),
        (dZ * dZ, h**3 / 3),
        (dZ * dW, h**2 / 2),
        (dZ, 0.0),
    ]
    out = []
    for x, target in checks:
        se = x.std(ddof=1) / np.sqrt(len(x))
        out.append(abs(x.mean() - target) <= k * se)
    return out


def test_increment_examples():
    assert increments_from_normals(0.0, 0.0, 0.3) == (0.0, 0.0)
    dW, dZ = increments_from_normals(1.0, 0.0, 1.0)
    assert dW == 1.0 and dZ == 0.5


def test_sample_increment_moments():
    stream = path_stream(7, 0)
    h = 0.01
    draws = [sample_increment(stream, h) for _ in range(100_000)]
    dW = np.array([d.dW for d in draws])
    dZ = np.array([d.dZ for d in draws])
    assert all(moments_within(dW, dZ, h))


def test_normals_pass_ks():
    x = standard_normals(path_stream(3, 11), 20_000)
    assert stats.kstest(x, "norm").pvalue > 1e-3


def test_aggregate_examples():
    h = 0.1
    assert aggregate(NoiseIncrement(0, 0, h), NoiseIncrement(0, 0, h)) == NoiseIncrement(0, 0, 2 * h)
    a = NoiseIncrement(0.3, 0.02, h)
    assert aggregate(a, NoiseIncrement(0, 0, h)) == NoiseIncrement(0.3, 0.02 + h * 0.3, 2 * h)


def test_aggregate_moments():
    h = 0.01
    t = build_table(5, h, 2, 100_000)
    W, Z, H = aggregate((t.dW[:, 0], t.dZ[:, 0], h), (t.dW[:, 1], t.dZ[:, 1], h))
    assert H == 2 * h
    assert all(moments_within(W, Z, 2 * h))


def test_aggregate_matches_fine_quadrature():
    # Z over [0, 2h] from a very fine Brownian path, versus aggregated halves
    rng = np.random.default_rng(0)
    n, h = 2000, 0.5
    dw = rng.standard_normal(2 * n) * np.sqrt(h / n)
    W = np.concatenate([[0], np.cumsum(dw)])
    ds = h / n

    def Z_of(a, b):  # int_a^b (W_s - W_a) ds, trapezoid
        seg = W[a:b + 1] - W[a]
        return ds * (seg[:-1] + seg[1:]).sum() / 2

    first = (W[n] - W[0], Z_of(0, n), h)
    second = (W[2 * n] - W[n], Z_of(n, 2 * n), h)
    _, Zagg, _ = aggregate(first, second)
    assert Zagg == pytest.approx(Z_of(0, 2 * n), abs=1e-12)


def test_coarsen_properties():
    t = build_table(9, 2.0**-8, 64, 5)
    assert coarsen(t, 1).dW is not None
    np.testing.assert_array_equal(coarsen(t, 1).dW, t.dW)
    c22, c4 = coarsen(coarsen(t, 2), 2), coarsen(t, 4)
    np.testing.assert_array_equal(c22.dW, c4.dW)
    np.testing.assert_allclose(c22.dZ, c4.dZ, atol=1e-15)
    c64 = coarsen(t, 64)
    np.testing.assert_allclose(c64.dW[:, 0], t.dW.sum(axis=1), rtol=0, atol=1e-14)
    assert c64.dt == pytest.approx(0.25)
    with pytest.raises(IndivisibleSteps):
        coarsen(build_table(1, 0.1, 6, 1), 4)
    with pytest.raises(ValueError):
        coarsen(t, 3)


def test_coarse_Z_equals_integral_of_piecewise_path():
    # with Z defined through the fine increments' own Z, the coarse Z is the
    # exact time integral of W over the coarse step
    t = build_table(2, 0.125, 8, 1)
    c = coarsen(t, 8)
    h = t.dt
    Wl = np.concatenate([[0], np.cumsum(t.dW[0])])[:-1]
    expected = np.sum(t.dZ[0] + h * Wl)
    assert c.dZ[0, 0] == pytest.approx(expected, abs=1e-15)


def test_tables_reproducible_and_batch_independent(tmp_path):
    a = build_table(42, 0.01, 10, 6)
    b = build_table(42, 0.01, 10, 6)
    np.testing.assert_array_equal(a.dW, b.dW)
    np.testing.assert_array_equal(a.dZ, b.dZ)
    part = build_table(42, 0.01, 10, 3, first_path=3)
    np.testing.assert_array_equal(part.dW, a.dW[3:])
    assert not np.array_equal(build_table(43, 0.01, 10, 6).dW, a.dW)
    p = tmp_path / "t.bin"
    save_table(a, p)
    back = load_table(p)
    assert back.seed == 42 and back.dt == 0.01
    np.testing.assert_array_equal(back.dW, a.dW)
    np.testing.assert_array_equal(back.dZ, a.dZ)
    save_table(back, tmp_path / "u.bin")
    assert (tmp_path / "u.bin").read_bytes() == p.read_bytes()


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"nope" + bytes(40))
    with pytest.raises(ValueError):
        load_table(p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 5), st.sampled_from([1, 2, 4, 8]))
def test_coarsen_telescopes(seed, n_paths, factor):
    t = build_table(seed, 0.05, 16, n_paths)
    c = coarsen(t, factor)
    np.testing.assert_allclose(c.dW.sum(axis=1), t.dW.sum(axis=1), atol=1e-13)
    assert c.n_steps * factor == t.n_steps
