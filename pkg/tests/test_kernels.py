"""Compiled and fallback kernels agree bit for bit; the normal sampler is standard normal."""
import numpy as np
import pytest
from scipy import stats

from twinboot import kernels
from twinboot._ziggurat import FI, KI, R, WI
from twinboot.rng import RngStream

from conftest import BACKENDS

needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def _bitgen(kind, seed):
    return {"sfc64": np.random.SFC64, "pcg64": np.random.PCG64,
            "philox": np.random.Philox}[kind](seed)


@needs_both
@pytest.mark.parametrize("kind", ["sfc64", "pcg64", "philox"])
@pytest.mark.parametrize("n", [0, 1, 7, 900, 100_000])
def test_standard_normal_identical_across_backends(kind, n):
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    b1, b2 = _bitgen(kind, 11), _bitgen(kind, 11)
    a = py.standard_normal(b1, n)
    b = cy.standard_normal(b2, n)
    assert np.array_equal(a, b)
    # both leave the generator in the same place
    assert b1.random_raw() == b2.random_raw()


@needs_both
def test_grouped_kernels_identical_across_backends():
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    rng = np.random.default_rng(3)
    group_of = np.repeat(np.arange(5), [1, 3, 10, 7, 2]).astype(np.int64)
    a, b = rng.normal(size=23), rng.normal(size=23)
    sizes = np.bincount(group_of).astype(np.float64)
    np.testing.assert_array_equal(py.grouped_sqdist(a, b, group_of, 5),
                                  cy.grouped_sqdist(a, b, group_of, 5))
    np.testing.assert_allclose(py.grouped_variance(a, b, group_of, 2 * sizes),
                               cy.grouped_variance(a, b, group_of, 2 * sizes), rtol=1e-15)
    s2 = rng.uniform(0, 2, size=5)
    o_py = py.twin_normal_perturb(a, b, s2, group_of, np.random.SFC64(1), np.random.SFC64(2))
    o_cy = cy.twin_normal_perturb(a, b, s2, group_of, np.random.SFC64(1), np.random.SFC64(2))
    np.testing.assert_array_equal(o_py[0], o_cy[0])
    np.testing.assert_array_equal(o_py[1], o_cy[1])


@needs_both
def test_adam_and_two_well_identical_across_backends():
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    rng = np.random.default_rng(5)
    g = rng.normal(size=50)
    outs = []
    for impl in (py, cy):
        w, m, v = np.ones(50), np.zeros(50), np.zeros(50)
        impl.adam_update(w, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)
        outs.append((w, m, v))
    for x, y in zip(*outs):
        np.testing.assert_allclose(x, y, rtol=1e-14, atol=0)
    w = rng.normal(size=2)
    off = rng.normal(size=(30, 2))
    mu1, mu2 = np.array([-1.0, 0.0]), np.array([1.0, 0.0])
    l1, g1 = py.two_well_loss_grad(w, off, mu1, mu2, 0.8)
    l2, g2 = cy.two_well_loss_grad(w, off, mu1, mu2, 0.8)
    assert l1 == pytest.approx(l2, rel=1e-14)
    np.testing.assert_allclose(g1, g2, rtol=1e-13)


def test_ziggurat_tables_are_consistent():
    # layer boundaries decrease outward, densities at them are exp(-x^2/2)
    x = WI[1:] * 2.0 ** 52
    assert np.all(np.diff(x) > 0)
    np.testing.assert_allclose(FI[1:], np.exp(-0.5 * x ** 2), rtol=1e-12)
    assert x[-1] == pytest.approx(R)
    assert np.all(KI[2:] <= np.uint64(2 ** 52))


@pytest.mark.parametrize("seed", [1, 2])
def test_standard_normal_distribution(backend, seed):
    z = kernels.standard_normal(RngStream(seed, 0).bit_generator, 200_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 5 / np.sqrt(z.size)
    assert abs(z.var() - 1.0) < 5 * np.sqrt(2.0 / z.size)
    # tail mass beyond R, where the ziggurat switches to its tail sampler
    tail = np.mean(np.abs(z) > R)
    expected = 2 * stats.norm.sf(R)
    assert abs(tail - expected) < 5 * np.sqrt(expected / z.size)
    # sign symmetry
    assert abs(np.mean(z > 0) - 0.5) < 5 * 0.5 / np.sqrt(z.size)


def test_standard_normal_consumes_same_draws_as_needed(backend):
    bg1, bg2 = np.random.SFC64(9), np.random.SFC64(9)
    a = kernels.standard_normal(bg1, 300)
    b = np.concatenate([kernels.standard_normal(bg2, 100), kernels.standard_normal(bg2, 200)])
    np.testing.assert_array_equal(a, b)


def test_active_backend_reported():
    assert kernels.BACKEND in ("python", "cython")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
