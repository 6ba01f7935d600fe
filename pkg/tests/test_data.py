import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinboot.data import (
    BootstrapDataset, Dataset, PairedBatchIterator, load_csv, make_bootstrap, save_csv,
)
from twinboot.rng import RngStream


def ds(n, d=2):
    return Dataset(np.arange(n * d, dtype=float).reshape(n, d), np.arange(n, dtype=float))


def test_single_point_bootstrap():
    b = make_bootstrap(ds(1), RngStream(0))
    assert list(b.indices) == [0]


def test_bootstrap_coverage_fraction():
    n = 1000
    fr = np.array([np.unique(make_bootstrap(ds(n), RngStream(s)).indices).size / n
                   for s in range(200)])
    expected = 1 - (1 - 1 / n) ** n
    assert abs(fr.mean() - expected) < 3 * fr.std(ddof=1) / np.sqrt(fr.size)


def test_bootstrap_deterministic_and_twins_independent():
    base = ds(50)
    a = make_bootstrap(base, RngStream(3, "twin1-bootstrap")).indices
    b = make_bootstrap(base, RngStream(3, "twin1-bootstrap")).indices
    np.testing.assert_array_equal(a, b)
    corr = [np.corrcoef(make_bootstrap(base, RngStream(s, "twin1-bootstrap")).indices,
                        make_bootstrap(base, RngStream(s, "twin2-bootstrap")).indices)[0, 1]
            for s in range(300)]
    assert abs(np.mean(corr)) < 4 * np.std(corr) / np.sqrt(len(corr))


def test_batch_sizes():
    base = ds(10)
    b1 = BootstrapDataset.identity(base)
    it = PairedBatchIterator(b1, b1, 10, RngStream(0, 1), RngStream(0, 2))
    pairs = list(it)
    assert len(pairs) == 1 and pairs[0][0][0].shape[0] == 10
    it = PairedBatchIterator(b1, b1, 3, RngStream(0, 1), RngStream(0, 2))
    sizes = [(p[0][0].shape[0], p[1][0].shape[0]) for p in it]
    assert sizes == [(3, 3), (3, 3), (3, 3), (1, 1)]
    for bad in (0, 11):
        with pytest.raises(ValueError):
            PairedBatchIterator(b1, b1, bad, RngStream(0, 1), RngStream(0, 2))


@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 50), st.booleans())
def test_each_epoch_visits_bootstrap_multiset(n, b, seed, reuse):
    b = min(b, n)
    base = Dataset(np.arange(n, dtype=float), np.zeros(n))
    d1 = make_bootstrap(base, RngStream(seed, 5))
    d2 = make_bootstrap(base, RngStream(seed, 6))
    it = PairedBatchIterator(d1, d2, b, RngStream(seed, 7), RngStream(seed, 8),
                             reuse_buffers=reuse)
    for _ in range(2):
        seen1, seen2 = [], []
        for (x1, _), (x2, _) in it:
            assert x1.shape[0] == x2.shape[0]
            seen1.extend(x1[:, 0].astype(int))
            seen2.extend(x2[:, 0].astype(int))
        assert sorted(seen1) == sorted(d1.indices)
        assert sorted(seen2) == sorted(d2.indices)


def test_reused_buffers_match_fresh_batches():
    base = ds(37, 3)
    d1 = make_bootstrap(base, RngStream(1, 5))
    d2 = make_bootstrap(base, RngStream(1, 6))
    fresh = PairedBatchIterator(d1, d2, 8, RngStream(1, 7), RngStream(1, 8))
    reused = PairedBatchIterator(d1, d2, 8, RngStream(1, 7), RngStream(1, 8),
                                 reuse_buffers=True)
    for _ in range(3):
        for (a, b) in zip(fresh, reused):
            np.testing.assert_array_equal(a[0][0], b[0][0])
            np.testing.assert_array_equal(a[1][1], b[1][1])


def test_dataset_validation_and_csv_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 2)), np.zeros((0, 1)))
    d = Dataset(np.random.default_rng(0).normal(size=(5, 2)), np.arange(5.0))
    p = tmp_path / "d.csv"
    save_csv(d, p)
    assert p.read_text().splitlines()[0] == "x0,x1,y0"
    e = load_csv(p)
    np.testing.assert_array_equal(d.inputs, e.inputs)
    np.testing.assert_array_equal(d.targets, e.targets)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        load_csv(tmp_path / "bad.csv")


def test_bootstrap_validation():
    with pytest.raises(ValueError):
        BootstrapDataset(ds(3), np.array([0, 1]))
    with pytest.raises(ValueError):
        BootstrapDataset(ds(3), np.array([0, 1, 3]))
    b = make_bootstrap(ds(5), RngStream(0))
    with pytest.raises(ValueError):
        b.indices[0] = 1
