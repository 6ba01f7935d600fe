import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twinboot.core import estimate_sigma, group_by_layers, group_whole
from twinboot.data import BootstrapDataset, PairedBatchIterator, make_bootstrap
from twinboot.engine import (
    ResetSchedule, TrainConfig, TwinState, mean_reset, run_baseline, run_training, train_step,
)
from twinboot.optim import DivergedError
from twinboot.problems import GaussianMeanProblem, MlpProblem, TwoBasinProblem, build_seismic
from twinboot.rng import RngStream


def small_seismic(seed=0):
    return build_seismic(seed, height=6, width=6, n_measurements=120, kernel_width=1.0)


def test_state_starts_identical_with_zero_sigma():
    s = TwinState.create(np.arange(4.0), group_by_layers([1, 3]), {"kind": "sgd", "lr": 0.1}, 0)
    np.testing.assert_array_equal(s.w1, s.w2)
    np.testing.assert_array_equal(s.sigma_sq, [0.0, 0.0])


def test_first_step_is_plain_twin_sgd(backend):
    p = GaussianMeanProblem(n=50, variance=9.0, seed=2)
    cfg = TrainConfig(epochs=1, batch_size=50, optimizer={"kind": "sgd", "lr": 0.3})
    state, _ = run_training(p, cfg, seed=4)
    # closed form: full batch from w=0 gives w' = -lr * 2 * (0 - mean) = 2 lr mean
    m1 = p.dataset.inputs[make_bootstrap(p.dataset, RngStream(4, "twin1-bootstrap")).indices].mean(0)
    m2 = p.dataset.inputs[make_bootstrap(p.dataset, RngStream(4, "twin2-bootstrap")).indices].mean(0)
    np.testing.assert_allclose(state.w1, 0.6 * m1, rtol=1e-13)
    np.testing.assert_allclose(state.w2, 0.6 * m2, rtol=1e-13)
    assert state.sigma_sq[0] == pytest.approx(np.sum((0.6 * (m1 - m2)) ** 2) / 4, rel=1e-12)


def test_sigma_consistency_after_every_step(backend):
    p = MlpProblem(layer_sizes=(2, 6, 2), n_train=40, n_val=10, seed=1)
    g = p.grouping()
    state = TwinState.create(p.initial_params(1), g, {"kind": "adam", "lr": 0.01}, 1)
    d1 = make_bootstrap(p.dataset, RngStream(1, 5))
    d2 = make_bootstrap(p.dataset, RngStream(1, 6))
    it = PairedBatchIterator(d1, d2, 8, RngStream(1, 7), RngStream(1, 8))
    for _ in range(3):
        for pair in it:
            train_step(state, pair, p.loss_and_grad)
            np.testing.assert_array_equal(state.sigma_sq, estimate_sigma(state.w1, state.w2, g))
    assert np.all(state.sigma_sq > 0)


def test_symmetric_twins_never_separate(backend):
    p = TwoBasinProblem(d=2, width=0.7, sigma_data=0.3, m=30, seed=0)
    g = group_whole(2)
    state = TwinState.create([0.3, 0.1], g, {"kind": "sgd", "lr": 0.1}, 0,
                             streams=("twin1-forward", "twin1-forward", "twin1-reset", "twin1-reset"))
    ident = BootstrapDataset.identity(p.dataset)
    it = PairedBatchIterator(ident, ident, 10, RngStream(0, 7), RngStream(0, 7))
    for _ in range(5):
        for pair in it:
            train_step(state, pair, p.loss_and_grad)
            assert state.w1.tobytes() == state.w2.tobytes()
            assert state.sigma_sq[0] == 0.0


def test_reset_with_zero_sigma_collapses_to_mean(backend):
    s = TwinState.create(np.zeros(3), group_whole(3), {"kind": "sgd", "lr": 0.1}, 0)
    s.w1 = np.array([1.0, 2.0, 3.0])
    s.w2 = np.array([3.0, 2.0, 1.0])
    s.sigma_sq = np.zeros(1)
    mean_reset(s)
    np.testing.assert_array_equal(s.w1, [2.0, 2.0, 2.0])
    np.testing.assert_array_equal(s.w1, s.w2)
    assert s.sigma_sq[0] == 0.0


def test_reset_preserves_expected_distance_and_center(backend):
    g = group_by_layers([2, 3])
    w1 = np.array([2.0, 2.0, 1.0, -1.0, 0.5])
    w2 = np.array([0.0, 0.0, 0.0, 1.0, 0.0])
    s = TwinState.create(np.zeros(5), g, {"kind": "sgd", "lr": 0.1}, 0)
    sig = estimate_sigma(w1, w2, g)
    n = 10_000
    d = np.zeros((n, 2))
    centers = np.zeros((n, 5))
    for i in range(n):
        s.w1, s.w2, s.sigma_sq = w1, w2, sig
        mean_reset(s)
        diff = (s.w1 - s.w2) ** 2
        d[i] = [diff[:2].sum(), diff[2:].sum()]
        centers[i] = s.mean_weights
    expected = 2 * g.sizes * sig
    np.testing.assert_allclose(d.mean(0), expected, rtol=0.05)
    assert expected[0] == pytest.approx(8.0)
    se = centers.std(0) / np.sqrt(n)
    assert np.all(np.abs(centers.mean(0) - 0.5 * (w1 + w2)) < 4 * se)


def test_reset_schedules():
    assert ResetSchedule("epochs", epochs=[1, 2, 6, 12]).epochs_up_to(40) == [1, 2, 6, 12]
    assert ResetSchedule("adaptive", K0=50, growth=2).epochs_up_to(800) == [50, 150, 350, 750]
    assert ResetSchedule("every", K=3).epochs_up_to(10) == [3, 6, 9]
    sch = ResetSchedule("every", K=1)
    assert not sch.fires(0) and sch.fires(1)
    for bad in ({"kind": "every", "K": 0}, {"kind": "adaptive"}, {"kind": "weekly"}):
        with pytest.raises(ValueError):
            ResetSchedule(**bad)


def test_explicit_resets_fire_only_at_listed_epochs():
    p = TwoBasinProblem(d=2, width=0.7, sigma_data=0.3, m=20, seed=0)
    cfg = TrainConfig(epochs=14, batch_size=10, reset={"kind": "epochs", "epochs": [1, 2, 6, 12]})
    _, hist = run_training(p, cfg, 0)
    assert hist.resets == [1, 2, 6, 12]


def test_one_epoch_full_batch_is_one_step():
    p = GaussianMeanProblem(n=20, seed=0)
    state, hist = run_training(p, TrainConfig(epochs=1, batch_size=20), 0)
    assert state.step == 1 and len(hist.steps) == 1
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(["sgd", "adam"]))
def test_exchangeability(seed, kind):
    p = MlpProblem(layer_sizes=(2, 5, 2), n_train=30, n_val=5, seed=seed)
    cfg = TrainConfig(epochs=3, batch_size=7, optimizer={"kind": kind, "lr": 0.05},
                      reset={"kind": "every", "K": 2})
    a, ha = run_training(p, cfg, seed)
    swap = {
        "forward": ("twin2-forward", "twin1-forward"),
        "reset": ("twin2-reset", "twin1-reset"),
        "bootstrap": ("twin2-bootstrap", "twin1-bootstrap"),
        "shuffle": ("twin2-shuffle", "twin1-shuffle"),
    }
    b, hb = run_training(p, cfg, seed, streams=swap)
    np.testing.assert_array_equal(a.w1, b.w2)
    np.testing.assert_array_equal(a.w2, b.w1)
    np.testing.assert_array_equal(ha.step_sigma(), hb.step_sigma())


@pytest.mark.parametrize("kind", ["sgd", "adam"])
def test_baseline_equivalence(kind, backend):
    p = small_seismic(3)
    cfg = TrainConfig(epochs=4, batch_size=16, optimizer={"kind": kind, "lr": 0.01},
                      sample_weights=False)
    same = {"shuffle": ("twin1-shuffle", "twin1-shuffle")}
    state, _ = run_training(p, cfg, 3, bootstrap=False, streams=same)
    base, _ = run_baseline(p, cfg, 3)
    np.testing.assert_array_equal(state.w1, base.w)
    np.testing.assert_array_equal(state.w2, base.w)


def test_byte_identical_determinism(backend):
    p = small_seismic(1)
    cfg = TrainConfig(epochs=5, batch_size=16, optimizer={"kind": "adam", "lr": 0.01},
                      reset={"kind": "adaptive", "K0": 2})
    a, ha = run_training(p, cfg, 9)
    b, hb = run_training(p, cfg, 9)
    assert a.w1.tobytes() == b.w1.tobytes() and a.w2.tobytes() == b.w2.tobytes()
    assert ha.step_sigma().tobytes() == hb.step_sigma().tobytes()


def test_update_at_sample_differs_from_center():
    p = GaussianMeanProblem(n=40, seed=0)
    cfg_c = TrainConfig(epochs=3, batch_size=10, optimizer={"kind": "sgd", "lr": 0.05})
    cfg_s = TrainConfig(epochs=3, batch_size=10, optimizer={"kind": "sgd", "lr": 0.05},
                        update_at="sample")
    a, _ = run_training(p, cfg_c, 0)
    b, _ = run_training(p, cfg_s, 0)
    assert not np.array_equal(a.w1, b.w1)


def test_divergence_reports_step_and_twin():
    p = GaussianMeanProblem(n=40, variance=1.0, seed=0, init=(1.0, 1.0))
    cfg = TrainConfig(epochs=400, batch_size=40, optimizer={"kind": "sgd", "lr": 5.0})
    with pytest.raises(DivergedError) as exc:
        run_training(p, cfg, 0)
    assert exc.value.step is not None and exc.value.twin in (1, 2, None)

    def bad(w, x, y):
        return np.nan, np.zeros_like(w)

    s = TwinState.create(np.zeros(2), group_whole(2), {"kind": "sgd", "lr": 0.1}, 0)
    pair = ((np.zeros((1, 2)), np.zeros((1, 0))),) * 2
    with pytest.raises(DivergedError) as exc:
        train_step(s, pair, bad)
    assert exc.value.twin == 1 and exc.value.step == 1


def test_bootstraps_untouched_by_resets(monkeypatch):
    import twinboot.engine as engine

    made = []

    def recording(base, rng):
        b = make_bootstrap(base, rng)
        made.append((b, b.indices.copy()))
        return b

    monkeypatch.setattr(engine, "make_bootstrap", recording)
    p = GaussianMeanProblem(n=30, seed=0)
    _, hist = run_training(p, TrainConfig(epochs=4, batch_size=10,
                                          reset={"kind": "every", "K": 1}), 5)
    assert hist.resets == [1, 2, 3, 4] and len(made) == 2
    for b, before in made:
        assert b.indices.tobytes() == before.tobytes()
        assert not b.indices.flags.writeable
