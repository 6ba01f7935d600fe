"""Twin-bootstrap training loop.

Two copies of the model start from identical weights and are trained on
independent bootstrap resamples of the data. After every update the grouped
two-sample variance of their difference is recomputed; it sets the scale of
the Gaussian weight perturbation used in the next forward pass and of the
scheduled sampling-based mean-resets.
"""
from dataclasses import dataclass, field
import time

import numpy as np

from twinboot.core import (
    _sigma_unchecked, _twin_sample_unchecked, as_params, estimate_sigma, sample_around,
)
from twinboot.data import BootstrapDataset, PairedBatchIterator, make_bootstrap
from twinboot.optim import DivergedError, make_optimizer
from twinboot.rng import RngStream


class ResetSchedule:
    """When mean-resets fire, as a function of the 1-based completed epoch.

    kinds: ``none``; ``every`` (every ``K`` epochs); ``epochs`` (an explicit
    set); ``adaptive`` (first at ``K0``, each later interval multiplied by
    ``growth``, so K0=50, growth=2 fires at 50, 150, 350, ...).
    """

    def __init__(self, kind="none", K=None, epochs=None, K0=None, growth=2.0):
        self.kind = kind
        if kind == "none":
            pass
        elif kind == "every":
            if K is None or int(K) != K or K < 1:
                raise ValueError("every-K schedule needs a positive integer K")
            self.K = int(K)
        elif kind == "epochs":
            if epochs is None or any(int(e) != e or e < 1 for e in epochs):
                raise ValueError("explicit reset epochs must be positive integers")
            self.epochs = frozenset(int(e) for e in epochs)
        elif kind == "adaptive":
            if K0 is None or int(K0) != K0 or K0 < 1:
                raise ValueError("adaptive schedule needs a positive integer K0")
            if not growth >= 1:
                raise ValueError("adaptive growth factor must be >= 1")
            self.K0 = int(K0)
            self.growth = float(growth)
        else:
            raise ValueError(f"unknown reset schedule kind {kind!r}")

    def epochs_up_to(self, n_epochs):
        if self.kind == "none":
            return []
        if self.kind == "every":
            return list(range(self.K, n_epochs + 1, self.K))
        if self.kind == "epochs":
            return sorted(e for e in self.epochs if e <= n_epochs)
        out = []
        e, interval = self.K0, float(self.K0)
        while e <= n_epochs:
            out.append(e)
            interval *= self.growth
            e += int(round(interval))
        return out

    def fires(self, epoch):
        if epoch < 1:
            return False
        return epoch in self.epochs_up_to(epoch)

    def to_dict(self):
        if self.kind == "every":
            return {"kind": "every", "K": self.K}
        if self.kind == "epochs":
            return {"kind": "epochs", "epochs": sorted(self.epochs)}
        if self.kind == "adaptive":
            return {"kind": "adaptive", "K0": self.K0, "growth": self.growth}
        return {"kind": "none"}


def make_reset_schedule(spec):
    if spec is None:
        return ResetSchedule("none")
    if isinstance(spec, ResetSchedule):
        return spec
    return ResetSchedule(**spec)


@dataclass
class TrainConfig:
    """Training hyperparameters for one run.

    ``update_at`` selects how the gradient taken at the perturbed weights is
    used: ``"center"`` applies it to the unperturbed weights (default),
    ``"sample"`` applies it to the perturbed weights and keeps the result.
    ``reset_mode`` is ``"sample"`` (redraw around the twin mean) or ``"mean"``
    (both twins set to the mean).
    """

    epochs: int = 1
    batch_size: int = 1
    optimizer: dict = field(default_factory=lambda: {"kind": "sgd", "lr": 0.01})
    reset: dict = field(default_factory=lambda: {"kind": "none"})
    sample_weights: bool = True
    reset_mode: str = "sample"
    update_at: str = "center"
    log: str = "step"
    log_stride: int = 1

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError("batch size must be a positive integer")
        if self.reset_mode not in ("sample", "mean"):
            raise ValueError("reset_mode must be 'sample' or 'mean'")
        if self.update_at not in ("center", "sample"):
            raise ValueError("update_at must be 'center' or 'sample'")
        if self.log not in ("step", "epoch"):
            raise ValueError("log must be 'step' or 'epoch'")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")


@dataclass
class TwinState:
    w1: np.ndarray
    w2: np.ndarray
    opt1: object
    opt2: object
    grouping: object
    sigma_sq: np.ndarray
    forward_rngs: tuple
    reset_rngs: tuple
    epoch: int = 0
    step: int = 0

    @classmethod
    def create(cls, w0, grouping, optimizer_spec, seed, streams=None):
        """Twins at identical weights ``w0`` with all group variances zero.

        ``streams`` optionally overrides the (forward1, forward2, reset1, reset2)
        stream ids; swapping the twin halves mirrors the run.
        """
        w0 = as_params(w0, "w0")
        if w0.size != grouping.n_params:
            raise ValueError("grouping does not cover the parameter vector")
        if streams is None:
            streams = ("twin1-forward", "twin2-forward", "twin1-reset", "twin2-reset")
        f1, f2, r1, r2 = (RngStream(seed, s) for s in streams)
        return cls(
            w1=w0.copy(),
            w2=w0.copy(),
            opt1=make_optimizer(optimizer_spec),
            opt2=make_optimizer(optimizer_spec),
            grouping=grouping,
            sigma_sq=np.zeros(grouping.n_groups),
            forward_rngs=(f1, f2),
            reset_rngs=(r1, r2),
        )

    @property
    def mean_weights(self):
        return 0.5 * (self.w1 + self.w2)

    @property
    def sigma(self):
        return np.sqrt(self.sigma_sq)


def _offending_group(grouping, arr):
    bad = np.flatnonzero(~np.isfinite(arr))
    return int(grouping.group_of[bad[0]]) if bad.size else None


def _checked(state, twin, loss, grad):
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    if grad.shape != state.w1.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match parameters {state.w1.shape}")
    # a non-finite entry makes the sum non-finite; cheaper than isfinite().all()
    if not (np.isfinite(loss) and np.isfinite(np.add.reduce(grad))):
        raise DivergedError(
            f"non-finite loss/gradient for twin {twin} at step {state.step + 1}",
            step=state.step + 1,
            twin=twin,
            group=_offending_group(state.grouping, grad),
        )
    return grad


def train_step(state, batch_pair, loss_and_grad, sample_weights=True, update_at="center"):
    """One paired update of both twins, followed by the variance update.

    ``loss_and_grad(w, inputs, targets)`` must return the loss and its
    gradient evaluated at ``w``. Returns ``(loss1, loss2)``; ``state`` is
    updated in place.
    """
    (x1, y1), (x2, y2) = batch_pair
    if sample_weights:
        wt1, wt2 = _twin_sample_unchecked(state.w1, state.w2, state.sigma_sq, state.grouping,
                                          *state.forward_rngs)
    else:
        wt1, wt2 = state.w1, state.w2
    loss1, g1 = loss_and_grad(wt1, x1, y1)
    g1 = _checked(state, 1, loss1, g1)
    loss2, g2 = loss_and_grad(wt2, x2, y2)
    g2 = _checked(state, 2, loss2, g2)
    base1, base2 = (state.w1, state.w2) if update_at == "center" else (wt1, wt2)
    state.w1 = state.opt1._update(base1, g1)
    state.w2 = state.opt2._update(base2, g2)
    state.step += 1
    sigma_sq = _sigma_unchecked(state.w1, state.w2, state.grouping)
    # any non-finite weight makes its group's variance non-finite
    if not np.isfinite(np.add.reduce(sigma_sq)):
        for twin, w in ((1, state.w1), (2, state.w2)):
            if not np.all(np.isfinite(w)):
                raise DivergedError(
                    f"non-finite weights for twin {twin} at step {state.step}",
                    step=state.step, twin=twin, group=_offending_group(state.grouping, w),
                )
        raise DivergedError(f"variance overflow at step {state.step}", step=state.step)
    state.sigma_sq = sigma_sq
    return float(loss1), float(loss2)


def mean_reset(state, mode="sample"):
    """Redraw both twins i.i.d. around their group means with scale ``sigma_l``.

    With ``mode="mean"`` both twins are set to the mean instead. Variances
    are recomputed from the new weights.
    """
    center = state.mean_weights
    if mode == "sample":
        state.w1 = sample_around(center, state.sigma_sq, state.grouping, state.reset_rngs[0])
        state.w2 = sample_around(center, state.sigma_sq, state.grouping, state.reset_rngs[1])
    elif mode == "mean":
        state.w1 = center.copy()
        state.w2 = center.copy()
    else:
        raise ValueError(f"unknown reset mode {mode!r}")
    state.sigma_sq = estimate_sigma(state.w1, state.w2, state.grouping)
    return state


class History:
    """Per-step and per-epoch training log.

    ``steps`` rows are ``(epoch, step, loss1, loss2, sigma_sq)``; ``epochs``
    rows hold epoch-mean losses and the variances at the end of the epoch
    (after any reset). ``resets`` lists the epochs after which a reset fired.
    """

    def __init__(self, group_labels):
        self.group_labels = tuple(group_labels)
        self.steps = []
        self.epochs = []
        self.resets = []
        self.extra = []
        self.wall_time = 0.0

    def step_sigma(self):
        """Array of shape (n_logged_steps, n_groups) of sigma values."""
        if not self.steps:
            return np.empty((0, len(self.group_labels)))
        return np.sqrt(np.array([row[4] for row in self.steps]))

    def epoch_sigma(self):
        if not self.epochs:
            return np.empty((0, len(self.group_labels)))
        return np.sqrt(np.array([row[4] for row in self.epochs]))


def _bootstraps(dataset, seed, bootstrap, streams):
    if bootstrap:
        return (
            make_bootstrap(dataset, RngStream(seed, streams[0])),
            make_bootstrap(dataset, RngStream(seed, streams[1])),
        )
    return BootstrapDataset.identity(dataset), BootstrapDataset.identity(dataset)


def run_training(problem, config, seed, grouping=None, w0=None, bootstrap=True,
                 streams=None, callback=None):
    """Train twins on ``problem`` for ``config.epochs`` epochs.

    ``problem`` provides ``dataset``, ``initial_params(seed)``,
    ``loss_and_grad(w, inputs, targets)`` and ``grouping(kind)``.
    ``streams`` maps the roles ``forward``, ``reset``, ``bootstrap`` and
    ``shuffle`` to (twin1, twin2) stream ids. ``callback(state, epoch)`` runs
    at the end of every epoch and may return a dict stored in
    ``history.extra``. Returns ``(state, history)``.
    """
    s = {
        "forward": ("twin1-forward", "twin2-forward"),
        "reset": ("twin1-reset", "twin2-reset"),
        "bootstrap": ("twin1-bootstrap", "twin2-bootstrap"),
        "shuffle": ("twin1-shuffle", "twin2-shuffle"),
    }
    s.update(streams or {})
    if grouping is None:
        grouping = problem.grouping()
    if w0 is None:
        w0 = problem.initial_params(seed)
    state = TwinState.create(w0, grouping, config.optimizer, seed,
                             streams=s["forward"] + s["reset"])
    d1, d2 = _bootstraps(problem.dataset, seed, bootstrap, s["bootstrap"])
    batches = PairedBatchIterator(
        d1, d2, min(config.batch_size, len(problem.dataset)),
        RngStream(seed, s["shuffle"][0]), RngStream(seed, s["shuffle"][1]),
        reuse_buffers=True,
    )
    resets = set(make_reset_schedule(config.reset).epochs_up_to(config.epochs))
    history = History(grouping.labels)
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        state.opt1.apply_schedule(epoch - 1)
        state.opt2.apply_schedule(epoch - 1)
        l1_sum = l2_sum = 0.0
        n = 0
        for pair in batches:
            l1, l2 = train_step(state, pair, problem.loss_and_grad,
                                config.sample_weights, config.update_at)
            l1_sum += l1
            l2_sum += l2
            n += 1
            if config.log == "step" and state.step % config.log_stride == 0:
                history.steps.append((epoch, state.step, l1, l2, state.sigma_sq.copy()))
        state.epoch = epoch
        if epoch in resets:
            mean_reset(state, config.reset_mode)
            history.resets.append(epoch)
        history.epochs.append((epoch, state.step, l1_sum / n, l2_sum / n, state.sigma_sq.copy()))
        if callback is not None:
            extra = callback(state, epoch)
            if extra is not None:
                history.extra.append(extra)
    history.wall_time = time.perf_counter() - t0
    return state, history


@dataclass
class BaselineState:
    w: np.ndarray
    opt: object
    epoch: int = 0
    step: int = 0


def run_baseline(problem, config, seed, w0=None, shuffle_stream="twin1-shuffle", callback=None):
    """Single model, original dataset, no weight sampling and no resets.

    Returns ``(state, history)`` where history step/epoch rows carry the
    single loss in both loss slots and an empty variance vector.
    """
    if w0 is None:
        w0 = problem.initial_params(seed)
    state = BaselineState(as_params(w0, "w0").copy(), make_optimizer(config.optimizer))
    base = BootstrapDataset.identity(problem.dataset)
    rng = RngStream(seed, shuffle_stream)
    batches = PairedBatchIterator(base, base, min(config.batch_size, len(base)), rng, rng)
    b = batches.batch_size
    x_buf = np.empty((b, base.base.inputs.shape[1]))
    y_buf = np.empty((b, base.base.targets.shape[1]))
    history = History(())
    t0 = time.perf_counter()
    empty = np.empty(0)
    for epoch in range(1, config.epochs + 1):
        state.opt.apply_schedule(epoch - 1)
        if batches.shuffle and b < len(base):
            order = base.indices[rng.permutation(len(base))]
        else:
            order = base.indices
        total, n = 0.0, 0
        for start in range(0, order.size, b):
            x, y = problem.dataset.take_into(order[start:start + b], x_buf, y_buf)
            loss, g = problem.loss_and_grad(state.w, x, y)
            if not np.isfinite(loss):
                raise DivergedError(f"non-finite loss at step {state.step + 1}",
                                    step=state.step + 1, twin=1)
            state.w = state.opt.step(state.w, g)
            state.step += 1
            total += float(loss)
            n += 1
            if config.log == "step" and state.step % config.log_stride == 0:
                history.steps.append((epoch, state.step, float(loss), float(loss), empty))
        state.epoch = epoch
        history.epochs.append((epoch, state.step, total / n, total / n, empty))
        if callback is not None:
            extra = callback(state, epoch)
            if extra is not None:
                history.extra.append(extra)
    history.wall_time = time.perf_counter() - t0
    return state, history
