"""First-order optimizers and learning-rate schedules.

Each twin owns one optimizer instance; ``step`` returns the updated
parameters and keeps moment estimates internally.
"""
import numpy as np

from twinboot import kernels


class DivergedError(FloatingPointError):
    """Raised when a loss, gradient or parameter vector becomes non-finite."""

    def __init__(self, message, step=None, twin=None, group=None):
        super().__init__(message)
        self.step = step
        self.twin = twin
        self.group = group


class ConstantLR:
    def __call__(self, lr0, epoch):
        return lr0

    def to_dict(self):
        return {"kind": "constant"}


class StepDecayLR:
    """Multiply by ``factor`` every ``every`` epochs, or at each of ``milestones``."""

    def __init__(self, factor, every=None, milestones=None):
        if not factor > 0:
            raise ValueError("decay factor must be positive")
        if (every is None) == (milestones is None):
            raise ValueError("give exactly one of 'every' or 'milestones'")
        if every is not None and every < 1:
            raise ValueError("'every' must be >= 1")
        self.factor = factor
        self.every = every
        self.milestones = None if milestones is None else sorted(int(m) for m in milestones)

    def __call__(self, lr0, epoch):
        if self.every is not None:
            n = epoch // self.every
        else:
            n = sum(1 for m in self.milestones if epoch >= m)
        return lr0 * self.factor ** n

    def to_dict(self):
        d = {"kind": "step", "factor": self.factor}
        if self.every is not None:
            d["every"] = self.every
        else:
            d["milestones"] = list(self.milestones)
        return d


class ExponentialLR:
    def __init__(self, rate):
        if not rate > 0:
            raise ValueError("exponential decay rate must be positive")
        self.rate = rate

    def __call__(self, lr0, epoch):
        return lr0 * self.rate ** epoch

    def to_dict(self):
        return {"kind": "exponential", "rate": self.rate}


def make_schedule(spec):
    """Build a schedule from a dict like ``{"kind": "step", "factor": 0.5, "milestones": [20, 30]}``."""
    if spec is None:
        return ConstantLR()
    spec = dict(spec)
    kind = spec.pop("kind", "constant")
    if kind == "constant":
        return ConstantLR()
    if kind == "step":
        return StepDecayLR(**spec)
    if kind == "exponential":
        return ExponentialLR(**spec)
    raise ValueError(f"unknown schedule kind {kind!r}")


class Optimizer:
    def __init__(self, lr, schedule=None):
        if not lr > 0:
            raise ValueError("learning rate must be positive")
        self.lr0 = float(lr)
        self.lr = float(lr)
        self.schedule = schedule if schedule is not None else ConstantLR()
        self.t = 0

    def apply_schedule(self, epoch):
        """Set the learning rate for ``epoch`` (0-based count of completed epochs)."""
        if epoch < 0:
            raise ValueError("epoch must be >= 0")
        self.lr = self.schedule(self.lr0, epoch)
        return self.lr

    def _check(self, w, g):
        w = np.ascontiguousarray(w, dtype=np.float64)
        g = np.ascontiguousarray(g, dtype=np.float64)
        if w.shape != g.shape:
            raise ValueError(f"parameter/gradient shape mismatch {w.shape} vs {g.shape}")
        if not np.isfinite(np.add.reduce(g)):
            raise DivergedError(f"non-finite gradient at step {self.t + 1}", step=self.t + 1)
        return w, g


class SGD(Optimizer):
    kind = "sgd"

    def step(self, w, g):
        w, g = self._check(w, g)
        return self._update(w, g)

    def _update(self, w, g):
        self.t += 1
        return w - self.lr * g

    def config(self):
        return {"kind": self.kind, "lr": self.lr0, "schedule": self.schedule.to_dict()}


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, schedule=None):
        super().__init__(lr, schedule)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None

    def step(self, w, g):
        w, g = self._check(w, g)
        return self._update(w, g)

    def _update(self, w, g):
        # w, g: contiguous float64 of equal shape, g finite
        if self.m is None:
            self.m = np.zeros_like(w)
            self.v = np.zeros_like(w)
        elif self.m.shape != w.shape:
            raise ValueError("parameter length changed between steps")
        self.t += 1
        out = w.copy()
        kernels.adam_update(
            out, g, self.m, self.v, self.lr, self.beta1, self.beta2, self.eps,
            1.0 - self.beta1 ** self.t, 1.0 - self.beta2 ** self.t,
        )
        return out

    def config(self):
        return {
            "kind": self.kind,
            "lr": self.lr0,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "schedule": self.schedule.to_dict(),
        }


def make_optimizer(spec):
    """Build an optimizer from ``{"kind": "adam", "lr": 1e-3, "schedule": {...}}``."""
    spec = dict(spec)
    kind = spec.pop("kind", "sgd")
    schedule = make_schedule(spec.pop("schedule", None))
    if kind == "sgd":
        return SGD(schedule=schedule, **spec)
    if kind == "adam":
        return Adam(schedule=schedule, **spec)
    raise ValueError(f"unknown optimizer kind {kind!r}")
