import numpy as np

from twinboot import kernels
from twinboot.core import group_by_layers, group_whole
from twinboot.data import Dataset
from twinboot.rng import RngStream


def two_well_potential(w, mu1, mu2, width):
    """Noiseless landscape ``-exp(-|w-mu1|^2/2s^2) - exp(-|w-mu2|^2/2s^2)``; ``w`` may be (..., 2)."""
    w = np.asarray(w, dtype=np.float64)
    s2 = 2.0 * width * width
    return -np.exp(-np.sum((w - mu1) ** 2, axis=-1) / s2) - np.exp(-np.sum((w - mu2) ** 2, axis=-1) / s2)


class TwoBasinProblem:
    """Symmetric two-well landscape with data-offset noise.

    The wells sit at ``(-d/2, 0)`` and ``(d/2, 0)``. Each data point is an
    offset ``delta_i ~ N(0, sigma_data^2 I)`` and its loss is the potential at
    ``w - delta_i``; a batch loss is the mean over its offsets. Finite data
    therefore shifts the effective minimum just as in the Gaussian-mean case.
    """

    name = "two-basin"

    def __init__(self, d=2.0, width=1.0, sigma_data=0.5, m=100, init=None, seed=0):
        if not width > 0:
            raise ValueError("well width must be positive")
        if m < 1 or sigma_data < 0:
            raise ValueError("need m >= 1 and sigma_data >= 0")
        self.d = float(d)
        self.width = float(width)
        self.sigma_data = float(sigma_data)
        self.m = int(m)
        self.mu1 = np.array([-self.d / 2.0, 0.0])
        self.mu2 = np.array([self.d / 2.0, 0.0])
        self.init = np.zeros(2) if init is None else np.asarray(init, dtype=np.float64)
        rng = RngStream(seed, "data-noise")
        offsets = self.sigma_data * rng.standard_normal((self.m, 2))
        self.dataset = Dataset.from_inputs(offsets)
        self.n_params = 2

    def initial_params(self, seed=None):
        return self.init.copy()

    def loss_and_grad(self, w, inputs, targets=None):
        w = np.ascontiguousarray(w, dtype=np.float64)
        offsets = np.ascontiguousarray(inputs, dtype=np.float64)
        return kernels.two_well_loss_grad(w, offsets, self.mu1, self.mu2, self.width)

    def landscape(self, w):
        return two_well_potential(w, self.mu1, self.mu2, self.width)

    def predict(self, w, inputs):
        inputs = np.asarray(inputs)
        return np.broadcast_to(w, (inputs.shape[0], 2)).copy()

    def basin_of(self, w):
        """0 if ``w`` is nearer the first well centre, 1 if nearer the second."""
        w = np.asarray(w)
        return int(np.sum((w - self.mu2) ** 2) < np.sum((w - self.mu1) ** 2))

    def grouping(self, kind=None):
        if kind in (None, "whole"):
            return group_whole(2)
        if kind == "unit":
            return group_by_layers([1, 1], labels=("w0", "w1"))
        raise ValueError(f"unknown grouping {kind!r} for two-basin problem")
