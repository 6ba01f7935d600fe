import numpy as np

from twinboot.core import group_by_layers, group_whole
from twinboot.data import Dataset
from twinboot.rng import RngStream


def loss_and_grad_gaussian(w, points):
    """Mean squared distance from ``w`` to the batch points, and its gradient."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        raise ValueError("empty batch")
    diff = w - points
    loss = np.einsum("ij,ij->", diff, diff) / points.shape[0]
    return loss, 2.0 * (w - points.mean(axis=0))


class GaussianMeanProblem:
    """Estimate the mean of an isotropic 2-D Gaussian cloud.

    The model output is the parameter point itself, so the minimiser of the
    loss on any batch is the batch mean and the per-parameter variance of the
    full-data minimiser is ``variance / n``.
    """

    name = "gaussian"

    def __init__(self, n=400, variance=120.0, center=(0.0, 0.0), init=(0.0, 0.0), seed=0):
        if n < 1 or variance < 0:
            raise ValueError("need n >= 1 and variance >= 0")
        self.n = int(n)
        self.variance = float(variance)
        self.center = np.asarray(center, dtype=np.float64)
        self.init = np.asarray(init, dtype=np.float64)
        rng = RngStream(seed, "data-noise")
        pts = self.center + np.sqrt(self.variance) * rng.standard_normal((self.n, 2))
        self.dataset = Dataset.from_inputs(pts)
        self.n_params = 2

    @property
    def sigma_data(self):
        return float(np.sqrt(self.variance))

    def initial_params(self, seed=None):
        return self.init.copy()

    def loss_and_grad(self, w, inputs, targets=None):
        return loss_and_grad_gaussian(w, inputs)

    def predict(self, w, inputs):
        inputs = np.asarray(inputs)
        return np.broadcast_to(w, (inputs.shape[0], 2)).copy()

    def grouping(self, kind=None):
        if kind in (None, "whole"):
            return group_whole(2)
        if kind == "unit":
            return group_by_layers([1, 1], labels=("w0", "w1"))
        raise ValueError(f"unknown grouping {kind!r} for gaussian problem")
