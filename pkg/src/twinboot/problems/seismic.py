"""Synthetic nonlinear inversion: ``y = K f(v) + noise`` on a 2-D grid."""
import numpy as np
from scipy.ndimage import gaussian_filter

from twinboot.core import group_by_patches, group_whole
from twinboot.data import Dataset
from twinboot.rng import RngStream


def smooth_field(rng, height, width, smoothing=3.0):
    """White noise blurred with a Gaussian of ``smoothing`` cells, rescaled to [-1, 1]."""
    noise = rng.standard_normal((height, width))
    field = gaussian_filter(noise, sigma=smoothing, mode="reflect")
    lo, hi = field.min(), field.max()
    return (2.0 * (field - lo) / (hi - lo) - 1.0).ravel()


def gaussian_kernels(rng, n_rows, height, width, kernel_width):
    """Rows are 2-D Gaussian bumps at uniform random centres, unit L2 norm."""
    rows, cols = np.divmod(np.arange(height * width), width)
    cr = rng.uniform(0.0, height - 1.0, size=n_rows)
    cc = rng.uniform(0.0, width - 1.0, size=n_rows)
    k = np.exp(-((rows[None, :] - cr[:, None]) ** 2 + (cols[None, :] - cc[:, None]) ** 2)
               / (2.0 * kernel_width ** 2))
    # flush negligible tails: subnormal entries make every matvec several times slower
    k[k < 1e-30] = 0.0
    return k / np.linalg.norm(k, axis=1, keepdims=True)


class SeismicProblem:
    """Recover the grid field ``v`` from noisy nonlinear kernel measurements.

    ``nonlinearity`` is ``"tanh"`` (``f(v) = tanh(beta v)``) or ``"cubic"``
    (``f(v) = beta v - (beta v)^3 / 3``). Measurement rows are split into a
    training dataset (rows of ``K`` as inputs, ``y`` as targets) and a held-out
    test set.
    """

    name = "seismic"

    def __init__(self, v_true, kernel, y, beta, noise_sigma, shape, test_rows,
                 nonlinearity="tanh"):
        if nonlinearity not in ("tanh", "cubic"):
            raise ValueError("nonlinearity must be 'tanh' or 'cubic'")
        self.v_true = v_true
        self.kernel = kernel
        self.y = y
        self.beta = float(beta)
        self.noise_sigma = float(noise_sigma)
        self.shape = tuple(shape)
        self.nonlinearity = nonlinearity
        self.test_rows = np.sort(test_rows)
        train_rows = np.setdiff1d(np.arange(kernel.shape[0]), self.test_rows)
        self.train_rows = train_rows
        self.dataset = Dataset(kernel[train_rows], y[train_rows])
        self.n_params = v_true.size

    def f(self, v):
        bv = self.beta * v
        if self.nonlinearity == "tanh":
            return np.tanh(bv)
        return bv - bv ** 3 / 3.0

    def f_prime(self, v):
        bv = self.beta * v
        if self.nonlinearity == "tanh":
            return self.beta * (1.0 - np.tanh(bv) ** 2)
        return self.beta * (1.0 - bv ** 2)

    def forward(self, v, rows=None):
        k = self.kernel if rows is None else self.kernel[rows]
        return k @ self.f(v)

    def loss_and_grad(self, v, inputs, targets):
        """Mean squared residual over the given rows of ``K`` and its gradient in ``v``."""
        bv = self.beta * v
        if self.nonlinearity == "tanh":
            fv = np.tanh(bv)
            dfv = self.beta * (1.0 - fv * fv)
        else:
            fv = bv - bv ** 3 / 3.0
            dfv = self.beta * (1.0 - bv * bv)
        r = inputs @ fv - targets[:, 0]
        n = r.size
        loss = float(r @ r) / n
        grad = (2.0 / n) * (r @ inputs) * dfv
        return loss, grad

    def loss_on(self, v, rows):
        r = self.kernel[rows] @ self.f(v) - self.y[rows]
        return float(r @ r) / r.size

    def train_loss(self, v):
        return self.loss_on(v, self.train_rows)

    def test_loss(self, v):
        return self.loss_on(v, self.test_rows)

    def recon_mse(self, v):
        return float(np.mean((v - self.v_true) ** 2))

    def predict(self, w, inputs):
        return np.asarray(inputs) @ self.f(w)

    def initial_params(self, seed=None):
        return np.zeros(self.n_params)

    def grouping(self, kind=None, patch=(3, 3)):
        if kind in (None, "patch"):
            return group_by_patches(self.shape[0], self.shape[1], *patch)
        if kind == "whole":
            return group_whole(self.n_params)
        if kind == "unit":
            return group_by_patches(self.shape[0], self.shape[1], 1, 1)
        raise ValueError(f"unknown grouping {kind!r} for seismic problem")


def build_seismic(seed, height=30, width=30, n_measurements=4096, beta=1.0,
                  noise_sigma=0.01, kernel_width=2.0, test_fraction=0.2,
                  smoothing=3.0, nonlinearity="tanh"):
    """Deterministic problem instance for ``seed``."""
    if min(height, width, n_measurements) < 1 or not kernel_width > 0:
        raise ValueError("grid and measurement sizes must be positive, kernel_width > 0")
    if not 0 <= test_fraction < 1:
        raise ValueError("test_fraction must be in [0, 1)")
    rng = RngStream(seed, "problem")
    v_true = smooth_field(rng, height, width, smoothing)
    kernel = gaussian_kernels(rng, n_measurements, height, width, kernel_width)
    noise_rng = RngStream(seed, "data-noise")
    problem = SeismicProblem(v_true, kernel, np.zeros(n_measurements), beta, noise_sigma,
                             (height, width), np.array([], dtype=np.int64), nonlinearity)
    y = problem.forward(v_true) + noise_sigma * noise_rng.standard_normal(n_measurements)
    n_test = int(round(test_fraction * n_measurements))
    test_rows = rng.permutation(n_measurements)[:n_test]
    return SeismicProblem(v_true, kernel, y, beta, noise_sigma, (height, width), test_rows,
                          nonlinearity)
