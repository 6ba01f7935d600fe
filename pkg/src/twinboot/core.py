"""Parameter groupings, grouped two-sample variance and grouped Gaussian sampling.

Parameters are flat float64 vectors. A :class:`ParamGrouping` partitions the
indices ``0..P-1`` into groups; per-group variances are stored as a float64
array indexed by group id.
"""
from dataclasses import dataclass

import numpy as np

from twinboot import kernels


def as_params(values, name="w"):
    """Return ``values`` as a contiguous, finite, 1-D float64 array."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class ParamGrouping:
    """Assignment of every parameter index to exactly one group.

    Attributes
    ----------
    group_of : ndarray of int64, shape (P,)
        Group id of each parameter; ids are ``0..n_groups-1``.
    sizes : ndarray of int64, shape (n_groups,)
        Number of parameters ``D_l`` in each group.
    labels : tuple of str
        Human-readable group names, used as column suffixes in outputs.
    """

    group_of: np.ndarray
    sizes: np.ndarray
    labels: tuple

    @classmethod
    def from_group_ids(cls, group_of, labels=None):
        group_of = np.ascontiguousarray(group_of, dtype=np.int64)
        if group_of.ndim != 1 or group_of.size == 0:
            raise ValueError("group_of must be a non-empty 1-D array")
        if group_of.min() < 0:
            raise ValueError("group ids must be non-negative")
        sizes = np.bincount(group_of).astype(np.int64)
        if np.any(sizes == 0):
            raise ValueError("group ids must be contiguous 0..G-1 with no empty group")
        if labels is None:
            labels = tuple(str(i) for i in range(sizes.size))
        elif len(labels) != sizes.size:
            raise ValueError("need one label per group")
        group_of.setflags(write=False)
        sizes.setflags(write=False)
        return cls(group_of, sizes, tuple(labels))

    def __post_init__(self):
        two_d = 2.0 * np.asarray(self.sizes, dtype=np.float64)
        two_d.setflags(write=False)
        object.__setattr__(self, "two_d", two_d)

    @property
    def n_params(self):
        return self.group_of.size

    @property
    def n_groups(self):
        return self.sizes.size

    def __eq__(self, other):
        if not isinstance(other, ParamGrouping):
            return NotImplemented
        return np.array_equal(self.group_of, other.group_of) and self.labels == other.labels

    def __hash__(self):
        return hash((self.group_of.tobytes(), self.labels))

    def broadcast(self, per_group):
        """Expand a per-group array to one value per parameter."""
        return np.asarray(per_group)[self.group_of]


def _check_positive(name, value):
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def group_by_layers(layer_sizes, labels=None):
    """Consecutive blocks of the given sizes, e.g. one group per network layer."""
    sizes = [_check_positive("layer size", s) for s in layer_sizes]
    if not sizes:
        raise ValueError("layer_sizes must be non-empty")
    group_of = np.repeat(np.arange(len(sizes)), sizes)
    return ParamGrouping.from_group_ids(group_of, labels)


def group_by_patches(grid_height, grid_width, patch_height, patch_width):
    """Rectangular patches over a row-major grid.

    Cell ``(r, c)`` goes to patch ``(r // patch_height, c // patch_width)``;
    when the grid is not divisible the trailing partial patches are their own
    (smaller) groups. Patch ids are row-major over the patch grid.
    """
    gh = _check_positive("grid_height", grid_height)
    gw = _check_positive("grid_width", grid_width)
    ph = _check_positive("patch_height", patch_height)
    pw = _check_positive("patch_width", patch_width)
    n_pc = -(-gw // pw)
    rows, cols = np.divmod(np.arange(gh * gw), gw)
    group_of = (rows // ph) * n_pc + cols // pw
    n_pr = -(-gh // ph)
    labels = tuple(f"p{i}_{j}" for i in range(n_pr) for j in range(n_pc))
    return ParamGrouping.from_group_ids(group_of, labels)


def group_whole(n_params):
    """A single group spanning the whole vector."""
    n = _check_positive("n_params", n_params)
    return ParamGrouping.from_group_ids(np.zeros(n, dtype=np.int64), ("all",))


def estimate_sigma(w1, w2, grouping):
    """Grouped two-sample variance ``||w1_l - w2_l||^2 / (2 D_l)`` per group.

    With :func:`group_whole` this is the whole-vector average.
    """
    w1 = np.ascontiguousarray(w1, dtype=np.float64)
    w2 = np.ascontiguousarray(w2, dtype=np.float64)
    if w1.shape != w2.shape or w1.ndim != 1:
        raise ValueError(f"length mismatch: {w1.shape} vs {w2.shape}")
    if w1.size != grouping.n_params:
        raise ValueError(
            f"grouping covers {grouping.n_params} parameters, vectors have {w1.size}"
        )
    return kernels.grouped_variance(w1, w2, grouping.group_of, grouping.two_d)


def sample_around(center, sigma_sq, grouping, rng):
    """Draw ``center + sigma_l * z`` with ``z`` standard normal.

    Exactly ``P`` normal draws are consumed from ``rng`` whatever the values
    of ``sigma_sq``, so zero-variance groups do not shift later draws.
    """
    center = np.ascontiguousarray(center, dtype=np.float64)
    sigma_sq = np.ascontiguousarray(sigma_sq, dtype=np.float64)
    if center.size != grouping.n_params:
        raise ValueError(
            f"grouping covers {grouping.n_params} parameters, center has {center.size}"
        )
    if sigma_sq.shape != (grouping.n_groups,):
        raise ValueError(f"need one variance per group ({grouping.n_groups})")
    if np.any(sigma_sq < 0) or not np.all(np.isfinite(sigma_sq)):
        raise ValueError("variances must be finite and non-negative")
    return kernels.grouped_normal_perturb(center, np.sqrt(sigma_sq), grouping.group_of,
                                          rng.bit_generator)


def _twin_sample_unchecked(c1, c2, sigma_sq, grouping, rng1, rng2):
    # engine-internal: validated float64 inputs, one compiled call for both twins
    return kernels.twin_normal_perturb(c1, c2, sigma_sq, grouping.group_of,
                                       rng1.bit_generator, rng2.bit_generator)


def _sigma_unchecked(w1, w2, grouping):
    return kernels.grouped_variance(w1, w2, grouping.group_of, grouping.two_d)
