"""Datasets, bootstrap resamples and the paired mini-batch iterator."""
import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Dataset:
    """``N`` examples with inputs of shape (N, d) and targets of shape (N, k).

    ``k`` may be zero for problems whose loss depends on the inputs only.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.inputs, dtype=np.float64)
        y = np.ascontiguousarray(self.targets, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.shape[0] < 1:
            raise ValueError("dataset must contain at least one example")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"inputs ({x.shape[0]}) and targets ({y.shape[0]}) differ in length")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.inputs.shape[0]

    def take(self, indices):
        return self.inputs[indices], self.targets[indices]

    def take_into(self, indices, x_buf, y_buf):
        """Gather rows into preallocated buffers; returns views of length ``len(indices)``.

        Indices are assumed valid. Avoids a fresh allocation per batch, which
        matters once a batch exceeds the allocator's mmap threshold.
        """
        k = len(indices)
        x = np.take(self.inputs, indices, axis=0, out=x_buf[:k], mode="clip")
        y = np.take(self.targets, indices, axis=0, out=y_buf[:k], mode="clip")
        return x, y

    @classmethod
    def from_inputs(cls, inputs):
        x = np.asarray(inputs, dtype=np.float64)
        return cls(x, np.empty((x.shape[0], 0)))


def load_csv(path):
    """Read a dataset whose header names columns ``x0..x{d-1}, y0..y{k-1}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        rows = [[float(v) for v in row] for row in reader if row]
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    ycols = [i for i, h in enumerate(header) if h.startswith("y")]
    if not xcols or len(xcols) + len(ycols) != len(header):
        raise ValueError(f"{path}: header must be x0..x{{d-1}}, y0..y{{k-1}}, got {header}")
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return Dataset(data[:, xcols], data[:, ycols])


def save_csv(dataset, path):
    d = dataset.inputs.shape[1]
    k = dataset.targets.shape[1]
    header = [f"x{i}" for i in range(d)] + [f"y{j}" for j in range(k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in np.hstack([dataset.inputs, dataset.targets]):
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True, eq=False)
class BootstrapDataset:
    """Index view over ``base``; indices are fixed for the whole run."""

    base: Dataset
    indices: np.ndarray

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        if idx.shape != (len(self.base),):
            raise ValueError("bootstrap must have exactly N indices")
        if idx.min() < 0 or idx.max() >= len(self.base):
            raise ValueError("bootstrap indices out of range")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.size

    @classmethod
    def identity(cls, base):
        """The original dataset viewed as a (non-resampled) bootstrap."""
        return cls(base, np.arange(len(base)))


def make_bootstrap(base, rng):
    """Draw ``N`` indices uniformly with replacement from ``[0, N)``."""
    n = len(base)
    if n < 1:
        raise ValueError("cannot bootstrap an empty dataset")
    return BootstrapDataset(base, rng.integers(0, n, size=n))


class PairedBatchIterator:
    """Yields position-paired mini-batches ``(b1, b2)`` for the two twins.

    Each epoch, each twin shuffles its own bootstrap indices with its own
    stream; the last batch may be short. Iterating once gives one epoch.
    Batches are ``(inputs, targets)`` tuples. With ``reuse_buffers=True`` the
    yielded arrays are views into per-twin buffers that the next batch
    overwrites; consume each pair before advancing.
    """

    def __init__(self, d1, d2, batch_size, rng1, rng2, shuffle=True, reuse_buffers=False):
        if d1.base is not d2.base and len(d1.base) != len(d2.base):
            raise ValueError("twin bootstraps must share the same base dataset")
        n = len(d1)
        if int(batch_size) != batch_size or not 1 <= batch_size <= n:
            raise ValueError(f"batch size must be in [1, {n}], got {batch_size}")
        self.d1, self.d2 = d1, d2
        self.batch_size = int(batch_size)
        self.rng1, self.rng2 = rng1, rng2
        self.shuffle = shuffle
        self.reuse_buffers = reuse_buffers
        self.epoch = 0
        self._buffers = None

    @property
    def batches_per_epoch(self):
        return -(-len(self.d1) // self.batch_size)

    def epoch_indices(self):
        """Return the two index orders for the next epoch and advance the counter."""
        if self.shuffle and self.batch_size < len(self.d1):
            i1 = self.d1.indices[self.rng1.permutation(len(self.d1))]
            i2 = self.d2.indices[self.rng2.permutation(len(self.d2))]
        else:
            i1, i2 = self.d1.indices, self.d2.indices
        self.epoch += 1
        return i1, i2

    def __iter__(self):
        i1, i2 = self.epoch_indices()
        b = self.batch_size
        base1, base2 = self.d1.base, self.d2.base
        if not self.reuse_buffers:
            for start in range(0, i1.size, b):
                yield base1.take(i1[start:start + b]), base2.take(i2[start:start + b])
            return
        if self._buffers is None:
            self._buffers = tuple(
                (np.empty((b, base.inputs.shape[1])), np.empty((b, base.targets.shape[1])))
                for base in (base1, base2)
            )
        (x1, y1), (x2, y2) = self._buffers
        for start in range(0, i1.size, b):
            yield (base1.take_into(i1[start:start + b], x1, y1),
                   base2.take_into(i2[start:start + b], x2, y2))


def paired_batches(d1, d2, batch_size, rng1, rng2):
    return PairedBatchIterator(d1, d2, batch_size, rng1, rng2)
