"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``."""
import math

import numpy as np

from twinboot._ziggurat import FI, INV_R, KI, MASK52, R, WI

_TO_UNIT = 1.0 / 9007199254740992.0


def _fast_path(raw):
    """Per-draw fast-path value and acceptance; depends on each raw word alone."""
    idx = (raw & np.uint64(0xFF)).astype(np.intp)
    r = raw >> np.uint64(8)
    s = 1.0 - 2.0 * (r & np.uint64(1)).astype(np.float64)
    rabs = (r >> np.uint64(1)) & np.uint64(MASK52)
    return s * (rabs.astype(np.float64) * WI[idx]), rabs < KI[idx]


class _RawBuffer:
    """Sequential reader over pre-drawn raw 64-bit outputs, refilled on demand."""

    def __init__(self, bit_generator, n):
        self.bit_generator = bit_generator
        self.raw = bit_generator.random_raw(n + n // 16 + 16)
        self.x, self.ok = _fast_path(self.raw)
        self.bad = np.flatnonzero(~self.ok)
        self.pos = 0

    def extend(self, k):
        more = self.bit_generator.random_raw(k)
        x, ok = _fast_path(more)
        self.bad = np.concatenate([self.bad, self.raw.size + np.flatnonzero(~ok)])
        self.raw = np.concatenate([self.raw, more])
        self.x = np.concatenate([self.x, x])
        self.ok = np.concatenate([self.ok, ok])

    def next(self):
        if self.pos == self.raw.size:
            self.extend(64)
        r = int(self.raw[self.pos])
        self.pos += 1
        return r

    def next_double(self):
        return (self.next() >> 11) * _TO_UNIT


def _slow_normal(buf, r):
    """Finish one draw whose fast-path test failed; mirrors ``_normal`` in C."""
    while True:
        idx = r & 0xFF
        r >>= 8
        s = 1.0 - 2.0 * (r & 1)
        rabs = (r >> 1) & MASK52
        x = s * (float(rabs) * WI[idx])
        if rabs < int(KI[idx]):
            return x
        if idx == 0:
            while True:
                xx = -INV_R * math.log1p(-buf.next_double())
                yy = -math.log1p(-buf.next_double())
                if yy + yy > xx * xx:
                    return s * (R + xx)
        if (FI[idx - 1] - FI[idx]) * buf.next_double() + FI[idx] < math.exp(-0.5 * x * x):
            return x
        r = buf.next()


def standard_normal(bit_generator, n):
    """Same draws as the compiled sampler: fast path vectorized, rejections replayed in order."""
    out = np.empty(n)
    saved = bit_generator.state
    buf = _RawBuffer(bit_generator, n)
    filled = 0
    while filled < n:
        need = n - filled
        if buf.pos + need > buf.raw.size:
            buf.extend(buf.pos + need - buf.raw.size + 16)
        k = np.searchsorted(buf.bad, buf.pos)
        q = buf.bad[k] if k < buf.bad.size else buf.raw.size
        run = min(q - buf.pos, need)
        out[filled:filled + run] = buf.x[buf.pos:buf.pos + run]
        filled += run
        buf.pos += run
        if filled < n:
            out[filled] = _slow_normal(buf, buf.next())
            filled += 1
    # leave the generator exactly buf.pos draws past its starting state
    if buf.pos != buf.raw.size:
        bit_generator.state = saved
        bit_generator.random_raw(buf.pos)
    return out


def grouped_sqdist(a, b, group_of, n_groups):
    d = a - b
    return np.bincount(group_of, weights=d * d, minlength=n_groups).astype(np.float64)


def grouped_variance(a, b, group_of, two_d):
    return grouped_sqdist(a, b, group_of, two_d.size) / two_d


def twin_normal_perturb(c1, c2, sigma_sq, group_of, bg1, bg2):
    scale = np.sqrt(sigma_sq)
    return (grouped_normal_perturb(c1, scale, group_of, bg1),
            grouped_normal_perturb(c2, scale, group_of, bg2))


def grouped_perturb(center, scale, group_of, z):
    return center + scale[group_of] * z


def grouped_normal_perturb(center, scale, group_of, bit_generator):
    z = standard_normal(bit_generator, center.size)
    return center + scale[group_of] * z


def adam_update(w, g, m, v, lr, beta1, beta2, eps, bias1, bias2):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    w -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)


def two_well_loss_grad(w, offsets, mu1, mu2, width):
    u1 = w - offsets - mu1
    u2 = w - offsets - mu2
    e1 = np.exp(-np.einsum("ij,ij->i", u1, u1) / (2.0 * width * width))
    e2 = np.exp(-np.einsum("ij,ij->i", u2, u2) / (2.0 * width * width))
    n = offsets.shape[0]
    loss = -(e1 + e2).sum() / n
    grad = (e1[:, None] * u1 + e2[:, None] * u2).sum(axis=0) / (width * width) / n
    return loss, grad
