# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay numerically interchangeable with _pykernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, sqrt
from libc.stdint cimport uint64_t
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

from twinboot import _ziggurat

cnp.import_array()


cdef struct sfc64_state:
    # mirrors numpy's SFC64 state layout; checked against random_raw at import
    uint64_t s[4]
    int has_uint32
    unsigned int uinteger

cdef uint64_t ZK[256]
cdef double ZW[256]
cdef double ZF[256]
cdef double ZR = _ziggurat.R
cdef double ZINV_R = _ziggurat.INV_R
cdef uint64_t MASK52 = _ziggurat.MASK52

for _i in range(256):
    ZK[_i] = _ziggurat.KI[_i]
    ZW[_i] = _ziggurat.WI[_i]
    ZF[_i] = _ziggurat.FI[_i]


cdef inline double _next_double(bitgen_t *rng) noexcept nogil:
    return (rng.next_uint64(rng.state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline double _normal(bitgen_t *rng) noexcept nogil:
    # sign applied arithmetically; a data-dependent branch here mispredicts half the time
    cdef uint64_t r, rabs, idx
    cdef double x, s, xx, yy
    while True:
        r = rng.next_uint64(rng.state)
        idx = r & 0xff
        r >>= 8
        s = 1.0 - 2.0 * <double>(r & 1)
        rabs = (r >> 1) & MASK52
        x = s * (<double>rabs * ZW[idx])
        if rabs < ZK[idx]:
            return x
        if idx == 0:
            while True:
                xx = -ZINV_R * log1p(-_next_double(rng))
                yy = -log1p(-_next_double(rng))
                if yy + yy > xx * xx:
                    return s * (ZR + xx)
        if (ZF[idx - 1] - ZF[idx]) * _next_double(rng) + ZF[idx] < exp(-0.5 * x * x):
            return x


cdef inline uint64_t _sfc64_next(uint64_t *s) noexcept nogil:
    cdef uint64_t tmp = s[0] + s[1] + s[3]
    s[3] += 1
    s[0] = s[1] ^ (s[1] >> 11)
    s[1] = s[2] + (s[2] << 3)
    s[2] = ((s[2] << 24) | (s[2] >> 40)) + tmp
    return tmp


cdef inline double _sfc64_double(uint64_t *s) noexcept nogil:
    return (_sfc64_next(s) >> 11) * (1.0 / 9007199254740992.0)


cdef inline double _normal_sfc64(uint64_t *st) noexcept nogil:
    # same algorithm as _normal with the generator step inlined
    cdef uint64_t r, rabs, idx
    cdef double x, s, xx, yy
    while True:
        r = _sfc64_next(st)
        idx = r & 0xff
        r >>= 8
        s = 1.0 - 2.0 * <double>(r & 1)
        rabs = (r >> 1) & MASK52
        x = s * (<double>rabs * ZW[idx])
        if rabs < ZK[idx]:
            return x
        if idx == 0:
            while True:
                xx = -ZINV_R * log1p(-_sfc64_double(st))
                yy = -log1p(-_sfc64_double(st))
                if yy + yy > xx * xx:
                    return s * (ZR + xx)
        if (ZF[idx - 1] - ZF[idx]) * _sfc64_double(st) + ZF[idx] < exp(-0.5 * x * x):
            return x


cdef bint _sfc64_inline_ok():
    bg = np.random.SFC64(12345)
    ref = np.random.SFC64(12345).random_raw(64)
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bg.capsule, "BitGenerator")
    cdef sfc64_state *st = <sfc64_state *> rng.state
    cdef uint64_t loc[4]
    cdef int i
    for i in range(4):
        loc[i] = st.s[i]
    for i in range(64):
        if _sfc64_next(loc) != <uint64_t> ref[i]:
            return False
    for i in range(4):
        st.s[i] = loc[i]
    return bg.random_raw() == np.random.SFC64(12345).random_raw(65)[64]


SFC64_INLINE = _sfc64_inline_ok()
_SFC64 = np.random.SFC64


cdef void _fill_perturb(double *o, const double *c, const double *scale,
                        const cnp.int64_t *group_of, Py_ssize_t n, object bg):
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bg.capsule, "BitGenerator")
    cdef sfc64_state *st
    cdef uint64_t loc[4]
    cdef Py_ssize_t i
    cdef int k
    if SFC64_INLINE and type(bg) is _SFC64:
        st = <sfc64_state *> rng.state
        with bg.lock, nogil:
            for k in range(4):
                loc[k] = st.s[k]
            for i in range(n):
                o[i] = c[i] + scale[group_of[i]] * _normal_sfc64(loc)
            for k in range(4):
                st.s[k] = loc[k]
    else:
        with bg.lock, nogil:
            for i in range(n):
                o[i] = c[i] + scale[group_of[i]] * _normal(rng)


def standard_normal(bit_generator, Py_ssize_t n):
    """``n`` standard normals from the shared ziggurat tables."""
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with bit_generator.lock, nogil:
        for i in range(n):
            o[i] = _normal(rng)
    return out


def grouped_variance(const double[::1] a, const double[::1] b,
                     const cnp.int64_t[::1] group_of, const double[::1] two_d):
    """Per-group ``sum (a-b)^2 / two_d[group]``."""
    cdef Py_ssize_t i, n = a.shape[0], G = two_d.shape[0]
    cdef double d
    out = np.zeros(G, dtype=np.float64)
    cdef double[::1] acc = out
    for i in range(n):
        d = a[i] - b[i]
        acc[group_of[i]] += d * d
    for i in range(G):
        acc[i] = acc[i] / two_d[i]
    return out


def twin_normal_perturb(const double[::1] c1, const double[::1] c2,
                        const double[::1] sigma_sq, const cnp.int64_t[::1] group_of,
                        bg1, bg2):
    """Both twins' forward samples: ``c_k + sqrt(sigma_sq[group]) * z_k``, ``z_k`` from ``bg_k``."""
    cdef Py_ssize_t i, n = c1.shape[0], G = sigma_sq.shape[0]
    cdef double scale[4096]
    cdef double *sp = scale
    scale_arr = None
    if G > 4096:
        scale_arr = np.sqrt(sigma_sq)
        sp = <double *> cnp.PyArray_DATA(scale_arr)
    else:
        for i in range(G):
            scale[i] = sqrt(sigma_sq[i])
    o1_arr = np.empty(n, dtype=np.float64)
    o2_arr = np.empty(n, dtype=np.float64)
    if n:
        _fill_perturb(<double *> cnp.PyArray_DATA(o1_arr), &c1[0], sp, &group_of[0], n, bg1)
        _fill_perturb(<double *> cnp.PyArray_DATA(o2_arr), &c2[0], sp, &group_of[0], n, bg2)
    return o1_arr, o2_arr


def grouped_sqdist(const double[::1] a, const double[::1] b,
                   const cnp.int64_t[::1] group_of, Py_ssize_t n_groups):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double d
    out = np.zeros(n_groups, dtype=np.float64)
    cdef double[::1] acc = out
    for i in range(n):
        d = a[i] - b[i]
        acc[group_of[i]] += d * d
    return out


def grouped_perturb(const double[::1] center, const double[::1] scale,
                    const cnp.int64_t[::1] group_of, const double[::1] z):
    cdef Py_ssize_t i, n = center.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = center[i] + scale[group_of[i]] * z[i]
    return out


def grouped_normal_perturb(const double[::1] center, const double[::1] scale,
                           const cnp.int64_t[::1] group_of, bit_generator):
    """``center + scale[group] * z`` with ``z = standard_normal(bit_generator, n)``."""
    cdef Py_ssize_t n = center.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n:
        _fill_perturb(<double *> cnp.PyArray_DATA(out), &center[0], &scale[0], &group_of[0],
                      n, bit_generator)
    return out


def adam_update(double[::1] w, const double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps,
                double bias1, double bias2):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double mhat, vhat
    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        mhat = m[i] / bias1
        vhat = v[i] / bias2
        w[i] = w[i] - lr * mhat / (sqrt(vhat) + eps)


def two_well_loss_grad(const double[::1] w, const double[:, ::1] offsets,
                       const double[::1] mu1, const double[::1] mu2, double width):
    cdef Py_ssize_t i, n = offsets.shape[0]
    cdef double inv2s2 = 1.0 / (2.0 * width * width)
    cdef double invs2 = 1.0 / (width * width)
    cdef double ux1, uy1, ux2, uy2, e1, e2
    cdef double loss = 0.0, gx = 0.0, gy = 0.0
    for i in range(n):
        ux1 = w[0] - offsets[i, 0] - mu1[0]
        uy1 = w[1] - offsets[i, 1] - mu1[1]
        ux2 = w[0] - offsets[i, 0] - mu2[0]
        uy2 = w[1] - offsets[i, 1] - mu2[1]
        e1 = exp(-(ux1 * ux1 + uy1 * uy1) * inv2s2)
        e2 = exp(-(ux2 * ux2 + uy2 * uy2) * inv2s2)
        loss -= e1 + e2
        gx += (e1 * ux1 + e2 * ux2) * invs2
        gy += (e1 * uy1 + e2 * uy2) * invs2
    grad = np.empty(2, dtype=np.float64)
    grad[0] = gx / n
    grad[1] = gy / n
    return loss / n, grad
