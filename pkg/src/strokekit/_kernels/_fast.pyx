# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: sliding RMS and sliding-window one-sided PSD.

The spectral kernel runs an iterative radix-2 complex FFT per frame; at the
default 128-sample window with unit hop this loop dominates the pipeline's
runtime, which is why it lives in C.
"""
from libc.math cimport cos, sin, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

NAME = "cython"

DEF TWO_PI = 6.283185307179586476925286766559


cdef void _fft(double* re, double* im, int n, int* rev, double* twr, double* twi) noexcept nogil:
    """In-place complex FFT, n a power of two, tables precomputed."""
    cdef int i, j, k, m, half, step, base
    cdef double tr, ti, vr, vi, ur, ui
    for i in range(n):
        j = rev[i]
        if j > i:
            tr = re[i]; re[i] = re[j]; re[j] = tr
            ti = im[i]; im[i] = im[j]; im[j] = ti
    m = 2
    while m <= n:
        half = m >> 1
        step = n / m
        base = 0
        while base < n:
            for j in range(half):
                k = j * step
                vr = re[base + half + j] * twr[k] - im[base + half + j] * twi[k]
                vi = re[base + half + j] * twi[k] + im[base + half + j] * twr[k]
                ur = re[base + j]
                ui = im[base + j]
                re[base + j] = ur + vr
                im[base + j] = ui + vi
                re[base + half + j] = ur - vr
                im[base + half + j] = ui - vi
            base += m
        m <<= 1


def sliding_rms(const double[::1] x, int window, int hop):
    """RMS over length-``window`` windows starting every ``hop`` samples."""
    cdef Py_ssize_t n_out = (x.shape[0] - window) // hop + 1
    out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t f, start
    cdef int i
    cdef double acc
    with nogil:
        for f in range(n_out):
            start = f * hop
            acc = 0.0
            for i in range(window):
                acc += x[start + i] * x[start + i]
            out[f] = sqrt(acc / window)
    return out_arr


def psd_frames(const double[::1] x, const double[::1] weights, int hop, int n_keep, double scale):
    """One-sided PSD of each windowed frame, first ``n_keep`` bins.

    ``scale`` must be ``1 / (sample_rate * sum(weights**2))``; interior bins
    (0 < k < n_fft/2) are doubled.
    """
    cdef int n = weights.shape[0]
    cdef Py_ssize_t n_frames = (x.shape[0] - n) // hop + 1
    cdef int half = n >> 1
    out_arr = np.empty((n_frames, n_keep), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    cdef int* rev = <int*> malloc(n * sizeof(int))
    cdef double* twr = <double*> malloc(half * sizeof(double))
    cdef double* twi = <double*> malloc(half * sizeof(double))
    cdef double* re = <double*> malloc(n * sizeof(double))
    cdef double* im = <double*> malloc(n * sizeof(double))
    if not (rev and twr and twi and re and im):
        free(rev); free(twr); free(twi); free(re); free(im)
        raise MemoryError()

    cdef int i, j, bit, k
    cdef Py_ssize_t f, start
    cdef double p
    try:
        # bit-reversal permutation and twiddle tables
        rev[0] = 0
        for i in range(1, n):
            j = 0
            k = i
            bit = n >> 1
            while bit:
                if k & 1:
                    j |= bit
                k >>= 1
                bit >>= 1
            rev[i] = j
        for k in range(half):
            twr[k] = cos(-TWO_PI * k / n)
            twi[k] = sin(-TWO_PI * k / n)

        with nogil:
            for f in range(n_frames):
                start = f * hop
                for i in range(n):
                    re[i] = x[start + i] * weights[i]
                    im[i] = 0.0
                _fft(re, im, n, rev, twr, twi)
                for k in range(n_keep):
                    p = (re[k] * re[k] + im[k] * im[k]) * scale
                    if 0 < k < half:
                        p *= 2.0
                    out[f, k] = p
    finally:
        free(rev); free(twr); free(twi); free(re); free(im)
    return out_arr
