# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels for the time-stepping loops.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature; ``modscat.kernels`` picks one of the two at import time.
"""

from libc.math cimport cos, sin

import numpy as np


def nonlinear_phase(double complex[::1] u, double coef):
    """In place: u <- u * exp(-i coef |u|^2)."""
    cdef Py_ssize_t j, n = u.shape[0]
    cdef double re, im, th, c, s
    for j in range(n):
        re = u[j].real
        im = u[j].imag
        th = -coef * (re * re + im * im)
        c = cos(th)
        s = sin(th)
        u[j] = (re * c - im * s) + 1j * (re * s + im * c)


def cubic(const double complex[::1] g, double complex[::1] out):
    """out <- |g|^2 g."""
    cdef Py_ssize_t j, n = g.shape[0]
    cdef double re, im, m
    for j in range(n):
        re = g[j].real
        im = g[j].imag
        m = re * re + im * im
        out[j] = (m * re) + 1j * (m * im)


def phase_mul(double complex[::1] u, const double[::1] theta, double scale):
    """In place: u <- u * exp(i scale theta)."""
    cdef Py_ssize_t j, n = u.shape[0]
    cdef double re, im, th, c, s
    for j in range(n):
        re = u[j].real
        im = u[j].imag
        th = scale * theta[j]
        c = cos(th)
        s = sin(th)
        u[j] = (re * c - im * s) + 1j * (re * s + im * c)


def abs2_accumulate(double[::1] acc, const double complex[::1] g, double weight):
    """In place: acc <- acc + weight |g|^2."""
    cdef Py_ssize_t j, n = g.shape[0]
    cdef double re, im
    for j in range(n):
        re = g[j].real
        im = g[j].imag
        acc[j] += weight * (re * re + im * im)
