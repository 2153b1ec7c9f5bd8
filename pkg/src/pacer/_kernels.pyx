# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Mirrors ``_kernels_py`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

from .errors import MalformedStepError

cnp.import_array()

IMPLEMENTATION = "cython"


cdef inline double _topk(object logprobs, int k) except? -1.0:
    cdef Py_ssize_t n = len(logprobs)
    cdef double acc = 0.0
    cdef int j
    if k < 1 or n < k:
        raise MalformedStepError(f"need {k} logprobs, got {n}")
    for j in range(k):
        acc += <double>logprobs[j]
    return 0.0 - acc / k


def topk_uncertainty(logprobs, int k):
    """Mean negative log-probability of the first ``k`` entries."""
    return _topk(logprobs, k)


cdef class StabilityCore:
    """Ring-buffered windowed mean of U_t with a running prefix maximum."""

    cdef readonly int window
    cdef readonly int k
    cdef double[::1] _buf
    cdef Py_ssize_t _head
    cdef Py_ssize_t _count
    cdef double _sum
    cdef readonly long long step_count
    cdef readonly double prefix_max
    cdef readonly list u_values
    cdef readonly list ubar_values
    cdef readonly list s_values

    def __init__(self, int window, int k):
        if window < 1:
            raise ValueError("window must be >= 1")
        if k < 1:
            raise ValueError("k must be >= 1")
        self.window = window
        self.k = k
        self._buf = np.zeros(window, dtype=np.float64)
        self._head = 0
        self._count = 0
        self._sum = 0.0
        self.step_count = 0
        self.prefix_max = -INFINITY
        self.u_values = []
        self.ubar_values = []
        self.s_values = []

    cdef tuple _push(self, double u):
        cdef Py_ssize_t w = self.window
        cdef Py_ssize_t i
        cdef double total, ubar, s
        if self._count == w:
            self._sum -= self._buf[self._head]
            self._buf[self._head] = u
            self._head = (self._head + 1) % w
        else:
            self._buf[(self._head + self._count) % w] = u
            self._count += 1
        self._sum += u
        self.step_count += 1
        if self.step_count % w == 0:
            total = 0.0
            for i in range(self._count):
                total += self._buf[(self._head + i) % w]
            self._sum = total
        if self._sum < 0.0:
            self._sum = 0.0
        ubar = self._sum / self._count
        if ubar > self.prefix_max:
            self.prefix_max = ubar
        s = 0.0 - self.prefix_max
        self.u_values.append(u)
        self.ubar_values.append(ubar)
        self.s_values.append(s)
        return (ubar, s)

    def push(self, double u):
        return self._push(u)

    def update_logprobs(self, logprobs):
        return self._push(_topk(logprobs, self.k))

    def update(self, step):
        return self._push(_topk(step.topk_logprobs, self.k))

    def window_buffer(self):
        return [self._buf[(self._head + i) % self.window] for i in range(self._count)]

    @property
    def current_stability(self):
        return 0.0 - self.prefix_max


def uncertainty_rows(matrix, int k):
    """U_t for each row of a (T, >=k) logprob matrix."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] m = np.ascontiguousarray(matrix, dtype=np.float64)
    if k < 1 or m.shape[1] < k:
        raise MalformedStepError(f"need a 2-D array with >= {k} columns")
    cdef Py_ssize_t n = m.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t t
    cdef int j
    cdef double acc
    for t in range(n):
        acc = 0.0
        for j in range(k):
            acc += m[t, j]
        out[t] = 0.0 - acc / k
    return out


def stability_trajectory(u_values, int window):
    """Offline (Ubar_t, S_t) for a full U series; same recurrence as StabilityCore."""
    if window < 1:
        raise ValueError("window must be >= 1")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(u_values, dtype=np.float64)
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t w = window
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ubar = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.empty(n, dtype=np.float64)
    cdef double running = 0.0
    cdef double imax = -INFINITY
    cdef double total, mean
    cdef Py_ssize_t t, i, step, count
    for t in range(n):
        if t >= w:
            running -= u[t - w]
        running += u[t]
        step = t + 1
        count = step if step < w else w
        if step % w == 0:
            total = 0.0
            for i in range(step - count, step):
                total += u[i]
            running = total
        if running < 0.0:
            running = 0.0
        mean = running / count
        if mean > imax:
            imax = mean
        ubar[t] = mean
        s[t] = 0.0 - imax
    return ubar, s


def weighted_vote_errors(labels, weights, int n_labels):
    """Count trials whose weighted plurality is not label 0 (ties count as errors)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=2] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] wts = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t trials = lab.shape[0]
    cdef Py_ssize_t b = lab.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tally = np.zeros(n_labels, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] count = np.zeros(n_labels, dtype=np.int64)
    cdef Py_ssize_t i, j, a
    cdef long long errors = 0
    for i in range(trials):
        for a in range(n_labels):
            tally[a] = 0.0
            count[a] = 0
        for j in range(b):
            a = lab[i, j]
            tally[a] += wts[i, j]
            count[a] += 1
        for a in range(1, n_labels):
            if count[a] == 0:
                continue
            if tally[a] > tally[0] or (tally[a] == tally[0] and count[a] >= count[0]):
                errors += 1
                break
    return int(errors)
