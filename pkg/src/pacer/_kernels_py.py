"""Pure-Python kernels.

Reference implementation of the hot loops. ``_kernels.pyx`` mirrors this
module operation for operation so both produce bit-identical floats; keep
them in sync.
"""
import math

import numpy as np

from .errors import MalformedStepError

IMPLEMENTATION = "python"


def topk_uncertainty(logprobs, k):
    """Mean negative log-probability of the first ``k`` entries."""
    if k < 1 or len(logprobs) < k:
        raise MalformedStepError(f"need {k} logprobs, got {len(logprobs)}")
    acc = 0.0
    for j in range(k):
        acc += logprobs[j]
    # 0.0 - x keeps -0.0 out of the results
    return 0.0 - acc / k


class StabilityCore:
    """Ring-buffered windowed mean of U_t with a running prefix maximum.

    The window sum is updated by add/subtract and re-summed from the buffer
    every ``window`` steps so drift stays bounded on long traces.
    """

    def __init__(self, window, k):
        if window < 1:
            raise ValueError("window must be >= 1")
        if k < 1:
            raise ValueError("k must be >= 1")
        self.window = int(window)
        self.k = int(k)
        self._buf = [0.0] * self.window
        self._head = 0
        self._count = 0
        self._sum = 0.0
        self.step_count = 0
        self.prefix_max = -math.inf
        self.u_values = []
        self.ubar_values = []
        self.s_values = []

    def push(self, u):
        u = float(u)
        w = self.window
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
        return ubar, s

    def update_logprobs(self, logprobs):
        return self.push(topk_uncertainty(logprobs, self.k))

    def update(self, step):
        return self.push(topk_uncertainty(step.topk_logprobs, self.k))

    def window_buffer(self):
        return [self._buf[(self._head + i) % self.window] for i in range(self._count)]

    @property
    def current_stability(self):
        return 0.0 - self.prefix_max


def uncertainty_rows(matrix, k):
    """U_t for each row of a (T, >=k) logprob matrix."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] < k or k < 1:
        raise MalformedStepError(f"need a 2-D array with >= {k} columns")
    out = np.empty(m.shape[0], dtype=np.float64)
    for t in range(m.shape[0]):
        acc = 0.0
        row = m[t]
        for j in range(k):
            acc += float(row[j])
        out[t] = 0.0 - acc / k
    return out


def stability_trajectory(u_values, window):
    """Offline (Ubar_t, S_t) for a full U series; same recurrence as StabilityCore."""
    u = np.asarray(u_values, dtype=np.float64)
    n = u.shape[0]
    w = int(window)
    if w < 1:
        raise ValueError("window must be >= 1")
    ubar = np.empty(n, dtype=np.float64)
    s = np.empty(n, dtype=np.float64)
    running = 0.0
    imax = -math.inf
    for t in range(n):
        # evict-then-add, exactly as the ring buffer does
        x = float(u[t])
        if t >= w:
            running -= float(u[t - w])
        running += x
        step = t + 1
        count = step if step < w else w
        if step % w == 0:
            total = 0.0
            for i in range(step - count, step):
                total += float(u[i])
            running = total
        if running < 0.0:
            running = 0.0
        mean = running / count
        if mean > imax:
            imax = mean
        ubar[t] = mean
        s[t] = 0.0 - imax
    return ubar, s


def weighted_vote_errors(labels, weights, n_labels):
    """Count trials whose weighted plurality is not label 0.

    Each row of ``labels``/``weights`` is one simulated pool. Label 0 is the
    ground truth; a wrong label that ties it on weight and count wins, so
    ties are scored against the truth.
    """
    lab = np.asarray(labels, dtype=np.int64)
    wts = np.asarray(weights, dtype=np.float64)
    trials, b = lab.shape
    errors = 0
    for i in range(trials):
        tally = [0.0] * n_labels
        count = [0] * n_labels
        for j in range(b):
            a = int(lab[i, j])
            tally[a] += float(wts[i, j])
            count[a] += 1
        for a in range(1, n_labels):
            if count[a] == 0:
                continue
            if tally[a] > tally[0] or (tally[a] == tally[0] and count[a] >= count[0]):
                errors += 1
                break
    return errors
