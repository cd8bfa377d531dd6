"""Independent reference computations shared by several test files."""

import numpy as np
from scipy.optimize import brentq


def characteristics_solution(x, t, offset=1.0, amp=0.5):
    """Exact pre-shock solution of u_t + u u_x = 0 with u0 = offset + amp sin(x).

    Each foot point solves ``s + t u0(s) = x`` by bracketing; valid while
    ``t < 1 / amp``.
    """
    u0 = lambda s: offset + amp * np.sin(s)
    lo_speed, hi_speed = offset - amp, offset + amp
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        foot = brentq(
            lambda s: s + t * u0(s) - xi, xi - hi_speed * t - 1e-9, xi - lo_speed * t + 1e-9, xtol=1e-14
        )
        out[i] = u0(foot)
    return out


def mann_whitney_auc(scores, labels):
    """P(score of a positive > score of a negative) with ties counted half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        wins += np.sum(p > neg) + 0.5 * np.sum(p == neg)
    return wins / (pos.size * neg.size)
