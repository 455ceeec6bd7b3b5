"""Independent reference implementations used to check the package.

Nothing here imports the code under test except plain data types, so a
bug in the package cannot hide behind an identical bug in its oracle.
"""

import itertools
import math

import numpy as np


def numeric_grads(net, x, actions, targets, h=1e-5):
    """Central finite differences of the taken-action MSE, parameter by parameter."""

    def loss():
        a = x
        last = len(net.weights) - 1
        for k, (w, b) in enumerate(zip(net.weights, net.biases)):
            a = a @ w + b
            if k < last:
                a = np.maximum(a, 0.0)
        err = a[np.arange(len(actions)), actions] - targets
        return float(np.mean(err ** 2))

    out = []
    for p in net.weights + net.biases:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss()
            p[idx] = old - h
            down = loss()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric, floor=1e-8):
    """max |a-n| / max(|a|, |n|, floor) over all parameters."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def classify_reference(io, mem, intd, fp, locks, barrier, net, sleep):
    """Phase name from densities and flags, written straight from the rule table."""
    if barrier or net or sleep or locks > 0.5:
        return "Blocked"
    if io + mem > 0.5 and locks == 0:
        return "IOBound"
    if intd + fp > 0.5:
        return "CPUBound"
    return "Other"


def brute_force_min(cost, penalty=0.0):
    """Minimum total over every config sequence; cost has shape (C, K)."""
    c, k = cost.shape
    best = math.inf
    for seq in itertools.product(range(c), repeat=k):
        total = math.fsum(cost[s, i] for i, s in enumerate(seq))
        total += penalty * sum(a != b for a, b in zip(seq, seq[1:]))
        best = min(best, total)
    return best


def value_iteration(rewards, transition, discount, tol=1e-12):
    """Optimal greedy policy for a deterministic MDP.

    rewards[s][a] is the immediate reward, transition[s][a] the next state.
    """
    n_s, n_a = len(rewards), len(rewards[0])
    v = [0.0] * n_s
    while True:
        q = [[rewards[s][a] + discount * v[transition[s][a]] for a in range(n_a)]
             for s in range(n_s)]
        new = [max(row) for row in q]
        if max(abs(a - b) for a, b in zip(new, v)) < tol:
            return [max(range(n_a), key=lambda a: (row[a], -a)) for row in q]
        v = new
