"""Slow, obviously-correct reference implementations used only by the tests."""

import itertools
import math
from fractions import Fraction

import numpy as np


def count_le(points, t):
    return sum(all(p[j] <= t[j] for j in range(len(t))) for p in points)


def atomic_mass(atoms, weights, t, strict=False):
    total = []
    for a, w in zip(atoms, weights):
        if all((a[j] < t[j]) if strict else (a[j] <= t[j]) for j in range(len(t))):
            total.append(w)
    return math.fsum(total)


def brute_star_discrepancy(points, mass, extra_coords=()):
    """Max ``|count(<= t)/m - mass(t)|`` over grid values and their float predecessors.

    ``mass(t)`` must return the closed-box mass. ``extra_coords[j]`` lists
    coordinates (such as atom locations) added on axis ``j``.
    """
    P = np.asarray(points, dtype=float)
    m, d = P.shape
    axes = []
    for j in range(d):
        vals = set(P[:, j].tolist()) | {1.0, 0.0}
        if extra_coords:
            vals |= set(float(v) for v in extra_coords[j])
        vals |= {float(np.nextafter(v, 0.0)) for v in list(vals) if v > 0}
        axes.append(sorted(vals))
    best = 0.0
    for t in itertools.product(*axes):
        best = max(best, abs(count_le(P, t) / m - mass(np.array(t))))
    return best


def radical_inverse(i, base):
    """Radical inverse of ``i`` as an exact fraction, then rounded."""
    num, den = 0, 1
    while i > 0:
        i, digit = divmod(i, base)
        num = num * base + digit
        den *= base
    return float(Fraction(num, den))


def vitali_grid(f, k, n):
    """Alternating corner sums on the ``n^k`` uniform grid, cell by cell."""
    total = []
    for cell in itertools.product(range(n), repeat=k):
        s = 0.0
        for corner in itertools.product((0, 1), repeat=k):
            t = np.array([(c + e) / n for c, e in zip(cell, corner)])
            sign = (-1) ** (k - sum(corner))
            s += sign * float(f(t))
        total.append(abs(s))
    return math.fsum(total)
