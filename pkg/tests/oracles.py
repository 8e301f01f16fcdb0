"""Independent reference computations shared by the test modules."""
import itertools

import numpy as np


def brute_force_np_power(n, p0, p1, alpha):
    """Best power at size alpha over all randomised tests on {0,1}^n.

    Every deterministic test is a subset of outcome sequences; randomised
    tests are their mixtures, so the optimum is the upper concave envelope of
    the (size, power) cloud evaluated at alpha.
    """
    outcomes = list(itertools.product((0, 1), repeat=n))
    k = np.array([sum(o) for o in outcomes])
    prob0 = p0**k * (1 - p0) ** (n - k)
    prob1 = p1**k * (1 - p1) ** (n - k)
    m = len(outcomes)
    masks = ((np.arange(2**m)[:, None] >> np.arange(m)[None, :]) & 1).astype(float)
    sizes, powers = masks @ prob0, masks @ prob1
    order = np.lexsort((-powers, sizes))
    hull = []
    for i in order:
        x, y = sizes[i], powers[i]
        if hull and x == hull[-1][0]:
            continue
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append((x, y))
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        if x1 <= alpha <= x2:
            return y1 + (y2 - y1) * (alpha - x1) / (x2 - x1)
    raise AssertionError("alpha outside hull")
