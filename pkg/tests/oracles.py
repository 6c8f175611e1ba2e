"""Independent brute-force oracles used by the test suite.

Everything here is deliberately written from the definitions, in plain
Python, without importing the package's own metric or grid code.  Slow is
fine; these run on tiny inputs.
"""

import math


def rank_walk_average_precision(labels, scores):
    """Non-interpolated average precision from the textbook definition.

    Items are visited in descending score order; ties keep their original
    input order (stable).  The precision values at each positive are summed
    in that same visiting order, so results are bit-identical to any
    implementation sharing the convention, not merely close.
    """
    order = sorted(range(len(labels)), key=lambda i: (-scores[i], i))
    n_pos = sum(1 for v in labels if v == 1)
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("average precision needs both classes")
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if labels[idx] == 1:
            hits += 1
            total += hits / rank
    return total / n_pos


def pairwise_auroc(labels, scores):
    """AUROC as the literal pairwise comparison probability.

    Counts, over all (positive, negative) pairs, wins as 1 and ties as 1/2.
    Quadratic and exact; no rank arithmetic in sight.
    """
    pos = [scores[i] for i in range(len(labels)) if labels[i] == 1]
    neg = [scores[i] for i in range(len(labels)) if labels[i] != 1]
    if not pos or not neg:
        raise ValueError("auroc needs both classes")
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def simplex_lattice(k, m):
    """All compositions of m into k parts, as tuples, lexicographic."""
    if k == 1:
        return [(m,)]
    out = []
    for first in range(m + 1):
        for rest in simplex_lattice(k - 1, m - first):
            out.append((first,) + rest)
    return out


def exhaustive_inner_argmax(alpha, y, m):
    """Grid argmax of log g(p; alpha) - log p_y over the simplex lattice.

    The inner objective of the surrogate: find the lattice point where the
    learned possibility most overestimates the likelihood of label y.
    Returns the probability vector as a tuple.
    """
    k = len(alpha)
    a0 = sum(alpha)
    best_val = -math.inf
    best_p = None
    for comp in simplex_lattice(k, m):
        p = [c / m for c in comp]
        if p[y] == 0.0:
            continue
        logg = 0.0
        dead = False
        for ak, pk in zip(alpha, p):
            if ak == 0.0:
                continue
            if pk == 0.0:
                dead = True
                break
            logg += ak * math.log(pk / (ak / a0))
        if dead:
            continue
        val = logg - math.log(p[y])
        if val > best_val:
            best_val = val
            best_p = tuple(p)
    return best_p


def central_difference(f, x, i, h):
    """Scalar central difference of f at x along coordinate i."""
    up = list(x)
    dn = list(x)
    up[i] += h
    dn[i] -= h
    return (f(up) - f(dn)) / (2.0 * h)
