"""Dirichlet possibility functions on the probability simplex.

A possibility function assigns each outcome a plausibility in [0, 1] and is
max-normalised: its supremum over the domain is 1.  The Dirichlet-shaped
family used throughout this package is parameterised by a non-negative
concentration vector ``alpha`` and evaluated in log space as

    log g(p; alpha) = sum_k alpha_k * log(p_k / (alpha_k / alpha_0)),

where ``alpha_0 = sum_k alpha_k``.  This grouping is algebraically identical
to ``alpha_0 log alpha_0 + sum_k alpha_k log(p_k / alpha_k)`` but divides each
probability by the corresponding mode coordinate, so evaluating at the mode
gives ratios of exactly 1.0 and hence exactly 0.0 in floating point.

Conventions:

* terms with ``alpha_k == 0`` contribute nothing (the 0^0 = 1 convention),
* ``alpha_0 == 0`` means total ignorance: g is identically 1,
* ``p_k == 0`` with ``alpha_k > 0`` gives ``log g = -inf``.

The module also provides the finite-domain machinery built on the same
max-normalised semantics: possibility tables, the pushforward under a
deterministic mapping (supremum over pre-images), the maxitive
pseudo-divergence, possibilistic posteriors from per-hypothesis losses, and a
simplex-grid brute-force maximiser that serves as the oracle for the
closed-form result in :mod:`dappr.loss`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateAlphaError

_GRID_LOG_FLOOR = 1e-12


def _as_float_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    return arr


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    """A probability vector: entries in [0, 1] summing to 1 within 1e-9."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _as_float_vector(self.probs, "probs").copy()
        if probs.size < 2:
            raise ValueError("simplex points need at least 2 coordinates")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError(f"probabilities must lie in [0, 1], got {probs}")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {total!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def k(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class DirichletParams:
    """Non-negative concentration vector; ``alpha0`` is its sum."""

    alpha: np.ndarray
    alpha0: float = field(init=False)

    def __post_init__(self):
        alpha = _as_float_vector(self.alpha, "alpha").copy()
        if alpha.size < 2:
            raise ValueError("need at least 2 concentration entries")
        if not np.all(np.isfinite(alpha)):
            raise ValueError("concentrations must be finite")
        if np.any(alpha < 0.0):
            raise ValueError(f"concentrations must be non-negative, got {alpha}")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha0", float(alpha.sum()))

    @property
    def k(self) -> int:
        return self.alpha.size


@dataclass(frozen=True, eq=False)
class PossibilityTable:
    """Possibility values over a finite domain: entries in [0, 1] with
    max equal to 1 within 1e-9."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_float_vector(self.values, "values").copy()
        if not np.all(np.isfinite(values)):
            raise ValueError("possibility values must be finite")
        if np.any(values < 0.0) or np.any(values > 1.0 + 1e-9):
            raise ValueError("possibility values must lie in [0, 1]")
        if abs(float(values.max()) - 1.0) > 1e-9:
            raise ValueError(
                f"table must be max-normalised to 1, got max {values.max()!r}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def domain_size(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """All points of the simplex with coordinates that are multiples of 1/m.

    ``points_array`` has one row per grid point, rows ordered by lexicographic
    enumeration of the integer compositions of ``resolution`` into ``k`` parts.
    The number of rows is C(m + k - 1, k - 1).
    """

    resolution: int
    points_array: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.points_array, dtype=np.float64)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "points_array", arr)

    @property
    def k(self) -> int:
        return self.points_array.shape[1]

    @property
    def n_points(self) -> int:
        return self.points_array.shape[0]

    @property
    def points(self) -> list[SimplexPoint]:
        return [SimplexPoint(row) for row in self.points_array]


def default_grid_resolution(k: int) -> int:
    """Oracle grid resolution: 200 for k <= 3, 50 for k <= 5."""
    if k <= 3:
        return 200
    if k <= 5:
        return 50
    raise ValueError(f"grid oracles support at most 5 classes, got {k}")


def simplex_grid(k: int, m: int) -> SimplexGrid:
    """Enumerate every composition of m into k parts, scaled by 1/m.

    Enumeration is lexicographic over the composition tuples, so the grid
    order is deterministic and reproducible.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if m < 1:
        raise ValueError(f"need resolution m >= 1, got {m}")
    # Stars and bars: each (k-1)-subset of {0..m+k-2} is one composition,
    # and combinations() emits subsets in lexicographic order.
    counts = np.empty((math.comb(m + k - 1, k - 1), k), dtype=np.float64)
    boundary = m + k - 1
    for i, bars in enumerate(itertools.combinations(range(boundary), k - 1)):
        prev = -1
        for j, b in enumerate(bars):
            counts[i, j] = b - prev - 1
            prev = b
        counts[i, k - 1] = boundary - prev - 1
    return SimplexGrid(resolution=m, points_array=counts / m)


def log_dirichlet_possibility(d: DirichletParams, p: SimplexPoint) -> float:
    """Log of the Dirichlet-shaped possibility of p under concentrations d.

    Returns 0.0 when alpha0 == 0 (total ignorance: the possibility function
    is identically 1) and -inf when some p_k is 0 where alpha_k > 0.
    """
    if d.k != p.k:
        raise ValueError(f"dimension mismatch: alpha has {d.k} entries, p has {p.k}")
    if d.alpha0 == 0.0:
        return 0.0
    active = d.alpha > 0.0
    a = d.alpha[active]
    q = p.probs[active]
    if np.any(q == 0.0):
        return -math.inf
    # Ratio against the mode coordinate: exactly 1.0 at the mode, which makes
    # the mode evaluate to exactly 0.0.
    return float(np.sum(a * np.log(q / (a / d.alpha0))))


def dirichlet_possibility(d: DirichletParams, p: SimplexPoint) -> float:
    """Possibility g(p; alpha) = exp(log_dirichlet_possibility)."""
    return math.exp(log_dirichlet_possibility(d, p))


def dirichlet_mode(d: DirichletParams) -> SimplexPoint:
    """The unique maximiser alpha / alpha0 of the possibility function."""
    if d.alpha0 == 0.0:
        raise DegenerateAlphaError("mode undefined for alpha0 == 0")
    return SimplexPoint(d.alpha / d.alpha0)


def possibilistic_posterior(losses) -> PossibilityTable:
    """Possibility over hypotheses from their accumulated losses.

    The hypothesis with minimal loss gets possibility exactly 1; hypothesis i
    gets exp(min(losses) - losses[i]).  With per-sample negative log
    likelihoods as losses this is the relative likelihood.  Entries of +inf
    (impossible hypotheses) map to possibility 0.
    """
    arr = _as_float_vector(losses, "losses")
    if np.any(np.isnan(arr)):
        raise ValueError("losses must not contain NaN")
    lo = float(arr.min())
    if not math.isfinite(lo):
        raise ValueError("at least one loss must be finite")
    return PossibilityTable(np.exp(lo - arr))


def pushforward_possibility(
    f: PossibilityTable, mapping, codomain_size: int
) -> PossibilityTable:
    """Possibility induced on a codomain by a deterministic mapping.

    Each codomain element j gets the supremum of f over its pre-image
    {i : mapping[i] == j}; an empty pre-image gives 0.
    """
    idx = np.asarray(mapping)
    if idx.ndim != 1 or idx.size != f.domain_size:
        raise ValueError("mapping must assign one codomain index per domain element")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ValueError("mapping must be integer-valued")
    if codomain_size < 1:
        raise ValueError("codomain must be non-empty")
    if np.any(idx < 0) or np.any(idx >= codomain_size):
        raise ValueError("mapping indices out of codomain range")
    out = np.zeros(codomain_size, dtype=np.float64)
    np.maximum.at(out, idx, f.values)
    return PossibilityTable(out)


def maxitive_divergence(f: PossibilityTable, g: PossibilityTable) -> float:
    """Maxitive pseudo-divergence max_i log(f_i / g_i) over {i : f_i > 0}.

    Non-negative for max-normalised tables, exactly 0 whenever f <= g
    pointwise, and +inf when g vanishes somewhere f does not.  It is a
    pseudo-divergence: 0 certifies domination, not equality.
    """
    if f.domain_size != g.domain_size:
        raise ValueError(
            f"domain mismatch: {f.domain_size} vs {g.domain_size} elements"
        )
    support = f.values > 0.0
    gs = g.values[support]
    if np.any(gs == 0.0):
        return math.inf
    return float(np.max(np.log(f.values[support] / gs)))


def grid_argmax_surrogate(
    d: DirichletParams, y: int, grid: SimplexGrid
) -> SimplexPoint:
    """Brute-force maximiser of log g(p; alpha) + cross_entropy(p, y) on a grid.

    This is the oracle the closed-form maximiser is checked against.  Grid
    points touching the simplex boundary are evaluated with probabilities
    floored at 1e-12 inside the logarithms; ties resolve to the first point in
    grid order.
    """
    if not 0 <= y < d.k:
        raise ValueError(f"label {y} out of range for {d.k} classes")
    if grid.k != d.k:
        raise ValueError(f"grid is {grid.k}-dimensional, alpha has {d.k} entries")
    if d.alpha0 == 0.0:
        raise DegenerateAlphaError("surrogate objective undefined for alpha0 == 0")
    logs = np.log(np.maximum(grid.points_array, _GRID_LOG_FLOOR))
    active = d.alpha > 0.0
    const = float(d.alpha0 * math.log(d.alpha0) - np.sum(d.alpha[active] * np.log(d.alpha[active])))
    log_g = logs[:, active] @ d.alpha[active] + const
    cross_entropy = -logs[:, y]
    objective = log_g + cross_entropy
    return SimplexPoint(grid.points_array[int(np.argmax(objective))])
