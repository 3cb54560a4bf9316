"""Possibility functions on finite domains.

A possibility function is a nonnegative function whose supremum is 1.  On a
finite grid every operation here is exact up to floating point: suprema are
maxima, and every grid-valued result is renormalised by a final divide-by-max
so that its largest entry is exactly ``1.0``.

Grids are n-dimensional: ``axes`` holds one tuple of labels per factor and
``values`` has shape ``tuple(len(a) for a in axes)``.  A domain point is the
bare label for a 1-D grid and a tuple of labels otherwise.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

UR = "UR"
RU = "RU"


class IncredibleConditioningError(ValueError):
    """Conditioning on a point (or image) whose credibility is zero."""


class IncompatibleEvidenceError(ValueError):
    """Bayes update where prior and likelihood have disjoint support."""


def _as_axes(axes, shape) -> tuple[tuple, ...]:
    if axes is None:
        return tuple(tuple(range(n)) for n in shape)
    axes = tuple(axes)
    # 1-D grids accept either the bare label sequence or a one-element tuple of axes
    wrapped = len(axes) == 1 and isinstance(axes[0], (tuple, list, np.ndarray, range)) and len(axes[0]) == shape[0]
    if len(shape) == 1 and not wrapped:
        axes = (axes,)
    return tuple(tuple(a) for a in axes)


@dataclass(frozen=True, eq=False)
class PossibilityGrid:
    axes: tuple[tuple, ...]
    values: np.ndarray
    _index: tuple[dict, ...] = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        axes = _as_axes(self.axes, values.shape)
        if values.ndim == 0 or values.size == 0:
            raise ValueError("possibility grid must have a non-empty domain")
        if tuple(len(a) for a in axes) != values.shape:
            raise ValueError(f"axes lengths {[len(a) for a in axes]} do not match values shape {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("possibility values must lie in [0, 1]")
        if values.max() != 1.0:
            raise ValueError(f"possibility grid must attain 1 exactly, max is {values.max()!r}")
        values.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_index", tuple({p: i for i, p in enumerate(a)} for a in axes))

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def points(self) -> list:
        if self.ndim == 1:
            return list(self.axes[0])
        return list(itertools.product(*self.axes))

    def index_of(self, point) -> tuple[int, ...]:
        if self.ndim == 1:
            point = (point,)
        try:
            return tuple(ix[p] for ix, p in zip(self._index, point))
        except KeyError:
            raise KeyError(f"{point!r} is not in the domain") from None

    def __call__(self, point) -> float:
        return float(self.values[self.index_of(point)])

    def __contains__(self, point) -> bool:
        try:
            self.index_of(point)
        except (KeyError, TypeError):
            return False
        return True


def normalize(values, axes=None) -> PossibilityGrid:
    """Rescale nonnegative ``values`` so that their maximum is exactly 1."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot normalize an empty array")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot normalize non-finite values")
    if v.min() < 0.0:
        raise ValueError("possibility values must be nonnegative")
    top = v.max()
    if top <= 0.0:
        raise ValueError("cannot normalize: all values are zero")
    return PossibilityGrid(axes, v / top)


def _keep_axes(ndim: int, keep) -> tuple[int, ...]:
    keep = (keep,) if isinstance(keep, (int, np.integer)) else tuple(keep)
    if not keep or any(not 0 <= k < ndim for k in keep):
        raise ValueError(f"invalid axis selection {keep!r} for a {ndim}-D grid")
    return keep


def marginal(joint: PossibilityGrid, keep=0) -> PossibilityGrid:
    """Max out every axis not in ``keep``."""
    keep = _keep_axes(joint.ndim, keep)
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    v = joint.values.max(axis=drop) if drop else joint.values
    axes = [joint.axes[k] for k in sorted(keep)]
    return normalize(v, axes if len(axes) > 1 else (axes[0],))


def condition(joint: PossibilityGrid, point, axis: int = 1) -> PossibilityGrid:
    """Conditional possibility of the remaining axes given ``axis`` takes ``point``."""
    if not 0 <= axis < joint.ndim or joint.ndim < 2:
        raise ValueError("condition needs a product domain and a valid axis")
    try:
        j = joint._index[axis][point]
    except KeyError:
        raise KeyError(f"{point!r} is not on axis {axis}") from None
    sl = np.take(joint.values, j, axis=axis)
    credibility = sl.max()
    if credibility <= 0.0:
        raise IncredibleConditioningError(f"conditioning on incredible point {point!r}")
    rest = [a for i, a in enumerate(joint.axes) if i != axis]
    return PossibilityGrid(tuple(rest), sl / credibility)


def bayes_update(prior: PossibilityGrid, likelihood) -> PossibilityGrid:
    lik = np.asarray(likelihood, dtype=float)
    if lik.shape != prior.shape:
        raise ValueError(f"likelihood shape {lik.shape} does not match prior {prior.shape}")
    if np.any(lik < 0.0) or not np.all(np.isfinite(lik)):
        raise ValueError("likelihood must be finite and nonnegative")
    post = prior.values * lik
    if post.max() <= 0.0:
        raise IncompatibleEvidenceError("prior and likelihood have no credible point in common")
    return PossibilityGrid(prior.axes, post / post.max())


def pushforward(f: PossibilityGrid, zeta: Callable[[Any], Hashable], codomain: Sequence | None = None) -> PossibilityGrid:
    """Possibility of ``zeta(theta)``: the max of ``f`` over each preimage.

    Without ``codomain`` the output domain is the image of ``zeta`` in order of
    first appearance.  Codomain points outside the image get 0.
    """
    best: dict[Hashable, float] = {}
    for p, v in zip(f.points(), f.values.ravel()):
        key = zeta(p)
        if v > best.get(key, -1.0):
            best[key] = float(v)
    if codomain is None:
        codomain = list(best)
    else:
        missing = set(best) - set(codomain)
        if missing:
            raise ValueError(f"zeta maps outside the given codomain: {sorted(map(repr, missing))[:5]}")
    out = np.array([best.get(q, 0.0) for q in codomain])
    return normalize(out, (tuple(codomain),))


def pullback(f_psi: PossibilityGrid, zeta: Callable[[Any], Hashable], domain: Sequence = None, *,
             axes: Sequence[Sequence] | None = None) -> PossibilityGrid:
    """Possibility over ``domain`` (1-D labels) or the product of ``axes``, obtained by composing ``f_psi`` with ``zeta``.

    The composition is rescaled by its maximum, i.e. ``f_psi`` is first
    conditioned on the image of ``zeta``.
    """
    if (domain is None) == (axes is None):
        raise ValueError("give exactly one of domain or axes")
    grid_axes = (tuple(domain),) if axes is None else tuple(tuple(a) for a in axes)
    pts = grid_axes[0] if len(grid_axes) == 1 else list(itertools.product(*grid_axes))
    v = np.array([f_psi(zeta(p)) for p in pts]).reshape(tuple(len(a) for a in grid_axes))
    top = v.max()
    if top <= 0.0:
        raise IncredibleConditioningError("the image of zeta is entirely incredible")
    return PossibilityGrid(grid_axes, v / top)


@dataclass(frozen=True)
class ExpectationResult:
    argmax_set: tuple
    is_singleton: bool
    variance: float

    def __post_init__(self):
        if not self.argmax_set:
            raise ValueError("argmax set cannot be empty")
        if not self.is_singleton and self.variance != math.inf:
            raise ValueError("variance must be infinite for a non-singleton argmax")


def _uniform_spacing(axis: tuple) -> float | None:
    try:
        x = np.asarray(axis, dtype=float)
    except (TypeError, ValueError):
        return None
    if x.ndim != 1 or x.size < 2:
        return None
    d = np.diff(x)
    h = d[0]
    if h <= 0 or not np.allclose(d, h, rtol=1e-9, atol=0.0):
        return None
    return float(h)


def argmax_set(f: PossibilityGrid) -> tuple:
    idx = np.argwhere(f.values == 1.0)
    if f.ndim == 1:
        return tuple(f.axes[0][i[0]] for i in idx)
    return tuple(tuple(ax[k] for ax, k in zip(f.axes, i)) for i in idx)


def expect_star(f: PossibilityGrid) -> ExpectationResult:
    """Argmax set of ``f`` and, on a uniform 1-D real grid, its variance.

    The variance is +inf for a non-singleton argmax and also whenever it is
    not defined by a central second difference (labels, multi-D, boundary mode).
    """
    arg = argmax_set(f)
    single = len(arg) == 1
    var = math.inf
    if single and f.ndim == 1 and _uniform_spacing(f.axes[0]) is not None:
        i = f.index_of(arg[0])[0]
        if 0 < i < f.shape[0] - 1:
            var = variance_star(f)
    return ExpectationResult(arg, single, var)


def variance_star(f: PossibilityGrid, log: bool = False) -> float:
    """Negative inverse curvature of ``f`` (or of ``log f``) at its mode.

    Uses the central second difference on a uniform 1-D real grid.  The mode
    must be unique and interior.
    """
    if f.ndim != 1:
        raise ValueError("variance_star needs a 1-D grid")
    h = _uniform_spacing(f.axes[0])
    if h is None:
        raise ValueError("variance_star needs a uniformly spaced real grid")
    arg = argmax_set(f)
    if len(arg) != 1:
        return math.inf
    i = f.index_of(arg[0])[0]
    if i == 0 or i == f.shape[0] - 1:
        raise ValueError("mode lies on the grid boundary; second difference undefined")
    trip = f.values[i - 1:i + 2]
    if log:
        with np.errstate(divide="ignore"):
            trip = np.log(trip)
    d2 = (trip[0] - 2.0 * trip[1] + trip[2]) / h**2
    if d2 >= 0.0:
        return math.inf
    return float(-1.0 / d2)


def independence_envelope(joint: PossibilityGrid) -> PossibilityGrid:
    """sqrt(f_theta * f_psi): the least informative independent description dominating ``joint``."""
    if joint.ndim != 2:
        raise ValueError("independence envelope needs a 2-factor grid")
    a, b = joint.values.max(axis=1), joint.values.max(axis=0)
    # sqrt(ab) >= min(a, b); the clamp only repairs rounding and underflow
    env = np.maximum(np.sqrt(np.outer(a, b)), np.minimum.outer(a, b))
    return PossibilityGrid(joint.axes, env)


def is_independent(joint: PossibilityGrid, tol: float = 1e-12) -> bool:
    if joint.ndim != 2:
        raise ValueError("independence check needs a 2-factor grid")
    prod = np.outer(joint.values.max(axis=1), joint.values.max(axis=0))
    return bool(np.max(np.abs(joint.values - prod)) <= tol)


def product(*factors: PossibilityGrid) -> PossibilityGrid:
    """Independent joint description from 1-D marginals."""
    v = factors[0].values
    for g in factors[1:]:
        v = np.multiply.outer(v, g.values)
    return normalize(v, [g.axes[0] for g in factors])


@dataclass(frozen=True, eq=False)
class DiscreteOPM:
    """Possibility over parameters combined with a parametrised law over outcomes.

    ``law[i, j]`` is the probability of ``outcomes[j]`` under the i-th parameter
    point of ``parameter_grid`` (flattened in ``points()`` order).
    """

    parameter_grid: PossibilityGrid
    outcomes: tuple
    law: np.ndarray

    def __post_init__(self):
        law = np.array(self.law, dtype=float)
        outcomes = tuple(self.outcomes)
        n = self.parameter_grid.values.size
        if law.ndim == 1:
            law = np.broadcast_to(law, (n, law.size)).copy()
        if law.shape != (n, len(outcomes)):
            raise ValueError(f"law must have shape {(n, len(outcomes))}, got {law.shape}")
        if np.any(law < 0.0) or np.any(np.abs(law.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("each conditional law must be a probability vector")
        law.setflags(write=False)
        object.__setattr__(self, "law", law)
        object.__setattr__(self, "outcomes", outcomes)

    @property
    def weights(self) -> np.ndarray:
        return self.parameter_grid.values.ravel()

    def parameter_free(self) -> bool:
        return bool(np.all(self.law == self.law[0]))

    def tabulate(self, phi) -> np.ndarray:
        """phi as an array indexed by (parameter point, outcome)."""
        if callable(phi):
            pts = self.parameter_grid.points()
            return np.array([[phi(t, x) for x in self.outcomes] for t in pts], dtype=float)
        table = np.asarray(phi, dtype=float)
        if table.shape != self.law.shape:
            raise ValueError(f"phi table must have shape {self.law.shape}")
        return table


def upper_expectation(opm: DiscreteOPM, phi, ordering: str = UR) -> float:
    """Evaluate the o.p.m. on ``phi`` with the given sup/integral ordering.

    UR: max over parameters of f(theta) * E[phi(theta, X) | theta].
    RU: E[max over parameters of f(theta) * phi(theta, X)]; only defined here
    when the law does not depend on the parameter.
    """
    table = opm.tabulate(phi)
    w = opm.weights
    # both orderings sum the same products with fsum, which is correctly rounded,
    # so UR <= RU holds exactly in floating point and 6 * (1/6) stays exact
    prod = w[:, None] * (opm.law * table)
    if ordering == UR:
        return max(math.fsum(row) for row in prod)
    if ordering == RU:
        if not opm.parameter_free():
            raise ValueError("RU ordering is only defined for parameter-independent laws")
        return math.fsum(np.max(prod, axis=0))
    raise ValueError(f"unknown ordering {ordering!r}")


def credibility(opm: DiscreteOPM, event, ordering: str = UR) -> float:
    """Upper probability of the outcome event ``event`` (a collection of outcomes)."""
    event = set(event)
    ind = np.array([x in event for x in opm.outcomes], dtype=float)
    return upper_expectation(opm, np.broadcast_to(ind, opm.law.shape), ordering)


def lower_probability(opm: DiscreteOPM, event, ordering: str = UR) -> float:
    event = set(event)
    return 1.0 - credibility(opm, [x for x in opm.outcomes if x not in event], ordering)


def simplex_lattice(n: int, resolution: int) -> np.ndarray:
    """All points of the (n-1)-simplex with coordinates in {0, 1/m, ..., 1}."""
    if n < 1 or resolution < 1:
        raise ValueError("need n >= 1 and resolution >= 1")
    if n == 1:
        return np.ones((1, 1))
    # stars and bars: choose n-1 bar positions among m+n-1 slots
    rows = []
    for bars in itertools.combinations(range(resolution + n - 1), n - 1):
        edges = (-1,) + bars + (resolution + n - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(n)])
    return np.array(rows, dtype=float) / resolution
