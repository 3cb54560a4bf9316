"""Possibilistic multi-armed bandit with unknown outcome probabilities.

Outcomes are 0-based indices ``0..N-1`` with strictly increasing rewards.  The
outcome probabilities theta are described by a possibility function on the
simplex; with no prior information it is 1 everywhere and after observing
counts k_i it becomes

    f(theta) = k^k * prod_i (theta_i / k_i)^k_i      (0^0 = 1),

maximal at the observed proportions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .possibility import simplex_lattice

_ASCENT_STARTS = 10
_ASCENT_ITERS = 20000
_LATTICE_RESOLUTION = 200
_LATTICE_MAX_POINTS = 50_000


@dataclass(frozen=True, eq=False)
class BanditPosterior:
    counts: np.ndarray
    reward: np.ndarray = field(default=None)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size < 1 or np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValueError("counts must be a vector of nonnegative integers")
        counts = counts.astype(np.int64)
        reward = np.arange(counts.size, dtype=float) if self.reward is None else np.asarray(self.reward, dtype=float)
        if reward.shape != counts.shape:
            raise ValueError("reward must have one entry per outcome")
        if np.any(reward < 0.0) or np.any(np.diff(reward) <= 0.0):
            raise ValueError("rewards must be nonnegative and strictly increasing")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "reward", reward)

    @classmethod
    def unplayed(cls, reward) -> "BanditPosterior":
        reward = np.asarray(reward, dtype=float)
        return cls(np.zeros(reward.size, dtype=np.int64), reward)

    @property
    def n_outcomes(self) -> int:
        return self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def observe(self, outcome: int) -> "BanditPosterior":
        counts = self.counts.copy()
        counts[outcome] += 1
        return BanditPosterior(counts, self.reward)


@lru_cache(maxsize=8)
def _lattice(n: int, resolution: int) -> np.ndarray:
    pts = simplex_lattice(n, resolution)
    pts.setflags(write=False)
    return pts


def _log_normalizer(counts: np.ndarray) -> float:
    k = counts.sum()
    nz = counts[counts > 0]
    return float(k * math.log(k) - np.sum(nz * np.log(nz))) if k > 0 else 0.0


def _log_posterior(counts: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """log f at each row of ``theta`` (-inf where an observed outcome has probability 0)."""
    theta = np.atleast_2d(theta)
    nz = counts > 0
    with np.errstate(divide="ignore"):
        logs = np.log(theta[:, nz])
    return _log_normalizer(counts) + logs @ counts[nz]


def _check_simplex(theta: np.ndarray, n: int) -> None:
    if theta.shape != (n,) or np.any(theta < -1e-12) or abs(theta.sum() - 1.0) > 1e-12:
        raise ValueError("theta is not a point of the simplex")


def posterior_eval(p: BanditPosterior, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    _check_simplex(theta, p.n_outcomes)
    theta = np.clip(theta, 0.0, None)
    return min(1.0, float(np.exp(_log_posterior(p.counts, theta))[0]))


def posterior_mode(p: BanditPosterior) -> np.ndarray:
    """Observed proportions.  Raises if nothing has been observed (the whole simplex is modal)."""
    if p.total == 0:
        raise ValueError("no observations: every point of the simplex is a mode")
    return p.counts / p.total


def _objective(counts: np.ndarray, a: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """f(theta) * (a . theta) for each row of ``theta``."""
    lin = np.atleast_2d(theta) @ a
    with np.errstate(divide="ignore"):
        return np.exp(_log_posterior(counts, theta) + np.log(lin))


def _ascent(counts: np.ndarray, a: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Multiplicative fixed-point ascent of sum_i k_i log theta_i + log(a . theta).

    The update theta_i <- (k_i + a_i theta_i / (a . theta)) / (k + 1) is the
    EM step for this concave objective; it never leaves the simplex.
    """
    theta = starts.copy()
    k = counts.sum()
    for _ in range(_ASCENT_ITERS):
        s = theta @ a
        new = (counts + theta * a / s[:, None]) / (k + 1.0)
        if np.max(np.abs(new - theta)) < 1e-16:
            return new
        theta = new
    return theta


def simplex_sup(p: BanditPosterior, a, seed: int = 0) -> tuple[float, np.ndarray]:
    """sup over the simplex of f(theta) * (a . theta) for a nonnegative vector ``a``.

    Candidates: vertices, the mode, ascent from several starts, and a lattice
    of resolution 1/200 when it is small enough.  Returns (value, argmax).
    """
    a = np.asarray(a, dtype=float)
    n = p.n_outcomes
    if a.shape != (n,) or np.any(a < 0.0):
        raise ValueError("a must be a nonnegative vector with one entry per outcome")
    if not np.any(a > 0.0):
        return 0.0, np.full(n, 1.0 / n)
    rng = np.random.default_rng(seed)
    starts = np.vstack([np.full(n, 1.0 / n), rng.dirichlet(np.ones(n), size=_ASCENT_STARTS - 1)])
    cands = [np.eye(n), _ascent(p.counts, a, starts)]
    if p.total > 0:
        cands.append(posterior_mode(p)[None, :])
    if math.comb(_LATTICE_RESOLUTION + n - 1, n - 1) <= _LATTICE_MAX_POINTS:
        cands.append(_lattice(n, _LATTICE_RESOLUTION))
    pts = np.vstack(cands)
    vals = _objective(p.counts, a, pts)
    i = int(np.argmax(vals))
    return float(vals[i]), pts[i]


def event_credibility(p: BanditPosterior, event) -> float:
    """Credibility that the next outcome falls in ``event`` (0-based outcome indices)."""
    event = sorted(set(event))
    if not event:
        raise ValueError("event must be non-empty")
    a = np.zeros(p.n_outcomes)
    a[event] = 1.0
    return min(1.0, simplex_sup(p, a)[0])


def max_credible_reward(p: BanditPosterior) -> float:
    """Upper expectation of the next reward."""
    if p.total == 0:
        return float(p.reward[-1])
    return min(float(p.reward[-1]), simplex_sup(p, p.reward)[0])


def expected_reward_star(p: BanditPosterior) -> float | tuple[float, float]:
    """Reward expected under the modal outcome probabilities; an interval when unplayed."""
    if p.total == 0:
        return float(p.reward[0]), float(p.reward[-1])
    return float(posterior_mode(p) @ p.reward)


def select_bandit(first: BanditPosterior, second: BanditPosterior) -> int:
    """0 to play ``first``, 1 to play ``second``; ties go to ``first``."""
    if not np.array_equal(first.reward, second.reward):
        raise ValueError("both bandits must share the reward map")
    return 1 if max_credible_reward(second) > max_credible_reward(first) else 0


def lattice_sup(p: BanditPosterior, a, resolution: int) -> tuple[float, np.ndarray]:
    """Brute-force sup of f(theta) * (a . theta) over the simplex lattice of the given resolution."""
    pts = _lattice(p.n_outcomes, resolution)
    vals = _objective(p.counts, np.asarray(a, dtype=float), pts)
    i = int(np.argmax(vals))
    return float(vals[i]), pts[i]
