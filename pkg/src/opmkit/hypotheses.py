"""Max-mixtures of hypothesis-indexed state descriptions.

Two recursions share the same machinery:

* data association: each scan holds several observations, exactly one of
  which comes from the system; hypotheses are sequences of observation
  indices and branch states are plain Gaussian densities (or mixed states);
* outliers: one observation per step that is either state-originated ("s")
  or background noise ("n"); branch states are ConditionalGaussianOPM.

Hypothesis weights are possibilities, so a mixture is normalised by dividing
by its largest weight, never by the sum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import mixed_kalman as mk
from ._linalg import mahalanobis_sq, symmetrize
from .gaussian import GaussianDensity
from .kalman import kf_predict, kf_update

STATE = "s"
NOISE = "n"

State = Union[mk.ConditionalGaussianOPM, GaussianDensity]


@dataclass(frozen=True, eq=False)
class Hypothesis:
    labels: tuple
    weight: float
    state: State

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"hypothesis weight {self.weight!r} outside [0, 1]")
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True, eq=False)
class MaxMixture:
    hypotheses: tuple[Hypothesis, ...]

    def __post_init__(self):
        hyps = tuple(self.hypotheses)
        if not hyps:
            raise ValueError("a max-mixture needs at least one hypothesis")
        top = max(h.weight for h in hyps)
        if top != 1.0:
            raise ValueError(f"max-mixture weights must have maximum exactly 1, got {top!r}")
        object.__setattr__(self, "hypotheses", hyps)

    @classmethod
    def single(cls, state: State, labels: Sequence = ()) -> "MaxMixture":
        return cls((Hypothesis(tuple(labels), 1.0, state),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([h.weight for h in self.hypotheses])

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)


@dataclass(frozen=True)
class ClutterModel:
    """Credibility ``alpha`` that an observation comes from background noise."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def sup_normalize(items: list[tuple[tuple, float, State]]) -> MaxMixture:
    """Build a mixture from raw (labels, weight, state) triples, dividing by the largest weight."""
    top = max(w for _, w, _ in items)
    if not top > 0.0:
        raise ValueError("all hypothesis weights vanished")
    return MaxMixture(tuple(Hypothesis(lab, w / top, s) for lab, w, s in items))


def predict_state(state: State, model: mk.ModelMatrices) -> State:
    if isinstance(state, GaussianDensity):
        return kf_predict(state, model.F, model.Q)
    return mk.predict(state, model)


def update_state(state: State, y, model: mk.ModelMatrices) -> tuple[State, float]:
    """Posterior state and possibilistic marginal likelihood of ``y``."""
    if isinstance(state, GaussianDensity):
        h = model.H
        if h.shape[1] < state.dim:  # H is stored over the x block only
            h = np.hstack([h, np.zeros((h.shape[0], state.dim - h.shape[1]))])
        post, lik, _ = kf_update(state, y, h, model.R)
        return post, lik
    post, gains = mk.update(state, y, model)
    return post, gains.L


def joint_moments(state: State) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(state, GaussianDensity):
        return state.mean, state.cov
    return mk.recover_joint(state)


def _from_moments(like: State, mean, cov) -> State:
    if isinstance(like, GaussianDensity):
        return GaussianDensity(mean, cov)
    return mk.from_joint(mean, cov, like.x_dim)


def da_predict(mixture: MaxMixture, model: mk.ModelMatrices) -> MaxMixture:
    """Advance every branch state; weights are untouched."""
    return MaxMixture(tuple(Hypothesis(h.labels, h.weight, predict_state(h.state, model)) for h in mixture))


predict_mixture = da_predict


def da_update(mixture: MaxMixture, scan: Sequence, model: mk.ModelMatrices) -> MaxMixture:
    """Branch every hypothesis on which observation of ``scan`` is the true one.

    Children are ordered parent by parent, then by observation index (0-based).
    """
    scan = list(scan)
    if not scan:
        raise ValueError("da_update needs at least one observation in the scan")
    items = []
    for h in mixture:
        for j, y in enumerate(scan):
            post, lik = update_state(h.state, y, model)
            items.append((h.labels + (j,), h.weight * lik, post))
    return sup_normalize(items)


def outlier_update(mixture: MaxMixture, y, clutter: ClutterModel, model: mk.ModelMatrices) -> MaxMixture:
    """Branch every (predicted) hypothesis on the source of ``y``.

    The "s" child assimilates ``y`` with weight times the marginal likelihood;
    the "n" child keeps the predicted state with weight times alpha.
    """
    items = []
    for h in mixture:
        post, lik = update_state(h.state, y, model)
        items.append((h.labels + (STATE,), h.weight * lik, post))
        items.append((h.labels + (NOISE,), h.weight * clutter.alpha, h.state))
    return sup_normalize(items)


def prune(mixture: MaxMixture, threshold: float) -> MaxMixture:
    """Drop hypotheses with weight strictly below ``threshold``; the best one always survives."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("prune threshold must lie in [0, 1)")
    best = int(np.argmax(mixture.weights))
    kept = [(h.labels, h.weight, h.state) for i, h in enumerate(mixture) if h.weight >= threshold or i == best]
    return sup_normalize(kept)


def merge(mixture: MaxMixture, mahalanobis_sq_threshold: float) -> MaxMixture:
    """Greedy highest-weight-first merging in the joint (x, theta) space.

    Each absorber takes every remaining hypothesis whose joint mean lies within
    the squared Mahalanobis threshold (measured with the absorber's covariance).
    The merged hypothesis keeps the absorber's labels and weight (the max) and
    moment-matches the group with relative weights.
    """
    if not mahalanobis_sq_threshold > 0.0:
        raise ValueError("merge threshold must be positive")
    hyps = list(mixture)
    order = sorted(range(len(hyps)), key=lambda i: -hyps[i].weight)  # stable: ties keep insertion order
    moments = [joint_moments(h.state) for h in hyps]
    remaining = list(order)
    out = []
    while remaining:
        a = remaining[0]
        m_a, p_a = moments[a]
        group = [i for i in remaining
                 if i == a or mahalanobis_sq(moments[i][0] - m_a, p_a, "joint covariance") <= mahalanobis_sq_threshold]
        remaining = [i for i in remaining if i not in group]
        head = hyps[a]
        if len(group) == 1:
            out.append((head.labels, head.weight, head.state))
            continue
        w = np.array([hyps[i].weight for i in group])
        w = w / w.sum()
        means = np.array([moments[i][0] for i in group])
        mean = w @ means
        cov = np.zeros_like(p_a)
        for wi, i in zip(w, group):
            d = moments[i][0] - mean
            cov += wi * (moments[i][1] + np.outer(d, d))
        out.append((head.labels, head.weight, _from_moments(head.state, mean, symmetrize(cov))))
    return sup_normalize(out)


def cap(mixture: MaxMixture, max_hypotheses: int = 100) -> MaxMixture:
    """Keep the ``max_hypotheses`` best hypotheses (stable on ties)."""
    if len(mixture) <= max_hypotheses:
        return mixture
    w = mixture.weights
    keep = sorted(np.argsort(-w, kind="stable")[:max_hypotheses])
    return sup_normalize([(mixture.hypotheses[i].labels, mixture.hypotheses[i].weight, mixture.hypotheses[i].state)
                          for i in keep])


def reduce(mixture: MaxMixture, prune_threshold: float = 1e-3, merge_threshold: float = 3.22,
           max_hypotheses: int = 100) -> MaxMixture:
    return cap(merge(prune(mixture, prune_threshold), merge_threshold), max_hypotheses)


def map_extract(mixture: MaxMixture) -> tuple[tuple, np.ndarray]:
    """Labels and joint mean of the max-weight hypothesis (first one on ties)."""
    best = mixture.hypotheses[int(np.argmax(mixture.weights))]
    return best.labels, joint_moments(best.state)[0]
