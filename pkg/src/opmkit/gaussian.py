"""Normal possibility functions and normal densities in closed form."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._linalg import NotPositiveDefiniteError, cholesky, is_symmetric, spd_inv, spd_logdet, symmetrize


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _mat(a, n: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ValueError(f"matrix is {a.shape[0]}x{a.shape[0]}, expected {n}x{n}")
    return a


def _check_spd(a: np.ndarray, what: str) -> None:
    if not is_symmetric(a):
        raise ValueError(f"{what} is not symmetric")
    cholesky(a, what)


@dataclass(frozen=True, eq=False)
class GaussianPossibility:
    """N-bar(x; mean, spread) = exp(-0.5 (x-mean)^T spread^{-1} (x-mean))."""

    mean: np.ndarray
    spread: np.ndarray

    def __post_init__(self):
        mean = _vec(self.mean)
        spread = _mat(self.spread, mean.size)
        _check_spd(spread, "spread")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "spread", spread)

    @property
    def dim(self) -> int:
        return self.mean.size

    def __call__(self, x) -> float | np.ndarray:
        return eval_possibility(self, x)


@dataclass(frozen=True, eq=False)
class GaussianDensity:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _vec(self.mean)
        cov = _mat(self.cov, mean.size)
        _check_spd(cov, "covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x) -> float | np.ndarray:
        x = np.asarray(x, dtype=float)
        d = _offsets(x, self.mean)
        q = np.einsum("...i,ij,...j->...", d, spd_inv(self.cov, "covariance"), d)
        out = -0.5 * (q + self.dim * math.log(2.0 * math.pi) + spd_logdet(self.cov))
        return float(out) if np.ndim(out) == 0 else out

    def pdf(self, x) -> float | np.ndarray:
        return np.exp(self.logpdf(x))


def _offsets(x: np.ndarray, mean: np.ndarray) -> np.ndarray:
    if mean.size == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != mean.size:
        raise ValueError(f"point has dimension {x.shape[-1]}, expected {mean.size}")
    return x - mean


def eval_possibility(g: GaussianPossibility, x) -> float | np.ndarray:
    """Evaluate at one point or at a stack of points (last axis = dimension)."""
    d = _offsets(np.asarray(x, dtype=float), g.mean)
    q = np.einsum("...i,ij,...j->...", d, spd_inv(g.spread, "spread"), d)
    out = np.exp(-0.5 * q)
    return float(out) if np.ndim(out) == 0 else out


def linear_transform(g: GaussianPossibility, a, b=None) -> GaussianPossibility:
    """Pushforward of ``g`` by x -> A x + b; A must have full row rank."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] != g.dim:
        raise ValueError(f"A has {a.shape[1]} columns, expected {g.dim}")
    if np.linalg.matrix_rank(a) < a.shape[0]:
        raise ValueError("A is rank deficient; the pushforward leaves the normal family")
    b = np.zeros(a.shape[0]) if b is None else _vec(b)
    if b.size != a.shape[0]:
        raise ValueError("offset dimension does not match A")
    return GaussianPossibility(a @ g.mean + b, symmetrize(a @ g.spread @ a.T))


def sum_independent(g1: GaussianPossibility, g2: GaussianPossibility) -> GaussianPossibility:
    """Possibility of theta + psi for independently described normal theta, psi."""
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    return GaussianPossibility(g1.mean + g2.mean, g1.spread + g2.spread)


@dataclass(frozen=True, eq=False)
class ConditionalGaussian:
    """x | theta ~ N(offset + gain (theta - anchor), cov)."""

    offset: np.ndarray
    anchor: np.ndarray
    gain: np.ndarray
    cov: np.ndarray

    def mean_at(self, theta) -> np.ndarray:
        return self.offset + self.gain @ (_vec(theta) - self.anchor)

    def density_at(self, theta) -> GaussianDensity:
        return GaussianDensity(self.mean_at(theta), self.cov)


def conditional_decompose(joint_mean, joint_cov, x_dim: int) -> tuple[GaussianPossibility, ConditionalGaussian]:
    """Split a joint normal over (x, theta) into the theta marginal and x | theta.

    The first ``x_dim`` coordinates are x, the rest are theta.
    """
    m = _vec(joint_mean)
    q = _mat(joint_cov, m.size)
    if not 0 <= x_dim <= m.size:
        raise ValueError("x_dim out of range")
    q_xx, q_xt, q_tt = q[:x_dim, :x_dim], q[:x_dim, x_dim:], q[x_dim:, x_dim:]
    q_tt_inv = spd_inv(q_tt, "theta block")
    gain = q_xt @ q_tt_inv
    schur = symmetrize(q_xx - gain @ q_xt.T)
    try:
        cholesky(schur, "Schur complement")
    except NotPositiveDefiniteError as exc:
        raise NotPositiveDefiniteError("Schur complement is not positive definite; invalid joint") from exc
    marg = GaussianPossibility(m[x_dim:], q_tt) if m.size > x_dim else None
    return marg, ConditionalGaussian(m[:x_dim], m[x_dim:], gain, schur)


def recompose(marg: GaussianPossibility, cond: ConditionalGaussian) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of ``conditional_decompose``: joint mean and covariance over (x, theta)."""
    p_xt = cond.gain @ marg.spread
    p_xx = cond.cov + cond.gain @ p_xt.T
    mean = np.concatenate([cond.offset, marg.mean])
    cov = np.block([[p_xx, p_xt], [p_xt.T, marg.spread]])
    return mean, symmetrize(cov)
