"""Textbook Kalman filter steps on a GaussianDensity."""
from __future__ import annotations

import math

import numpy as np

from ._linalg import spd_inv, spd_logdet, symmetrize
from .gaussian import GaussianDensity


def kf_predict(state: GaussianDensity, F, Q) -> GaussianDensity:
    F = np.atleast_2d(F)
    return GaussianDensity(F @ state.mean, symmetrize(F @ state.cov @ F.T + Q))


def kf_update(state: GaussianDensity, y, H, R) -> tuple[GaussianDensity, float, float]:
    """Returns the posterior, the possibilistic marginal likelihood
    sqrt(|R|/|S|) * N-bar(y; H m, S), and the log of the usual density N(y; H m, S)."""
    H, R = np.atleast_2d(H), np.atleast_2d(R)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    s = symmetrize(H @ state.cov @ H.T + R)
    s_inv = spd_inv(s, "innovation covariance")
    k = state.cov @ H.T @ s_inv
    innov = y - H @ state.mean
    post = GaussianDensity(state.mean + k @ innov, symmetrize((np.eye(state.dim) - k @ H) @ state.cov))
    q = float(innov @ s_inv @ innov)
    ld_s = spd_logdet(s, "innovation covariance")
    lik = math.exp(0.5 * min(0.0, spd_logdet(R, "R") - ld_s) - 0.5 * q)
    log_density = -0.5 * (q + y.size * math.log(2.0 * math.pi) + ld_s)
    return post, lik, log_density
