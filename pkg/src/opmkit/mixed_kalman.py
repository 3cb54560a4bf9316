"""Kalman-style recursion for a state split into a random part x and a
possibility-described part theta.

The o.p.m. over (theta, x) is carried in conditional form: theta is described
by N-bar(m_theta, P_theta) and, given theta, x has law
N(m_x + C (theta - m_theta), P_x).  Prediction and update stay in this form.
Treating theta as Gaussian-random gives the same joint moments as a standard
Kalman filter; the update additionally yields a dimensionless marginal
likelihood in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._linalg import cholesky, is_symmetric, spd_inv, spd_logdet, symmetrize
from .gaussian import GaussianPossibility, conditional_decompose


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _mat(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a.reshape(1, 1) if a.ndim == 0 else np.atleast_2d(a)


@dataclass(frozen=True, eq=False)
class ConditionalGaussianOPM:
    m_theta: np.ndarray
    P_theta: np.ndarray
    C_xtheta: np.ndarray
    m_x: np.ndarray
    P_x: np.ndarray

    def __post_init__(self):
        m_t = np.asarray(self.m_theta, dtype=float).reshape(-1)
        m_x = _vec(self.m_x)
        nt, nx = m_t.size, m_x.size
        p_t = np.asarray(self.P_theta, dtype=float).reshape(nt, nt)
        c = np.asarray(self.C_xtheta, dtype=float).reshape(nx, nt)
        p_x = _mat(self.P_x)
        if p_x.shape != (nx, nx):
            raise ValueError(f"P_x must be {nx}x{nx}, got {p_x.shape}")
        for name, p in (("P_theta", p_t), ("P_x", p_x)):
            if not is_symmetric(p):
                raise ValueError(f"{name} is not symmetric")
            cholesky(p, name)
        for name, v in (("m_theta", m_t), ("C_xtheta", c), ("P_theta", p_t), ("m_x", m_x), ("P_x", p_x)):
            object.__setattr__(self, name, v)

    @classmethod
    def prior(cls, x_dim: int, theta_dim: int, var_x: float = 1.0, var_theta: float = 1.0):
        """Zero means, no coupling, isotropic spreads."""
        return cls(np.zeros(theta_dim), var_theta * np.eye(theta_dim), np.zeros((x_dim, theta_dim)),
                   np.zeros(x_dim), var_x * np.eye(x_dim))

    @property
    def x_dim(self) -> int:
        return self.m_x.size

    @property
    def theta_dim(self) -> int:
        return self.m_theta.size

    def theta_possibility(self) -> GaussianPossibility:
        return GaussianPossibility(self.m_theta, self.P_theta)


@dataclass(frozen=True, eq=False)
class ModelMatrices:
    """Linear model z_n = F z_{n-1} + G v_n, y_n = H x_n + w_n with z = (x, theta).

    ``x_dim`` sets where the split between x and theta falls; F must be block
    upper triangular (theta does not depend on x).  Q = G G^T.
    """

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    x_dim: int

    def __post_init__(self):
        f = _mat(self.F)
        n = f.shape[0]
        q = _mat(self.Q)
        r = _mat(self.R)
        h = np.asarray(self.H, dtype=float).reshape(r.shape[0], -1)
        if f.shape != (n, n) or q.shape != (n, n):
            raise ValueError("F and Q must be square with matching size")
        if not 0 < self.x_dim <= n:
            raise ValueError("x_dim must be in 1..state dimension")
        if h.shape[1] == n:
            if np.any(h[:, self.x_dim:] != 0.0):
                raise ValueError("H may only observe the random block x")
            h = h[:, :self.x_dim]
        if h.shape[1] != self.x_dim:
            raise ValueError(f"H must have {self.x_dim} (or {n}) columns")
        if np.any(f[self.x_dim:, :self.x_dim] != 0.0):
            raise ValueError("F must be block upper triangular: its lower-left block must be zero")
        if not is_symmetric(q) or np.min(np.linalg.eigvalsh(q)) < -1e-12 * max(1.0, np.abs(q).max()):
            raise ValueError("Q must be symmetric positive semidefinite")
        cholesky(q[self.x_dim:, self.x_dim:], "Q_thetatheta")
        if not is_symmetric(r):
            raise ValueError("R is not symmetric")
        cholesky(r, "R")
        for name, v in (("F", f), ("Q", q), ("H", h), ("R", r)):
            object.__setattr__(self, name, v)

    @classmethod
    def from_noise_gain(cls, F, G, H, R, x_dim: int):
        g = np.atleast_2d(np.asarray(G, dtype=float))
        if g.shape[0] == 1 and _mat(F).shape[0] > 1:
            g = g.T
        return cls(F, g @ g.T, H, R, x_dim)

    @property
    def theta_dim(self) -> int:
        return self.F.shape[0] - self.x_dim

    @cached_property
    def blocks(self) -> dict[str, np.ndarray]:
        k = self.x_dim
        f, q = self.F, self.Q
        q_tt_inv = spd_inv(q[k:, k:], "Q_thetatheta")
        b = q[:k, k:] @ q_tt_inv
        return {
            "F_x": f[:k, :k], "F_xtheta": f[:k, k:], "F_theta": f[k:, k:],
            "Q_xx": q[:k, :k], "Q_xtheta": q[:k, k:], "Q_thetatheta": q[k:, k:],
            "Q_gain": b,  # Q_xtheta Q_thetatheta^{-1}
            "Q_cond": symmetrize(q[:k, :k] - b @ q[:k, k:].T),
        }

    @cached_property
    def R_logdet(self) -> float:
        return spd_logdet(self.R, "R")


@dataclass(frozen=True, eq=False)
class GainSet:
    """Intermediate quantities of one step.  The two prediction fields are None
    when only ``update`` was run."""

    K_theta_pred: np.ndarray | None
    F_tilde_xtheta: np.ndarray | None
    H_tilde: np.ndarray
    K_theta: np.ndarray
    K_x: np.ndarray
    S_x: np.ndarray
    L: float


def _predict(state: ConditionalGaussianOPM, model: ModelMatrices):
    bl = model.blocks
    f_x, f_xt, f_t = bl["F_x"], bl["F_xtheta"], bl["F_theta"]
    b = bl["Q_gain"]
    nt = state.theta_dim
    p_t = state.P_theta
    p_t_pred = symmetrize(f_t @ p_t @ f_t.T + bl["Q_thetatheta"])
    k_pred = p_t @ f_t.T @ spd_inv(p_t_pred, "predicted P_theta")
    a = f_x @ state.C_xtheta + f_xt
    f_tilde = a - b @ f_t
    eye = np.eye(nt)
    c_pred = a @ k_pred + b @ (eye - f_t @ k_pred)
    m_x_pred = f_xt @ state.m_theta + f_x @ state.m_x
    # F_x (not F_xtheta) propagates P_x: the only reading consistent with the joint Kalman filter
    p_x_pred = f_tilde @ ((eye - k_pred @ f_t) @ p_t) @ f_tilde.T + f_x @ state.P_x @ f_x.T + bl["Q_cond"]
    out = ConditionalGaussianOPM(f_t @ state.m_theta, p_t_pred, c_pred, m_x_pred, symmetrize(p_x_pred))
    return out, k_pred, f_tilde


def predict(state: ConditionalGaussianOPM, model: ModelMatrices) -> ConditionalGaussianOPM:
    return _predict(state, model)[0]


def update(state: ConditionalGaussianOPM, y, model: ModelMatrices) -> tuple[ConditionalGaussianOPM, GainSet]:
    """Assimilate observation ``y`` into a predicted state."""
    y = _vec(y)
    h, r = model.H, model.R
    nx, nt = state.x_dim, state.theta_dim
    c, p_t, p_x = state.C_xtheta, state.P_theta, state.P_x
    h_tilde = h @ c
    s_x = symmetrize(h @ p_x @ h.T + r)
    s_tot = symmetrize(h_tilde @ p_t @ h_tilde.T + s_x)
    s_tot_inv = spd_inv(s_tot, "total innovation covariance")
    k_t = p_t @ h_tilde.T @ s_tot_inv
    k_x = p_x @ h.T @ spd_inv(s_x, "innovation covariance S_x")
    innov = y - h @ state.m_x
    c_new = (np.eye(nx) - k_x @ h) @ c
    new = ConditionalGaussianOPM(
        state.m_theta + k_t @ innov,
        symmetrize((np.eye(nt) - k_t @ h_tilde) @ p_t),
        c_new,
        state.m_x + (k_x + c_new @ k_t) @ innov,
        symmetrize((np.eye(nx) - k_x @ h) @ p_x),
    )
    # |R| <= |S_x| analytically; the min() absorbs rounding when P_x is negligible
    log_ratio = min(0.0, model.R_logdet - spd_logdet(s_x, "S_x"))
    lik = math.exp(0.5 * log_ratio - 0.5 * float(innov @ s_tot_inv @ innov))
    return new, GainSet(None, None, h_tilde, k_t, k_x, s_x, float(lik))


def marginal_likelihood(state: ConditionalGaussianOPM, y, model: ModelMatrices) -> float:
    return update(state, y, model)[1].L


def step(state: ConditionalGaussianOPM, y, model: ModelMatrices) -> tuple[ConditionalGaussianOPM, GainSet]:
    """Predict then update, returning every gain of the step."""
    pred, k_pred, f_tilde = _predict(state, model)
    new, gains = update(pred, y, model)
    return new, GainSet(k_pred, f_tilde, gains.H_tilde, gains.K_theta, gains.K_x, gains.S_x, gains.L)


def recover_joint(state: ConditionalGaussianOPM) -> tuple[np.ndarray, np.ndarray]:
    """Stacked mean (x, theta) and full covariance, treating theta as random."""
    p_xt = state.C_xtheta @ state.P_theta
    p_xx = state.P_x + state.C_xtheta @ p_xt.T
    mean = np.concatenate([state.m_x, state.m_theta])
    cov = np.block([[p_xx, p_xt], [p_xt.T, state.P_theta]])
    return mean, symmetrize(cov)


def from_joint(mean, cov, x_dim: int) -> ConditionalGaussianOPM:
    """Inverse of ``recover_joint``."""
    mean = _vec(mean)
    marg, cond = conditional_decompose(mean, cov, x_dim)
    nt = mean.size - x_dim
    p_t = marg.spread if marg is not None else np.zeros((0, 0))
    return ConditionalGaussianOPM(mean[x_dim:], p_t, cond.gain.reshape(x_dim, nt), cond.offset, cond.cov)
