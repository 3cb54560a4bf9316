"""Oracle-equivalence checks runnable outside the test suite (``opmkit validate``)."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import mixed_kalman as mk
from .gaussian import GaussianDensity
from .kalman import kf_predict, kf_update
from .possibility import RU, UR, DiscreteOPM, PossibilityGrid, upper_expectation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_spd(rng: np.random.Generator, n: int, floor: float = 0.1) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return a @ a.T / n + floor * np.eye(n)


def _stable_block(rng, n, radius=0.98):
    a = rng.standard_normal((n, n))
    rho = max(np.max(np.abs(np.linalg.eigvals(a))), 1e-12)
    return a * (radius / rho) * rng.uniform(0.5, 1.0)


def random_model(rng: np.random.Generator, x_dim: int, theta_dim: int, y_dim: int) -> mk.ModelMatrices:
    """Block upper-triangular stable F, full-rank process noise, SPD R."""
    n = x_dim + theta_dim
    f = np.zeros((n, n))
    f[:x_dim, :x_dim] = _stable_block(rng, x_dim)
    f[:x_dim, x_dim:] = 0.5 * rng.standard_normal((x_dim, theta_dim))
    f[x_dim:, x_dim:] = _stable_block(rng, theta_dim)
    h = rng.standard_normal((y_dim, x_dim))
    return mk.ModelMatrices(f, random_spd(rng, n), h, random_spd(rng, y_dim), x_dim)


def kalman_equivalence(n_models: int = 20, n_steps: int = 100, seed: int = 0) -> float:
    """Largest elementwise gap between the mixed filter (through its joint
    moments) and a joint Kalman filter on simulated data."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_models):
        nx, nt, ny = (int(v) for v in rng.integers(1, 4, size=3))
        model = random_model(rng, nx, nt, ny)
        state = mk.ConditionalGaussianOPM(rng.standard_normal(nt), random_spd(rng, nt),
                                          rng.standard_normal((nx, nt)), rng.standard_normal(nx),
                                          random_spd(rng, nx))
        joint = GaussianDensity(*mk.recover_joint(state))
        h_full = np.hstack([model.H, np.zeros((ny, nt))])
        z = rng.multivariate_normal(joint.mean, joint.cov)
        chol_q = np.linalg.cholesky(model.Q)
        chol_r = np.linalg.cholesky(model.R)
        for _ in range(n_steps):
            z = model.F @ z + chol_q @ rng.standard_normal(nx + nt)
            y = model.H @ z[:nx] + chol_r @ rng.standard_normal(ny)
            state = mk.update(mk.predict(state, model), y, model)[0]
            joint = kf_update(kf_predict(joint, model.F, model.Q), y, h_full, model.R)[0]
            m, p = mk.recover_joint(state)
            worst = max(worst, float(np.max(np.abs(m - joint.mean))), float(np.max(np.abs(p - joint.cov))))
    return worst


def likelihood_bound(n_calls: int = 100_000, seed: int = 0) -> int:
    """Number of updates whose marginal likelihood falls outside [0, 1]."""
    rng = np.random.default_rng(seed)
    bad = 0
    models = [random_model(rng, 1 + i % 2, 1 + (i // 2) % 2, 1 + (i // 4) % 2) for i in range(16)]
    for i in range(n_calls):
        model = models[i % len(models)]
        nx, nt, ny = model.x_dim, model.theta_dim, model.R.shape[0]
        scale = 10.0 ** rng.uniform(-3, 3)
        state = mk.ConditionalGaussianOPM(rng.standard_normal(nt), scale * random_spd(rng, nt, 1e-3),
                                          rng.standard_normal((nx, nt)), rng.standard_normal(nx),
                                          scale * random_spd(rng, nx, 1e-3))
        y = rng.standard_normal(ny) * 10.0 ** rng.uniform(-2, 2)
        lik = mk.update(state, y, model)[1].L
        bad += not 0.0 <= lik <= 1.0
    return bad


def die_example() -> float:
    """Largest gap to the closed forms 1/6 (one ordering) and min(s-1, 13-s)/6 (the other)
    for the sum of two dice, one fair and one with unknown face probabilities."""
    outcomes = np.arange(1, 7)
    # parameters: the 6 vertices of the simplex for the unknown die
    theta = np.arange(1, 7)
    law = np.full(6, 1.0 / 6.0)
    opm = DiscreteOPM(PossibilityGrid((theta,), np.ones(6)), outcomes, law)
    worst = 0.0
    for s in range(2, 13):
        phi = lambda t, x, s=s: float(x + t == s)
        ur = upper_expectation(opm, phi, UR)
        ru = upper_expectation(opm, phi, RU)
        worst = max(worst, abs(ur - float(Fraction(1, 6))), abs(ru - float(Fraction(min(s - 1, 13 - s), 6))))
    return worst


def run_all(quick: bool = False) -> list[CheckResult]:
    out = []
    gap = kalman_equivalence(5 if quick else 20, 100)
    out.append(CheckResult("kalman-equivalence", gap < 1e-9, f"max abs error {gap:.3e}"))
    bad = likelihood_bound(2_000 if quick else 100_000)
    out.append(CheckResult("likelihood-bound", bad == 0, f"{bad} violations"))
    gap = die_example()
    out.append(CheckResult("die-example", gap <= 1e-15, f"max abs error {gap:.3e}"))
    return out
