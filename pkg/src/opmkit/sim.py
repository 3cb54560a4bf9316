"""Single-target tracking with outliers: scenario generator, the two filters
being compared and Monte Carlo aggregation.

The target moves with a nearly-constant velocity; one scalar observation per
step is either a noisy position measurement ("s") or uniform background noise
on a fixed window ("n").  The possibilistic filter treats the velocity as the
deterministic part of the state and does not know the noise distribution;
the baseline is a Gaussian-sum Bayes filter given every true parameter.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import hypotheses as hyp
from . import mixed_kalman as mk

STATE, NOISE = hyp.STATE, hyp.NOISE


@dataclass(frozen=True)
class ScenarioConfig:
    delta: float = 0.1
    n_steps: int = 100
    p_d: float = 0.9
    alpha: float | None = None  # None: 1 - p_d
    R: float = 0.5
    obs_window: tuple[float, float] = (-5.0, 5.0)
    init_std: float = 0.1
    seed: int = 0
    prune: float = 1e-3
    merge: float = 3.22
    max_hypotheses: int = 100
    filter_prior_var: float = 1.0  # o.p.m. filter prior spread per dimension

    def __post_init__(self):
        if not 0.0 < self.p_d <= 1.0:
            raise ValueError("p_d must lie in (0, 1]")
        if not 0.0 <= self.clutter_alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        lo, hi = self.obs_window
        if not hi > lo:
            raise ValueError("observation window is degenerate")
        if self.n_steps < 1 or self.R <= 0.0 or self.init_std <= 0.0 or self.filter_prior_var <= 0.0:
            raise ValueError("n_steps, R, init_std and filter_prior_var must be positive")

    @property
    def clutter_alpha(self) -> float:
        return 1.0 - self.p_d if self.alpha is None else float(self.alpha)

    @property
    def window_width(self) -> float:
        return self.obs_window[1] - self.obs_window[0]

    @property
    def F(self) -> np.ndarray:
        return np.array([[1.0, self.delta], [0.0, 1.0]])

    @property
    def G(self) -> np.ndarray:
        return np.array([self.delta ** 2 / 2.0, self.delta])

    @property
    def H(self) -> np.ndarray:
        return np.array([[1.0, 0.0]])

    def model(self) -> mk.ModelMatrices:
        """Position is the random block x, velocity the deterministic block theta."""
        return mk.ModelMatrices.from_noise_gain(self.F, self.G, self.H, [[self.R]], x_dim=1)


@dataclass(frozen=True, eq=False)
class ScenarioTrace:
    truth: np.ndarray        # (N, 2): position, velocity
    sources: tuple[str, ...]
    observations: np.ndarray

    def __post_init__(self):
        n = len(self.truth)
        if len(self.sources) != n or len(self.observations) != n:
            raise ValueError("truth, sources and observations must have equal length")


@dataclass(frozen=True, eq=False)
class FilterOutput:
    positions: np.ndarray
    labels: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class RunMetrics:
    sq_error: float      # sum over steps of squared position error
    mismatches: int
    n_steps: int
    estimates: FilterOutput | None = None

    @property
    def rmse(self) -> float:
        return math.sqrt(self.sq_error)

    @property
    def association_error(self) -> float:
        return self.mismatches / self.n_steps


def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> ScenarioTrace:
    """Draw a trajectory, observation sources and observations.

    Every random stream is drawn in full whatever p_d is, so a given seed gives
    the same trajectory and noise for all detection probabilities.
    """
    n = cfg.n_steps
    x0 = cfg.init_std * rng.standard_normal(2)
    v = rng.standard_normal(n)
    u = rng.random(n)
    w = math.sqrt(cfg.R) * rng.standard_normal(n)
    clutter = rng.uniform(cfg.obs_window[0], cfg.obs_window[1], n)
    f, g = cfg.F, cfg.G
    truth = np.empty((n, 2))
    x = x0
    for k in range(n):
        x = f @ x + g * v[k]
        truth[k] = x
    detected = u < cfg.p_d
    sources = tuple(STATE if d else NOISE for d in detected)
    obs = np.where(detected, truth[:, 0] + w, clutter)
    return ScenarioTrace(truth, sources, obs)


def run_opm_filter(trace: ScenarioTrace, cfg: ScenarioConfig) -> FilterOutput:
    """Outlier-robust max-mixture filter over the conditional (position | velocity) o.p.m."""
    model = cfg.model()
    var0 = cfg.filter_prior_var
    mixture = hyp.MaxMixture.single(mk.ConditionalGaussianOPM.prior(1, 1, var0, var0))
    clutter = hyp.ClutterModel(cfg.clutter_alpha)
    positions = np.empty(len(trace.observations))
    labels = []
    for k, y in enumerate(trace.observations):
        mixture = hyp.da_predict(mixture, model)
        mixture = hyp.outlier_update(mixture, y, clutter, model)
        mixture = hyp.reduce(mixture, cfg.prune, cfg.merge, cfg.max_hypotheses)
        lab, mean = hyp.map_extract(mixture)
        positions[k] = mean[0]
        labels.append(lab[-1])
    return FilterOutput(positions, tuple(labels))


def _gm_reduce(w, m, p, lab, prune, merge, cap):
    """Probability-weighted Gaussian-mixture pruning, merging (weights add) and capping."""
    keep = w >= prune
    keep[np.argmax(w)] = True
    w, m, p, lab = w[keep], m[keep], p[keep], [l for l, k in zip(lab, keep) if k]
    order = np.argsort(-w, kind="stable")
    remaining = list(order)
    ow, om, op, olab = [], [], [], []
    while remaining:
        a = remaining[0]
        d = m[remaining] - m[a]
        q = np.einsum("ij,jk,ik->i", d, np.linalg.inv(p[a]), d)
        group = [i for i, qi in zip(remaining, q) if qi <= merge]
        gset = set(group)
        remaining = [i for i in remaining if i not in gset]
        wg = w[group]
        tot = wg.sum()
        mean = (wg @ m[group]) / tot
        dd = m[group] - mean
        cov = np.einsum("i,ijk->jk", wg, p[group] + dd[:, :, None] * dd[:, None, :]) / tot
        ow.append(tot)
        om.append(mean)
        op.append(0.5 * (cov + cov.T))
        olab.append(lab[a])
    w, m, p = np.array(ow), np.array(om), np.array(op)
    if len(w) > cap:
        idx = np.sort(np.argsort(-w, kind="stable")[:cap])
        w, m, p, olab = w[idx], m[idx], p[idx], [olab[i] for i in idx]
    return w / w.sum(), m, p, olab


def run_probabilistic_baseline(trace: ScenarioTrace, cfg: ScenarioConfig,
                               check_weights: bool = False) -> FilterOutput:
    """Gaussian-sum Bayes filter that knows p_d, the uniform clutter density
    and the true initial distribution."""
    f = cfg.F
    q = np.outer(cfg.G, cfg.G)
    r = cfg.R
    lo, hi = cfg.obs_window
    clutter_density = (1.0 - cfg.p_d) / cfg.window_width
    w = np.ones(1)
    m = np.zeros((1, 2))
    p = (cfg.init_std ** 2 * np.eye(2))[None]
    lab: list[str] = [""]
    positions = np.empty(len(trace.observations))
    labels = []
    for k, y in enumerate(trace.observations):
        m = m @ f.T
        p = f @ p @ f.T + q
        s = p[:, 0, 0] + r
        innov = y - m[:, 0]
        gain = p[:, :, 0] / s[:, None]
        m_s = m + gain * innov[:, None]
        p_s = p - gain[:, :, None] * p[:, 0, None, :]
        p_s = 0.5 * (p_s + p_s.transpose(0, 2, 1))
        w_s = w * cfg.p_d * np.exp(-0.5 * innov ** 2 / s) / np.sqrt(2.0 * math.pi * s)
        w_n = w * (clutter_density if lo <= y <= hi else 0.0)
        w = np.concatenate([w_s, w_n])
        w = w / w.sum()
        if check_weights and abs(w.sum() - 1.0) > 1e-12:
            raise AssertionError("baseline weights do not sum to 1")
        m = np.concatenate([m_s, m])
        p = np.concatenate([p_s, p])
        lab = [STATE] * len(w_s) + [NOISE] * len(w_n)
        w, m, p, lab = _gm_reduce(w, m, p, lab, cfg.prune, cfg.merge, cfg.max_hypotheses)
        best = int(np.argmax(w))
        positions[k] = m[best, 0]
        labels.append(lab[best])
    return FilterOutput(positions, tuple(labels))


def score(out: FilterOutput, trace: ScenarioTrace, keep_estimates: bool = False) -> RunMetrics:
    err = out.positions - trace.truth[:, 0]
    mism = sum(a != b for a, b in zip(out.labels, trace.sources))
    return RunMetrics(float(err @ err), int(mism), len(err), out if keep_estimates else None)


def rmse(estimates: Sequence[np.ndarray], truths: Sequence[np.ndarray]) -> float:
    """sqrt((1/M) sum_runs sum_steps |x_hat - x|^2); no time normalisation."""
    if len(estimates) != len(truths) or not estimates:
        raise ValueError("need the same positive number of estimate and truth sequences")
    total = 0.0
    for est, tru in zip(estimates, truths):
        est, tru = np.asarray(est, dtype=float), np.asarray(tru, dtype=float)
        if est.shape != tru.shape:
            raise ValueError("estimate and truth lengths differ")
        total += float(np.sum((est - tru) ** 2))
    return math.sqrt(total / len(estimates))


def association_error(estimates: Sequence[Sequence], truths: Sequence[Sequence]) -> float:
    """Fraction of (run, step) pairs where the estimated source label is wrong."""
    if len(estimates) != len(truths) or not estimates:
        raise ValueError("need the same positive number of label and truth sequences")
    wrong = count = 0
    for est, tru in zip(estimates, truths):
        if len(est) != len(tru):
            raise ValueError("label and truth lengths differ")
        wrong += sum(a != b for a, b in zip(est, tru))
        count += len(tru)
    return wrong / count


METHODS = ("opm", "probabilistic")


def run_once(cfg: ScenarioConfig, seed_seq: np.random.SeedSequence) -> tuple[RunMetrics, RunMetrics]:
    trace = generate_scenario(cfg, np.random.default_rng(seed_seq))
    return score(run_opm_filter(trace, cfg), trace), score(run_probabilistic_baseline(trace, cfg), trace)


def _run_task(args):
    cfg, seed_seq = args
    return run_once(cfg, seed_seq)


@dataclass(frozen=True)
class ResultRow:
    method: str
    p_d: float
    rmse: float
    assoc_error: float
    runs: int
    seed: int


@dataclass
class MonteCarloResult:
    rows: list[ResultRow]
    # per (method, p_d): arrays of per-run squared error sums and mismatch counts
    per_run: dict = field(default_factory=dict)
    n_steps: int = 0

    def row(self, method: str, p_d: float) -> ResultRow:
        for r in self.rows:
            if r.method == method and r.p_d == p_d:
                return r
        raise KeyError((method, p_d))


def monte_carlo(cfg: ScenarioConfig, runs: int, p_d_values: Sequence[float] | None = None,
                workers: int = 1) -> MonteCarloResult:
    """Run both filters on ``runs`` seeded scenarios per detection probability.

    Run i uses the i-th child of the master seed for every p_d, so the
    comparison across p_d values is paired.  Results are reduced in run order.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    p_d_values = [cfg.p_d] if p_d_values is None else list(p_d_values)
    children = np.random.SeedSequence(cfg.seed).spawn(runs)
    result = MonteCarloResult([], {}, cfg.n_steps)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for p_d in p_d_values:
            c = replace(cfg, p_d=float(p_d))
            tasks = [(c, s) for s in children]
            outs = list(pool.map(_run_task, tasks, chunksize=max(1, runs // (4 * workers)))) if pool \
                else [_run_task(t) for t in tasks]
            for j, method in enumerate(METHODS):
                sq = np.array([o[j].sq_error for o in outs])
                mm = np.array([o[j].mismatches for o in outs])
                result.per_run[(method, c.p_d)] = (sq, mm)
                result.rows.append(ResultRow(method, c.p_d, math.sqrt(sq.sum() / runs),
                                             mm.sum() / (runs * cfg.n_steps), runs, cfg.seed))
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def check_invariants(result: MonteCarloResult) -> list[str]:
    """Violated output invariants (empty when everything is sane)."""
    problems = []
    for r in result.rows:
        if not (math.isfinite(r.rmse) and r.rmse >= 0.0):
            problems.append(f"{r.method} p_d={r.p_d}: rmse {r.rmse!r} is not a nonnegative number")
        if not 0.0 <= r.assoc_error <= 1.0:
            problems.append(f"{r.method} p_d={r.p_d}: association error {r.assoc_error!r} outside [0, 1]")
    return problems
