"""Acceptance gate: one test per primary criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines also appear
in the "acceptance criteria" section at the end of the session.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from opmkit import bandit as B
from opmkit import hypotheses as hyp
from opmkit import mixed_kalman as mk
from opmkit import possibility as P
from opmkit import sim
from opmkit.gaussian import GaussianDensity, GaussianPossibility, linear_transform, sum_independent
from opmkit.validation import likelihood_bound, random_model, random_spd

from oracles import (bandit_lattice_sup, joint_kf_step, lattice_pushforward, lattice_sup_convolution)

REFERENCE_OPM = {0.9: 0.0501, 0.8: 0.0964, 0.7: 0.1395}
REFERENCE_PROB = {0.9: 0.0320, 0.8: 0.0600, 0.7: 0.0857}


def report(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


# 1 -------------------------------------------------------------------------

def test_c1_kalman_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        nx, nt, ny = (int(v) for v in rng.integers(1, 4, size=3))
        model = random_model(rng, nx, nt, ny)
        s = mk.ConditionalGaussianOPM(rng.standard_normal(nt), random_spd(rng, nt), rng.standard_normal((nx, nt)),
                                      rng.standard_normal(nx), random_spd(rng, nx))
        m, p = mk.recover_joint(s)
        h = np.hstack([model.H, np.zeros((ny, nt))])
        for _ in range(100):
            y = 2.0 * rng.standard_normal(ny)
            s = mk.update(mk.predict(s, model), y, model)[0]
            m, p = joint_kf_step(m, p, y, model.F, model.Q, h, model.R)
            mm, pp = mk.recover_joint(s)
            worst = max(worst, np.max(np.abs(mm - m)), np.max(np.abs(pp - p)))
    dt = time.perf_counter() - t0
    assert report("C1 Kalman equivalence", worst < 1e-9 and dt < 10,
                  f"max abs error {worst:.2e} over 20 models x 100 steps (< 1e-9), {dt:.2f}s (< 10s)")


# 2 -------------------------------------------------------------------------

def test_c2_bandit_closed_forms():
    t0 = time.perf_counter()
    ok = True
    r = np.arange(1.0, 5.0)
    for y in range(3):
        c = B.event_credibility(B.BanditPosterior.unplayed(r).observe(y), [3])
        ok &= abs(c - 0.25) <= 1e-3
    c_top = B.event_credibility(B.BanditPosterior.unplayed(r).observe(3), [3])
    ok &= abs(c_top - 1.0) <= 1e-12
    ok &= B.posterior_mode(B.BanditPosterior([3, 0, 1])).tolist() == [0.75, 0.0, 0.25]
    ok &= B.posterior_mode(B.BanditPosterior([2, 5, 1, 2])).tolist() == [0.2, 0.5, 0.1, 0.2]
    notes = []
    for reward, y in (((1.0, 2.0), 0), ((0.0, 1.0, 10.0), 0), ((1.0, 3.0, 4.0), 0)):
        counts = np.zeros(len(reward), int)
        counts[y] = 1
        impl = B.max_credible_reward(B.BanditPosterior(counts, reward))
        oracle = bandit_lattice_sup(counts, reward, 2000)
        rn, ry = reward[-1], reward[y]
        literal = rn / (4 * (rn - ry))
        derived = rn ** 2 / (4 * (rn - ry))
        ok &= abs(impl - oracle) <= 1e-3 * rn
        notes.append(f"r={reward} y={y + 1}: impl {impl:.4f} lattice {oracle:.4f} "
                     f"literal-form {literal:.4f} squared-form {derived:.4f}")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    for n in notes:
        print("    Ebar discrepancy:", n)
        ACCEPTANCE_LINES.append("    Ebar discrepancy: " + n)
    assert report("C2 bandit closed forms", ok,
                  f"cred after non-max play ~1/4, after max play {c_top!r}, modes exact, Ebar vs lattice 1/2000; {dt:.2f}s")


# 3 -------------------------------------------------------------------------

def test_c3_die_example():
    t0 = time.perf_counter()
    opm = P.DiscreteOPM(P.PossibilityGrid(tuple(range(1, 7)), np.ones(6)), tuple(range(1, 7)), np.full(6, 1 / 6))
    worst = 0.0
    for s in range(2, 13):
        phi = np.array([[float(t + x == s) for x in range(1, 7)] for t in range(1, 7)])
        worst = max(worst, abs(P.upper_expectation(opm, phi, P.UR) - 1 / 6),
                    abs(P.upper_expectation(opm, phi, P.RU) - min(s - 1, 13 - s) / 6))
    dt = time.perf_counter() - t0
    assert report("C3 die example", worst <= 1e-15 and dt < 1,
                  f"max deviation {worst:.1e} over s=2..12 (<= 1e-15), {dt * 1e3:.1f}ms")


# 4 -------------------------------------------------------------------------

def test_c4_gaussian_algebra():
    t0 = time.perf_counter()
    exact = (linear_transform(GaussianPossibility(1.0, 4.0), [[2.0]]).spread.tolist() == [[16.0]]
             and sum_independent(GaussianPossibility(1.0, 4.0), GaussianPossibility(2.0, 9.0)).spread.tolist() == [[13.0]]
             and sum_independent(GaussianPossibility(0.0, 1.0), GaussianPossibility(0.0, 1.0)).spread.tolist() == [[2.0]]
             and linear_transform(GaussianPossibility(0.0, 1.0), [[1.0]], [3.0]).mean.tolist() == [3.0])
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(4):
        g = GaussianPossibility(rng.standard_normal(2), random_spd(rng, 2, 0.3))
        a, b = rng.standard_normal((1, 2)), float(rng.standard_normal())
        h = linear_transform(g, a, [b])
        for psi in h.mean[0] + np.sqrt(h.spread[0, 0]) * np.array([-2.0, -0.5, 0.7, 1.9]):
            worst = max(worst, abs(h(psi) - lattice_pushforward(g.mean, g.spread, a, b, psi)))
        g1 = GaussianPossibility(rng.standard_normal(1), random_spd(rng, 1, 0.3))
        g2 = GaussianPossibility(rng.standard_normal(1), random_spd(rng, 1, 0.3))
        s = sum_independent(g1, g2)
        for z in s.mean[0] + np.sqrt(s.spread[0, 0]) * np.array([-2.5, 0.0, 1.3]):
            worst = max(worst, abs(s(z) - lattice_sup_convolution(g1.mean, g1.spread, g2.mean, g2.spread, z)))
    g1 = GaussianPossibility([0.0, 1.0], [[1.0, 0.3], [0.3, 0.5]])
    g2 = GaussianPossibility([1.0, -1.0], [[0.7, -0.2], [-0.2, 1.2]])
    s = sum_independent(g1, g2)
    for z in ([1.0, 0.0], [2.2, -0.7], [0.1, 1.1]):
        worst = max(worst, abs(s(z) - lattice_sup_convolution(g1.mean, g1.spread, g2.mean, g2.spread, z)))
    dt = time.perf_counter() - t0
    assert report("C4 Gaussian algebra", exact and worst < 1e-6 and dt < 5,
                  f"parameter formulas exact={exact}, max oracle gap {worst:.1e} (< 1e-6), {dt:.2f}s")


# 5 -------------------------------------------------------------------------

def _random_joint(rng):
    r, c = rng.integers(1, 7, size=2)
    v = rng.random((r, c)) * (rng.random((r, c)) > 0.2)
    v[rng.integers(r), rng.integers(c)] = rng.random() + 1e-3
    return P.normalize(v)


def test_c5_possibility_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    violations = {k: 0 for k in ("normalization", "marginal-condition", "round-trip", "envelope", "UR<=RU")}
    for _ in range(1000):
        j = _random_joint(rng)
        outs = [P.marginal(j, 0), P.marginal(j, 1), P.independence_envelope(j), P.pushforward(j, lambda p: sum(p) % 4)]
        violations["normalization"] += any(o.values.max() != 1.0 for o in outs) or j.values.max() != 1.0
    for _ in range(1000):
        j = _random_joint(rng)
        m = P.marginal(j, 1)
        bad = False
        for k, psi in enumerate(j.axes[1]):
            if m.values[k] > 0:
                bad |= np.max(np.abs(P.condition(j, psi).values * m.values[k] - j.values[:, k])) > 1e-12
        violations["marginal-condition"] += bad
    for _ in range(1000):
        f = P.normalize(_random_joint(rng).values.ravel())
        perm = {p: q for p, q in zip(f.axes[0], rng.permutation(10 * len(f.axes[0]))[:len(f.axes[0])])}
        g = P.pullback(P.pushforward(f, perm.__getitem__), perm.__getitem__, domain=f.axes[0])
        violations["round-trip"] += not np.array_equal(g.values, f.values)
    for _ in range(1000):
        j = _random_joint(rng)
        violations["envelope"] += not np.all(P.independence_envelope(j).values >= j.values)
    for _ in range(1000):
        n_par, n_out = rng.integers(1, 6, size=2)
        f = P.normalize(rng.random(n_par) + 1e-3)
        law = rng.random(n_out) + 1e-3
        opm = P.DiscreteOPM(f, tuple(range(n_out)), law / law.sum())
        phi = 10 * rng.random((n_par, n_out))
        violations["UR<=RU"] += P.upper_expectation(opm, phi, P.UR) > P.upper_expectation(opm, phi, P.RU)
    dt = time.perf_counter() - t0
    total = sum(violations.values())
    assert report("C5 possibility property suite", total == 0 and dt < 30,
                  f"1000 grids per property, violations {violations}, {dt:.2f}s")


# 6 -------------------------------------------------------------------------

def test_c6_likelihood_bound():
    t0 = time.perf_counter()
    bad = likelihood_bound(100_000, seed=6)
    dt = time.perf_counter() - t0
    assert report("C6 marginal likelihood in [0,1]", bad == 0, f"{bad} violations in 100000 updates, {dt:.1f}s")


# 7 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def study():
    t0 = time.perf_counter()
    res = sim.monte_carlo(sim.ScenarioConfig(seed=0), 200, [0.9, 0.8, 0.7])
    return res, time.perf_counter() - t0


def _assoc(res, method):
    return {pd: res.row(method, pd).assoc_error for pd in (0.9, 0.8, 0.7)}


def test_c7_study_orderings(study):
    res, dt = study
    opm, prob = _assoc(res, "opm"), _assoc(res, "probabilistic")
    a = all(prob[pd] <= opm[pd] for pd in opm)
    b = all(d[0.9] < d[0.8] < d[0.7] for d in (opm, prob))
    d = all(res.row("opm", pd).rmse >= res.row("probabilistic", pd).rmse for pd in opm)
    fmt = lambda x: "/".join(f"{100 * x[pd]:.2f}%" for pd in (0.9, 0.8, 0.7))
    rm = "/".join(f"{res.row('opm', pd).rmse:.2f}>={res.row('probabilistic', pd).rmse:.2f}" for pd in opm)
    assert report("C7(a,b,d) reference study orderings", a and b and d and dt < 300,
                  f"assoc o.p.m. {fmt(opm)} vs prob {fmt(prob)}; ordering={a} monotone={b} "
                  f"rmse {rm} ordering={d}; M=200 in {dt:.0f}s (< 300s)")


def test_c7_study_opm_magnitudes(study):
    res, _ = study
    opm = _assoc(res, "opm")
    gaps = {pd: 100 * (opm[pd] - REFERENCE_OPM[pd]) for pd in opm}
    assert report("C7(c) o.p.m. association error within 3 points", all(abs(g) <= 3 for g in gaps.values()),
                  ", ".join(f"p_d={pd}: {100 * opm[pd]:.2f}% vs {100 * REFERENCE_OPM[pd]:.2f}% ({g:+.2f})"
                            for pd, g in gaps.items()))


@pytest.mark.xfail(strict=True, reason="reference baseline rates at p_d=0.7 lie below the Bayes-error floor "
                                       "of the specified scenario (see decisions ledger)")
def test_c7_study_probabilistic_magnitudes(study):
    res, _ = study
    prob = _assoc(res, "probabilistic")
    gaps = {pd: 100 * (prob[pd] - REFERENCE_PROB[pd]) for pd in prob}
    assert report("C7(c) probabilistic association error within 2 points", all(abs(g) <= 2 for g in gaps.values()),
                  ", ".join(f"p_d={pd}: {100 * prob[pd]:.2f}% vs {100 * REFERENCE_PROB[pd]:.2f}% ({g:+.2f})"
                            for pd, g in gaps.items()))


# 8 -------------------------------------------------------------------------

def test_c8_clutter_invariance():
    rng = np.random.default_rng(8)
    model = mk.ModelMatrices([[1.0, 0.1], [0.0, 1.0]], [[2.5e-5, 5e-4], [5e-4, 1e-2]], [[1.0, 0.0]], [[0.5]], x_dim=2)
    clean = dirty = hyp.MaxMixture.single(GaussianDensity([0.0, 0.0], np.eye(2)))
    worst, same_best, n = 0.0, True, 0
    for k in range(8):
        scan = list(0.2 * k + 0.7 * rng.standard_normal(2))
        clean = hyp.da_predict(clean, model)
        dirty = hyp.da_predict(dirty, model)
        # 30 sigma beyond every branch's predicted observation
        far = max(h.state.mean[0] + 30.0 * math.sqrt(h.state.cov[0, 0] + 0.5) for h in dirty) + 1e-9
        clean = hyp.prune(hyp.da_update(clean, scan, model), 1e-3)
        dirty = hyp.prune(hyp.da_update(dirty, scan + [far], model), 1e-3)
        bc, bd = clean.hypotheses[int(np.argmax(clean.weights))], dirty.hypotheses[int(np.argmax(dirty.weights))]
        same_best &= bc.labels == bd.labels
        wd = {h.labels: h.weight for h in dirty}
        worst = max(worst, max(abs(h.weight - wd.get(h.labels, 0.0)) for h in clean))
        n += 1
    assert report("C8 clutter invariance", same_best and worst < 1e-6,
                  f"{n} scans with a 30-sigma spurious observation: max weight change {worst:.1e} (< 1e-6), "
                  f"same best branch={same_best}")


# 9 -------------------------------------------------------------------------

def test_c9_determinism(tmp_path):
    args = ["simulate", "--runs", "6", "--steps", "100", "--seed", "42", "--pd", "0.9", "0.8", "0.7"]
    blobs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        subprocess.run([sys.executable, "-m", "opmkit.cli", *args, "--out", str(out)], check=True)
        blobs.append(out.read_bytes())
    assert report("C9 determinism", blobs[0] == blobs[1] and len(blobs[0]) > 0,
                  f"two invocations, {len(blobs[0])} bytes each, identical={blobs[0] == blobs[1]}")
