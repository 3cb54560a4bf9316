import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmkit import bandit as B
from opmkit.bandit import BanditPosterior

from oracles import bandit_lattice_sup, bandit_posterior, simplex_points


def test_posterior_validation():
    with pytest.raises(ValueError):
        BanditPosterior([1, -1])
    with pytest.raises(ValueError):
        BanditPosterior([1, 0], [2.0, 1.0])
    p = BanditPosterior([2, 0, 1], [1, 2, 5])
    assert p.total == 3 and p.observe(1).counts.tolist() == [2, 1, 1]
    assert p.counts.tolist() == [2, 0, 1]


def test_posterior_eval_examples():
    empty = BanditPosterior.unplayed([0, 1, 2])
    assert B.posterior_eval(empty, [0.2, 0.3, 0.5]) == 1.0
    one = empty.observe(1)
    assert B.posterior_eval(one, [0.2, 0.3, 0.5]) == pytest.approx(0.3, abs=1e-15)
    two = BanditPosterior([1, 1])
    assert B.posterior_eval(two, [0.3, 0.7]) == pytest.approx(4 * 0.21, abs=1e-15)
    assert B.posterior_eval(two, [0.5, 0.5]) == 1.0
    with pytest.raises(ValueError):
        B.posterior_eval(two, [0.3, 0.6])


def test_posterior_mode():
    assert B.posterior_mode(BanditPosterior([3, 0, 1])).tolist() == [0.75, 0.0, 0.25]
    assert B.posterior_mode(BanditPosterior([1, 1, 1])).tolist() == [1 / 3] * 3
    with pytest.raises(ValueError):
        B.posterior_mode(BanditPosterior([0, 0]))


@pytest.mark.parametrize("counts", [(3, 0, 1), (1, 2, 2), (0, 5, 1), (4, 4, 0)])
def test_mode_maximizes_on_lattice(counts):
    p = BanditPosterior(counts)
    mode = B.posterior_mode(p)
    assert B.posterior_eval(p, mode) == pytest.approx(1.0, abs=1e-12)
    vals = bandit_posterior(counts, simplex_points(3, 60))
    assert vals.max() <= 1.0 + 1e-12


def test_event_credibility_closed_forms():
    for n in (2, 3, 4):
        r = np.arange(n, dtype=float)
        for y in range(n - 1):
            p = BanditPosterior.unplayed(r).observe(y)
            assert abs(B.event_credibility(p, [n - 1]) - 0.25) <= 1e-3
        top = BanditPosterior.unplayed(r).observe(n - 1)
        assert abs(B.event_credibility(top, [n - 1]) - 1.0) <= 1e-12
    assert B.event_credibility(BanditPosterior.unplayed([1, 2, 3]), [0]) == 1.0
    with pytest.raises(ValueError):
        B.event_credibility(BanditPosterior([1, 0]), [])


def test_max_credible_reward_examples():
    assert B.max_credible_reward(BanditPosterior.unplayed([1, 2, 7])) == 7.0
    assert B.max_credible_reward(BanditPosterior([0, 0, 1], [1, 2, 7])) == pytest.approx(7.0, abs=1e-12)
    p = BanditPosterior([1, 0], [1, 2])
    oracle = bandit_lattice_sup([1, 0], [1, 2], 2000)
    assert abs(B.max_credible_reward(p) - oracle) <= 1e-3 * 2


@pytest.mark.parametrize("reward, y", [((1, 2), 0), ((0, 1, 10), 0), ((0, 1, 10), 1), ((1, 3, 4), 0)])
def test_max_credible_reward_against_lattice(reward, y):
    counts = np.zeros(len(reward), int)
    counts[y] = 1
    p = BanditPosterior(counts, reward)
    assert abs(B.max_credible_reward(p) - bandit_lattice_sup(counts, reward, 2000)) <= 1e-3 * reward[-1]
    rn, ry = reward[-1], reward[y]
    derived = rn ** 2 / (4 * (rn - ry)) if ry <= rn / 2 else ry
    assert B.max_credible_reward(p) == pytest.approx(derived, rel=1e-6)


def test_expected_reward_star():
    assert B.expected_reward_star(BanditPosterior([0, 0, 1, 0], [1, 2, 3, 4])) == 3.0
    assert B.expected_reward_star(BanditPosterior.unplayed([1, 2, 3])) == (1.0, 3.0)
    assert B.expected_reward_star(BanditPosterior([1, 1], [0, 10])) == 5.0


def test_select_bandit():
    r = [1.0, 2.0, 3.0]
    u = BanditPosterior.unplayed(r)
    assert B.select_bandit(u, u) == 0
    assert B.select_bandit(u.observe(2), u.observe(0)) == 0
    assert B.select_bandit(u.observe(0), u.observe(2)) == 1
    assert B.select_bandit(u.observe(1), u.observe(1)) == 0
    with pytest.raises(ValueError):
        B.select_bandit(u, BanditPosterior.unplayed([1.0, 2.0, 4.0]))


counts3 = st.lists(st.integers(0, 4), min_size=3, max_size=3)


@settings(max_examples=40, deadline=None)
@given(counts3, st.sets(st.integers(0, 2), min_size=1), st.sets(st.integers(0, 2), min_size=1))
def test_event_credibility_monotone(counts, a, b):
    p = BanditPosterior(counts)
    assert B.event_credibility(p, a | b) >= B.event_credibility(p, a) - 1e-12
    assert B.event_credibility(p, {0, 1, 2}) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(counts3, st.integers(0, 2))
def test_complement_credibilities_cover(counts, i):
    p = BanditPosterior(counts)
    rest = {0, 1, 2} - {i}
    assert B.event_credibility(p, {i}) + B.event_credibility(p, rest) >= 1.0 - 1e-12
    w = np.zeros(3)
    w[i] = 1.0
    assert abs(B.event_credibility(p, {i}) - bandit_lattice_sup(counts, w, 300)) <= 1e-3


@settings(max_examples=30, deadline=None)
@given(counts3)
def test_lowest_reward_evidence_never_raises_reward_bound(counts):
    # other non-maximal outcomes can raise it: (1,0,0) -> (1,1,0) goes 4/3 -> 1.54
    r = [1.0, 2.0, 4.0]
    p = BanditPosterior(counts, r)
    more = p.observe(0)
    assert B.max_credible_reward(more) <= B.max_credible_reward(p) + 1e-9
    assert abs(B.max_credible_reward(more) - bandit_lattice_sup(more.counts, r, 300)) <= 1e-3 * 4.0


def test_simplex_sup_rejects_negative_weights():
    with pytest.raises(ValueError):
        B.simplex_sup(BanditPosterior([1, 0]), [-1.0, 1.0])
