import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbsinr.core import Environment, Link
from mbsinr.evaluation import (
    Outcome,
    RocPoint,
    Trial,
    best_beta,
    classify,
    classify_trial,
    combine_dbm,
    default_beta_grid,
    predicted_combined_rss,
    roc_sweep,
    trial_sinr,
)
from mbsinr.gains import GainMatrix

NOISE = 1e-6
ENV = Environment(noise_mw=NOISE, beta=2.15)


def noise_only_trials(sinrs, prrs):
    """One isolated link per trial, with gain chosen so that SINR = gain / noise."""
    m = len(sinrs)
    g = np.full((2 * m, 2 * m), np.nan)
    trials = []
    for j, (s, p) in enumerate(zip(sinrs, prrs)):
        g[2 * j, 2 * j + 1] = s * NOISE
        trials.append(Trial(Link(j, 2 * j, 2 * j + 1), (), p))
    return trials, GainMatrix(g)


def perfect_sweep(star_index=100):
    grid = default_beta_grid()
    mids = np.sqrt(grid[:-1] * grid[1:])
    beta_star = grid[star_index]
    trials, g = noise_only_trials(mids, (mids >= beta_star).astype(float))
    return trials, g, grid, beta_star


class TestTrial:
    def test_prr_range(self):
        with pytest.raises(ValueError):
            Trial(Link(0, 0, 1), (), 1.5)

    def test_link_not_interferer(self):
        with pytest.raises(ValueError):
            Trial(Link(0, 0, 1), (Link(0, 0, 1),), 0.5)

    def test_sinr_with_interferer_on_channel(self):
        g0 = GainMatrix(np.array([[np.nan, 1e-5, np.nan], [np.nan, np.nan, np.nan], [np.nan, 1e-6, np.nan]]))
        g1 = GainMatrix(np.array([[np.nan, 1e-5, np.nan], [np.nan, np.nan, np.nan], [np.nan, np.nan, np.nan]]))
        t0 = Trial(Link(0, 0, 1), (Link(1, 2, 0),), 0.9, channel=0)
        t1 = Trial(Link(0, 0, 1), (Link(1, 2, 0),), 0.9, channel=1)
        assert trial_sinr(t0, [g0, g1], ENV) == pytest.approx(1e-5 / 2e-6)
        assert trial_sinr(t1, [g0, g1], ENV) == pytest.approx(10.0)


class TestClassify:
    def test_true_positive(self):
        assert classify(10.0, 0.95, 2.15, 0.8, 0.2) is Outcome.TP

    def test_predicted_failure_observed_success(self):
        # the quadrant the conventional labels call a false negative
        assert classify(1.0, 0.95, 2.15, 0.8, 0.2) is Outcome.FN

    def test_false_positive_and_true_negative(self):
        assert classify(10.0, 0.1, 2.15, 0.8, 0.2) is Outcome.FP
        assert classify(1.0, 0.1, 2.15, 0.8, 0.2) is Outcome.TN

    def test_excluded_band(self):
        assert classify(10.0, 0.5, 2.15, 0.8, 0.2) is Outcome.EXCLUDED

    def test_band_edges_inclusive(self):
        assert classify(10.0, 0.8, 2.15, 0.8, 0.2) is Outcome.TP
        assert classify(10.0, 0.2, 2.15, 0.8, 0.2) is Outcome.FP

    def test_bad_thresholds(self):
        with pytest.raises(ValueError):
            classify(1.0, 0.5, 1.0, 0.2, 0.8)

    def test_classify_trial(self):
        trials, g = noise_only_trials([10.0], [0.95])
        assert classify_trial(trials[0], g, ENV, 2.15) is Outcome.TP


class TestRoc:
    def test_endpoints(self):
        trials, g = noise_only_trials([0.5, 3.0, 40.0, 2.0], [0.9, 0.1, 1.0, 0.0])
        pts = roc_sweep(trials, g, ENV, [0.0, math.inf])
        assert (pts[0].fpr, pts[0].tpr) == (1.0, 1.0)
        assert (pts[1].fpr, pts[1].tpr) == (0.0, 0.0)

    def test_perfect_classifier(self):
        trials, g, grid, beta_star = perfect_sweep()
        pts = roc_sweep(trials, g, ENV, grid)
        at = next(p for p in pts if p.beta == beta_star)
        assert (at.fpr, at.tpr) == (0.0, 1.0)
        assert best_beta(pts) == beta_star
        assert sum(1 for p in pts if p.tpr - p.fpr == 1.0) == 1

    def test_counts_partition_and_rates(self):
        rng = np.random.default_rng(0)
        trials, g = noise_only_trials(10 ** rng.uniform(-2, 3, 80), rng.uniform(0, 1, 80))
        for p in roc_sweep(trials, g, ENV):
            assert p.tp + p.fp + p.tn + p.fn + p.excluded == 80
            assert p.tpr == pytest.approx(p.tp / (p.tp + p.fn))
            assert p.fpr == pytest.approx(p.fp / (p.fp + p.tn))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_monotone_counts(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        trials, g = noise_only_trials(10 ** rng.uniform(-3, 5, n), rng.choice([0.0, 0.1, 0.5, 0.9, 1.0], n))
        pts = roc_sweep(trials, g, ENV)
        for a, b in zip(pts, pts[1:]):
            assert b.tp <= a.tp and b.fp <= a.fp
            assert b.tn >= a.tn and b.fn >= a.fn

    def test_undefined_rates(self):
        trials, g = noise_only_trials([1.0, 5.0], [1.0, 0.9])
        p = roc_sweep(trials, g, ENV, [2.0])[0]
        assert math.isnan(p.fpr) and p.tpr == 0.5

    def test_empty_inputs(self):
        trials, g = noise_only_trials([1.0], [1.0])
        with pytest.raises(ValueError):
            roc_sweep([], g, ENV)
        with pytest.raises(ValueError):
            roc_sweep(trials, g, ENV, [])

    def test_default_grid(self):
        grid = default_beta_grid()
        assert grid.size == 200 and grid[0] == pytest.approx(1e-2) and grid[-1] == pytest.approx(1e4)

    def test_threshold_robustness(self):
        rng = np.random.default_rng(7)
        prr = rng.uniform(0, 1, 200)
        trials, g = noise_only_trials(10 ** rng.uniform(-1, 2, 200), prr)
        for t in trials:
            wide = classify_trial(t, g, ENV, 2.15, 0.8, 0.2)
            tight = classify_trial(t, g, ENV, 2.15, 0.5, 0.5)
            if wide != tight:
                assert 0.2 < t.prr < 0.8


class TestBestBeta:
    def test_single_point(self):
        assert best_beta([RocPoint(3.0, 0.5, 0.5, 1, 1, 1, 1, 0)]) == 3.0

    def test_tie_goes_to_smaller(self):
        pts = [RocPoint(5.0, 0.9, 0.1, 9, 1, 9, 1, 0), RocPoint(2.0, 1.0, 0.2, 10, 2, 8, 0, 0)]
        assert best_beta(pts) == 2.0

    def test_all_undefined(self):
        with pytest.raises(ValueError):
            best_beta([RocPoint(1.0, math.nan, 0.5, 0, 1, 1, 0, 0)])


class TestAdditivity:
    def _senders(self, rss_dbm):
        n = len(rss_dbm)
        g = np.full((n + 1, n + 1), np.nan)
        for j, r in enumerate(rss_dbm):
            g[j, n] = 10 ** (r / 10)
        return [Link(j, j, n) for j in range(n)], GainMatrix(g), n

    def test_singleton_identity(self):
        links, g, rx = self._senders([-50.0])
        assert predicted_combined_rss(links, rx, g) == -50.0

    def test_doubling(self):
        links, g, rx = self._senders([-50.0, -50.0])
        assert predicted_combined_rss(links, rx, g) == pytest.approx(-46.99, abs=0.01)
        assert combine_dbm([-50.0, -50.0]) - (-50.0) == pytest.approx(3.0103, abs=1e-4)

    def test_three_signals(self):
        # 10*log10(1e-5 + 1e-6 + 1e-7) evaluated directly
        links, g, rx = self._senders([-50.0, -60.0, -70.0])
        assert predicted_combined_rss(links, rx, g) == pytest.approx(-49.5468, abs=1e-4)

    def test_unreachable_ignored_and_all_unreachable(self):
        links, g, rx = self._senders([-50.0])
        ghost = Link(9, rx, 0)
        assert predicted_combined_rss([*links, ghost], rx, g) == -50.0
        assert math.isnan(predicted_combined_rss([ghost], rx, g))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, -20), min_size=2, max_size=8), st.data())
    def test_disjoint_unions_add_linearly(self, rss, data):
        links, g, rx = self._senders(rss)
        cut = data.draw(st.integers(1, len(rss) - 1))
        a = predicted_combined_rss(links[:cut], rx, g)
        b = predicted_combined_rss(links[cut:], rx, g)
        whole = predicted_combined_rss(links, rx, g)
        assert 10 ** (whole / 10) == pytest.approx(10 ** (a / 10) + 10 ** (b / 10), rel=1e-12)
