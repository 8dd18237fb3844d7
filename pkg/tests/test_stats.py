import math
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np
import pytest
import scipy.stats

from engagenet.stats import (
    cohens_kappa,
    fisher_exact,
    mann_whitney_u,
    odds_ratio_woolf_ci,
)


def u_stat(xs, ys):
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in xs for b in ys)


def mwu_brute(x, y, alternative):
    """Exact p by enumerating every group assignment of the pooled values."""
    pooled = list(x) + list(y)
    n, n1 = len(pooled), len(x)
    u_obs = u_stat(x, y)
    mu = n1 * (n - n1) / 2
    hits = total = 0
    for idx in combinations(range(n), n1):
        chosen = set(idx)
        xs = [pooled[i] for i in idx]
        ys = [pooled[i] for i in range(n) if i not in chosen]
        u = u_stat(xs, ys)
        total += 1
        if alternative == "greater":
            hits += u >= u_obs - 1e-9
        elif alternative == "less":
            hits += u <= u_obs + 1e-9
        else:
            hits += abs(u - mu) >= abs(u_obs - mu) - 1e-9
    return hits / total


class TestMannWhitney:
    def test_separated_samples_two_sided(self):
        report = mann_whitney_u([1, 2, 3], [4, 5, 6], alternative="two-sided")
        assert report.U == 0.0
        assert report.p_value == pytest.approx(0.1, abs=1e-12)
        assert report.method == "exact"

    def test_u_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = list(rng.integers(1, 8, size=int(rng.integers(2, 10))))
            y = list(rng.integers(1, 8, size=int(rng.integers(2, 10))))
            uxy = mann_whitney_u(x, y).U
            uyx = mann_whitney_u(y, x).U
            assert uxy + uyx == pytest.approx(len(x) * len(y), abs=1e-9)

    def test_exact_matches_enumeration_with_ties(self):
        rng = np.random.default_rng(1)
        for n1 in range(1, 8):
            for n2 in range(1, 8):
                x = list(rng.integers(1, 5, size=n1))
                y = list(rng.integers(1, 5, size=n2))
                for alt in ("two-sided", "less", "greater"):
                    got = mann_whitney_u(x, y, alternative=alt).p_value
                    assert got == pytest.approx(mwu_brute(x, y, alt), abs=1e-12), (x, y, alt)

    def test_report_arithmetic_cohort_numbers(self):
        # report-shape contract at U = 539 with groups of 31 and 27
        n1, n2, u = 31, 27, 539.0
        cl = u / (n1 * n2)
        rb = 1 - 2 * u / (n1 * n2)
        assert cl == pytest.approx(539 / 837, abs=1e-12)
        assert cl == pytest.approx(0.644, abs=5e-4)
        assert rb == pytest.approx(1 - 2 * 0.644, abs=1e-3)

    def test_effect_sizes_reported(self):
        report = mann_whitney_u([5, 6, 7], [1, 2, 3])
        assert report.common_language == 1.0
        assert report.rank_biserial == -1.0
        assert report.U == 9.0

    def test_normal_approx_reasonable_and_tie_corrected(self):
        rng = np.random.default_rng(2)
        x = list(rng.integers(1, 8, size=30))
        y = list(rng.integers(2, 8, size=25))
        got = mann_whitney_u(x, y, alternative="two-sided")
        assert got.method == "normal-approx with tie correction"
        ref = scipy.stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic")
        assert got.U == pytest.approx(ref.statistic)
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9)

    def test_forced_methods(self):
        x, y = [1, 2, 3, 4, 5], [2, 3, 4, 5, 6]
        assert mann_whitney_u(x, y, method="exact").method == "exact"
        assert mann_whitney_u(x, y, method="normal").method == "normal-approx with tie correction"

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1, 2])


class TestFisherExact:
    def test_symmetric_table(self):
        report = fisher_exact([[5, 5], [5, 5]], alternative="two-sided")
        assert report.odds_ratio == pytest.approx(1.0)
        assert report.p_two_tailed == pytest.approx(1.0, abs=1e-12)

    def test_tea_tasting_one_tailed(self):
        report = fisher_exact([[3, 1], [1, 3]], alternative="greater")
        assert report.p_one_tailed == pytest.approx(17 / 70, abs=1e-12)

    def test_one_tailed_matches_hypergeom_summation(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            a, b, c, d = (int(v) for v in rng.integers(0, 12, size=4))
            if a + b == 0 or c + d == 0 or a + c == 0 or b + d == 0:
                continue
            r1, c1, n = a + b, a + c, a + b + c + d
            lo, hi = max(0, r1 + c1 - n), min(r1, c1)
            p = sum(
                Fraction(comb(c1, k) * comb(n - c1, r1 - k), comb(n, r1))
                for k in range(a, hi + 1)
            )
            got = fisher_exact([[a, b], [c, d]], alternative="greater").p_one_tailed
            assert got == pytest.approx(float(p), abs=1e-12)

    def test_matches_scipy(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b, c, d = (int(v) for v in rng.integers(1, 15, size=4))
            table = [[a, b], [c, d]]
            got = fisher_exact(table, alternative="greater")
            assert got.p_one_tailed == pytest.approx(
                scipy.stats.fisher_exact(table, alternative="greater")[1], rel=1e-9
            )
            assert got.p_two_tailed == pytest.approx(
                scipy.stats.fisher_exact(table, alternative="two-sided")[1], rel=1e-6
            )

    def test_tail_monotone_in_first_cell(self):
        # shifting mass toward cell (1,1) with margins fixed never raises p_greater
        tables = [[[k, 6 - k], [6 - k, k]] for k in range(1, 6)]
        ps = [fisher_exact(t, alternative="greater").p_one_tailed for t in tables]
        assert all(p1 >= p2 for p1, p2 in zip(ps, ps[1:]))

    def test_one_le_two_for_or_above_one(self):
        report = fisher_exact([[9, 2], [3, 8]], alternative="greater")
        assert report.p_one_tailed <= report.p_two_tailed

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            fisher_exact([[0, 0], [0, 0]])


class TestWoolfCi:
    def test_log_symmetry_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b, c, d = (int(v) for v in rng.integers(0, 20, size=4))
            if a + b + c + d == 0:
                continue
            rep = odds_ratio_woolf_ci([[a, b], [c, d]])
            assert math.log(rep.ci_low) + math.log(rep.ci_high) == pytest.approx(
                2 * math.log(rep.odds_ratio), abs=1e-9
            )

    def test_interval_brackets_estimate(self):
        rep = odds_ratio_woolf_ci([[12, 4], [5, 9]])
        assert rep.ci_low <= rep.odds_ratio <= rep.ci_high
        assert not rep.continuity_corrected

    def test_reported_interval_consistency_anchor(self):
        # a published Woolf interval (2.41, 25.61) must be log-centered on its
        # odds ratio 7.86; checkable without any raw data
        midpoint = math.exp((math.log(2.41) + math.log(25.61)) / 2)
        assert midpoint == pytest.approx(7.86, rel=5e-3)

    def test_symmetric_table_straddles_one(self):
        rep = odds_ratio_woolf_ci([[5, 5], [5, 5]])
        assert rep.odds_ratio == pytest.approx(1.0)
        assert rep.ci_low < 1.0 < rep.ci_high
        assert rep.ci_low * rep.ci_high == pytest.approx(1.0, abs=1e-12)

    def test_zero_cell_continuity_correction(self):
        rep = odds_ratio_woolf_ci([[10, 0], [5, 5]])
        assert rep.continuity_corrected
        assert rep.odds_ratio == pytest.approx((10.5 * 5.5) / (0.5 * 5.5), abs=1e-12)


class TestCohensKappa:
    def test_perfect_agreement(self):
        assert cohens_kappa([[7, 0], [0, 9]]).kappa == pytest.approx(1.0)

    def test_chance_agreement_is_zero(self):
        # p_o equals p_e by construction
        rep = cohens_kappa([[4, 4], [4, 4]])
        assert rep.kappa == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_case(self):
        rep = cohens_kappa([[20, 5], [10, 15]])
        assert rep.observed_agreement == pytest.approx(0.7, abs=1e-12)
        assert rep.expected_agreement == pytest.approx(0.5, abs=1e-12)
        assert rep.kappa == pytest.approx(0.4, abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        m = rng.integers(0, 10, size=(4, 4))
        m[0, 0] += 1
        base = cohens_kappa(m.tolist()).kappa
        for _ in range(5):
            perm = rng.permutation(4)
            shuffled = m[np.ix_(perm, perm)]
            assert cohens_kappa(shuffled.tolist()).kappa == pytest.approx(base, abs=1e-12)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            cohens_kappa([[5, 0], [0, 0]])
