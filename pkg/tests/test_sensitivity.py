"""Hidden-bias sensitivity bounds for matched binary outcomes."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from matchdid.errors import EmptyGroupError, SchemaError
from matchdid.sensitivity import (
    GammaGrid,
    extended_hypergeometric_moments,
    mh_bounds,
    mh_bounds_from_counts,
)
from oracles import extended_hypergeom_oracle

# Frozen values, computed from the closed-form hypergeometric moments and the
# continuity-corrected normal deviate before the implementation existed.
HAND_Q = 1.4907119849998598
HAND_P = 0.06801856405707181
# Fisher noncentral hypergeometric moments at (N=20, N1=10, Ys=8, odds=2),
# cross-checked against an exact enumeration.
MOMENTS_20_10_8_2 = (4.865667534440341, 1.2206457530262123)

DEFAULT_GRID = [1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0]


class TestGammaGrid:
    def test_default_grid_matches_expected_values(self):
        assert list(GammaGrid().values()) == DEFAULT_GRID

    def test_custom_grid(self):
        assert list(GammaGrid(1.0, 3.0, 0.5).values()) == [
            1.0,
            1.5,
            2.0,
            2.5,
            3.0,
        ]

    def test_start_below_one_rejected(self):
        with pytest.raises(SchemaError, match="start"):
            GammaGrid(start=0.9)

    def test_nonpositive_step_rejected(self):
        with pytest.raises(SchemaError, match="step"):
            GammaGrid(step=0.0)

    def test_stop_before_start_rejected(self):
        with pytest.raises(SchemaError):
            GammaGrid(start=1.5, stop=1.2)


class TestExtendedHypergeometricMoments:
    def test_hand_case_neutral_odds(self):
        mean, var = extended_hypergeometric_moments(6, 3, 3, 1.0)
        assert mean == pytest.approx(1.5, abs=1e-12)
        assert var == pytest.approx(0.45, abs=1e-12)

    def test_neutral_odds_equals_classical_hypergeometric(self):
        # Interior margins only: scipy's moment helper divides by zero on
        # degenerate margins, which the enumeration-oracle test covers.
        rng = np.random.default_rng(17)
        for _ in range(60):
            n = int(rng.integers(4, 40))
            n1 = int(rng.integers(1, n))
            ys = int(rng.integers(1, n))
            mean, var = extended_hypergeometric_moments(n, n1, ys, 1.0)
            ref = stats.hypergeom(n, ys, n1)
            assert mean == pytest.approx(float(ref.mean()), abs=1e-12)
            assert var == pytest.approx(float(ref.var()), abs=1e-12)

    def test_frozen_noncentral_case(self):
        mean, var = extended_hypergeometric_moments(20, 10, 8, 2.0)
        assert mean == pytest.approx(MOMENTS_20_10_8_2[0], rel=1e-12)
        assert var == pytest.approx(MOMENTS_20_10_8_2[1], rel=1e-12)

    def test_agrees_with_enumeration_oracle(self):
        rng = np.random.default_rng(23)
        odds_choices = [0.25, 0.5, 1.0, 1.7, 2.0, 4.0]
        for i in range(300):
            n = int(rng.integers(2, 31))
            n1 = int(rng.integers(0, n + 1))
            ys = int(rng.integers(0, n + 1))
            odds = odds_choices[i % len(odds_choices)]
            got = extended_hypergeometric_moments(n, n1, ys, odds)
            want = extended_hypergeom_oracle(n, n1, ys, odds)
            assert got[0] == pytest.approx(want[0], abs=1e-9), (n, n1, ys, odds)
            assert got[1] == pytest.approx(want[1], abs=1e-9), (n, n1, ys, odds)

    def test_agrees_with_scipy_distribution(self):
        cases = [(20, 10, 8, 2.0), (25, 12, 20, 0.5), (30, 5, 15, 3.0)]
        for n, n1, ys, odds in cases:
            mean, var = extended_hypergeometric_moments(n, n1, ys, odds)
            ref = stats.nchypergeom_fisher(n, ys, n1, odds)
            assert mean == pytest.approx(float(ref.mean()), abs=1e-9)
            assert var == pytest.approx(float(ref.var()), abs=1e-9)

    def test_single_point_support_has_zero_variance(self):
        mean, var = extended_hypergeometric_moments(4, 2, 4, 1.5)
        assert mean == 2.0
        assert var == 0.0

    def test_margin_validation(self):
        with pytest.raises(SchemaError):
            extended_hypergeometric_moments(5, 6, 3, 1.0)
        with pytest.raises(SchemaError):
            extended_hypergeometric_moments(5, 3, 6, 1.0)
        with pytest.raises(SchemaError):
            extended_hypergeometric_moments(5, 3, 3, 0.0)
        with pytest.raises(SchemaError):
            extended_hypergeometric_moments(5, 2.5, 3, 1.0)


def strong_positive_pairs(n=40, treated_successes=30, control_successes=10):
    y_t = np.zeros(n)
    y_t[:treated_successes] = 1.0
    y_c = np.zeros(n)
    y_c[:control_successes] = 1.0
    return y_t, y_c


class TestMhBounds:
    def test_hand_instance_at_gamma_one(self):
        # 3 pairs, every treated unit a success, every control a failure:
        # N=6, N1=3, Ys=3, Y1=3 → q = (3 - 1.5 - 0.5)/sqrt(0.45).
        rows = mh_bounds(np.ones(3), np.zeros(3), GammaGrid(1.0, 1.0, 0.1))
        assert len(rows) == 1
        row = rows[0]
        assert row.q_plus == pytest.approx(HAND_Q, rel=1e-12)
        assert row.q_plus == pytest.approx(1.4907, abs=1e-3)
        assert row.p_plus == pytest.approx(HAND_P, rel=1e-12)

    def test_gamma_one_bounds_coincide_exactly(self):
        y_t, y_c = strong_positive_pairs()
        row = mh_bounds(y_t, y_c)[0]
        assert row.gamma == 1.0
        assert row.q_plus == row.q_minus
        assert row.p_plus == row.p_minus

    @pytest.mark.parametrize("direction", ["positive", "negative"])
    def test_bounds_widen_monotonically(self, direction):
        y_t, y_c = strong_positive_pairs()
        if direction == "negative":
            y_t, y_c = y_c, y_t
        rows = mh_bounds(y_t, y_c)
        q_plus = [r.q_plus for r in rows]
        q_minus = [r.q_minus for r in rows]
        assert all(b - a >= -1e-12 for a, b in zip(q_plus, q_plus[1:]))
        assert all(b - a <= 1e-12 for a, b in zip(q_minus, q_minus[1:]))
        p_plus = [r.p_plus for r in rows]
        assert all(b - a <= 1e-12 for a, b in zip(p_plus, p_plus[1:]))

    def test_row_count_and_gamma_column_reproduce_grid(self):
        y_t, y_c = strong_positive_pairs()
        rows = mh_bounds(y_t, y_c)
        assert [r.gamma for r in rows] == DEFAULT_GRID

    def test_strong_effect_stays_significant_across_grid(self):
        y_t, y_c = strong_positive_pairs(200, 150, 50)
        rows = mh_bounds(y_t, y_c)
        assert all(r.p_plus < 0.01 for r in rows)

    def test_degenerate_variance_flagged_but_kept(self):
        # Every unit is a success: the bounding distribution is a point mass.
        rows = mh_bounds(np.ones(5), np.ones(5))
        assert len(rows) == len(DEFAULT_GRID)
        assert all(r.degenerate for r in rows)
        assert all(math.isnan(r.q_plus) for r in rows)
        assert all(math.isnan(r.p_plus) for r in rows)

    def test_matches_count_form(self):
        y_t, y_c = strong_positive_pairs()
        by_arrays = mh_bounds(y_t, y_c)
        by_counts = mh_bounds_from_counts(40, 30, 40)
        assert by_arrays == by_counts

    def test_count_form_validation(self):
        with pytest.raises(EmptyGroupError):
            mh_bounds_from_counts(0, 0, 0)
        with pytest.raises(SchemaError):
            mh_bounds_from_counts(5, 6, 6)
        with pytest.raises(SchemaError):
            mh_bounds_from_counts(5, 2, 9)

    def test_non_binary_outcomes_rejected(self):
        with pytest.raises(SchemaError):
            mh_bounds(np.array([0.5, 1.0]), np.array([0.0, 0.0]))

    def test_empty_sample_rejected(self):
        with pytest.raises(EmptyGroupError):
            mh_bounds(np.array([]), np.array([]))

    def test_length_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            mh_bounds(np.ones(3), np.zeros(2))


class TestPairStratifiedVariant:
    def test_concordant_pairs_do_not_move_the_statistic(self):
        y_t, y_c = strong_positive_pairs()
        base = mh_bounds(y_t, y_c, stratify_pairs=True)
        # Append fully concordant pairs of both kinds.
        y_t2 = np.concatenate([y_t, np.ones(7), np.zeros(6)])
        y_c2 = np.concatenate([y_c, np.ones(7), np.zeros(6)])
        padded = mh_bounds(y_t2, y_c2, stratify_pairs=True)
        assert padded == base

    def test_gamma_one_matches_mcnemar_statistic(self):
        rng = np.random.default_rng(41)
        y_t = rng.integers(0, 2, size=80).astype(float)
        y_c = rng.integers(0, 2, size=80).astype(float)
        row = mh_bounds(y_t, y_c, stratify_pairs=True)[0]
        discordant = (y_t != y_c)
        b = float(((y_t == 1) & discordant).sum())
        n_disc = float(discordant.sum())
        expected = (abs(b - n_disc / 2.0) - 0.5) / math.sqrt(n_disc / 4.0)
        assert abs(row.q_plus) == pytest.approx(expected, rel=1e-12)

    def test_pooled_and_stratified_differ_in_general(self):
        y_t, y_c = strong_positive_pairs()
        pooled = mh_bounds(y_t, y_c)[3]
        stratified = mh_bounds(y_t, y_c, stratify_pairs=True)[3]
        assert pooled.q_plus != stratified.q_plus
