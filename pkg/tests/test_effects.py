"""Matched ATT, DiD of ATTs, IPW, AIPW, and regression adjustment."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import make_row

from matchdid.effects import (
    AIPWEstimator,
    IPWEstimator,
    aipw,
    aipw_from_arrays,
    att_matched,
    did_of_att,
    fit_outcome_models,
    ipw,
    ipw_from_scores,
    paired_att,
    regression_adjustment,
)
from matchdid.errors import EmptyGroupError, SchemaError
from matchdid.frames import load_frame
from matchdid.glm import fit_propensity
from matchdid.matching import MatchedSample

# Frozen hand values (computed independently before the implementation):
# pair differences {1,0,1,0}: se = sqrt(var_ddof1({1,0,1,0}) / 4)
PAIRED_SE_1010 = 0.28867513459481287
# sqrt(0.002**2 + 0.003**2)
DID_SE_2_3 = 0.0036055512754639895


def _sample(treated_ids, control_ids):
    n = len(treated_ids)
    return MatchedSample(
        treated_ids=np.asarray(treated_ids),
        control_ids=np.asarray(control_ids),
        distances=np.zeros(n),
        n_treated_available=n,
        n_control_available=n,
        n_unmatched_treated=0,
    )


class TestPairedAtt:
    def test_hand_case_half_with_se(self):
        est = paired_att(np.array([1.0, 0.0, 1.0, 0.0]), np.zeros(4))
        assert est.att == 0.5
        assert est.se == pytest.approx(PAIRED_SE_1010, rel=1e-12)
        assert est.t_stat == pytest.approx(est.att / est.se, rel=1e-12)
        assert est.n_treated == 4

    def test_identical_outcomes_give_zero(self):
        y = np.array([1.0, 0.0, 1.0])
        est = paired_att(y, y.copy())
        assert est.att == 0.0
        assert est.se == 0.0
        assert est.p_value == 1.0

    def test_group_rate_difference(self):
        # 1000 pairs with treated share 0.451 and control share 0.439.
        y_t = np.zeros(1000)
        y_t[:451] = 1.0
        y_c = np.zeros(1000)
        y_c[:439] = 1.0
        est = paired_att(y_t, y_c)
        assert est.mean_treated == 0.451
        assert est.mean_control == 0.439
        assert est.att == 0.012

    def test_antisymmetric_under_pair_swap(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 2, size=50).astype(float)
        b = rng.integers(0, 2, size=50).astype(float)
        assert paired_att(a, b).att == -paired_att(b, a).att

    def test_single_pair_has_no_variance(self):
        est = paired_att(np.array([1.0]), np.array([0.0]))
        assert est.att == 1.0
        assert np.isnan(est.se)

    def test_length_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            paired_att(np.array([1.0]), np.array([1.0, 0.0]))

    def test_empty_rejected(self):
        with pytest.raises(EmptyGroupError):
            paired_att(np.array([]), np.array([]))


class TestAttMatched:
    def _frame(self, csv_factory):
        rows = [
            make_row(hhid="h1", cooking_fuel=2),
            make_row(hhid="h2", cooking_fuel=8),
            make_row(hhid="h3", cooking_fuel=2),
            make_row(hhid="h4", cooking_fuel=8),
        ]
        return load_frame(csv_factory(rows), "pre")

    def test_pairwise_difference_on_frame(self, csv_factory):
        frame = self._frame(csv_factory)
        sample = _sample(["h1", "h3"], ["h2", "h4"])
        est = att_matched(sample, frame, "lpg_access")
        assert est.att == 1.0
        assert est.wave == "pre"
        assert est.outcome == "lpg_access"
        # Same pairs on the complementary outcome flips the sign.
        assert att_matched(sample, frame, "firewood_use").att == -1.0

    def test_missing_matched_id_rejected(self, csv_factory):
        frame = self._frame(csv_factory)
        sample = _sample(["h1", "h9"], ["h2", "h4"])
        with pytest.raises(SchemaError, match="h9"):
            att_matched(sample, frame, "lpg_access")


class TestDidOfAtt:
    def _att(self, value, se=0.0):
        return paired_att(np.full(2, value), np.zeros(2)) if se == 0.0 else None

    def test_effect_is_plain_subtraction_of_stored_atts(self):
        pre = paired_att(np.array([0.029, 0.029]), np.zeros(2))
        post = paired_att(np.array([0.007, 0.007]), np.zeros(2))
        did = did_of_att(pre, post)
        assert did.effect == 0.007 - 0.029
        assert did.effect == pytest.approx(-0.022, abs=1e-15)
        assert round(did.effect, 3) == -0.022

    def test_equal_atts_give_exact_zero(self):
        est = paired_att(np.array([1.0, 0.0]), np.zeros(2))
        assert did_of_att(est, est).effect == 0.0

    def test_se_combines_independent_cross_sections(self):
        rng = np.random.default_rng(4)
        pre = paired_att(rng.normal(size=30), rng.normal(size=30))
        post = paired_att(rng.normal(size=40), rng.normal(size=40))
        did = did_of_att(pre, post)
        assert did.se == pytest.approx(
            np.sqrt(pre.se**2 + post.se**2), rel=1e-12
        )
        assert did.t_stat == pytest.approx(did.effect / did.se, rel=1e-12)

    def test_frozen_se_hand_value(self):
        assert np.sqrt(0.002**2 + 0.003**2) == pytest.approx(
            DID_SE_2_3, rel=1e-15
        )

    def test_keeps_both_inputs(self):
        pre = paired_att(np.array([1.0, 0.0]), np.zeros(2), outcome="lpg_access")
        post = paired_att(np.array([1.0, 1.0]), np.zeros(2), outcome="lpg_access")
        did = did_of_att(pre, post)
        assert did.pre is pre
        assert did.post is post
        assert did.outcome == "lpg_access"


class TestIPW:
    def _constant_half(self):
        y = np.array([1.0] * 6 + [0.0] * 4 + [1.0] * 4 + [0.0] * 6)
        d = np.array([1.0] * 10 + [0.0] * 10)
        ps = np.full(20, 0.5)
        return y, d, ps

    @pytest.mark.parametrize("estimand", ["atet", "ate"])
    def test_constant_propensity_reduces_to_mean_difference(self, estimand):
        y, d, ps = self._constant_half()
        est = ipw_from_scores(y, d, ps, estimand=estimand)
        assert abs(est.value - 0.2) <= 1e-12
        assert est.estimand == estimand
        assert est.estimator == "ipw"

    def test_intercept_only_model_matches_raw_difference(self):
        rng = np.random.default_rng(8)
        d = np.repeat([1.0, 0.0], 60)
        y = rng.normal(loc=0.3 * d, scale=1.0)
        est = IPWEstimator(estimand="ate").fit(np.empty((120, 0)), d, y)
        raw = y[d == 1].mean() - y[d == 0].mean()
        assert est.effect_ == pytest.approx(raw, abs=1e-10)
        assert est.se_ == est.estimate_.se

    def test_trimming_excludes_and_counts(self):
        y = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
        d = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
        ps = np.array([0.005, 0.5, 0.5, 0.995, 0.5, 0.5])
        est = ipw_from_scores(y, d, ps)
        assert est.n_trimmed == 2
        assert est.n_used == 4
        assert est.n_treated == 2
        assert est.n_control == 2

    def test_all_rows_trimmed_rejected(self):
        with pytest.raises(EmptyGroupError):
            ipw_from_scores(
                np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.array([0.001, 0.999])
            )

    def test_bad_trim_bounds_rejected(self):
        y, d, ps = self._constant_half()
        with pytest.raises(SchemaError):
            ipw_from_scores(y, d, ps, trim=(0.5, 0.4))

    def test_unknown_estimand_rejected(self):
        y, d, ps = self._constant_half()
        with pytest.raises(SchemaError, match="estimand"):
            ipw_from_scores(y, d, ps, estimand="att")

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(12)
        n = 300
        ps = rng.uniform(0.1, 0.9, size=n)
        d = (rng.uniform(size=n) < ps).astype(float)
        y = rng.normal(loc=d * 0.5, scale=1.0)
        base = ipw_from_scores(y, d, ps)
        perm = rng.permutation(n)
        shuffled = ipw_from_scores(y[perm], d[perm], ps[perm])
        assert shuffled.value == pytest.approx(base.value, rel=1e-12)
        assert shuffled.se == pytest.approx(base.se, rel=1e-12)


class TestAIPW:
    def _linear_world(self):
        rng = np.random.default_rng(21)
        n = 200
        x = rng.uniform(-1.0, 1.0, size=n)
        d = (rng.uniform(size=n) < 0.5).astype(float)
        y = np.where(d == 1.0, 2.0 + 3.0 * x, 1.0 + x)
        m1 = 2.0 + 3.0 * x
        m0 = 1.0 + x
        ps = np.full(n, 0.5)
        return y, d, ps, m1, m0

    @pytest.mark.parametrize("estimand", ["ate", "atet"])
    def test_zero_residuals_equal_regression_imputation(self, estimand):
        y, d, ps, m1, m0 = self._linear_world()
        est = aipw_from_arrays(y, d, ps, m1, m0, estimand=estimand)
        if estimand == "ate":
            imputed = float(np.mean(m1 - m0))
        else:
            imputed = float(np.mean((m1 - m0)[d == 1.0]))
        assert abs(est.value - imputed) <= 1e-12
        assert est.estimator == "aipw"

    def test_length_mismatch_rejected(self):
        y, d, ps, m1, m0 = self._linear_world()
        with pytest.raises(SchemaError):
            aipw_from_arrays(y, d, ps, m1[:-1], m0, estimand="ate")

    def test_row_permutation_invariance(self):
        y, d, ps, m1, m0 = self._linear_world()
        rng = np.random.default_rng(3)
        noisy = y + rng.normal(scale=0.3, size=len(y))
        base = aipw_from_arrays(noisy, d, ps, m1, m0)
        perm = rng.permutation(len(y))
        shuffled = aipw_from_arrays(
            noisy[perm], d[perm], ps[perm], m1[perm], m0[perm]
        )
        assert shuffled.value == pytest.approx(base.value, rel=1e-12)
        assert shuffled.se == pytest.approx(base.se, rel=1e-12)

    def test_estimator_wrapper_runs_on_arrays(self):
        rng = np.random.default_rng(31)
        n = 400
        x = rng.normal(size=(n, 1))
        p = 1.0 / (1.0 + np.exp(-0.8 * x[:, 0]))
        d = (rng.uniform(size=n) < p).astype(float)
        y = 0.5 * d + 0.3 * x[:, 0] + rng.normal(scale=0.5, size=n)
        est = AIPWEstimator(estimand="ate").fit(x, d, y)
        assert abs(est.effect_ - 0.5) < 0.15
        assert est.se_ > 0
        assert est.estimate_.n_used + est.estimate_.n_trimmed == n

    def test_get_params_round_trip(self):
        est = AIPWEstimator(estimand="atet", link="probit", trim=(0.05, 0.95))
        assert est.get_params() == {
            "estimand": "atet",
            "link": "probit",
            "trim": (0.05, 0.95),
        }


@pytest.fixture(scope="module")
def post_setup(bench_frames):
    frame = bench_frames["post"]
    return frame, fit_propensity(frame)


class TestFrameLevelEstimators:
    """End-to-end runs on one deterministic confounded draw (seed 909)."""

    def test_ipw_and_aipw_agree_near_truth(self, post_setup):
        frame, model = post_setup
        e_ipw = ipw(frame, model, "lpg_access", estimand="atet")
        e_aipw = aipw(frame, model, "lpg_access", estimand="atet")
        # True post-wave ATET is 0.021; this draw has se ~0.02.
        assert abs(e_ipw.value - 0.021) < 0.04
        assert abs(e_aipw.value - 0.021) < 0.04
        assert abs(e_ipw.value - e_aipw.value) < 0.01
        assert e_ipw.wave == "post"
        assert e_ipw.n_used + e_ipw.n_trimmed == len(frame)

    def test_regression_adjustment_near_truth(self, post_setup):
        frame, _ = post_setup
        est = regression_adjustment(frame, "lpg_access", estimand="atet")
        assert est.estimator == "regression"
        assert abs(est.value - 0.021) < 0.04
        assert est.se > 0
        assert est.n_trimmed == 0

    def test_outcome_models_fit_per_arm(self, post_setup):
        frame, _ = post_setup
        m1, m0 = fit_outcome_models(frame, "lpg_access")
        assert m1.arm == 1
        assert m0.arm == 0
        assert m1.n_obs + m0.n_obs == len(frame)
        preds = m0.predict_frame(frame)
        assert preds.shape == (len(frame),)
        assert np.isfinite(preds).all()
