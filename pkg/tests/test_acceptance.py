"""Acceptance suite: nine pass/fail criteria covering closed-form GLM
recovery, oracle-exact matching, million-row performance, balance repair,
effect recovery, double robustness, sensitivity-bound exactness, DiD
arithmetic, and byte-identical reruns.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one
``ACCEPTANCE n PASS/FAIL`` line per criterion. The full suite performs
two Monte-Carlo studies (100 replications at 100k and 50k households per
wave) and a million-row pipeline run; expect a few minutes of wall time.
"""

from __future__ import annotations

import math
import time
import tracemalloc

import numpy as np
import pytest

from oracles import extended_hypergeom_oracle, greedy_match_oracle, random_match_instance
from matchdid.effects import AttEstimate, did_of_att
from matchdid.frames import AnalysisFrame, save_frame
from matchdid.glm import DesignSpec, PropensityModel, fit_propensity, predict_propensity
from matchdid.matching import balance_report, common_support, nn_match
from matchdid.pipeline import PipelineConfig, run_pipeline
from matchdid.sensitivity import GammaGrid, extended_hypergeometric_moments, mh_bounds
from matchdid.synthetic import (
    benchmark_broken_outcome,
    benchmark_broken_propensity,
    benchmark_confounded,
    generate,
    monte_carlo,
)


def _report(number: int, label: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {number} {status}: {label} — {detail}")
    assert passed, f"criterion {number} ({label}): {detail}"


@pytest.fixture(scope="module")
def confounded_csvs(tmp_path_factory):
    """20k-per-wave confounded benchmark on disk, shared by criteria 4 and 9."""
    spec = benchmark_confounded(20_000, 41)
    root = tmp_path_factory.mktemp("accept_csvs")
    paths = {}
    for wave in ("pre", "post"):
        paths[wave] = root / f"c_{wave}.csv"
        save_frame(generate(spec, wave), paths[wave])
    return paths


def test_criterion_1_glm_closed_forms_and_score():
    started = time.perf_counter()
    # saturated 2x2 design: 25/100 successes at x=0, 75/100 at x=1
    x = np.repeat([0.0, 1.0], 100).reshape(-1, 1)
    y = np.concatenate([np.repeat([0, 1], [75, 25]), np.repeat([0, 1], [25, 75])])
    model = PropensityModel(link="logit").fit(x, y)
    intercept_err = abs(model.intercept_ - math.log(25 / 75))
    slope_err = abs(model.coef_[0] - math.log((75 / 25) / (25 / 75)))

    # analytic gradient vs central finite differences, at a point away
    # from the optimum so the relative comparison is meaningful
    rng = np.random.default_rng(20260819)
    x_fd = rng.normal(size=(400, 3))
    y_fd = (rng.random(400) < 0.4).astype(np.int8)
    fd_rel_err = 0.0
    for link in ("logit", "probit"):
        m = PropensityModel(link=link).fit(x_fd, y_fd)
        beta = m.params_ + np.array([0.3, -0.2, 0.1, -0.15])
        analytic = m.score_equations(x_fd, y_fd, params=beta)
        for j in range(len(beta)):
            h = 1e-6 * max(1.0, abs(beta[j]))
            up, dn = beta.copy(), beta.copy()
            up[j] += h
            dn[j] -= h
            fd = (m.loglik(x_fd, y_fd, params=up) - m.loglik(x_fd, y_fd, params=dn)) / (
                2 * h
            )
            fd_rel_err = max(fd_rel_err, abs(fd - analytic[j]) / abs(analytic[j]))
    elapsed = time.perf_counter() - started
    _report(
        1,
        "GLM closed forms and analytic score",
        intercept_err < 1e-8 and slope_err < 1e-8 and fd_rel_err < 1e-4 and elapsed < 1.0,
        f"coef errs {intercept_err:.2e}/{slope_err:.2e}, "
        f"max FD rel err {fd_rel_err:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_matching_equals_bruteforce_oracle():
    rng = np.random.default_rng(97531)
    mismatches = 0
    for _ in range(1000):
        treated, controls = random_match_instance(rng)
        expected_pairs, expected_unmatched = greedy_match_oracle(treated, controls)
        sample = nn_match(
            np.array([t[0] for t in treated]),
            np.array([t[1] for t in treated]),
            np.array([c[0] for c in controls]),
            np.array([c[1] for c in controls]),
        )
        got = list(
            zip(
                sample.treated_ids.tolist(),
                sample.control_ids.tolist(),
                sample.distances.tolist(),
            )
        )
        if got != expected_pairs or sample.n_unmatched_treated != expected_unmatched:
            mismatches += 1
    _report(
        2,
        "greedy matching equals exhaustive oracle",
        mismatches == 0,
        f"1000 instances ≤10×10, {mismatches} mismatches",
    )


def test_criterion_3_million_row_performance(tmp_path):
    rng = np.random.default_rng(31)
    n_side = 500_000
    treated_scores = rng.random(n_side)
    control_scores = rng.random(n_side)
    treated_ids = np.arange(n_side)
    control_ids = np.arange(n_side, 2 * n_side)
    started = time.perf_counter()
    sample = nn_match(treated_ids, treated_scores, control_ids, control_scores)
    match_seconds = time.perf_counter() - started
    all_matched = len(sample.treated_ids) == n_side

    # a second, traced run bounds allocation: a quadratic distance matrix
    # at this size would need terabytes, so a sub-GB peak rules it out
    tracemalloc.start()
    nn_match(treated_ids, treated_scores, control_ids, control_scores)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    peak_mb = peak / 2**20

    spec = benchmark_confounded(1_000_000, 33)
    paths = {}
    for wave in ("pre", "post"):
        paths[wave] = tmp_path / f"m_{wave}.csv"
        save_frame(generate(spec, wave), paths[wave])
    cfg = PipelineConfig(
        pre_csv=str(paths["pre"]),
        post_csv=str(paths["post"]),
        output_dir=str(tmp_path / "out"),
    )
    started = time.perf_counter()
    result = run_pipeline(cfg)
    pipeline_seconds = time.perf_counter() - started
    completed = all(status == "completed" for _, status in result.stages)
    _report(
        3,
        "million-row matching and pipeline",
        match_seconds < 10.0
        and all_matched
        and peak_mb < 1024
        and pipeline_seconds < 60.0
        and completed,
        f"match 1M in {match_seconds:.2f}s (<10s), peak {peak_mb:.0f}MB, "
        f"pipeline 1M×2 in {pipeline_seconds:.1f}s (<60s)",
    )


def test_criterion_4_balance_repair(confounded_csvs):
    from matchdid.frames import load_frame

    frame = load_frame(confounded_csvs["post"], "post")
    model = fit_propensity(
        frame,
        DesignSpec(covariates=("wealth_index", "education", "urban_rural", "hh_size", "age")),
    )
    scores = predict_propensity(model, frame)
    treated = frame.treated()
    ids = frame.ids()
    support = common_support(
        scores[treated], scores[~treated], ids[treated], ids[~treated]
    )
    sample = nn_match(
        ids[treated][support.treated_mask],
        scores[treated][support.treated_mask],
        ids[~treated][support.control_mask],
        scores[~treated][support.control_mask],
    )

    def subframe(positions):
        df = frame.to_dataframe().iloc[positions]
        return AnalysisFrame.from_dataframe(df, frame.wave, validate=False)

    all_pos = np.arange(len(frame))
    before = balance_report(subframe(all_pos[treated]), subframe(all_pos[~treated]), model)
    after = balance_report(
        subframe(frame.positions_of(sample.treated_ids)),
        subframe(frame.positions_of(sample.control_ids)),
        model,
    )
    _report(
        4,
        "matching repairs confounded imbalance",
        before.max_abs_bias > 20.0
        and after.max_abs_bias < 5.0
        and 0.5 <= after.rubin_r <= 2.0,
        f"max |%bias| {before.max_abs_bias:.1f} → {after.max_abs_bias:.2f}, "
        f"Rubin's R {after.rubin_r:.3f}",
    )


def test_criterion_5_effect_recovery_at_calibrated_att():
    started = time.perf_counter()
    spec = benchmark_confounded(100_000, 2021)
    report = monte_carlo(spec, 100, estimators=("psm_did", "ipw", "aipw"))
    elapsed = time.perf_counter() - started
    bias = {row.estimator: row.bias for row in report.rows}
    mean = {row.estimator: row.mean_estimate for row in report.rows}
    agree = round(mean["ipw"], 3) == round(mean["aipw"], 3)
    _report(
        5,
        "true ATT 0.021 recovered at N=100k over 100 replications",
        abs(bias["psm_did"]) < 0.005
        and abs(bias["ipw"]) < 0.003
        and abs(bias["aipw"]) < 0.003
        and agree
        and elapsed < 600.0,
        f"bias psm_did {bias['psm_did']:+.5f} (±0.005), "
        f"ipw {bias['ipw']:+.5f} / aipw {bias['aipw']:+.5f} (±0.003), "
        f"ipw/aipw 3dp agree={agree}, {elapsed:.0f}s (<600s)",
    )


def test_criterion_6_double_robustness():
    broken_prop = monte_carlo(
        benchmark_broken_propensity(50_000, 606), 100, estimators=("ipw", "aipw")
    )
    bias_a = {row.estimator: row.bias for row in broken_prop.rows}
    broken_out = monte_carlo(
        benchmark_broken_outcome(50_000, 707), 100, estimators=("regression", "aipw")
    )
    bias_b = {row.estimator: row.bias for row in broken_out.rows}
    _report(
        6,
        "AIPW survives either broken component",
        abs(bias_a["ipw"]) > 0.02
        and abs(bias_a["aipw"]) < 0.01
        and abs(bias_b["regression"]) > 0.02
        and abs(bias_b["aipw"]) < 0.01,
        f"broken propensity: ipw {bias_a['ipw']:+.4f} vs aipw {bias_a['aipw']:+.4f}; "
        f"broken outcome: regression {bias_b['regression']:+.4f} "
        f"vs aipw {bias_b['aipw']:+.4f}",
    )


def test_criterion_7_sensitivity_exactness():
    # (a) gamma = 1: both bounds coincide exactly
    y_t = np.repeat([1, 0], [30, 10])
    y_c = np.repeat([1, 0], [10, 30])
    rows = mh_bounds(y_t, y_c, GammaGrid(1.0, 2.0, 0.1))
    gamma1 = rows[0]
    coincide = gamma1.q_plus == gamma1.q_minus and gamma1.p_plus == gamma1.p_minus

    # (b) moments vs exact enumeration for every N ≤ 30, interior margins
    worst = 0.0
    for n_total in range(2, 31):
        for n_treated in range(1, n_total):
            for n_success in range(1, n_total):
                for odds in (0.5, 1.0, 2.0):
                    mean, var = extended_hypergeometric_moments(
                        n_total, n_treated, n_success, odds
                    )
                    exp_mean, exp_var = extended_hypergeom_oracle(
                        n_total, n_treated, n_success, odds
                    )
                    worst = max(worst, abs(mean - exp_mean), abs(var - exp_var))

    # (c) hand instance: 3 pairs, all treated successes, no control ones
    hand = mh_bounds(np.ones(3, dtype=int), np.zeros(3, dtype=int), GammaGrid(1.0, 1.0, 0.1))
    hand_err = abs(hand[0].q_plus - 1.4907)
    _report(
        7,
        "sensitivity bounds are exact",
        coincide and worst < 1e-9 and hand_err < 1e-3,
        f"Γ=1 bounds coincide={coincide}, enumeration max err {worst:.2e} "
        f"over N≤30, hand Q err {hand_err:.2e}",
    )


def test_criterion_8_did_arithmetic():
    pre = AttEstimate(att=0.029, se=0.002)
    post = AttEstimate(att=0.007, se=0.003)
    did = did_of_att(pre, post)
    exact = did.effect == 0.007 - 0.029
    rounds = round(did.effect, 3) == -0.022 and f"{did.effect:.3f}" == "-0.022"
    _report(
        8,
        "DiD of ATTs returns post minus pre",
        exact and rounds,
        f"effect={did.effect!r}, equals 0.007-0.029={exact}, prints -0.022={rounds}",
    )


def test_criterion_9_byte_identical_reruns(confounded_csvs, tmp_path):
    base = PipelineConfig(
        pre_csv=str(confounded_csvs["pre"]),
        post_csv=str(confounded_csvs["post"]),
        estimators=("psm_did", "ipw", "aipw", "regression", "naive"),
        seed=41,
    )
    first = run_pipeline(base.with_overrides(output_dir=str(tmp_path / "run_a")))
    second = run_pipeline(base.with_overrides(output_dir=str(tmp_path / "run_b")))
    same_names = first.artifacts == second.artifacts
    differing = [
        name
        for name in first.artifacts
        if (first.output_dir / name).read_bytes() != (second.output_dir / name).read_bytes()
    ]
    _report(
        9,
        "reruns are byte-identical",
        same_names and not differing,
        f"{len(first.artifacts)} artifacts compared, differing: {differing or 'none'}",
    )
