"""Treatment-effect estimators.

Four estimators share this module:

* ``att_matched``: mean outcome difference over matched pairs;
* ``did_of_att``: difference of two ATT estimates across survey rounds,
  with independence-based standard errors;
* ``ipw``: inverse-probability weighting (normalized weights, robust
  standard errors with the weights treated as known);
* ``aipw``: the augmented/doubly-robust estimator with per-arm
  linear-probability outcome regressions.

``regression_adjustment`` (outcome models alone) is included as the
comparison arm for double-robustness checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from . import _validation as v
from .errors import EmptyGroupError, EstimationError, NotFittedError, SchemaError
from .frames import AnalysisFrame
from .glm import (
    DesignSpec,
    PropensityModel,
    build_design,
    predict_propensity,
)
from .matching import MatchedSample

Estimand = Literal["ate", "atet"]

#: Default propensity trimming bounds for the weighting estimators.
TRIM_BOUNDS = (0.01, 0.99)


def _t_and_p(value: float, se: float) -> tuple[float, float]:
    if np.isnan(se):
        return float("nan"), float("nan")
    if se == 0.0:
        if value == 0.0:
            return 0.0, 1.0
        return float(np.copysign(np.inf, value)), 0.0
    t = value / se
    return float(t), float(2.0 * stats.norm.sf(abs(t)))


@dataclass(frozen=True)
class AttEstimate:
    """Average treatment effect on the treated from matched pairs."""

    att: float
    se: float
    t_stat: float = float("nan")
    p_value: float = float("nan")
    n_treated: int = 0
    n_control: int = 0
    mean_treated: float = float("nan")
    mean_control: float = float("nan")
    outcome: str = ""
    wave: str | None = None


def paired_att(
    treated_outcomes,
    control_outcomes,
    outcome: str = "",
    wave: str | None = None,
) -> AttEstimate:
    """ATT over aligned matched pairs.

    The estimate is the mean pair difference; its standard error is
    sqrt(sample variance of the differences / n_pairs). A single pair has
    no variance estimate (se is NaN).
    """
    y_t = v.as_float_1d(treated_outcomes, "treated_outcomes")
    y_c = v.as_float_1d(control_outcomes, "control_outcomes")
    if len(y_t) != len(y_c):
        raise SchemaError("pair outcome vectors must have equal length")
    if len(y_t) == 0:
        raise EmptyGroupError("no matched pairs")
    diffs = y_t - y_c
    att = float(diffs.mean())
    se = (
        float(np.sqrt(np.var(diffs, ddof=1) / len(diffs)))
        if len(diffs) > 1
        else float("nan")
    )
    t, p = _t_and_p(att, se)
    return AttEstimate(
        att=att,
        se=se,
        t_stat=t,
        p_value=p,
        n_treated=len(y_t),
        n_control=len(y_c),
        mean_treated=float(y_t.mean()),
        mean_control=float(y_c.mean()),
        outcome=outcome,
        wave=wave,
    )


def att_matched(
    sample: MatchedSample, frame: AnalysisFrame, outcome_field: str
) -> AttEstimate:
    """ATT for one wave: look up the matched ids in ``frame`` and average
    the pair differences of ``outcome_field``."""
    if sample.n_pairs == 0:
        raise EmptyGroupError("matched sample has no pairs")
    y = np.asarray(frame.column(outcome_field), dtype=float)
    y_t = y[frame.positions_of(sample.treated_ids)]
    y_c = y[frame.positions_of(sample.control_ids)]
    return paired_att(y_t, y_c, outcome=outcome_field, wave=frame.wave.value)


@dataclass(frozen=True)
class DidEstimate:
    """Difference between post- and pre-round ATT estimates."""

    effect: float
    se: float
    t_stat: float
    p_value: float
    pre: AttEstimate
    post: AttEstimate
    outcome: str = ""


def did_of_att(pre: AttEstimate, post: AttEstimate) -> DidEstimate:
    """Difference-in-differences of two ATT estimates.

    effect = post.att - pre.att (plain float subtraction of the stored
    values); se = sqrt(se_pre^2 + se_post^2), treating the two repeated
    cross-sections as independent samples. The p-value is two-sided normal.
    """
    effect = post.att - pre.att
    se = float(np.sqrt(pre.se**2 + post.se**2))
    t, p = _t_and_p(effect, se)
    return DidEstimate(
        effect=effect,
        se=se,
        t_stat=t,
        p_value=p,
        pre=pre,
        post=post,
        outcome=post.outcome or pre.outcome,
    )


@dataclass(frozen=True)
class WeightedEstimate:
    """Result of a weighting / augmented / regression estimator."""

    estimator: str
    estimand: str
    value: float
    se: float
    t_stat: float
    p_value: float
    n_used: int
    n_treated: int
    n_control: int
    n_trimmed: int
    outcome: str = ""
    wave: str | None = None


def _apply_trim(y, d, ps, trim):
    lo, hi = trim
    if not (0.0 <= lo < hi <= 1.0):
        raise SchemaError(f"trim bounds must satisfy 0 <= lo < hi <= 1, got {trim}")
    keep = (ps >= lo) & (ps <= hi)
    n_trimmed = int((~keep).sum())
    y, d, ps = y[keep], d[keep], ps[keep]
    if len(y) == 0 or d.min() == d.max():
        raise EmptyGroupError(
            "trimming left no usable treated/control observations "
            f"(bounds {trim}, {n_trimmed} rows removed)"
        )
    return y, d, ps, keep, n_trimmed


def ipw_from_scores(
    y,
    d,
    propensity,
    estimand: Estimand = "atet",
    trim: tuple[float, float] = TRIM_BOUNDS,
    outcome: str = "",
    wave: str | None = None,
) -> WeightedEstimate:
    """Inverse-probability-weighted effect from outcome, treatment and
    score arrays.

    ATE weights are 1/p (treated) and 1/(1-p) (control); ATET weights are 1
    and p/(1-p). Group means are weight-normalized. The standard error is
    the influence-function (sandwich) form with the propensities treated as
    known constants. Rows with scores outside ``trim`` are excluded and
    counted in ``n_trimmed``.
    """
    y = v.as_float_1d(y, "y")
    d = v.as_binary(d, "d")
    ps = v.as_probabilities(propensity, "propensity")
    if not (len(y) == len(d) == len(ps)):
        raise SchemaError("y, d and propensity must have equal length")
    y, d, ps, _, n_trimmed = _apply_trim(y, d, ps, trim)
    n = len(y)
    treated = d == 1.0
    if estimand == "ate":
        w1 = np.where(treated, 1.0 / ps, 0.0)
        w0 = np.where(~treated, 1.0 / (1.0 - ps), 0.0)
    elif estimand == "atet":
        w1 = np.where(treated, 1.0, 0.0)
        w0 = np.where(~treated, ps / (1.0 - ps), 0.0)
    else:
        raise SchemaError(f"estimand must be 'ate' or 'atet', got {estimand!r}")
    mu1 = float((w1 * y).sum() / w1.sum())
    mu0 = float((w0 * y).sum() / w0.sum())
    value = mu1 - mu0
    phi = w1 * (y - mu1) / (w1.sum() / n) - w0 * (y - mu0) / (w0.sum() / n)
    se = float(np.sqrt((phi * phi).sum()) / n)
    t, p = _t_and_p(value, se)
    return WeightedEstimate(
        estimator="ipw",
        estimand=estimand,
        value=value,
        se=se,
        t_stat=t,
        p_value=p,
        n_used=n,
        n_treated=int(treated.sum()),
        n_control=int((~treated).sum()),
        n_trimmed=n_trimmed,
        outcome=outcome,
        wave=wave,
    )


def ipw(
    frame: AnalysisFrame,
    model: PropensityModel,
    outcome_field: str,
    estimand: Estimand = "atet",
    trim: tuple[float, float] = TRIM_BOUNDS,
) -> WeightedEstimate:
    """IPW effect of the frame's treated flag on ``outcome_field``."""
    return ipw_from_scores(
        np.asarray(frame.column(outcome_field), dtype=float),
        frame.treated().astype(float),
        predict_propensity(model, frame),
        estimand=estimand,
        trim=trim,
        outcome=outcome_field,
        wave=frame.wave.value,
    )


# -- outcome regressions -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    """Linear-probability regression for one treatment arm."""

    arm: int
    feature_names: tuple[str, ...]
    params: np.ndarray            # slopes then intercept
    cov_params: np.ndarray        # HC0 sandwich covariance
    n_obs: int
    design_spec: DesignSpec
    category_levels: dict

    def predict(self, X) -> np.ndarray:
        X = v.as_float_2d(X, "X")
        return X @ self.params[:-1] + self.params[-1]

    def predict_frame(self, frame: AnalysisFrame) -> np.ndarray:
        X, _, _ = build_design(frame, self.design_spec, self.category_levels)
        return self.predict(X)


def fit_outcome_models(
    frame: AnalysisFrame,
    outcome_field: str,
    spec: DesignSpec | None = None,
) -> tuple[OutcomeModel, OutcomeModel]:
    """Per-arm OLS of the outcome on the treatment-equation covariates.

    Returns (treated-arm model, control-arm model). Collinear designs fall
    back to the minimum-norm solution, which leaves fitted values intact.
    """
    spec = spec or DesignSpec()
    X, names, levels = build_design(frame, spec)
    y = np.asarray(frame.column(outcome_field), dtype=float)
    d = frame.treated()
    out = []
    for arm in (1, 0):
        sel = d if arm == 1 else ~d
        if int(sel.sum()) == 0:
            raise EmptyGroupError(f"no rows in arm {arm} to fit the outcome model")
        Xa = np.hstack([X[sel], np.ones((int(sel.sum()), 1))])
        ya = y[sel]
        params, *_ = np.linalg.lstsq(Xa, ya, rcond=None)
        resid = ya - Xa @ params
        xtx_inv = np.linalg.pinv(Xa.T @ Xa)
        meat = Xa.T @ (Xa * (resid * resid)[:, None])
        cov = xtx_inv @ meat @ xtx_inv
        out.append(
            OutcomeModel(
                arm=arm,
                feature_names=tuple(names),
                params=params,
                cov_params=cov,
                n_obs=int(sel.sum()),
                design_spec=spec,
                category_levels=levels,
            )
        )
    return out[0], out[1]


def aipw_from_arrays(
    y,
    d,
    propensity,
    m1,
    m0,
    estimand: Estimand = "ate",
    trim: tuple[float, float] = TRIM_BOUNDS,
    outcome: str = "",
    wave: str | None = None,
) -> WeightedEstimate:
    """Augmented IPW from precomputed arrays.

    ATE: mean of m1 - m0 + D (y - m1)/e - (1-D)(y - m0)/(1-e).
    ATET: the augmentation terms are reweighted by e/(P(D=1)) so the
    estimate targets the treated population:
    mean of [D (m1 - m0) + D (y - m1) - (1-D) e/(1-e) (y - m0)] / mean(D).
    Standard errors are the empirical influence form sqrt(var(psi)/n).
    """
    y = v.as_float_1d(y, "y")
    d = v.as_binary(d, "d")
    ps = v.as_probabilities(propensity, "propensity")
    m1 = v.as_float_1d(m1, "m1")
    m0 = v.as_float_1d(m0, "m0")
    if not (len(y) == len(d) == len(ps) == len(m1) == len(m0)):
        raise SchemaError("all arrays must have equal length")
    y, d, ps, keep, n_trimmed = _apply_trim(y, d, ps, trim)
    m1, m0 = m1[keep], m0[keep]
    n = len(y)
    if estimand == "ate":
        psi = m1 - m0 + d * (y - m1) / ps - (1 - d) * (y - m0) / (1.0 - ps)
    elif estimand == "atet":
        pbar = d.mean()
        psi = (
            d * (m1 - m0) + d * (y - m1) - (1 - d) * (ps / (1.0 - ps)) * (y - m0)
        ) / pbar
    else:
        raise SchemaError(f"estimand must be 'ate' or 'atet', got {estimand!r}")
    value = float(psi.mean())
    se = float(np.sqrt(np.var(psi, ddof=1) / n)) if n > 1 else float("nan")
    t, p = _t_and_p(value, se)
    return WeightedEstimate(
        estimator="aipw",
        estimand=estimand,
        value=value,
        se=se,
        t_stat=t,
        p_value=p,
        n_used=n,
        n_treated=int((d == 1).sum()),
        n_control=int((d == 0).sum()),
        n_trimmed=n_trimmed,
        outcome=outcome,
        wave=wave,
    )


def aipw(
    frame: AnalysisFrame,
    model: PropensityModel,
    outcome_field: str,
    outcome_models: tuple[OutcomeModel, OutcomeModel] | None = None,
    estimand: Estimand = "ate",
    trim: tuple[float, float] = TRIM_BOUNDS,
) -> WeightedEstimate:
    """Doubly-robust effect on a frame.

    ``outcome_models`` is the (treated, control) pair from
    :func:`fit_outcome_models`; when omitted the models are fit on this
    frame with the propensity model's own covariate list.
    """
    if outcome_models is None:
        outcome_models = fit_outcome_models(
            frame, outcome_field, getattr(model, "design_spec_", None)
        )
    m1_model, m0_model = outcome_models
    if m1_model.arm != 1 or m0_model.arm != 0:
        raise SchemaError("outcome_models must be the (treated, control) pair")
    return aipw_from_arrays(
        np.asarray(frame.column(outcome_field), dtype=float),
        frame.treated().astype(float),
        predict_propensity(model, frame),
        m1_model.predict_frame(frame),
        m0_model.predict_frame(frame),
        estimand=estimand,
        trim=trim,
        outcome=outcome_field,
        wave=frame.wave.value,
    )


def regression_adjustment(
    frame: AnalysisFrame,
    outcome_field: str,
    estimand: Estimand = "ate",
    spec: DesignSpec | None = None,
) -> WeightedEstimate:
    """Outcome-regression-only estimator (the non-robust comparison arm).

    ATE: mean of m1(x) - m0(x) over all rows. ATET: mean over treated rows
    of y - m0(x). Standard errors combine the outcome-model coefficient
    covariance (HC0) with, for ATET, the treated outcome variance.
    """
    m1_model, m0_model = fit_outcome_models(frame, outcome_field, spec)
    X, _, _ = build_design(frame, m1_model.design_spec, m1_model.category_levels)
    design = np.hstack([X, np.ones((X.shape[0], 1))])
    y = np.asarray(frame.column(outcome_field), dtype=float)
    d = frame.treated()
    n = len(y)
    if estimand == "ate":
        value = float(np.mean(design @ (m1_model.params - m0_model.params)))
        dbar = design.mean(axis=0)
        var = float(dbar @ (m1_model.cov_params + m0_model.cov_params) @ dbar)
    elif estimand == "atet":
        if int(d.sum()) == 0:
            raise EmptyGroupError("no treated rows")
        dt = design[d]
        yt = y[d]
        m0_hat = dt @ m0_model.params
        value = float(np.mean(yt - m0_hat))
        dbar = dt.mean(axis=0)
        var = float(np.var(yt, ddof=1) / len(yt) + dbar @ m0_model.cov_params @ dbar)
    else:
        raise SchemaError(f"estimand must be 'ate' or 'atet', got {estimand!r}")
    se = float(np.sqrt(var))
    t, p = _t_and_p(value, se)
    return WeightedEstimate(
        estimator="regression",
        estimand=estimand,
        value=value,
        se=se,
        t_stat=t,
        p_value=p,
        n_used=n,
        n_treated=int(d.sum()),
        n_control=int((~d).sum()),
        n_trimmed=0,
        outcome=outcome_field,
        wave=frame.wave.value,
    )


# -- estimator-API wrappers ---------------------------------------------------


class IPWEstimator(BaseEstimator):
    """Fit a propensity model and the IPW effect in one step.

    fit(X, d, y) exposes the result as ``effect_``, ``se_`` and the full
    ``estimate_``; the internal propensity model is ``propensity_model_``.
    """

    def __init__(
        self,
        estimand: Estimand = "atet",
        link: str = "logit",
        trim: tuple[float, float] = TRIM_BOUNDS,
    ):
        self.estimand = estimand
        self.link = link
        self.trim = trim

    def fit(self, X, d, y):
        model = PropensityModel(link=self.link).fit(X, d)
        ps = model.predict_proba(X)[:, 1]
        est = ipw_from_scores(y, d, ps, estimand=self.estimand, trim=self.trim)
        self.propensity_model_ = model
        self.estimate_ = est
        self.effect_ = est.value
        self.se_ = est.se
        return self

    def _require_fitted(self):
        if not hasattr(self, "estimate_"):
            raise NotFittedError("call fit() first")


class AIPWEstimator(BaseEstimator):
    """Doubly-robust estimator over plain arrays: propensity model plus
    per-arm OLS outcome regressions on the same design."""

    def __init__(
        self,
        estimand: Estimand = "ate",
        link: str = "logit",
        trim: tuple[float, float] = TRIM_BOUNDS,
    ):
        self.estimand = estimand
        self.link = link
        self.trim = trim

    def fit(self, X, d, y):
        X = v.as_float_2d(X, "X")
        d = v.as_binary(d, "d")
        y = v.as_float_1d(y, "y")
        model = PropensityModel(link=self.link).fit(X, d)
        ps = model.predict_proba(X)[:, 1]
        design = np.hstack([X, np.ones((X.shape[0], 1))])
        preds = {}
        for arm in (1, 0):
            sel = d == arm
            if int(sel.sum()) == 0:
                raise EmptyGroupError(f"no rows in arm {arm}")
            params, *_ = np.linalg.lstsq(design[sel], y[sel], rcond=None)
            preds[arm] = design @ params
        est = aipw_from_arrays(
            y, d, ps, preds[1], preds[0], estimand=self.estimand, trim=self.trim
        )
        self.propensity_model_ = model
        self.estimate_ = est
        self.effect_ = est.value
        self.se_ = est.se
        return self

    def _require_fitted(self):
        if not hasattr(self, "estimate_"):
            raise NotFittedError("call fit() first")
