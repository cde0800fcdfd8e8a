"""Synthetic two-wave survey generator and Monte-Carlo harness.

The generator draws households with independent covariates, assigns
treatment from a logistic model that is linear in the raw covariate
codes, and draws a binary outcome from a linear-probability model plus a
known additive treatment effect for treated households in the post wave.
Because the outcome model is linear in probability (and specs whose
linear predictor could leave [0.02, 0.98] are rejected outright, never
clipped), the configured effect IS the true ATT — the generator doubles
as an exact oracle for every estimator in the package.

Randomness comes from numpy's PCG64 generator seeded through
``SeedSequence(seed)`` with one spawned child per wave, so output is
reproducible bit-for-bit across runs and platforms for a fixed seed.

Misspecification knobs (all off by default):

* ``selection_age_quad`` adds a quadratic age term to the *true*
  treatment equation, so a propensity model that is linear in the codes
  is wrong while the outcome model stays right;
* ``outcome_age_quad`` does the same to the *true* outcome equation;
* ``hidden_bias_gamma``/``hidden_bias_outcome_shift`` add an unobserved
  binary confounder that multiplies treatment odds by gamma and shifts
  the outcome probability, the situation the sensitivity bounds probe.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import expit

from .effects import (
    aipw,
    att_matched,
    did_of_att,
    ipw,
    regression_adjustment,
)
from .errors import (
    EmptyGroupError,
    ReplicationError,
    SchemaError,
    SpecValidationError,
)
from .frames import _MEMBERSHIP, _RANGES, COLUMNS, AnalysisFrame, Provenance, Wave
from .glm import DesignSpec, fit_propensity, predict_propensity
from .matching import common_support, nn_match
from .zones import Zone, default_zone_map

#: Covariate fields the generator draws, in the order they are drawn.
COVARIATE_FIELDS: tuple[str, ...] = (
    "state",
    "age",
    "religion",
    "caste",
    "wealth_index",
    "education",
    "urban_rural",
    "gender",
    "hh_size",
)

#: Outcome-probability bounds every admissible spec must respect.
LP_BOUNDS = (0.02, 0.98)

DEFAULT_ESTIMATORS = ("psm_did", "ipw", "aipw", "regression", "naive")

_FUEL_LPG = 2
_FUEL_FIREWOOD = 8


@dataclass(frozen=True)
class CovariateSpec:
    """Marginal distribution of one covariate.

    kind "categorical": draws from ``levels`` with ``weights``
    (uniform when weights are omitted). kind "uniform_int": integers
    drawn uniformly from [low, high].
    """

    kind: str
    levels: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()
    low: int = 0
    high: int = 0

    def support(self) -> tuple[int, int]:
        if self.kind == "categorical":
            return min(self.levels), max(self.levels)
        return self.low, self.high

    def enumerate(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, probabilities) over the full support."""
        if self.kind == "categorical":
            vals = np.asarray(self.levels, dtype=float)
            if self.weights:
                p = np.asarray(self.weights, dtype=float)
            else:
                p = np.ones(len(vals))
            return vals, p / p.sum()
        vals = np.arange(self.low, self.high + 1, dtype=float)
        return vals, np.full(len(vals), 1.0 / len(vals))


def _validate_covariate(name: str, cs: CovariateSpec) -> None:
    if cs.kind not in ("categorical", "uniform_int"):
        raise SpecValidationError(
            f"covariate {name!r}: kind must be 'categorical' or 'uniform_int', "
            f"got {cs.kind!r}"
        )
    if cs.kind == "categorical":
        if not cs.levels:
            raise SpecValidationError(f"covariate {name!r}: no levels given")
        if cs.weights and len(cs.weights) != len(cs.levels):
            raise SpecValidationError(
                f"covariate {name!r}: {len(cs.weights)} weights for "
                f"{len(cs.levels)} levels"
            )
        if cs.weights and (min(cs.weights) < 0 or sum(cs.weights) <= 0):
            raise SpecValidationError(
                f"covariate {name!r}: weights must be nonnegative with a "
                "positive sum"
            )
        values = list(cs.levels)
    else:
        if cs.low > cs.high:
            raise SpecValidationError(
                f"covariate {name!r}: low {cs.low} exceeds high {cs.high}"
            )
        values = [cs.low, cs.high]
    if name == "state":
        known = set(default_zone_map().by_code)
        codes = cs.levels if cs.kind == "categorical" else range(cs.low, cs.high + 1)
        bad = [x for x in codes if x not in known]
        if bad:
            raise SpecValidationError(
                f"covariate 'state': codes {bad} are not in the zone table"
            )
        return
    if name in _MEMBERSHIP:
        allowed = _MEMBERSHIP[name]
        if cs.kind == "categorical":
            bad = [x for x in cs.levels if x not in allowed]
        else:
            bad = [x for x in range(cs.low, cs.high + 1) if x not in allowed]
        if bad:
            raise SpecValidationError(
                f"covariate {name!r}: codes {bad} violate the schema "
                f"(allowed: {sorted(allowed)})"
            )
    if name in _RANGES:
        lo, hi = _RANGES[name]
        vmin, vmax = min(values), max(values)
        if vmin < lo or (hi is not None and vmax > hi):
            raise SpecValidationError(
                f"covariate {name!r}: support [{vmin}, {vmax}] leaves the "
                f"schema range [{lo}, {hi}]"
            )


def default_covariates() -> dict[str, CovariateSpec]:
    """A survey-shaped default: one state per zone, broad age range,
    skewed religion/caste mixes, uniform wealth quintiles."""
    return {
        "state": CovariateSpec(
            "categorical", levels=(3, 18, 9, 10, 27, 32)
        ),  # one per zone
        "age": CovariateSpec("uniform_int", low=20, high=69),
        "religion": CovariateSpec(
            "categorical", levels=(1, 2, 3), weights=(0.7, 0.2, 0.1)
        ),
        "caste": CovariateSpec(
            "categorical", levels=(1, 2, 3, 4), weights=(0.2, 0.1, 0.4, 0.3)
        ),
        "wealth_index": CovariateSpec("uniform_int", low=1, high=5),
        "education": CovariateSpec("uniform_int", low=0, high=14),
        "urban_rural": CovariateSpec(
            "categorical", levels=(1, 2), weights=(0.35, 0.65)
        ),
        "gender": CovariateSpec("categorical", levels=(1, 2), weights=(0.85, 0.15)),
        "hh_size": CovariateSpec("uniform_int", low=1, high=12),
    }


@dataclass(frozen=True)
class SyntheticSpec:
    """Complete description of a synthetic two-wave population.

    ``selection_*`` defines the true treatment equation (logistic link,
    linear in raw codes plus the optional quadratic age term);
    ``outcome_*`` defines the true linear-probability outcome equation.
    ``true_att`` is added to the outcome probability of treated
    households in the post wave; ``zone_att`` overrides it per zone
    label. Validation rejects any spec whose outcome probability could
    leave [0.02, 0.98] anywhere on the covariate support, so the
    configured effect is exact by construction.
    """

    n_per_wave: int
    seed: int
    covariates: Mapping[str, CovariateSpec] = field(default_factory=default_covariates)
    selection_intercept: float = 0.0
    selection_coefs: Mapping[str, float] = field(default_factory=dict)
    outcome_intercept: float = 0.5
    outcome_coefs: Mapping[str, float] = field(default_factory=dict)
    true_att: float = 0.0
    zone_att: Mapping[str, float] = field(default_factory=dict)
    hidden_bias_gamma: float = 1.0
    hidden_bias_outcome_shift: float = 0.0
    selection_age_quad: float = 0.0
    outcome_age_quad: float = 0.0
    age_quad_center: float = 30.0
    age_quad_scale: float = 10.0

    def __post_init__(self) -> None:
        if self.n_per_wave < 1:
            raise SpecValidationError("n_per_wave must be at least 1")
        if int(self.seed) != self.seed:
            raise SpecValidationError("seed must be an integer")
        missing = [f for f in COVARIATE_FIELDS if f not in self.covariates]
        extra = [f for f in self.covariates if f not in COVARIATE_FIELDS]
        if missing or extra:
            raise SpecValidationError(
                f"covariates must cover exactly {list(COVARIATE_FIELDS)}; "
                f"missing {missing}, unexpected {extra}"
            )
        for name in COVARIATE_FIELDS:
            _validate_covariate(name, self.covariates[name])
        for label, coefs in (
            ("selection_coefs", self.selection_coefs),
            ("outcome_coefs", self.outcome_coefs),
        ):
            unknown = [f for f in coefs if f not in COVARIATE_FIELDS]
            if unknown:
                raise SpecValidationError(f"{label}: unknown fields {unknown}")
        bad_zones = [z for z in self.zone_att if z not in {x.value for x in Zone}]
        if bad_zones:
            raise SpecValidationError(f"zone_att: unknown zones {bad_zones}")
        if not self.hidden_bias_gamma >= 1.0:
            raise SpecValidationError("hidden_bias_gamma must be >= 1")
        if not self.age_quad_scale > 0:
            raise SpecValidationError("age_quad_scale must be positive")
        lo, hi = self.outcome_probability_bounds()
        if lo < LP_BOUNDS[0] or hi > LP_BOUNDS[1]:
            raise SpecValidationError(
                "outcome probability can reach "
                f"[{lo:.4f}, {hi:.4f}], outside the admissible "
                f"[{LP_BOUNDS[0]}, {LP_BOUNDS[1]}]; rescale the outcome "
                "coefficients (probabilities are never clipped)"
            )

    def _age_quad_range(self) -> tuple[float, float]:
        alo, ahi = self.covariates["age"].support()
        qa = ((alo - self.age_quad_center) / self.age_quad_scale) ** 2
        qb = ((ahi - self.age_quad_center) / self.age_quad_scale) ** 2
        qmin = 0.0 if alo <= self.age_quad_center <= ahi else min(qa, qb)
        return qmin, max(qa, qb)

    def outcome_probability_bounds(self) -> tuple[float, float]:
        """Exact range of the outcome probability over the support
        (interval arithmetic; exact because every term is monotone)."""
        lo = hi = self.outcome_intercept
        for name, coef in self.outcome_coefs.items():
            a, b = self.covariates[name].support()
            lo += min(coef * a, coef * b)
            hi += max(coef * a, coef * b)
        if self.outcome_age_quad:
            qmin, qmax = self._age_quad_range()
            lo += min(self.outcome_age_quad * qmin, self.outcome_age_quad * qmax)
            hi += max(self.outcome_age_quad * qmin, self.outcome_age_quad * qmax)
        atts = [self.true_att, *self.zone_att.values()]
        lo += min(0.0, *atts)
        hi += max(0.0, *atts)
        lo += min(0.0, self.hidden_bias_outcome_shift)
        hi += max(0.0, self.hidden_bias_outcome_shift)
        return lo, hi


def _selection_index(spec: SyntheticSpec, cols: dict, u: np.ndarray) -> np.ndarray:
    z = np.full(len(u), spec.selection_intercept)
    for name, coef in spec.selection_coefs.items():
        z += coef * cols[name]
    if spec.selection_age_quad:
        q = ((cols["age"] - spec.age_quad_center) / spec.age_quad_scale) ** 2
        z += spec.selection_age_quad * q
    if spec.hidden_bias_gamma > 1.0:
        z += math.log(spec.hidden_bias_gamma) * u
    return z


def _att_by_state(spec: SyntheticSpec) -> dict[int, float]:
    zmap = default_zone_map()
    state = spec.covariates["state"]
    codes = (
        state.levels if state.kind == "categorical" else range(state.low, state.high + 1)
    )
    out = {}
    for code in codes:
        zone = zmap.by_code[code].value
        out[code] = spec.zone_att.get(zone, spec.true_att)
    return out


def generate(spec: SyntheticSpec, wave: Wave | str) -> AnalysisFrame:
    """Draw one wave of households as a validated analysis frame.

    Covariates are drawn i.i.d. in the fixed field order, then the
    unobserved confounder, treatment, and outcome — each from the same
    per-wave PCG64 stream, so a given (seed, wave) pair always produces
    the identical frame.
    """
    wave = Wave(wave)
    wave_index = 0 if wave is Wave.PRE else 1
    child = np.random.SeedSequence(spec.seed).spawn(2)[wave_index]
    rng = np.random.Generator(np.random.PCG64(child))
    n = spec.n_per_wave

    cols: dict[str, np.ndarray] = {}
    for name in COVARIATE_FIELDS:
        cs = spec.covariates[name]
        if cs.kind == "categorical":
            levels = np.asarray(cs.levels, dtype=np.int64)
            if cs.weights:
                p = np.asarray(cs.weights, dtype=float)
                p = p / p.sum()
                cols[name] = rng.choice(levels, size=n, p=p)
            else:
                cols[name] = levels[rng.integers(0, len(levels), size=n)]
        else:
            cols[name] = rng.integers(cs.low, cs.high + 1, size=n, dtype=np.int64)

    u = rng.integers(0, 2, size=n)
    z = _selection_index(spec, cols, u)
    d = rng.random(n) < expit(z)

    lp = np.full(n, spec.outcome_intercept)
    for name, coef in spec.outcome_coefs.items():
        lp += coef * cols[name]
    if spec.outcome_age_quad:
        q = ((cols["age"] - spec.age_quad_center) / spec.age_quad_scale) ** 2
        lp += spec.outcome_age_quad * q
    if spec.hidden_bias_outcome_shift:
        lp += spec.hidden_bias_outcome_shift * u
    if wave is Wave.POST:
        if spec.zone_att:
            att_map = _att_by_state(spec)
            att_vec = np.zeros(n)
            for code, att in att_map.items():
                att_vec[cols["state"] == code] = att
            lp += np.where(d, att_vec, 0.0)
        elif spec.true_att:
            lp += np.where(d, spec.true_att, 0.0)
    y = rng.random(n) < lp

    df = pd.DataFrame(
        {
            "hhid": [f"{wave.value}-{i:07d}" for i in range(n)],
            **{name: cols[name].astype(np.int16) for name in COVARIATE_FIELDS},
            "bpl_card": d.astype(np.int16),
            "cooking_fuel": np.where(y, _FUEL_LPG, _FUEL_FIREWOOD).astype(np.int16),
        }
    )[list(COLUMNS)]
    frame = AnalysisFrame.from_dataframe(df, wave, validate=False)
    frame.provenance = Provenance(
        source=f"synthetic(seed={spec.seed}, wave={wave.value})",
        n_read=n,
        n_accepted=n,
        n_rejected=0,
        note="generated",
    )
    return frame


def analytic_treatment_share(spec: SyntheticSpec, max_cells: int = 2_000_000) -> float:
    """Exact mean treatment probability over the covariate distribution.

    Enumerates the joint support of the fields that actually enter the
    treatment equation (everything else integrates out by independence)
    and averages the logistic probabilities, including both states of the
    hidden confounder when one is configured.
    """
    z_vals = np.array([spec.selection_intercept])
    z_probs = np.array([1.0])
    fields = set(spec.selection_coefs)
    if spec.selection_age_quad:
        fields.add("age")
    for name in COVARIATE_FIELDS:
        if name not in fields:
            continue
        vals, probs = spec.covariates[name].enumerate()
        contrib = spec.selection_coefs.get(name, 0.0) * vals
        if name == "age" and spec.selection_age_quad:
            contrib = contrib + spec.selection_age_quad * (
                (vals - spec.age_quad_center) / spec.age_quad_scale
            ) ** 2
        z_vals = (z_vals[:, None] + contrib[None, :]).ravel()
        z_probs = (z_probs[:, None] * probs[None, :]).ravel()
        if len(z_vals) > max_cells:
            raise SpecValidationError(
                "covariate support too large for exact enumeration "
                f"({len(z_vals)} cells > {max_cells})"
            )
    if spec.hidden_bias_gamma > 1.0:
        shifted = z_vals + math.log(spec.hidden_bias_gamma)
        share = 0.5 * (z_probs @ expit(z_vals)) + 0.5 * (z_probs @ expit(shifted))
    else:
        share = z_probs @ expit(z_vals)
    return float(share)


# -- one full estimation pass over a generated pair of waves -----------------


def naive_difference(frame: AnalysisFrame, outcome_field: str):
    """Unadjusted treated-minus-control mean difference with its
    two-sample standard error; the no-design baseline."""
    y = np.asarray(frame.column(outcome_field), dtype=float)
    d = frame.treated()
    if d.all() or not d.any():
        raise EmptyGroupError("need both treated and control rows")
    y1, y0 = y[d], y[~d]
    value = float(y1.mean() - y0.mean())
    se = float(
        np.sqrt(np.var(y1, ddof=1) / len(y1) + np.var(y0, ddof=1) / len(y0))
    )
    return value, se


def _psm_att(frame, model, outcome_field, caliper=None):
    ps = predict_propensity(model, frame)
    tr = frame.treated()
    ids = frame.ids()
    sup = common_support(ps[tr], ps[~tr], ids[tr], ids[~tr])
    sample = nn_match(
        ids[tr][sup.treated_mask],
        ps[tr][sup.treated_mask],
        ids[~tr][sup.control_mask],
        ps[~tr][sup.control_mask],
        caliper=caliper,
    )
    return att_matched(sample, frame, outcome_field)


def estimate_battery(
    spec: SyntheticSpec,
    estimators: Sequence[str] = DEFAULT_ESTIMATORS,
    outcome_field: str = "lpg_access",
    link: str = "logit",
) -> dict[str, tuple[float, float]]:
    """Generate both waves under ``spec`` and run the requested
    estimators; returns {name: (estimate, se)}.

    "psm_did" and "psm" use matched samples ("psm_did" differences the
    post and pre ATTs; "psm" is the post-wave ATT alone). "ipw", "aipw"
    and "regression" are post-wave ATET estimates, and "naive" is the
    post-wave unadjusted mean difference.
    """
    known = {"psm_did", "psm", "ipw", "aipw", "regression", "naive"}
    bad = [e for e in estimators if e not in known]
    if bad:
        raise SchemaError(f"unknown estimators {bad}; choose from {sorted(known)}")
    post = generate(spec, Wave.POST)
    design = DesignSpec()
    results: dict[str, tuple[float, float]] = {}

    model_post = None
    if {"psm_did", "psm", "ipw", "aipw"} & set(estimators):
        model_post = fit_propensity(post, design, link=link)
    if "psm_did" in estimators:
        pre = generate(spec, Wave.PRE)
        model_pre = fit_propensity(pre, design, link=link)
        att_pre = _psm_att(pre, model_pre, outcome_field)
        att_post = _psm_att(post, model_post, outcome_field)
        did = did_of_att(att_pre, att_post)
        results["psm_did"] = (did.effect, did.se)
    if "psm" in estimators:
        est = _psm_att(post, model_post, outcome_field)
        results["psm"] = (est.att, est.se)
    if "ipw" in estimators:
        est = ipw(post, model_post, outcome_field, estimand="atet")
        results["ipw"] = (est.value, est.se)
    if "aipw" in estimators:
        est = aipw(post, model_post, outcome_field, estimand="atet")
        results["aipw"] = (est.value, est.se)
    if "regression" in estimators:
        est = regression_adjustment(post, outcome_field, estimand="atet")
        results["regression"] = (est.value, est.se)
    if "naive" in estimators:
        results["naive"] = naive_difference(post, outcome_field)
    return results


@dataclass(frozen=True)
class EstimatorScore:
    """Monte-Carlo summary for one estimator."""

    estimator: str
    mean_estimate: float
    bias: float
    rmse: float
    empirical_se: float
    coverage95: float
    n_replications: int


@dataclass(frozen=True)
class MonteCarloReport:
    rows: tuple[EstimatorScore, ...]
    replications: int
    seed: int
    true_att: float
    n_per_wave: int


def monte_carlo(
    spec: SyntheticSpec,
    replications: int,
    estimators: Sequence[str] = DEFAULT_ESTIMATORS,
    outcome_field: str = "lpg_access",
    link: str = "logit",
) -> MonteCarloReport:
    """Score estimators against the generator's exact truth.

    Replication r uses seed ``spec.seed + r``. Any failure aborts the run
    with the replication index and seed so the draw can be reproduced
    exactly. Coverage is the share of replications whose 95% normal
    interval (estimate ± 1.96 se) contains the truth.
    """
    if replications < 2:
        raise SpecValidationError("need at least 2 replications")
    if spec.zone_att:
        raise SpecValidationError(
            "monte_carlo needs a single true effect; zone_att makes the "
            "pooled truth ambiguous"
        )
    estimators = list(estimators)
    values = {e: np.empty(replications) for e in estimators}
    ses = {e: np.empty(replications) for e in estimators}
    for r in range(replications):
        rep_seed = spec.seed + r
        try:
            batch = estimate_battery(
                replace(spec, seed=rep_seed), estimators, outcome_field, link
            )
        except Exception as exc:
            raise ReplicationError(r, rep_seed, exc) from exc
        for e in estimators:
            values[e][r] = batch[e][0]
            ses[e][r] = batch[e][1]
    truth = spec.true_att
    rows = []
    for e in estimators:
        v = values[e]
        covered = np.abs(v - truth) <= 1.96 * ses[e]
        rows.append(
            EstimatorScore(
                estimator=e,
                mean_estimate=float(v.mean()),
                bias=float(v.mean()) - truth,
                rmse=float(np.sqrt(np.mean((v - truth) ** 2))),
                empirical_se=float(np.std(v, ddof=1)),
                coverage95=float(covered.mean()),
                n_replications=replications,
            )
        )
    return MonteCarloReport(
        rows=tuple(rows),
        replications=replications,
        seed=spec.seed,
        true_att=truth,
        n_per_wave=spec.n_per_wave,
    )


# -- calibrated benchmark specs ----------------------------------------------


def benchmark_confounded(
    n_per_wave: int = 20_000, seed: int = 20140915, true_att: float = 0.021
) -> SyntheticSpec:
    """Selection-on-observables benchmark: poorer, larger, rural
    households are far likelier to be treated, and the same traits
    depress the outcome, so the naive contrast is badly biased while the
    design-based estimators recover ``true_att``."""
    return SyntheticSpec(
        n_per_wave=n_per_wave,
        seed=seed,
        selection_intercept=-0.2,
        selection_coefs={
            "wealth_index": -0.55,
            "education": -0.045,
            "urban_rural": 0.28,
            "hh_size": 0.05,
            "age": -0.004,
        },
        outcome_intercept=0.28,
        outcome_coefs={
            "wealth_index": 0.075,
            "education": 0.012,
            "urban_rural": -0.10,
            "age": 0.0008,
        },
        true_att=true_att,
    )


def benchmark_randomized(
    n_per_wave: int = 20_000, seed: int = 20140915, true_att: float = 0.021
) -> SyntheticSpec:
    """Treatment assigned by a fair coin independent of everything."""
    base = benchmark_confounded(n_per_wave, seed, true_att)
    return replace(base, selection_intercept=0.0, selection_coefs={})


def benchmark_null(n_per_wave: int = 20_000, seed: int = 20140915) -> SyntheticSpec:
    """The confounded design with a true effect of exactly zero."""
    return benchmark_confounded(n_per_wave, seed, true_att=0.0)


def benchmark_broken_propensity(
    n_per_wave: int = 20_000, seed: int = 20140915, true_att: float = 0.021
) -> SyntheticSpec:
    """True selection is strongly curved in age while the analysis model
    is linear in age, so weighting estimators inherit the misspecified
    scores; the true outcome stays linear and outcome models are correct."""
    return SyntheticSpec(
        n_per_wave=n_per_wave,
        seed=seed,
        selection_intercept=-3.0,
        selection_coefs={},
        selection_age_quad=0.9,
        age_quad_center=55.0,
        age_quad_scale=10.0,
        outcome_intercept=0.05,
        outcome_coefs={"age": 0.01, "wealth_index": 0.02},
        true_att=true_att,
    )


def benchmark_broken_outcome(
    n_per_wave: int = 20_000, seed: int = 20140915, true_att: float = 0.021
) -> SyntheticSpec:
    """True outcome is quadratic in age while the analysis outcome model
    is linear, and selection leans heavily on age, so outcome-model
    extrapolation is biased; true selection is logistic-linear and the
    propensity model stays correct."""
    return SyntheticSpec(
        n_per_wave=n_per_wave,
        seed=seed,
        selection_intercept=2.2,
        selection_coefs={"age": -0.1},
        outcome_intercept=0.2,
        outcome_coefs={"age": 0.002, "wealth_index": 0.02},
        outcome_age_quad=0.03,
        age_quad_center=55.0,
        age_quad_scale=10.0,
        true_att=true_att,
    )


def benchmark_hidden_bias(
    gamma: float,
    n_per_wave: int = 20_000,
    seed: int = 20140915,
    true_att: float = 0.021,
    outcome_shift: float = 0.08,
) -> SyntheticSpec:
    """Adds an unobserved confounder of strength ``gamma`` on the
    treatment odds and ``outcome_shift`` on the outcome probability."""
    base = benchmark_confounded(n_per_wave, seed, true_att)
    return replace(
        base,
        hidden_bias_gamma=gamma,
        hidden_bias_outcome_shift=outcome_shift,
        outcome_intercept=base.outcome_intercept - outcome_shift / 2,
    )


def benchmark_zone_effects(
    n_per_wave: int = 20_000,
    seed: int = 20140915,
    zone_att: Mapping[str, float] | None = None,
) -> SyntheticSpec:
    """Zone-specific true effects for subgroup-sweep validation."""
    base = benchmark_confounded(n_per_wave, seed, true_att=0.0)
    return replace(base, zone_att=dict(zone_att or {"East": 0.05, "South": -0.02}))


_BENCHMARKS = {
    "confounded": benchmark_confounded,
    "randomized": benchmark_randomized,
    "null": benchmark_null,
    "broken_propensity": benchmark_broken_propensity,
    "broken_outcome": benchmark_broken_outcome,
    "zone_effects": benchmark_zone_effects,
}


def benchmark(name: str, **kwargs) -> SyntheticSpec:
    """Look up a named benchmark factory ("confounded", "randomized",
    "null", "broken_propensity", "broken_outcome", "zone_effects")."""
    if name not in _BENCHMARKS:
        raise SpecValidationError(
            f"unknown benchmark {name!r}; choose from {sorted(_BENCHMARKS)}"
        )
    return _BENCHMARKS[name](**kwargs)


# -- JSON (de)serialization ----------------------------------------------------


def spec_to_json(spec: SyntheticSpec, path: str | Path | None = None) -> str:
    """Serialize a spec to JSON (written to ``path`` when given)."""
    payload = {
        f.name: getattr(spec, f.name)
        for f in dataclasses.fields(spec)
        if f.name != "covariates"
    }
    payload["selection_coefs"] = dict(spec.selection_coefs)
    payload["outcome_coefs"] = dict(spec.outcome_coefs)
    payload["zone_att"] = dict(spec.zone_att)
    cov_out = {}
    for name, cs in spec.covariates.items():
        if cs.kind == "categorical":
            entry = {"kind": cs.kind, "levels": list(cs.levels)}
            if cs.weights:
                entry["weights"] = list(cs.weights)
        else:
            entry = {"kind": cs.kind, "low": cs.low, "high": cs.high}
        cov_out[name] = entry
    payload["covariates"] = cov_out
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def spec_from_json(source: str | Path) -> SyntheticSpec:
    """Inverse of :func:`spec_to_json`; accepts a path or raw JSON text."""
    text = str(source)
    if not text.lstrip().startswith("{"):
        text = Path(source).read_text(encoding="utf-8")
    raw = json.loads(text)
    if not isinstance(raw, dict):
        raise SpecValidationError("spec JSON must be an object")
    cov_raw = raw.pop("covariates", None)
    if cov_raw is None:
        raise SpecValidationError("spec JSON is missing 'covariates'")
    covariates = {}
    for name, entry in cov_raw.items():
        try:
            covariates[name] = CovariateSpec(
                kind=entry["kind"],
                levels=tuple(entry.get("levels", ())),
                weights=tuple(entry.get("weights", ())),
                low=int(entry.get("low", 0)),
                high=int(entry.get("high", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise SpecValidationError(f"bad covariate entry {name!r}: {exc}") from exc
    known = {f.name for f in dataclasses.fields(SyntheticSpec)}
    unknown = [k for k in raw if k not in known]
    if unknown:
        raise SpecValidationError(f"unknown spec keys {unknown}")
    return SyntheticSpec(covariates=covariates, **raw)
