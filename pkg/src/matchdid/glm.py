"""Binary-response GLM for treatment-assignment (propensity) models.

Fitting is iteratively reweighted least squares (Fisher scoring) with
step-halving, so the log-likelihood never decreases between iterations.
Standard errors come from the inverse observed information at the optimum.
Logit and probit links are supported.

Categorical covariates enter as raw integer codes by default, mirroring how
the treatment equation is usually specified for this kind of survey data;
set ``expand_categoricals=True`` on the design to use one indicator per
level instead (lowest code is the reference).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special, stats
from sklearn.base import BaseEstimator

from . import _validation as v
from .errors import (
    EmptyGroupError,
    IterationLimitError,
    NotFittedError,
    RankDeficiencyError,
    SchemaError,
    SeparationError,
)
from .frames import AnalysisFrame

LINKS = ("logit", "probit")

#: Fitted probabilities outside this open band indicate (quasi-)separation.
SEPARATION_BAND = 1e-10

#: Linear-predictor clamp so predictions stay strictly inside (0, 1).
_ETA_MAX = {"logit": 36.0, "probit": 8.2}

#: Default covariate list for the treatment equation. The treatment flag
#: itself and the outcome fields are never admitted as regressors.
DEFAULT_COVARIATES: tuple[str, ...] = (
    "state",
    "hh_size",
    "urban_rural",
    "age",
    "religion",
    "caste",
    "wealth_index",
    "education",
    "gender",
)

_FORBIDDEN_REGRESSORS = frozenset(
    {"bpl_card", "treated", "lpg_access", "firewood_use", "cooking_fuel", "hhid"}
)

INTERCEPT_NAME = "Constant"


def _logit_quants(eta: np.ndarray, y: np.ndarray):
    p = special.expit(eta)
    pc = np.clip(p, 1e-12, 1 - 1e-12)
    resid = y - p                      # score residual
    w = pc * (1 - pc)                  # Fisher = observed weight
    z = eta + resid / w                # working response
    return p, resid, w, w, z


def _probit_quants(eta: np.ndarray, y: np.ndarray):
    p = stats.norm.cdf(eta)
    pc = np.clip(p, 1e-12, 1 - 1e-12)
    phi = np.maximum(stats.norm.pdf(eta), 1e-300)
    var = pc * (1 - pc)
    resid = phi * (y - p) / var
    w = phi * phi / var                # Fisher weight
    # Observed information weight: -d2(loglik)/d(eta)2.
    h = w + (y - p) * (eta * phi / var + phi * phi * (1 - 2 * pc) / (var * var))
    z = eta + (y - p) / phi
    return p, resid, w, h, z


_QUANTS = {"logit": _logit_quants, "probit": _probit_quants}


def _loglik(eta: np.ndarray, y: np.ndarray, link: str) -> float:
    p = special.expit(eta) if link == "logit" else stats.norm.cdf(eta)
    p = np.clip(p, 1e-300, 1 - 1e-16)
    return float(special.xlogy(y, p).sum() + special.xlogy(1 - y, 1 - p).sum())


def _check_rank(design: np.ndarray, names: list[str]) -> None:
    r = np.linalg.qr(design, mode="r")
    diag = np.abs(np.diag(r))
    col_norms = np.sqrt((design * design).sum(axis=0))
    bad = diag <= 1e-8 * np.maximum(col_norms, 1.0)
    if bad.any():
        raise RankDeficiencyError(names[int(np.flatnonzero(bad)[0])])


class PropensityModel(BaseEstimator):
    """Logit/probit treatment-assignment model fit by IRLS.

    Parameters
    ----------
    link : "logit" or "probit"
    max_iter : iteration cap; exceeding it raises IterationLimitError.
    score_tol : converged when max |score component| drops below this.
    rel_ll_tol : ... or when the relative log-likelihood change does.

    Attributes (after fit)
    ----------------------
    coef_ : (n_features,) slope coefficients.
    intercept_ : intercept (reported last in tables).
    params_ : (n_features + 1,) slopes then intercept.
    cov_params_ : inverse observed information, same ordering.
    se_ : standard errors, same ordering.
    log_likelihood_, loglik_path_, n_iter_, converged_, n_obs_
    """

    def __init__(
        self,
        link: str = "logit",
        max_iter: int = 100,
        score_tol: float = 1e-8,
        rel_ll_tol: float = 1e-12,
    ):
        self.link = link
        self.max_iter = max_iter
        self.score_tol = score_tol
        self.rel_ll_tol = rel_ll_tol

    # -- core ------------------------------------------------------------

    def fit(self, X, y, feature_names: list[str] | None = None):
        if self.link not in LINKS:
            raise SchemaError(f"unknown link {self.link!r}; expected one of {LINKS}")
        X = v.as_float_2d(X, "X")
        y = v.as_binary(y, "y")
        if len(y) != X.shape[0]:
            raise SchemaError(f"X has {X.shape[0]} rows but y has {len(y)}")
        if y.min() == y.max():
            raise EmptyGroupError(
                "all rows share one treatment status; both classes are required"
            )
        names = list(feature_names or (f"x{i}" for i in range(X.shape[1])))
        if len(names) != X.shape[1]:
            raise SchemaError("feature_names length does not match X")
        design = np.hstack([X, np.ones((X.shape[0], 1))])
        _check_rank(design, names + [INTERCEPT_NAME])

        quants = _QUANTS[self.link]
        beta = np.zeros(design.shape[1])
        ll = _loglik(design @ beta, y, self.link)
        path = [ll]
        converged = False
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            eta = design @ beta
            _, resid, w, _, z = quants(eta, y)
            score = design.T @ resid
            if np.abs(score).max() < self.score_tol:
                converged = True
                n_iter -= 1
                break
            wd = design * w[:, None]
            target = np.linalg.solve(design.T @ wd, wd.T @ z)
            step = target - beta
            scale = 1.0
            for _ in range(60):
                cand = beta + scale * step
                ll_new = _loglik(design @ cand, y, self.link)
                if ll_new >= ll - 1e-13:
                    break
                scale *= 0.5
            beta = beta + scale * step
            path.append(ll_new)
            if abs(ll_new - ll) <= self.rel_ll_tol * (abs(ll) + 1.0):
                ll = ll_new
                converged = True
                break
            ll = ll_new

        eta = design @ beta
        p_hat = special.expit(eta) if self.link == "logit" else stats.norm.cdf(eta)
        if np.any(p_hat <= SEPARATION_BAND) or np.any(p_hat >= 1 - SEPARATION_BAND):
            n_out = int(
                ((p_hat <= SEPARATION_BAND) | (p_hat >= 1 - SEPARATION_BAND)).sum()
            )
            raise SeparationError(
                f"{n_out} fitted propensities left the open interval "
                f"({SEPARATION_BAND}, {1 - SEPARATION_BAND}); the likelihood "
                "is monotone (separation) and coefficients are not identified"
            )
        if not converged:
            raise IterationLimitError(
                f"IRLS did not converge in {self.max_iter} iterations "
                f"(max |score| = {np.abs(design.T @ quants(eta, y)[1]).max():.3e})"
            )

        _, _, _, h, _ = quants(eta, y)
        info = design.T @ (design * h[:, None])
        cov = np.linalg.inv(info)
        cov = (cov + cov.T) / 2.0

        self.feature_names_in_ = list(names)
        self.params_ = beta
        self.coef_ = beta[:-1]
        self.intercept_ = float(beta[-1])
        self.cov_params_ = cov
        self.se_ = np.sqrt(np.diag(cov))
        self.log_likelihood_ = _loglik(eta, y, self.link)
        self.loglik_path_ = tuple(path)
        self.n_iter_ = n_iter
        self.converged_ = converged
        self.n_obs_ = int(len(y))
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit() before using the model")

    def decision_function(self, X) -> np.ndarray:
        """Linear predictor eta = X @ coef + intercept."""
        self._require_fitted()
        X = v.as_float_2d(X, "X")
        if X.shape[1] != len(self.coef_):
            raise SchemaError(
                f"X has {X.shape[1]} columns, model was fit with {len(self.coef_)}"
            )
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        """Class probabilities, strictly inside (0, 1). Column 1 is the
        treatment probability."""
        eta = self.decision_function(X)
        cap = _ETA_MAX[self.link]
        eta = np.clip(eta, -cap, cap)
        p1 = special.expit(eta) if self.link == "logit" else stats.norm.cdf(eta)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    # -- diagnostics used by the test-suite and reports -------------------

    def loglik(self, X, y, params: np.ndarray | None = None) -> float:
        self._require_fitted()
        X = v.as_float_2d(X, "X")
        y = v.as_binary(y, "y")
        beta = self.params_ if params is None else np.asarray(params, dtype=float)
        design = np.hstack([X, np.ones((X.shape[0], 1))])
        return _loglik(design @ beta, y, self.link)

    def score_equations(self, X, y, params: np.ndarray | None = None) -> np.ndarray:
        """Gradient of the log-likelihood at ``params`` (fitted by default)."""
        self._require_fitted()
        X = v.as_float_2d(X, "X")
        y = v.as_binary(y, "y")
        beta = self.params_ if params is None else np.asarray(params, dtype=float)
        design = np.hstack([X, np.ones((X.shape[0], 1))])
        _, resid, _, _, _ = _QUANTS[self.link](design @ beta, y)
        return design.T @ resid


# -- frame-level interface -------------------------------------------------


@dataclass(frozen=True)
class DesignSpec:
    """Ordered covariate list plus the categorical-handling policy."""

    covariates: tuple[str, ...] = DEFAULT_COVARIATES
    expand_categoricals: bool = False
    categorical_fields: tuple[str, ...] = ("state", "religion", "caste")

    def __post_init__(self):
        if len(set(self.covariates)) != len(self.covariates):
            dupes = sorted(
                {c for c in self.covariates if list(self.covariates).count(c) > 1}
            )
            raise SchemaError(f"duplicate covariates in design: {dupes}")
        banned = sorted(set(self.covariates) & _FORBIDDEN_REGRESSORS)
        if banned:
            raise SchemaError(
                f"treatment/outcome fields cannot be regressors: {banned}"
            )


def build_design(
    frame: AnalysisFrame,
    spec: DesignSpec,
    category_levels: dict[str, tuple[int, ...]] | None = None,
) -> tuple[np.ndarray, list[str], dict[str, tuple[int, ...]]]:
    """Design matrix (no intercept column) for a frame.

    Returns the matrix, the column names, and the categorical levels used,
    so a model fit on one frame can score another with identical encoding.
    """
    cols: list[np.ndarray] = []
    names: list[str] = []
    levels_used: dict[str, tuple[int, ...]] = {}
    for name in spec.covariates:
        values = frame.column(name)
        if spec.expand_categoricals and name in spec.categorical_fields:
            if category_levels and name in category_levels:
                levels = category_levels[name]
            else:
                levels = tuple(int(x) for x in np.unique(values))
            levels_used[name] = levels
            for level in levels[1:]:  # lowest code is the reference
                cols.append((values == level).astype(float))
                names.append(f"{name}={level}")
        else:
            cols.append(np.asarray(values, dtype=float))
            names.append(name)
    return np.column_stack(cols), names, levels_used


def fit_propensity(
    frame: AnalysisFrame,
    spec: DesignSpec | None = None,
    link: str = "logit",
    **model_params,
) -> PropensityModel:
    """Fit the treatment equation on one wave.

    The response is the frame's treated flag; covariates and their encoding
    come from ``spec``. The returned model carries the design information
    needed to score other frames.
    """
    spec = spec or DesignSpec()
    missing = [c for c in spec.covariates if c not in frame.columns]
    if missing:
        raise SchemaError(f"design covariates not in frame: {missing}")
    X, names, levels = build_design(frame, spec)
    model = PropensityModel(link=link, **model_params)
    model.fit(X, frame.treated().astype(float), feature_names=names)
    model.design_spec_ = spec
    model.category_levels_ = levels
    return model


def predict_propensity(model: PropensityModel, frame: AnalysisFrame) -> np.ndarray:
    """Treatment probabilities for every row of ``frame``, in (0, 1)."""
    model._require_fitted()
    if not hasattr(model, "design_spec_"):
        raise NotFittedError(
            "model has no design attached; fit it with fit_propensity()"
        )
    X, _, _ = build_design(frame, model.design_spec_, model.category_levels_)
    return model.predict_proba(X)[:, 1]


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    estimate: float
    std_error: float
    p_value: float


def coefficient_table(model: PropensityModel) -> tuple[CoefficientRow, ...]:
    """Per-coefficient rows (two-sided normal p-values), intercept last."""
    model._require_fitted()
    rows = []
    for name, est, se in zip(
        model.feature_names_in_ + [INTERCEPT_NAME], model.params_, model.se_
    ):
        if se > 0:
            p = float(2.0 * stats.norm.sf(abs(est / se)))
        else:
            p = 1.0 if est == 0 else 0.0
        rows.append(
            CoefficientRow(
                name=name, estimate=float(est), std_error=float(se), p_value=p
            )
        )
    return tuple(rows)


# -- persistence -----------------------------------------------------------

_FORMAT = "matchdid-propensity-model"
_VERSION = 1


def save_model(model: PropensityModel, path: str | Path) -> None:
    """Write a fitted model to a small versioned JSON file."""
    model._require_fitted()
    payload = {
        "format": _FORMAT,
        "version": _VERSION,
        "link": model.link,
        "feature_names": model.feature_names_in_,
        "params": model.params_.tolist(),
        "covariance": model.cov_params_.tolist(),
        "n_obs": model.n_obs_,
        "n_iter": model.n_iter_,
        "converged": model.converged_,
        "log_likelihood": model.log_likelihood_,
        "design": {
            "covariates": list(getattr(model, "design_spec_", DesignSpec()).covariates),
            "expand_categoricals": getattr(
                model, "design_spec_", DesignSpec()
            ).expand_categoricals,
            "categorical_fields": list(
                getattr(model, "design_spec_", DesignSpec()).categorical_fields
            ),
            "category_levels": {
                k: list(vv) for k, vv in getattr(model, "category_levels_", {}).items()
            },
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> PropensityModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != _FORMAT:
        raise SchemaError(f"{path}: not a saved propensity model")
    if payload.get("version") != _VERSION:
        raise SchemaError(
            f"{path}: unsupported model version {payload.get('version')}"
        )
    model = PropensityModel(link=payload["link"])
    model.feature_names_in_ = list(payload["feature_names"])
    model.params_ = np.asarray(payload["params"], dtype=float)
    model.coef_ = model.params_[:-1]
    model.intercept_ = float(model.params_[-1])
    model.cov_params_ = np.asarray(payload["covariance"], dtype=float)
    model.se_ = np.sqrt(np.diag(model.cov_params_))
    model.n_obs_ = int(payload["n_obs"])
    model.n_iter_ = int(payload["n_iter"])
    model.converged_ = bool(payload["converged"])
    model.log_likelihood_ = float(payload["log_likelihood"])
    model.loglik_path_ = ()
    design = payload.get("design", {})
    model.design_spec_ = DesignSpec(
        covariates=tuple(design.get("covariates", DEFAULT_COVARIATES)),
        expand_categoricals=bool(design.get("expand_categoricals", False)),
        categorical_fields=tuple(
            design.get("categorical_fields", ("state", "religion", "caste"))
        ),
    )
    model.category_levels_ = {
        k: tuple(vv) for k, vv in design.get("category_levels", {}).items()
    }
    return model
