"""Model space and exact collapsed marginal likelihoods.

A model is a pair (segmentation, inclusion mask).  The segmentation is a
binary changepoint-indicator vector whose set bits mark the first index of
each new block; the mask is a global binary vector over the selectable design
columns.  Two model families share this space:

* changing regression: responses are Gaussian around a per-block linear
  predictor; included coefficients carry independent Gaussian slabs with
  variance sigma2 * tau2, so the coefficient vector integrates out in closed
  form (prior precision matrix S = I / tau2 against the sigma2-scaled
  quadratic form).
* piecewise-constant levels (no covariates): per-observation means shrink
  toward a per-block level which itself is Gaussian with variance mu_var; the
  block marginal is Gaussian with compound-symmetric covariance
  (sigma2 + tau2) I + mu_var J, evaluated via rank-one identities.

Log marginals use the exact Gaussian normalizing constants, so Bayes factors
between models on the same data are exact and can be validated against
numeric quadrature.

Index conventions: arrays are 0-based; a changepoint "at index i" in
user-facing output (1-based) corresponds to indicator position i - 1.  With
an autoregressive lag column the first observation is conditioned on: it
enters only as a regressor and the modeled arrays drop it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .errors import DimensionMismatch, MaskTooLarge

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Raw inputs: response vector, optional design matrix, lag flag.

    ``ar_lag`` appends the one-step lagged response as the last selectable
    column; the first observation then enters only as a regressor and is
    excluded from the likelihood.  ``meta`` records provenance and any
    transformations applied at load time.
    """

    y: np.ndarray
    X: np.ndarray | None = None
    has_intercept: bool = True
    ar_lag: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X is not None:
            self.X = np.asarray(self.X, dtype=float)
            if self.X.ndim != 2:
                raise DimensionMismatch("X must be a 2-D array")
            if self.X.shape[0] != self.y.shape[0]:
                raise DimensionMismatch(
                    f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}"
                )
        if self.n_model < 2:
            raise DimensionMismatch("need at least two modeled observations")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def offset(self) -> int:
        """Number of leading observations conditioned on (1 with a lag column)."""
        return 1 if self.ar_lag else 0

    @property
    def n_model(self) -> int:
        return self.n - self.offset

    @property
    def p(self) -> int:
        """Number of selectable columns (covariates plus the lag column)."""
        p_x = 0 if self.X is None else self.X.shape[1]
        return p_x + (1 if self.ar_lag else 0)

    @property
    def is_levels_model(self) -> bool:
        """True when there are no selectable columns: piecewise-constant means."""
        return self.p == 0

    def selectable_matrix(self) -> np.ndarray:
        """All selectable columns for the modeled rows, lag column last."""
        cols = []
        if self.X is not None:
            cols.append(self.X[self.offset :, :])
        if self.ar_lag:
            cols.append(self.y[:-1].reshape(-1, 1))
        if not cols:
            return np.zeros((self.n_model, 0))
        return np.hstack(cols)

    def design(self, mask: "InclusionMask | None" = None) -> tuple[np.ndarray, np.ndarray]:
        """Return (modeled responses, active design matrix).

        The active design holds the intercept column (when present) followed
        by the mask-selected columns.  ``mask=None`` selects no columns.
        """
        y_model = self.y[self.offset :]
        cols = []
        if self.has_intercept:
            cols.append(np.ones((self.n_model, 1)))
        if mask is not None and mask.size > 0:
            if mask.included.shape[0] != self.p:
                raise DimensionMismatch(
                    f"mask covers {mask.included.shape[0]} columns, dataset has {self.p}"
                )
            cols.append(self.selectable_matrix()[:, mask.included])
        if not cols:
            return y_model, np.zeros((self.n_model, 0))
        return y_model, np.hstack(cols)


@dataclass
class Segmentation:
    """Changepoint indicators over the modeled observations.

    ``indicators[j] = True`` starts a new block at modeled position j; the
    first position is always a block start and its indicator is fixed False.
    """

    indicators: np.ndarray

    def __post_init__(self):
        self.indicators = np.asarray(self.indicators, dtype=bool).reshape(-1)
        if self.indicators.shape[0] < 1:
            raise DimensionMismatch("empty segmentation")
        if self.indicators[0]:
            raise ValueError("the first indicator is structurally zero")

    @classmethod
    def from_block_starts(cls, n_model: int, starts: list[int]) -> "Segmentation":
        """Build from 0-based positions where new blocks begin (position 0 implied)."""
        ind = np.zeros(n_model, dtype=bool)
        for s in starts:
            if not 1 <= s < n_model:
                raise ValueError(f"block start {s} outside 1..{n_model - 1}")
            ind[s] = True
        return cls(ind)

    @classmethod
    def single_block(cls, n_model: int) -> "Segmentation":
        return cls(np.zeros(n_model, dtype=bool))

    @property
    def n_model(self) -> int:
        return self.indicators.shape[0]

    @property
    def n_blocks(self) -> int:
        return 1 + int(np.count_nonzero(self.indicators))

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """Contiguous half-open [start, stop) index ranges covering all positions."""
        starts = [0] + list(np.flatnonzero(self.indicators))
        stops = starts[1:] + [self.n_model]
        return list(zip(starts, stops))


@dataclass
class InclusionMask:
    """Global covariate-inclusion indicators (the intercept is not selectable)."""

    included: np.ndarray

    def __post_init__(self):
        self.included = np.asarray(self.included, dtype=bool).reshape(-1)

    @classmethod
    def empty(cls, p: int) -> "InclusionMask":
        return cls(np.zeros(p, dtype=bool))

    @classmethod
    def from_indices(cls, p: int, indices: list[int]) -> "InclusionMask":
        inc = np.zeros(p, dtype=bool)
        for j in indices:
            inc[j] = True
        return cls(inc)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.included))


@dataclass
class PriorConfig:
    """All hyperparameters of the hierarchy.

    ``changepoint_prob`` defaults to expected_changepoints / n; the
    per-covariate inclusion probability defaults to
    exp(-(log n)^(1 + inclusion_penalty_alpha1)), a prior whose log shrinks
    slightly faster than log n so large models are penalized.  ``sigma2``
    holds a known noise variance, or None to plug in the pooled residual
    variance of each candidate model.  ``max_model_size`` caps how many
    selectable columns a model may include.
    """

    changepoint_prob: float | None = None
    expected_changepoints: float = 1.0
    inclusion_prob: float | np.ndarray | None = None
    inclusion_penalty_alpha1: float = 0.1
    tau2: float = 1.0
    mu_var: float = 1.0
    sigma2: float | None = None
    max_model_size: int | None = None

    def validate(self) -> None:
        if self.changepoint_prob is not None and not 0.0 < self.changepoint_prob < 1.0:
            raise ValueError("changepoint_prob must lie in (0, 1)")
        if self.expected_changepoints <= 0:
            raise ValueError("expected_changepoints must be positive")
        if self.tau2 <= 0:
            raise ValueError("tau2 must be positive")
        if self.mu_var <= 0:
            raise ValueError("mu_var must be positive")
        if self.sigma2 is not None and self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive when known")
        if self.inclusion_penalty_alpha1 < 0:
            raise ValueError("inclusion_penalty_alpha1 must be nonnegative")
        if self.inclusion_prob is not None:
            pr = np.atleast_1d(np.asarray(self.inclusion_prob, dtype=float))
            if np.any(pr <= 0) or np.any(pr > 1):
                raise ValueError("inclusion probabilities must lie in (0, 1]")
        if self.max_model_size is not None and self.max_model_size < 0:
            raise ValueError("max_model_size must be nonnegative")

    @property
    def sigma2_known(self) -> bool:
        return self.sigma2 is not None

    def resolve_changepoint_prob(self, n_model: int) -> float:
        if self.changepoint_prob is not None:
            return float(self.changepoint_prob)
        return min(float(self.expected_changepoints) / n_model, 0.5)

    def resolve_inclusion_prob(self, n_model: int, p: int) -> np.ndarray:
        if self.inclusion_prob is None:
            val = math.exp(-math.log(n_model) ** (1.0 + self.inclusion_penalty_alpha1))
            return np.full(p, val)
        pr = np.asarray(self.inclusion_prob, dtype=float)
        if pr.ndim == 0:
            return np.full(p, float(pr))
        if pr.shape != (p,):
            raise DimensionMismatch(f"inclusion_prob has shape {pr.shape}, expected ({p},)")
        return pr.copy()

    def resolve_max_model_size(self, n_model: int, p: int) -> int:
        if self.max_model_size is not None:
            return min(self.max_model_size, p)
        return min(p, max(3, math.ceil(2.0 * math.log(max(n_model, 2)))))

    def with_overrides(self, **kwargs) -> "PriorConfig":
        return replace(self, **kwargs)


@dataclass
class ModelId:
    """A point in the model space: segmentation plus inclusion mask."""

    segmentation: Segmentation
    mask: InclusionMask


# ---------------------------------------------------------------------------
# levels-model block marginal (compound-symmetric Gaussian)
# ---------------------------------------------------------------------------


def levels_block_log_marginal(
    n_j: int, sum_y: float, sum_y2: float, sigma2: float, tau2: float, mu_var: float
) -> float:
    """Log marginal of one block under the piecewise-constant hierarchy.

    The block response is Gaussian with mean zero and covariance
    a I + mu_var J, a = sigma2 + tau2, J the all-ones matrix; the determinant
    and inverse follow from the rank-one update identities.
    """
    a = sigma2 + tau2
    denom = a + n_j * mu_var
    logdet = (n_j - 1) * math.log(a) + math.log(denom)
    quad = (sum_y2 - mu_var * sum_y * sum_y / denom) / a
    return -0.5 * (n_j * LOG_2PI + logdet + quad)


def _levels_posterior_mean(
    y_block: np.ndarray, sigma2: float, tau2: float, mu_var: float
) -> np.ndarray:
    """Posterior mean of the per-observation levels given one block."""
    n_j = y_block.shape[0]
    a = sigma2 + tau2
    denom = a + n_j * mu_var
    s1 = float(np.sum(y_block))
    return (tau2 / a) * y_block + (mu_var * sigma2 / (a * denom)) * s1


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _resolved_sigma2(dataset: Dataset, model: ModelId, prior: PriorConfig) -> float:
    if prior.sigma2_known:
        return float(prior.sigma2)
    mask = None if dataset.is_levels_model else model.mask
    value = linalg.empirical_sigma2(
        dataset, model.segmentation, mask, ridge_tau2=prior.tau2
    )
    if value <= 0.0:
        from .errors import DegenerateInput

        raise DegenerateInput(
            "pooled residual variance is zero; a plug-in marginal is undefined "
            "(supply a known sigma2 instead)"
        )
    return value


def log_marginal_blocks(
    dataset: Dataset, model: ModelId, prior: PriorConfig, *, sigma2: float | None = None
) -> np.ndarray:
    """Per-block log marginal contributions; their sum is ``log_marginal``.

    ``sigma2`` overrides the noise variance (used by samplers carrying a
    current draw); otherwise the prior supplies it, with the pooled residual
    variance of this model plugged in when unknown.
    """
    if model.segmentation.n_model != dataset.n_model:
        raise DimensionMismatch("segmentation length does not match dataset")
    if sigma2 is None:
        sigma2 = _resolved_sigma2(dataset, model, prior)

    if dataset.is_levels_model:
        y_model = dataset.y[dataset.offset :]
        out = np.empty(model.segmentation.n_blocks)
        for b, (start, stop) in enumerate(model.segmentation.blocks):
            yb = y_model[start:stop]
            out[b] = levels_block_log_marginal(
                stop - start,
                float(np.sum(yb)),
                float(np.sum(yb * yb)),
                sigma2,
                prior.tau2,
                prior.mu_var,
            )
        return out

    cap = prior.resolve_max_model_size(dataset.n_model, dataset.p)
    if model.mask.size > cap:
        raise MaskTooLarge(f"mask selects {model.mask.size} columns, cap is {cap}")
    y_model, Z = dataset.design(model.mask)
    k = Z.shape[1]
    prec = 1.0 / prior.tau2
    out = np.empty(model.segmentation.n_blocks)
    for b, (start, stop) in enumerate(model.segmentation.blocks):
        n_j = stop - start
        if k == 0:
            yb = y_model[start:stop]
            out[b] = -0.5 * (n_j * (LOG_2PI + math.log(sigma2)) + float(yb @ yb) / sigma2)
            continue
        fit = linalg.fit_regularized_ls(
            linalg.SegmentData(y_model[start:stop], Z[start:stop]), prec
        )
        out[b] = (
            -0.5 * n_j * (LOG_2PI + math.log(sigma2))
            + 0.5 * fit.logdet_prior
            - 0.5 * fit.logdet_posterior
            - fit.quad / (2.0 * sigma2)
        )
    return out


def log_marginal(
    dataset: Dataset, model: ModelId, prior: PriorConfig, *, sigma2: float | None = None
) -> float:
    """Exact collapsed log marginal likelihood of the data under one model."""
    return float(np.sum(log_marginal_blocks(dataset, model, prior, sigma2=sigma2)))


def log_prior(model: ModelId, prior: PriorConfig, n_model: int, p: int) -> float:
    """Log prior mass of a model: independent Bernoulli layers for both indicator sets."""
    p_n = prior.resolve_changepoint_prob(n_model)
    ind = model.segmentation.indicators
    n_on = int(np.count_nonzero(ind[1:]))
    n_off = (n_model - 1) - n_on
    total = n_on * math.log(p_n) + n_off * math.log1p(-p_n)
    if p > 0:
        pr = prior.resolve_inclusion_prob(n_model, p)
        inc = model.mask.included
        with np.errstate(divide="ignore"):
            terms = np.where(inc, np.log(pr), np.log1p(-pr))
        total += float(np.sum(terms))
    return total


def log_bayes_factor(
    dataset: Dataset, model_a: ModelId, model_b: ModelId, prior: PriorConfig
) -> float:
    """log BF(a, b) = log marginal(a) - log marginal(b); antisymmetric."""
    return log_marginal(dataset, model_a, prior) - log_marginal(dataset, model_b, prior)


def log_posterior_ratio(
    dataset: Dataset, model_a: ModelId, model_b: ModelId, prior: PriorConfig
) -> float:
    """Log ratio of posterior model probabilities: Bayes factor plus prior ratio."""
    lbf = log_bayes_factor(dataset, model_a, model_b, prior)
    lp = log_prior(model_a, prior, dataset.n_model, dataset.p) - log_prior(
        model_b, prior, dataset.n_model, dataset.p
    )
    return lbf + lp


def model_fitted_values(
    dataset: Dataset,
    model: ModelId,
    prior: PriorConfig,
    *,
    sigma2: float,
    tau2: float | None = None,
) -> np.ndarray:
    """Posterior-mean fitted values over modeled positions, given one model.

    Regression blocks return the ridge fit Z beta_hat (the posterior mean of
    the linear predictor); levels blocks return the shrunken per-observation
    level means.
    """
    tau2 = prior.tau2 if tau2 is None else tau2
    y_model = dataset.y[dataset.offset :]
    out = np.empty(dataset.n_model)
    if dataset.is_levels_model:
        for start, stop in model.segmentation.blocks:
            out[start:stop] = _levels_posterior_mean(
                y_model[start:stop], sigma2, tau2, prior.mu_var
            )
        return out
    _, Z = dataset.design(model.mask)
    k = Z.shape[1]
    if k == 0:
        return np.zeros(dataset.n_model)
    for start, stop in model.segmentation.blocks:
        fit = linalg.fit_regularized_ls(
            linalg.SegmentData(y_model[start:stop], Z[start:stop]), 1.0 / tau2
        )
        out[start:stop] = Z[start:stop] @ fit.beta_hat
    return out
