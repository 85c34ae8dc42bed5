"""Exhaustive-enumeration posterior for small instances.

Scores every segmentation x admissible-mask pair exactly and normalizes in
log space, producing the same summary quantities as the sampler.  This is
the ground truth the Gibbs conditionals are validated against.  For the
piecewise-constant model the level variance is integrated over the same
discrete grid the sampler uses, so the two posteriors target the identical
discretized model space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import TooLarge
from .gibbs import TAU2_GRID, PosteriorSummary
from .model import (
    Dataset,
    InclusionMask,
    ModelId,
    PriorConfig,
    Segmentation,
    log_marginal,
    log_prior,
    model_fitted_values,
    _levels_posterior_mean,
)

N_MAX_DEFAULT = 12
P_MAX_DEFAULT = 3


@dataclass
class ExactPosterior:
    """Complete scored model table plus normalized posterior marginals."""

    table: list[tuple[ModelId, float]]
    normalizer: float
    marginals: PosteriorSummary


def _all_segmentations(n_model: int):
    for bits in itertools.product((False, True), repeat=n_model - 1):
        ind = np.zeros(n_model, dtype=bool)
        ind[1:] = bits
        yield Segmentation(ind)


def _all_masks(p: int, cap: int):
    for size in range(0, min(p, cap) + 1):
        for combo in itertools.combinations(range(p), size):
            yield InclusionMask.from_indices(p, list(combo))


def _levels_scores(dataset: Dataset, seg: Segmentation, prior: PriorConfig, sigma2: float):
    """Grid-integrated log marginal and grid weights for one segmentation."""
    y = dataset.y[dataset.offset :]
    a_g = sigma2 + TAU2_GRID
    total = np.zeros(TAU2_GRID.shape[0])
    for start, stop in seg.blocks:
        yb = y[start:stop]
        n_j = stop - start
        s1 = float(np.sum(yb))
        s2 = float(np.sum(yb * yb))
        den = a_g + n_j * prior.mu_var
        total += -0.5 * (
            n_j * math.log(2.0 * math.pi)
            + (n_j - 1.0) * np.log(a_g)
            + np.log(den)
            + (s2 - prior.mu_var * s1 * s1 / den) / a_g
        )
    lm = float(logsumexp(total)) - math.log(TAU2_GRID.shape[0])
    weights = np.exp(total - logsumexp(total))
    return lm, weights


def _levels_fitted(dataset: Dataset, seg: Segmentation, prior: PriorConfig, sigma2: float, weights):
    y = dataset.y[dataset.offset :]
    out = np.zeros(dataset.n_model)
    for g, w in enumerate(weights):
        if w < 1e-14:
            continue
        tau2 = float(TAU2_GRID[g])
        vals = np.empty(dataset.n_model)
        for start, stop in seg.blocks:
            vals[start:stop] = _levels_posterior_mean(y[start:stop], sigma2, tau2, prior.mu_var)
        out += w * vals
    return out


def enumerate_exact(
    dataset: Dataset,
    prior: PriorConfig,
    n_max: int = N_MAX_DEFAULT,
    p_max: int = P_MAX_DEFAULT,
) -> ExactPosterior:
    """Score every model in the space and return the normalized posterior.

    Raises TooLarge when the instance exceeds (n_max, p_max); the default
    bounds keep the table around 2^11 x 8 entries.
    """
    prior.validate()
    if dataset.n_model > n_max:
        raise TooLarge(f"n_model = {dataset.n_model} exceeds n_max = {n_max}")
    if dataset.p > p_max:
        raise TooLarge(f"p = {dataset.p} exceeds p_max = {p_max}")

    n_model = dataset.n_model
    p = dataset.p
    cap = prior.resolve_max_model_size(n_model, p)
    levels = dataset.is_levels_model
    masks = [InclusionMask.empty(0)] if levels else list(_all_masks(p, cap))

    table: list[tuple[ModelId, float]] = []
    scores: list[float] = []
    fitted_rows: list[np.ndarray] = []
    for seg in _all_segmentations(n_model):
        if levels:
            sigma2 = float(prior.sigma2) if prior.sigma2_known else None
            if sigma2 is None:
                from .linalg import empirical_sigma2

                sigma2 = empirical_sigma2(dataset, seg, None, ridge_tau2=prior.tau2)
            lm, weights = _levels_scores(dataset, seg, prior, sigma2)
            model = ModelId(seg, masks[0])
            score = lm + log_prior(model, prior, n_model, p)
            table.append((model, score))
            scores.append(score)
            fitted_rows.append(_levels_fitted(dataset, seg, prior, sigma2, weights))
        else:
            for mask in masks:
                model = ModelId(seg, mask)
                score = log_marginal(dataset, model, prior) + log_prior(
                    model, prior, n_model, p
                )
                table.append((model, score))
                scores.append(score)

    score_arr = np.asarray(scores)
    normalizer = float(logsumexp(score_arr))
    post = np.exp(score_arr - normalizer)

    cp = np.zeros(n_model)
    pip = np.zeros(p)
    part: dict[int, float] = {}
    fitted = np.zeros(n_model)
    best = int(np.argmax(score_arr))
    for i, (model, _) in enumerate(table):
        w = float(post[i])
        cp += w * model.segmentation.indicators
        if p:
            pip += w * model.mask.included
        l = model.segmentation.n_blocks
        part[l] = part.get(l, 0.0) + w
        if levels:
            fitted += w * fitted_rows[i]
        else:
            sig = float(prior.sigma2) if prior.sigma2_known else None
            fitted += w * model_fitted_values(
                dataset,
                model,
                prior,
                sigma2=sig if sig is not None else _model_sigma2(dataset, model, prior),
            )

    cp_prob = np.zeros(dataset.n)
    cp_prob[dataset.offset :] = cp
    fitted_full = np.full(dataset.n, np.nan)
    fitted_full[dataset.offset :] = fitted
    marginals = PosteriorSummary(
        cp_prob=cp_prob,
        pip=pip,
        partition_count_dist=dict(sorted(part.items())),
        fitted_mean=fitted_full,
        map_model=table[best][0],
        map_score=float(score_arr[best]),
        n_samples=len(table),
    )
    return ExactPosterior(table=table, normalizer=normalizer, marginals=marginals)


def _model_sigma2(dataset: Dataset, model: ModelId, prior: PriorConfig) -> float:
    from .linalg import empirical_sigma2

    return empirical_sigma2(dataset, model.segmentation, model.mask, ridge_tau2=prior.tau2)


def compare_with_sampler(
    exact: ExactPosterior, sampled: PosteriorSummary
) -> dict[str, float]:
    """Max absolute deviations between exact and sampled marginals."""
    counts = sorted(set(exact.marginals.partition_count_dist) | set(sampled.partition_count_dist))
    dev_part = max(
        abs(
            exact.marginals.partition_count_dist.get(l, 0.0)
            - sampled.partition_count_dist.get(l, 0.0)
        )
        for l in counts
    )
    out = {
        "max_dev_cp_prob": float(np.max(np.abs(exact.marginals.cp_prob - sampled.cp_prob))),
        "max_dev_partition_dist": float(dev_part),
    }
    if exact.marginals.pip.size:
        out["max_dev_pip"] = float(np.max(np.abs(exact.marginals.pip - sampled.pip)))
    return out
