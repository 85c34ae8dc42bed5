"""Bayes-factor trend benches.

Each scenario pits a deliberately wrong alternative model against the true
model on freshly generated data and records log BF(alternative, true).  The
theory being exercised is asymptotic, so the bench reports the trend of the
per-n mean across a growing-n grid rather than fixed values; under each
scenario the mean must fall as n grows.

Scenario designs (all share a single mid-series changepoint with sign-flipped
coefficients, eight standard-normal covariates and an intercept):

* wrong-count       alternative drops the changepoint (known variance)
* shifted-eps       alternative misplaces the changepoint by round(sqrt(n))
                    positions, a location error fraction ~ n^{-1/2} that
                    shrinks while its absolute size grows (known variance)
* wrong-covariates  alternative omits one truly active covariate
* est-sigma         wrong-count scored with the plug-in residual variance
* misspec-var       wrong-count on data whose noise scale differs between
                    segments, scored with the plug-in variance
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    Dataset,
    InclusionMask,
    ModelId,
    PriorConfig,
    Segmentation,
    log_bayes_factor,
)
from .rng import make_rng

SCENARIOS = ("wrong-count", "shifted-eps", "wrong-covariates", "est-sigma", "misspec-var")

_P = 8
_TRUE_COLS = [0, 1]
_BETA_SEG1 = (2.0, 1.5, -1.0)
_BETA_SEG2 = (-1.0, -1.5, 1.0)


@dataclass
class BenchRow:
    scenario: str
    n: int
    replicate: int
    log_bf: float


def _generate(n: int, rng: np.random.Generator, sigmas: tuple[float, float]) -> Dataset:
    X = rng.standard_normal((n, _P))
    split = n // 2
    mean = np.empty(n)
    for lo, hi, (b0, b1, b2), sd in (
        (0, split, _BETA_SEG1, sigmas[0]),
        (split, n, _BETA_SEG2, sigmas[1]),
    ):
        mean[lo:hi] = b0 + b1 * X[lo:hi, 0] + b2 * X[lo:hi, 1]
    noise = rng.standard_normal(n)
    y = mean.copy()
    y[:split] += sigmas[0] * noise[:split]
    y[split:] += sigmas[1] * noise[split:]
    return Dataset(y=y, X=X)


def run_scenario(scenario: str, n: int, replicate: int, seed: int) -> float:
    """log BF(alternative, true) on one generated replicate."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    scen_idx = SCENARIOS.index(scenario)
    rng = make_rng(seed, scen_idx, n, replicate)
    sigmas = (1.3, 0.7) if scenario == "misspec-var" else (1.0, 1.0)
    dataset = _generate(n, rng, sigmas)

    known = scenario in ("wrong-count", "shifted-eps", "wrong-covariates")
    prior = PriorConfig(sigma2=1.0 if known else None, tau2=1.0, max_model_size=_P)

    split = n // 2
    true_mask = InclusionMask.from_indices(_P, _TRUE_COLS)
    true_model = ModelId(Segmentation.from_block_starts(n, [split]), true_mask)

    if scenario in ("wrong-count", "est-sigma", "misspec-var"):
        alt = ModelId(Segmentation.single_block(n), true_mask)
    elif scenario == "shifted-eps":
        shift = max(1, round(math.sqrt(n)))
        alt = ModelId(Segmentation.from_block_starts(n, [split + shift]), true_mask)
    else:  # wrong-covariates
        alt = ModelId(
            Segmentation.from_block_starts(n, [split]),
            InclusionMask.from_indices(_P, _TRUE_COLS[:1]),
        )
    return log_bayes_factor(dataset, alt, true_model, prior)


def run_bench(
    scenarios, n_grid, replicates: int, seed: int
) -> tuple[list[BenchRow], dict[str, dict[int, float]]]:
    """All replicates of the requested scenarios, plus per-n mean log BFs."""
    rows: list[BenchRow] = []
    summary: dict[str, dict[int, float]] = {}
    for scenario in scenarios:
        per_n: dict[int, float] = {}
        for n in n_grid:
            vals = [
                run_scenario(scenario, n, rep, seed) for rep in range(replicates)
            ]
            per_n[n] = float(np.mean(vals))
            rows.extend(
                BenchRow(scenario, n, rep, v) for rep, v in enumerate(vals)
            )
        summary[scenario] = per_n
    return rows, summary
