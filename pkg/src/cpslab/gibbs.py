"""Collapsed Gibbs sampler over changepoint and inclusion indicators.

Discrete indicators are resampled from their exact full conditionals with all
continuous block parameters integrated out analytically; coefficients (or
per-observation levels) are drawn explicitly only where a variance update or
a fitted-value accumulation needs them.  One chain is strictly sequential;
multiple chains run independently on per-chain random streams derived from
(seed, chain_index) with a counter-based generator, so results are bit-stable
regardless of scheduling.

Sweep order is fixed: changepoint indicators in ascending position, then
inclusion indicators in ascending column, then variance updates.  For the
piecewise-constant model the level variance is resampled on a fixed
log-spaced grid (a flat prior on the log scale, the discretization of an
inverse scale prior); for regression the slab variance is a fixed
hyperparameter.

Three engines share the same conditionals: a scalar path for the
piecewise-constant model, a dense small-p path that precomputes one
full-column prefix Gram, and a masked-prefix path for wide designs.  Engine
choice depends only on the dataset shape, so results stay deterministic.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonFiniteError, SingularSystem
from .model import (
    LOG_2PI,
    Dataset,
    InclusionMask,
    ModelId,
    PriorConfig,
    Segmentation,
)
from .rng import make_rng

# Discrete support for the level-variance Gibbs step: 200 log-spaced points.
TAU2_GRID = np.geomspace(1e-4, 1e4, 200)

_LOGIT_CLIP = 36.0
_PYTHON_CHOL_MAX = 7
_SMALL_P_MAX = 6


@dataclass
class SamplerConfig:
    """Chain length and reproducibility settings."""

    iterations: int
    burn_in: int
    thin: int = 1
    seed: int = 0
    chains: int = 1

    def validate(self) -> None:
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    @property
    def n_retained(self) -> int:
        span = self.iterations - self.burn_in
        return (span + self.thin - 1) // self.thin


@dataclass
class ChainState:
    """Current latent state: segmentation, mask, and variance parameters."""

    segmentation: Segmentation
    mask: InclusionMask
    sigma2: float
    tau2: float
    iteration: int = 0


@dataclass
class PosteriorSummary:
    """Accumulated posterior summaries from retained, thinned samples.

    ``cp_prob`` and ``fitted_mean`` have the raw data length; positions that
    are conditioned on (the first observation when a lag column is present)
    carry probability zero and a NaN fitted value.
    """

    cp_prob: np.ndarray
    pip: np.ndarray
    partition_count_dist: dict[int, float]
    fitted_mean: np.ndarray
    map_model: ModelId
    map_score: float
    n_samples: int
    per_chain: list["PosteriorSummary"] | None = None


def _bernoulli_logit(logit: float, u: float) -> bool:
    if logit >= _LOGIT_CLIP:
        return True
    if logit <= -_LOGIT_CLIP:
        return False
    return u < 1.0 / (1.0 + math.exp(-logit))


def _chol_ragged(L: list, w: list, k: int, add_diag: float) -> float:
    """In-place Cholesky of (G + add I) on a ragged lower triangle.

    ``L`` enters holding the lower triangle of G (row j has j+1 entries) and
    leaves holding the factor; ``w`` enters holding q and leaves holding
    L^{-1} q.  Returns log det.  Raises SingularSystem when a pivot falls
    below the relative tolerance.
    """
    maxd = 0.0
    for j in range(k):
        d = L[j][j] + add_diag
        if d > maxd:
            maxd = d
    tol = 1e-10 * maxd
    logdet = 0.0
    for j in range(k):
        Lj = L[j]
        v = Lj[j] + add_diag
        for t in range(j):
            v -= Lj[t] * Lj[t]
        if v <= tol:
            raise SingularSystem("block Gram factorization pivot below tolerance")
        logdet += math.log(v)
        d = math.sqrt(v)
        Lj[j] = d
        for i in range(j + 1, k):
            Li = L[i]
            x = Li[j]
            for t in range(j):
                x -= Li[t] * Lj[t]
            Li[j] = x / d
        x = w[j]
        for t in range(j):
            x -= Lj[t] * w[t]
        w[j] = x / d
    return logdet


def _back_solve(L: list, w: list, k: int) -> list:
    """Solve L' beta = w for the ragged lower factor produced above."""
    beta = [0.0] * k
    for i in range(k - 1, -1, -1):
        x = w[i]
        for t in range(i + 1, k):
            x -= L[t][i] * beta[t]
        beta[i] = x / L[i][i]
    return beta


def _lm_core(G: list, q: list, k: int, add: float):
    """(log det(G + add I), squared forward-solve norm) without mutating G.

    Unrolled straight-line code for the dominant small dimensions; the
    generic ragged factorization covers the rest.
    """
    log = math.log
    sqrt = math.sqrt
    if k == 1:
        v0 = G[0][0] + add
        if v0 <= 0.0:
            raise SingularSystem("pivot below tolerance")
        w0 = q[0] / sqrt(v0)
        return log(v0), w0 * w0
    if k == 2:
        G0 = G[0]
        G1 = G[1]
        g00 = G0[0] + add
        g11 = G1[1] + add
        tol = 1e-10 * (g00 if g00 > g11 else g11)
        if g00 <= tol:
            raise SingularSystem("pivot below tolerance")
        d0 = sqrt(g00)
        l10 = G1[0] / d0
        v1 = g11 - l10 * l10
        if v1 <= tol:
            raise SingularSystem("pivot below tolerance")
        d1 = sqrt(v1)
        w0 = q[0] / d0
        w1 = (q[1] - l10 * w0) / d1
        return log(g00) + log(v1), w0 * w0 + w1 * w1
    if k == 3:
        G0 = G[0]
        G1 = G[1]
        G2 = G[2]
        g00 = G0[0] + add
        g11 = G1[1] + add
        g22 = G2[2] + add
        maxd = g00
        if g11 > maxd:
            maxd = g11
        if g22 > maxd:
            maxd = g22
        tol = 1e-10 * maxd
        if g00 <= tol:
            raise SingularSystem("pivot below tolerance")
        d0 = sqrt(g00)
        l10 = G1[0] / d0
        l20 = G2[0] / d0
        v1 = g11 - l10 * l10
        if v1 <= tol:
            raise SingularSystem("pivot below tolerance")
        d1 = sqrt(v1)
        l21 = (G2[1] - l20 * l10) / d1
        v2 = g22 - l20 * l20 - l21 * l21
        if v2 <= tol:
            raise SingularSystem("pivot below tolerance")
        w0 = q[0] / d0
        w1 = (q[1] - l10 * w0) / d1
        w2 = (q[2] - l20 * w0 - l21 * w1) / sqrt(v2)
        return log(g00) + log(v1) + log(v2), w0 * w0 + w1 * w1 + w2 * w2
    if k == 4:
        G0 = G[0]
        G1 = G[1]
        G2 = G[2]
        G3 = G[3]
        g00 = G0[0] + add
        g11 = G1[1] + add
        g22 = G2[2] + add
        g33 = G3[3] + add
        maxd = g00
        if g11 > maxd:
            maxd = g11
        if g22 > maxd:
            maxd = g22
        if g33 > maxd:
            maxd = g33
        tol = 1e-10 * maxd
        if g00 <= tol:
            raise SingularSystem("pivot below tolerance")
        d0 = sqrt(g00)
        l10 = G1[0] / d0
        l20 = G2[0] / d0
        l30 = G3[0] / d0
        v1 = g11 - l10 * l10
        if v1 <= tol:
            raise SingularSystem("pivot below tolerance")
        d1 = sqrt(v1)
        l21 = (G2[1] - l20 * l10) / d1
        l31 = (G3[1] - l30 * l10) / d1
        v2 = g22 - l20 * l20 - l21 * l21
        if v2 <= tol:
            raise SingularSystem("pivot below tolerance")
        d2 = sqrt(v2)
        l32 = (G3[2] - l30 * l20 - l31 * l21) / d2
        v3 = g33 - l30 * l30 - l31 * l31 - l32 * l32
        if v3 <= tol:
            raise SingularSystem("pivot below tolerance")
        w0 = q[0] / d0
        w1 = (q[1] - l10 * w0) / d1
        w2 = (q[2] - l20 * w0 - l21 * w1) / d2
        w3 = (q[3] - l30 * w0 - l31 * w1 - l32 * w2) / sqrt(v3)
        return (
            log(g00) + log(v1) + log(v2) + log(v3),
            w0 * w0 + w1 * w1 + w2 * w2 + w3 * w3,
        )
    L = [row[: j + 1] for j, row in enumerate(G)]
    w = list(q)
    logdet = _chol_ragged(L, w, k, add)
    return logdet, sum(wi * wi for wi in w)


def _chol_lm_stats(G: np.ndarray, q: np.ndarray, s: float, k: int, add_diag: float):
    """(log det(G + add I), y'y-quadratic) via one factorization."""
    if k == 0:
        return 0.0, max(s, 0.0)
    if k <= _PYTHON_CHOL_MAX:
        L = [row[: j + 1] for j, row in enumerate(G.tolist())]
        w = q.tolist()
        logdet = _chol_ragged(L, w, k, add_diag)
        quad = s
        for wi in w:
            quad -= wi * wi
        return logdet, max(quad, 0.0)
    M = G + add_diag * np.eye(k)
    try:
        Lnp = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    diag = np.diagonal(Lnp)
    if float(np.min(diag) ** 2) <= 1e-10 * float(np.max(np.diagonal(M))):
        raise SingularSystem("block Gram factorization pivot below tolerance")
    wv = scipy.linalg.solve_triangular(Lnp, q, lower=True)
    return 2.0 * float(np.sum(np.log(diag))), max(float(s - wv @ wv), 0.0)


# ---------------------------------------------------------------------------
# piecewise-constant engine (no covariates)
# ---------------------------------------------------------------------------


class _LevelsEngine:
    """Scalar fast path for the piecewise-constant hierarchy."""

    is_levels = True

    def __init__(self, dataset: Dataset, prior: PriorConfig):
        self.n = dataset.n_model
        self.p = 0
        y = dataset.y[dataset.offset :]
        self.y = y
        self.cumy = np.concatenate([[0.0], np.cumsum(y)]).tolist()
        self.cumy2 = np.concatenate([[0.0], np.cumsum(y * y)]).tolist()
        self.V = prior.mu_var
        p_n = prior.resolve_changepoint_prob(self.n)
        self.log_pn = math.log(p_n)
        self.log_1mpn = math.log1p(-p_n)
        self.cp_logodds = self.log_pn - self.log_1mpn
        self.grid = TAU2_GRID
        self.bounds = [0]
        self.sigma2 = 1.0
        self.tau2 = prior.tau2
        self.sel = np.zeros(0, dtype=bool)

    def load(self, state: ChainState) -> None:
        if state.segmentation.n_model != self.n:
            raise DimensionMismatch("state segmentation does not match dataset")
        self.bounds = [0] + [int(v) for v in np.flatnonzero(state.segmentation.indicators)]
        self.sigma2 = float(state.sigma2)
        self.tau2 = float(state.tau2)

    def indicators(self) -> np.ndarray:
        ind = np.zeros(self.n, dtype=bool)
        ind[self.bounds[1:]] = True
        return ind

    def _block_arrays(self):
        bs = np.asarray(self.bounds + [self.n])
        cy = np.asarray(self.cumy)
        cy2 = np.asarray(self.cumy2)
        return np.diff(bs), np.diff(cy[bs]), np.diff(cy2[bs])

    def sweep_changepoints(self, rng: np.random.Generator) -> None:
        n = self.n
        u = rng.random(n - 1)
        a_ = self.sigma2 + self.tau2
        V = self.V
        inv_a = 1.0 / a_
        m = np.arange(n + 1, dtype=float)
        den_arr = (a_ + m * V).tolist()
        c_arr = (
            m * LOG_2PI + np.maximum(m - 1.0, 0.0) * math.log(a_) + np.log(a_ + m * V)
        ).tolist()
        cumy = self.cumy
        cumy2 = self.cumy2
        bounds = self.bounds
        cp_logodds = self.cp_logodds

        def lm(lo: int, hi: int) -> float:
            s1 = cumy[hi] - cumy[lo]
            nb = hi - lo
            return -0.5 * (
                c_arr[nb] + (cumy2[hi] - cumy2[lo] - V * s1 * s1 / den_arr[nb]) * inv_a
            )

        for pos in range(1, n):
            i = bisect_left(bounds, pos)
            cur_on = i < len(bounds) and bounds[i] == pos
            a = bounds[i - 1]
            if cur_on:
                b = bounds[i + 1] if i + 1 < len(bounds) else n
            else:
                b = bounds[i] if i < len(bounds) else n
            delta = lm(a, pos) + lm(pos, b) - lm(a, b)
            on = _bernoulli_logit(cp_logodds + delta, u[pos - 1])
            if on and not cur_on:
                bounds.insert(i, pos)
            elif cur_on and not on:
                del bounds[i]
        if __debug__:
            assert bounds[0] == 0 and all(
                bounds[i] < bounds[i + 1] for i in range(len(bounds) - 1)
            )

    def sweep_inclusion(self, rng: np.random.Generator) -> None:
        pass  # no covariates

    def _grid_loglik(self, a_g: np.ndarray) -> np.ndarray:
        nb, s1, s2 = self._block_arrays()
        den = a_g[None, :] + nb[:, None] * self.V
        ll = -0.5 * (
            nb[:, None] * LOG_2PI
            + (nb[:, None] - 1.0) * np.log(a_g)[None, :]
            + np.log(den)
            + (s2[:, None] - self.V * s1[:, None] ** 2 / den) / a_g[None, :]
        )
        return np.sum(ll, axis=0)

    def sweep_tau2(self, rng: np.random.Generator) -> None:
        u = rng.random()
        ll = self._grid_loglik(self.sigma2 + self.grid)
        w = np.exp(ll - np.max(ll))
        cw = np.cumsum(w)
        idx = min(int(np.searchsorted(cw, u * cw[-1], side="right")), len(self.grid) - 1)
        self.tau2 = float(self.grid[idx])

    def update_sigma2(self, rng: np.random.Generator) -> None:
        """Draw levels explicitly, then the noise variance from its
        inverse-gamma conditional under the inverse scale prior."""
        nb, s1, _ = self._block_arrays()
        a_ = self.sigma2 + self.tau2
        v_mu = 1.0 / (nb / a_ + 1.0 / self.V)
        mu = v_mu * (s1 / a_) + np.sqrt(v_mu) * rng.standard_normal(nb.shape[0])
        var_t = 1.0 / (1.0 / self.sigma2 + 1.0 / self.tau2)
        mu_rep = np.repeat(mu, nb)
        mean_t = (self.y / self.sigma2 + mu_rep / self.tau2) * var_t
        theta = mean_t + math.sqrt(var_t) * rng.standard_normal(self.n)
        resid = self.y - theta
        scale = 0.5 * float(resid @ resid)
        g = rng.standard_gamma(0.5 * self.n)
        self.sigma2 = scale / g if g > 0 else float("inf")

    def block_log_marginals(self) -> np.ndarray:
        nb, s1, s2 = self._block_arrays()
        a_ = self.sigma2 + self.tau2
        den = a_ + nb * self.V
        return -0.5 * (
            nb * LOG_2PI
            + (nb - 1.0) * math.log(a_)
            + np.log(den)
            + (s2 - self.V * s1**2 / den) / a_
        )

    def log_prior_current(self) -> float:
        n_on = len(self.bounds) - 1
        return n_on * self.log_pn + (self.n - 1 - n_on) * self.log_1mpn

    def fitted_values(self) -> np.ndarray:
        nb, s1, _ = self._block_arrays()
        a_ = self.sigma2 + self.tau2
        den = a_ + nb * self.V
        level = (self.V * self.sigma2 / (a_ * den)) * s1
        return (self.tau2 / a_) * self.y + np.repeat(level, nb)


# ---------------------------------------------------------------------------
# dense small-p regression engine
# ---------------------------------------------------------------------------


class _SmallRegressionEngine:
    """Full-column prefix Grams in plain Python, for a handful of covariates.

    One (K x K)-column prefix over intercept plus every selectable column is
    computed once; any mask's block system is then a sub-index extraction, so
    mask and segmentation moves never rebuild anything.
    """

    is_levels = False

    def __init__(self, dataset: Dataset, prior: PriorConfig):
        self.n = dataset.n_model
        self.p = dataset.p
        self.k_base = 1 if dataset.has_intercept else 0
        self.K = self.k_base + self.p
        Zsel = dataset.selectable_matrix()
        cols = [np.ones((self.n, 1))] if dataset.has_intercept else []
        cols.append(Zsel)
        A = np.hstack(cols) if cols else np.zeros((self.n, 0))
        self.A = A
        y = dataset.y[dataset.offset :]
        self.y = y
        K = self.K
        outer = A[:, :, None] * A[:, None, :]
        PG = np.zeros((self.n + 1, K, K))
        np.cumsum(outer, axis=0, out=PG[1:])
        self.PGf = PG.reshape(self.n + 1, K * K).tolist()
        Pq = np.zeros((self.n + 1, K))
        np.cumsum(A * y[:, None], axis=0, out=Pq[1:])
        self.Pqf = Pq.tolist()
        self.cums = np.concatenate([[0.0], np.cumsum(y * y)]).tolist()

        self.tau2 = prior.tau2
        self.inv_tau2 = 1.0 / prior.tau2
        self.log_tau2 = math.log(prior.tau2)
        p_n = prior.resolve_changepoint_prob(self.n)
        self.log_pn = math.log(p_n)
        self.log_1mpn = math.log1p(-p_n)
        self.cp_logodds = self.log_pn - self.log_1mpn
        pincl = prior.resolve_inclusion_prob(self.n, self.p)
        with np.errstate(divide="ignore"):
            self.lp_inc_on = np.log(pincl).tolist()
            self.lp_inc_off = np.log1p(-pincl).tolist()
        self.inc_logodds = [a - b for a, b in zip(self.lp_inc_on, self.lp_inc_off)]
        self.cap = prior.resolve_max_model_size(self.n, self.p)

        self.bounds = [0]
        self.sel = np.zeros(self.p, dtype=bool)
        self._idx: list[int] = list(range(self.k_base))
        self.sigma2 = 1.0
        self._set_sigma2(1.0)
        self._cur_lms: list[float] | None = None

    def load(self, state: ChainState) -> None:
        if state.segmentation.n_model != self.n:
            raise DimensionMismatch("state segmentation does not match dataset")
        if state.mask.included.shape[0] != self.p:
            raise DimensionMismatch("state mask does not match dataset")
        self.bounds = [0] + [int(v) for v in np.flatnonzero(state.segmentation.indicators)]
        self.sel = state.mask.included.copy()
        self._rebuild_idx()
        self._set_sigma2(float(state.sigma2))
        self.tau2 = float(state.tau2)
        self.inv_tau2 = 1.0 / self.tau2
        self.log_tau2 = math.log(self.tau2)

    def _rebuild_idx(self) -> None:
        self._idx = list(range(self.k_base)) + [
            self.k_base + int(j) for j in np.flatnonzero(self.sel)
        ]
        self._cur_lms = None

    def _set_sigma2(self, value: float) -> None:
        self.sigma2 = value
        self._l2ps = LOG_2PI + math.log(value)
        self._inv2s2 = 0.5 / value
        self._cur_lms = None

    def indicators(self) -> np.ndarray:
        ind = np.zeros(self.n, dtype=bool)
        ind[self.bounds[1:]] = True
        return ind

    # -- core marginal evaluation

    def _extract(self, lo: int, hi: int, idx: list[int]):
        """Lower-triangle Gram, moment vector and y'y for one block/mask."""
        K = self.K
        ghi = self.PGf[hi]
        glo = self.PGf[lo]
        qhi = self.Pqf[hi]
        qlo = self.Pqf[lo]
        G = []
        w = []
        for r, ir in enumerate(idx):
            base = ir * K
            G.append([ghi[base + idx[c]] - glo[base + idx[c]] for c in range(r + 1)])
            w.append(qhi[ir] - qlo[ir])
        return G, w

    def _block_lm(self, lo: int, hi: int, idx: list[int]) -> float:
        s = self.cums[hi] - self.cums[lo]
        nb = hi - lo
        k = len(idx)
        if k == 0:
            return -0.5 * nb * self._l2ps - s * self._inv2s2
        G, q = self._extract(lo, hi, idx)
        logdet, wsq = _lm_core(G, q, k, self.inv_tau2)
        quad = s - wsq
        if quad < 0.0:
            quad = 0.0
        return -0.5 * (nb * self._l2ps + k * self.log_tau2 + logdet) - quad * self._inv2s2

    def _block_lms_current(self) -> list[float]:
        if self._cur_lms is None:
            bs = self.bounds + [self.n]
            idx = self._idx
            self._cur_lms = [
                self._block_lm(lo, hi, idx) for lo, hi in zip(bs[:-1], bs[1:])
            ]
        return self._cur_lms

    # -- sweeps

    def sweep_changepoints(self, rng: np.random.Generator) -> None:
        n = self.n
        u = rng.random(n - 1)
        bounds = self.bounds
        idx = self._idx
        lm = self._block_lm
        cp_logodds = self.cp_logodds
        changed = False
        cache_key = None
        cache_val = 0.0
        for pos in range(1, n):
            i = bisect_left(bounds, pos)
            cur_on = i < len(bounds) and bounds[i] == pos
            a = bounds[i - 1]
            if cur_on:
                b = bounds[i + 1] if i + 1 < len(bounds) else n
            else:
                b = bounds[i] if i < len(bounds) else n
            if cache_key != (a, b):
                cache_key = (a, b)
                cache_val = lm(a, b, idx)
            delta = lm(a, pos, idx) + lm(pos, b, idx) - cache_val
            on = _bernoulli_logit(cp_logodds + delta, u[pos - 1])
            if on != cur_on:
                changed = True
                cache_key = None
                if on:
                    bounds.insert(i, pos)
                else:
                    del bounds[i]
        if changed:
            self._cur_lms = None
        if __debug__:
            assert bounds[0] == 0 and all(
                bounds[i] < bounds[i + 1] for i in range(len(bounds) - 1)
            )

    def sweep_inclusion(self, rng: np.random.Generator) -> None:
        if self.p == 0:
            return
        u = rng.random(self.p)
        bs = self.bounds + [self.n]
        pairs = list(zip(bs[:-1], bs[1:]))
        cur = self._block_lms_current()
        size = int(np.count_nonzero(self.sel))
        for col in range(self.p):
            cur_on = bool(self.sel[col])
            if not cur_on and size >= self.cap:
                continue  # inclusion mass forced to zero at the cap
            logodds = self.inc_logodds[col]
            full = self.k_base + col
            if cur_on:
                alt_idx = [i for i in self._idx if i != full]
            else:
                alt_idx = sorted(self._idx + [full])
            if math.isinf(logodds):
                on = logodds > 0
                alt = None
            else:
                alt = [self._block_lm(lo, hi, alt_idx) for lo, hi in pairs]
                delta = sum(alt) - sum(cur)
                logit = logodds + (delta if not cur_on else -delta)
                on = _bernoulli_logit(logit, u[col])
            if on != cur_on:
                self.sel[col] = on
                self._idx = alt_idx
                cur = alt if alt is not None else [
                    self._block_lm(lo, hi, alt_idx) for lo, hi in pairs
                ]
                self._cur_lms = cur
                size += 1 if on else -1

    def sweep_tau2(self, rng: np.random.Generator) -> None:
        pass  # slab variance is fixed in the regression model

    def update_sigma2(self, rng: np.random.Generator) -> None:
        """Draw block coefficients, then the noise variance from its exact
        inverse-gamma conditional (the slab prior scales with it, so the
        shape counts sampled coefficients and the scale adds the ridge
        penalty of each draw)."""
        bs = self.bounds + [self.n]
        idx = self._idx
        k = len(idx)
        total = 0.0
        k_tot = 0
        sig = math.sqrt(self.sigma2)
        for lo, hi in zip(bs[:-1], bs[1:]):
            s = self.cums[hi] - self.cums[lo]
            if k == 0:
                total += s
                continue
            G, w = self._extract(lo, hi, idx)
            q_orig = list(w)
            L = [row[:] for row in G]
            _chol_ragged(L, w, k, self.inv_tau2)
            beta_hat = _back_solve(L, w, k)
            z = rng.standard_normal(k).tolist()
            zsol = _back_solve(L, z, k)
            beta = [bh + sig * zi for bh, zi in zip(beta_hat, zsol)]
            rss = s
            shrink = 0.0
            for i in range(k):
                bi = beta[i]
                rss -= 2.0 * bi * q_orig[i]
                shrink += bi * bi
                rss += G[i][i] * bi * bi
                for t in range(i):
                    rss += 2.0 * G[i][t] * bi * beta[t]
            total += max(rss, 0.0) + self.inv_tau2 * shrink
            k_tot += k
        g = rng.standard_gamma(0.5 * (self.n + k_tot))
        self._set_sigma2((0.5 * total) / g if g > 0 else float("inf"))

    # -- summaries

    def block_log_marginals(self) -> np.ndarray:
        return np.asarray(self._block_lms_current())

    def log_prior_current(self) -> float:
        n_on = len(self.bounds) - 1
        total = n_on * self.log_pn + (self.n - 1 - n_on) * self.log_1mpn
        for j in range(self.p):
            total += self.lp_inc_on[j] if self.sel[j] else self.lp_inc_off[j]
        return total

    def fitted_values(self) -> np.ndarray:
        bs = self.bounds + [self.n]
        idx = self._idx
        k = len(idx)
        out = np.zeros(self.n)
        if k == 0:
            return out
        Asub = self.A[:, idx]
        for lo, hi in zip(bs[:-1], bs[1:]):
            G, w = self._extract(lo, hi, idx)
            _chol_ragged(G, w, k, self.inv_tau2)
            beta_hat = _back_solve(G, w, k)
            out[lo:hi] = Asub[lo:hi] @ beta_hat
        return out


# ---------------------------------------------------------------------------
# wide-design regression engine (masked prefix Grams)
# ---------------------------------------------------------------------------


@dataclass
class _BlockStats:
    lo: int
    hi: int
    G: list
    q: list
    s: float
    C: list
    d: list
    qf: list
    lm: float = field(default=0.0)
    # bordered-factor cache for candidate evaluations at the current mask
    L: list = field(default_factory=list)
    w: list = field(default_factory=list)
    logdet: float = field(default=0.0)
    wsq: float = field(default=0.0)


class _WideRegressionEngine:
    """Prefix Grams over the active columns only; cross-moments per block.

    Rebuilds the prefix only when the mask changes and the per-block
    cross-moment tables only when the segmentation changes, which keeps
    per-sweep work near-constant once the chain settles.  All block systems
    are tiny (model-size cap), so they are held as plain Python lists and
    factored without array overhead.
    """

    is_levels = False

    def __init__(self, dataset: Dataset, prior: PriorConfig):
        self.n = dataset.n_model
        self.p = dataset.p
        self.has_intercept = dataset.has_intercept
        self.k_base = 1 if dataset.has_intercept else 0
        self.Zsel = np.ascontiguousarray(dataset.selectable_matrix())
        y = dataset.y[dataset.offset :]
        self.y = y
        self.cums = np.concatenate([[0.0], np.cumsum(y * y)]).tolist()
        self.tau2 = prior.tau2
        self.inv_tau2 = 1.0 / prior.tau2
        self.log_tau2 = math.log(prior.tau2)
        p_n = prior.resolve_changepoint_prob(self.n)
        self.log_pn = math.log(p_n)
        self.log_1mpn = math.log1p(-p_n)
        self.cp_logodds = self.log_pn - self.log_1mpn
        pincl = prior.resolve_inclusion_prob(self.n, self.p)
        with np.errstate(divide="ignore"):
            self.lp_inc_on = np.log(pincl)
            self.lp_inc_off = np.log1p(-pincl)
        self.inc_logodds = self.lp_inc_on - self.lp_inc_off
        self.cap = prior.resolve_max_model_size(self.n, self.p)

        self.bounds = [0]
        self.sel = np.zeros(self.p, dtype=bool)
        self.sigma2 = 1.0
        self._prefix_ok = False
        self._stats_ok = False
        self._lms_ok = False
        self._set_sigma2(1.0)

    def load(self, state: ChainState) -> None:
        if state.segmentation.n_model != self.n:
            raise DimensionMismatch("state segmentation does not match dataset")
        if state.mask.included.shape[0] != self.p:
            raise DimensionMismatch("state mask does not match dataset")
        self.bounds = [0] + [int(v) for v in np.flatnonzero(state.segmentation.indicators)]
        if not np.array_equal(state.mask.included, self.sel):
            self.sel = state.mask.included.copy()
            self._prefix_ok = False
        self._stats_ok = False
        self._set_sigma2(float(state.sigma2))
        self.tau2 = float(state.tau2)
        self.inv_tau2 = 1.0 / self.tau2
        self.log_tau2 = math.log(self.tau2)

    def _set_sigma2(self, value: float) -> None:
        self.sigma2 = value
        self._l2ps = LOG_2PI + math.log(value)
        self._inv2s2 = 0.5 / value
        self._lms_ok = False

    def indicators(self) -> np.ndarray:
        ind = np.zeros(self.n, dtype=bool)
        ind[self.bounds[1:]] = True
        return ind

    def _ensure_prefix(self) -> None:
        if self._prefix_ok:
            return
        act = np.flatnonzero(self.sel)
        cols = []
        if self.has_intercept:
            cols.append(np.ones((self.n, 1)))
        if act.size:
            cols.append(self.Zsel[:, act])
        A = np.hstack(cols) if cols else np.zeros((self.n, 0))
        k = A.shape[1]
        self.A = A
        self.k = k
        PG = np.zeros((self.n + 1, k, k))
        Pq = np.zeros((self.n + 1, k))
        if k:
            np.cumsum(A[:, :, None] * A[:, None, :], axis=0, out=PG[1:])
            np.cumsum(A * self.y[:, None], axis=0, out=Pq[1:])
        self.PGf = PG.reshape(self.n + 1, k * k).tolist()
        self.Pqf = Pq.tolist()
        pos = np.full(self.p, -1)
        pos[act] = self.k_base + np.arange(act.size)
        self._act_pos = pos
        self._prefix_ok = True
        self._stats_ok = False

    def _extract(self, lo: int, hi: int):
        """Lower-triangle Gram and moment vector of one block (Python lists)."""
        k = self.k
        ghi = self.PGf[hi]
        glo = self.PGf[lo]
        qhi = self.Pqf[hi]
        qlo = self.Pqf[lo]
        G = []
        for r in range(k):
            base = r * k
            G.append([ghi[base + c] - glo[base + c] for c in range(r + 1)])
        w = [qhi[c] - qlo[c] for c in range(k)]
        return G, w

    def _lm_lists(self, G: list, q: list, s: float, nb: int, k: int) -> float:
        logdet, wsq = _lm_core(G, q, k, self.inv_tau2)
        quad = s - wsq
        if quad < 0.0:
            quad = 0.0
        return -0.5 * (nb * self._l2ps + k * self.log_tau2 + logdet) - quad * self._inv2s2

    def _block_lm(self, lo: int, hi: int) -> float:
        s = self.cums[hi] - self.cums[lo]
        nb = hi - lo
        if self.k == 0:
            return -0.5 * nb * self._l2ps - s * self._inv2s2
        G, q = self._extract(lo, hi)
        return self._lm_lists(G, q, s, nb, self.k)

    def _ensure_block_stats(self) -> None:
        self._ensure_prefix()
        if not self._stats_ok:
            stats = []
            bs = self.bounds + [self.n]
            for lo, hi in zip(bs[:-1], bs[1:]):
                Zb = self.Zsel[lo:hi]
                Ab = self.A[lo:hi]
                G, q = self._extract(lo, hi)
                stats.append(
                    _BlockStats(
                        lo=lo,
                        hi=hi,
                        G=G,
                        q=q,
                        s=self.cums[hi] - self.cums[lo],
                        C=(Ab.T @ Zb).tolist(),
                        d=np.einsum("ij,ij->j", Zb, Zb).tolist(),
                        qf=(Zb.T @ self.y[lo:hi]).tolist(),
                    )
                )
            self.blocks = stats
            self._stats_ok = True
            self._lms_ok = False
        if not self._lms_ok:
            k = self.k
            for st in self.blocks:
                if k == 0:
                    st.L, st.w, st.logdet, st.wsq = [], [], 0.0, 0.0
                    st.lm = -0.5 * (st.hi - st.lo) * self._l2ps - st.s * self._inv2s2
                    continue
                L = [row[:] for row in st.G]
                w = list(st.q)
                st.logdet = _chol_ragged(L, w, k, self.inv_tau2)
                st.L = L
                st.w = w
                st.wsq = sum(wi * wi for wi in w)
                quad = st.s - st.wsq
                if quad < 0.0:
                    quad = 0.0
                st.lm = (
                    -0.5 * ((st.hi - st.lo) * self._l2ps + k * self.log_tau2 + st.logdet)
                    - quad * self._inv2s2
                )
            self._lms_ok = True

    def sweep_changepoints(self, rng: np.random.Generator) -> None:
        n = self.n
        u = rng.random(n - 1)
        self._ensure_prefix()
        bounds = self.bounds
        lm = self._block_lm
        cp_logodds = self.cp_logodds
        changed = False
        cache_key = None
        cache_val = 0.0
        for pos in range(1, n):
            i = bisect_left(bounds, pos)
            cur_on = i < len(bounds) and bounds[i] == pos
            a = bounds[i - 1]
            if cur_on:
                b = bounds[i + 1] if i + 1 < len(bounds) else n
            else:
                b = bounds[i] if i < len(bounds) else n
            if cache_key != (a, b):
                cache_key = (a, b)
                cache_val = lm(a, b)
            delta = lm(a, pos) + lm(pos, b) - cache_val
            on = _bernoulli_logit(cp_logodds + delta, u[pos - 1])
            if on != cur_on:
                changed = True
                cache_key = None
                if on:
                    bounds.insert(i, pos)
                else:
                    del bounds[i]
        if changed:
            self._stats_ok = False
        if __debug__:
            assert bounds[0] == 0 and all(
                bounds[i] < bounds[i + 1] for i in range(len(bounds) - 1)
            )

    def _candidate_lm(self, st: _BlockStats, col: int, turn_on: bool) -> float:
        k = self.k
        nb = st.hi - st.lo
        if turn_on:
            # border the cached factor with the candidate column: one forward
            # solve gives the new pivot and quadratic contribution
            L = st.L
            w = st.w
            u = [0.0] * k
            for j in range(k):
                x = st.C[j][col]
                Lj = L[j]
                for t in range(j):
                    x -= Lj[t] * u[t]
                u[j] = x / Lj[j]
            piv = st.d[col] + self.inv_tau2
            x = st.qf[col]
            for t in range(k):
                piv -= u[t] * u[t]
                x -= u[t] * w[t]
            if piv <= 0.0:
                raise SingularSystem("bordered pivot below tolerance")
            wk = x / math.sqrt(piv)
            logdet = st.logdet + math.log(piv)
            quad = st.s - st.wsq - wk * wk
            if quad < 0.0:
                quad = 0.0
            return (
                -0.5 * (nb * self._l2ps + (k + 1) * self.log_tau2 + logdet)
                - quad * self._inv2s2
            )
        pos = self._act_pos[col]
        keep = [i for i in range(k) if i != pos]
        G = [[st.G[r][c] for c in keep if c <= r] for r in keep]
        q = [st.q[i] for i in keep]
        return self._lm_lists(G, q, st.s, nb, k - 1)

    def sweep_inclusion(self, rng: np.random.Generator) -> None:
        if self.p == 0:
            return
        u = rng.random(self.p)
        self._ensure_block_stats()
        for col in range(self.p):
            cur_on = bool(self.sel[col])
            size = int(np.count_nonzero(self.sel))
            if not cur_on and size >= self.cap:
                continue  # inclusion mass forced to zero at the cap
            logodds = float(self.inc_logodds[col])
            if math.isinf(logodds):
                on = logodds > 0
            else:
                delta = 0.0
                if cur_on:
                    for st in self.blocks:
                        delta += st.lm - self._candidate_lm(st, col, turn_on=False)
                else:
                    for st in self.blocks:
                        delta += self._candidate_lm(st, col, turn_on=True) - st.lm
                on = _bernoulli_logit(logodds + delta, u[col])
            if on != cur_on:
                self.sel[col] = on
                self._prefix_ok = False
                self._ensure_block_stats()

    def sweep_tau2(self, rng: np.random.Generator) -> None:
        pass  # slab variance is fixed in the regression model

    def update_sigma2(self, rng: np.random.Generator) -> None:
        """Draw block coefficients, then the noise variance from its exact
        inverse-gamma conditional (see the small-p engine for the shape and
        scale conventions; the math is identical)."""
        self._ensure_block_stats()
        total = 0.0
        k_tot = 0
        k = self.k
        sig = math.sqrt(self.sigma2)
        for st in self.blocks:
            if k == 0:
                total += st.s
                continue
            L = [row[:] for row in st.G]
            w = list(st.q)
            _chol_ragged(L, w, k, self.inv_tau2)
            beta_hat = _back_solve(L, w, k)
            z = rng.standard_normal(k).tolist()
            zsol = _back_solve(L, z, k)
            beta = [bh + sig * zi for bh, zi in zip(beta_hat, zsol)]
            rss = st.s
            shrink = 0.0
            for i in range(k):
                bi = beta[i]
                rss -= 2.0 * bi * st.q[i]
                shrink += bi * bi
                rss += st.G[i][i] * bi * bi
                for t in range(i):
                    rss += 2.0 * st.G[i][t] * bi * beta[t]
            total += max(rss, 0.0) + self.inv_tau2 * shrink
            k_tot += k
        g = rng.standard_gamma(0.5 * (self.n + k_tot))
        self._set_sigma2((0.5 * total) / g if g > 0 else float("inf"))

    def block_log_marginals(self) -> np.ndarray:
        self._ensure_block_stats()
        return np.asarray([st.lm for st in self.blocks])

    def log_prior_current(self) -> float:
        n_on = len(self.bounds) - 1
        total = n_on * self.log_pn + (self.n - 1 - n_on) * self.log_1mpn
        total += float(np.sum(np.where(self.sel, self.lp_inc_on, self.lp_inc_off)))
        return total

    def fitted_values(self) -> np.ndarray:
        self._ensure_block_stats()
        out = np.zeros(self.n)
        if self.k == 0:
            return out
        for st in self.blocks:
            L = [row[:] for row in st.G]
            w = list(st.q)
            _chol_ragged(L, w, self.k, self.inv_tau2)
            beta_hat = _back_solve(L, w, self.k)
            out[st.lo : st.hi] = self.A[st.lo : st.hi] @ beta_hat
        return out


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _make_engine(dataset: Dataset, prior: PriorConfig):
    prior.validate()
    if dataset.is_levels_model:
        return _LevelsEngine(dataset, prior)
    if dataset.p <= _SMALL_P_MAX:
        return _SmallRegressionEngine(dataset, prior)
    return _WideRegressionEngine(dataset, prior)


def initial_state(
    dataset: Dataset, prior: PriorConfig, *, sigma2: float | None = None
) -> ChainState:
    """Single-block, empty-mask starting state with a data-scaled variance."""
    if sigma2 is None:
        if prior.sigma2_known:
            sigma2 = float(prior.sigma2)
        else:
            y_model = dataset.y[dataset.offset :]
            sigma2 = max(float(np.var(y_model)), 1e-8)
    return ChainState(
        segmentation=Segmentation.single_block(dataset.n_model),
        mask=InclusionMask.empty(dataset.p),
        sigma2=sigma2,
        tau2=prior.tau2,
        iteration=0,
    )


def _export_state(engine, iteration: int) -> ChainState:
    return ChainState(
        segmentation=Segmentation(engine.indicators()),
        mask=InclusionMask(engine.sel.copy()),
        sigma2=engine.sigma2,
        tau2=engine.tau2,
        iteration=iteration,
    )


def gibbs_sweep_changepoints(
    state: ChainState, dataset: Dataset, prior: PriorConfig, rng: np.random.Generator
) -> ChainState:
    """One systematic scan of every changepoint indicator from its exact
    full conditional, merging or splitting only the affected blocks."""
    engine = _make_engine(dataset, prior)
    engine.load(state)
    engine.sweep_changepoints(rng)
    return _export_state(engine, state.iteration + 1)


def gibbs_sweep_inclusion(
    state: ChainState, dataset: Dataset, prior: PriorConfig, rng: np.random.Generator
) -> ChainState:
    """One systematic scan of every inclusion indicator; proposals that would
    exceed the model-size cap are rejected deterministically."""
    if dataset.p == 0:
        raise DimensionMismatch("dataset has no selectable covariates")
    engine = _make_engine(dataset, prior)
    engine.load(state)
    engine.sweep_inclusion(rng)
    return _export_state(engine, state.iteration + 1)


def update_sigma2(
    state: ChainState, dataset: Dataset, prior: PriorConfig, rng: np.random.Generator
) -> ChainState:
    """Refresh the noise variance from its inverse-gamma full conditional,
    drawing the continuous block parameters it conditions on.

    Only meaningful when the noise variance is unknown; with a known variance
    there is nothing to update.
    """
    if prior.sigma2_known:
        raise ValueError("update_sigma2 requires the unknown-variance mode")
    engine = _make_engine(dataset, prior)
    engine.load(state)
    engine.update_sigma2(rng)
    return _export_state(engine, state.iteration)


def fitted_means(states, dataset: Dataset, prior: PriorConfig) -> np.ndarray:
    """Average posterior-mean fitted values over a sequence of states.

    Rao-Blackwellized: each state contributes the conditional mean of its
    linear predictor (or level), not a single coefficient draw.  Length is
    the raw data length; conditioned-on positions are NaN.
    """
    from .model import model_fitted_values

    states = list(states)
    if not states:
        raise ValueError("need at least one state")
    acc = np.zeros(dataset.n_model)
    for st in states:
        acc += model_fitted_values(
            dataset,
            ModelId(st.segmentation, st.mask),
            prior,
            sigma2=st.sigma2,
            tau2=st.tau2,
        )
    out = np.full(dataset.n, np.nan)
    out[dataset.offset :] = acc / len(states)
    return out


def _run_single_chain(
    dataset: Dataset, prior: PriorConfig, config: SamplerConfig, chain_idx: int
) -> PosteriorSummary:
    rng = make_rng(config.seed, chain_idx)
    engine = _make_engine(dataset, prior)
    engine.load(initial_state(dataset, prior))
    estimate_sigma2 = not prior.sigma2_known

    n_model = dataset.n_model
    cp_acc = np.zeros(n_model)
    pip_acc = np.zeros(dataset.p)
    fit_acc = np.zeros(n_model)
    part_counts: dict[int, int] = {}
    map_score = -math.inf
    map_model = None
    retained = 0

    for it in range(1, config.iterations + 1):
        engine.sweep_changepoints(rng)
        if dataset.p > 0:
            engine.sweep_inclusion(rng)
        if engine.is_levels:
            engine.sweep_tau2(rng)
        if estimate_sigma2:
            engine.update_sigma2(rng)
        if it <= config.burn_in or (it - config.burn_in - 1) % config.thin:
            continue
        retained += 1
        ind = engine.indicators()
        cp_acc += ind
        if dataset.p > 0:
            pip_acc += engine.sel
        n_blocks = len(engine.bounds)
        part_counts[n_blocks] = part_counts.get(n_blocks, 0) + 1
        fit_acc += engine.fitted_values()
        score = float(np.sum(engine.block_log_marginals())) + engine.log_prior_current()
        if not math.isfinite(score):
            raise NonFiniteError(f"non-finite log marginal at iteration {it}")
        if score > map_score:
            map_score = score
            map_model = ModelId(Segmentation(ind.copy()), InclusionMask(engine.sel.copy()))

    cp_prob = np.zeros(dataset.n)
    cp_prob[dataset.offset :] = cp_acc / retained
    fitted = np.full(dataset.n, np.nan)
    fitted[dataset.offset :] = fit_acc / retained
    return PosteriorSummary(
        cp_prob=cp_prob,
        pip=pip_acc / retained,
        partition_count_dist={l: c / retained for l, c in sorted(part_counts.items())},
        fitted_mean=fitted,
        map_model=map_model,
        map_score=map_score,
        n_samples=retained,
    )


def _merge_summaries(chains: list[PosteriorSummary]) -> PosteriorSummary:
    if len(chains) == 1:
        return chains[0]
    m = len(chains)
    counts: dict[int, float] = {}
    for ch in chains:
        for l, prob in ch.partition_count_dist.items():
            counts[l] = counts.get(l, 0.0) + prob / m
    best = max(chains, key=lambda c: c.map_score)
    return PosteriorSummary(
        cp_prob=np.mean([c.cp_prob for c in chains], axis=0),
        pip=np.mean([c.pip for c in chains], axis=0),
        partition_count_dist=dict(sorted(counts.items())),
        fitted_mean=np.mean([c.fitted_mean for c in chains], axis=0),
        map_model=best.map_model,
        map_score=best.map_score,
        n_samples=sum(c.n_samples for c in chains),
        per_chain=chains,
    )


def run_chain(
    dataset: Dataset, prior: PriorConfig, config: SamplerConfig, *, threads: int = 1
) -> PosteriorSummary:
    """Run burn-in plus retained sweeps and accumulate posterior summaries.

    Deterministic given (seed, config): chain c uses the stream derived from
    (seed, c) and multi-chain results merge by pooled averaging in chain
    order, so the thread count never changes the output.
    """
    prior.validate()
    config.validate()
    if config.chains == 1:
        return _run_single_chain(dataset, prior, config, 0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_run_single_chain, dataset, prior, config, c)
                for c in range(config.chains)
            ]
            results = [f.result() for f in futures]
    else:
        results = [
            _run_single_chain(dataset, prior, config, c) for c in range(config.chains)
        ]
    return _merge_summaries(results)
