"""Numerically stable regularized least squares for per-block model fits.

All marginal-likelihood evaluations reduce to solving (X'X + S) b = X'y for a
small positive definite system, together with the log-determinants of S and
X'X + S and the quadratic form y'y - y'X (X'X + S)^{-1} X'y.  Everything here
is built on a Cholesky factorization of X'X + S so the log-determinant comes
for free from the factor diagonal and never overflows.

Every function is a pure function of its inputs and safe to call from
multiple threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, RidgeFallbackWarning, SingularSystem

# Relative pivot threshold: a factorization pivot below this fraction of the
# largest diagonal entry is treated as rank deficiency.
PIVOT_RTOL = 1e-10


@dataclass
class SegmentData:
    """Responses and active-column design for one contiguous block."""

    y_seg: np.ndarray
    X_seg: np.ndarray

    def __post_init__(self):
        self.y_seg = np.asarray(self.y_seg, dtype=float).reshape(-1)
        self.X_seg = np.asarray(self.X_seg, dtype=float)
        if self.X_seg.ndim != 2:
            raise DimensionMismatch("X_seg must be a 2-D array")
        if self.X_seg.shape[0] != self.y_seg.shape[0]:
            raise DimensionMismatch(
                f"X_seg has {self.X_seg.shape[0]} rows but y_seg has "
                f"{self.y_seg.shape[0]} entries"
            )
        if self.n_j < 1:
            raise DimensionMismatch("a block must contain at least one observation")

    @property
    def n_j(self) -> int:
        return self.y_seg.shape[0]

    @property
    def k(self) -> int:
        return self.X_seg.shape[1]


@dataclass
class SegmentFit:
    """Result of a regularized least-squares fit on one block.

    ``quad`` is the Gaussian-integral quadratic form
    y'y - y'X (X'X + S)^{-1} X'y; ``logdet_prior`` is log det(S) and
    ``logdet_posterior`` is log det(X'X + S).
    """

    beta_hat: np.ndarray
    rss: float
    logdet_prior: float
    logdet_posterior: float
    quad: float
    ridge_fallback: bool = field(default=False)


def _cholesky_spd(M: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix, with a relative pivot check."""
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"matrix is not positive definite: {exc}") from exc
    d = np.diagonal(L)
    tol = PIVOT_RTOL * max(float(np.max(np.diagonal(M))), 0.0)
    if float(np.min(d * d)) <= tol:
        raise SingularSystem("factorization pivot below tolerance")
    return L


def fit_regularized_ls(seg: SegmentData, prior_precision: np.ndarray | float) -> SegmentFit:
    """Solve (X'X + S) b = X'y for diagonal S and return fit diagnostics.

    ``prior_precision`` holds the diagonal of S (a scalar broadcasts to all
    columns).  Entries must be nonnegative; zero entries are allowed as long
    as X'X + S stays numerically nonsingular.  With S = 0 and a full-rank
    design the solution is the ordinary least-squares fit and quad equals the
    residual sum of squares.

    Raises SingularSystem on rank deficiency and DimensionMismatch on shape
    errors.
    """
    k = seg.k
    if np.ndim(prior_precision) == 0:
        s_diag = np.full(k, float(prior_precision))
    else:
        s_diag = np.asarray(prior_precision, dtype=float).reshape(-1)
        if s_diag.shape != (k,):
            raise DimensionMismatch(
                f"prior_precision has {s_diag.shape[0]} entries for {k} columns"
            )
    if np.any(s_diag < 0):
        raise ValueError("prior precision entries must be nonnegative")

    if k == 0:
        yy = float(seg.y_seg @ seg.y_seg)
        return SegmentFit(
            beta_hat=np.zeros(0),
            rss=yy,
            logdet_prior=0.0,
            logdet_posterior=0.0,
            quad=yy,
        )

    X = seg.X_seg
    y = seg.y_seg
    M = X.T @ X + np.diag(s_diag)
    L = _cholesky_spd(M)
    xty = X.T @ y
    w = scipy.linalg.solve_triangular(L, xty, lower=True)
    beta_hat = scipy.linalg.solve_triangular(L.T, w, lower=False)

    r = y - X @ beta_hat
    rss = float(r @ r)
    yy = float(y @ y)
    quad = max(yy - float(w @ w), 0.0)
    logdet_posterior = 2.0 * float(np.sum(np.log(np.diagonal(L))))
    with np.errstate(divide="ignore"):
        logdet_prior = float(np.sum(np.log(s_diag)))
    return SegmentFit(
        beta_hat=beta_hat,
        rss=rss,
        logdet_prior=logdet_prior,
        logdet_posterior=logdet_posterior,
        quad=quad,
    )


def logdet_gram(X: np.ndarray, S: np.ndarray | float = 0.0) -> float:
    """log det(X'X + S) for diagonal S, from the Cholesky diagonal.

    Never forms the raw determinant, so it cannot overflow.  Raises
    SingularSystem when a factorization pivot falls below tolerance.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("X must be a 2-D array")
    k = X.shape[1]
    if k == 0:
        return 0.0
    s_diag = np.broadcast_to(np.asarray(S, dtype=float).reshape(-1), (k,)) \
        if np.ndim(S) != 0 else np.full(k, float(S))
    M = X.T @ X + np.diag(s_diag)
    L = _cholesky_spd(M)
    return 2.0 * float(np.sum(np.log(np.diagonal(L))))


def empirical_sigma2(dataset, segmentation, mask=None, *, ridge_tau2: float = 1.0) -> float:
    """Pooled residual variance: n^{-1} sum of per-block least-squares RSS.

    Each block is fit by ordinary least squares (zero prior precision) on the
    active design columns.  A rank-deficient block falls back to the ridge
    solve with precision 1/ridge_tau2 and emits a RidgeFallbackWarning; only
    when the ridge solve also fails does SingularSystem propagate.
    """
    y_model, Z = dataset.design(mask)
    total = 0.0
    for start, stop in segmentation.blocks:
        seg = SegmentData(y_model[start:stop], Z[start:stop])
        try:
            fit = fit_regularized_ls(seg, 0.0)
        except SingularSystem:
            warnings.warn(
                f"block [{start}, {stop}) is rank deficient; using ridge fit",
                RidgeFallbackWarning,
                stacklevel=2,
            )
            fit = fit_regularized_ls(seg, 1.0 / ridge_tau2)
        total += fit.rss
    return total / y_model.shape[0]
