"""Seeded generators for the three simulation designs, plus CSV ingestion.

Index conventions in ground truth are 1-based and user-facing: a changepoint
at index i means a new block starts at observation i; covariate j refers to
design column j (CSV header "x{j}"), and when a lag column is present it is
covariate p + 1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError
from .model import Dataset
from .rng import make_rng


@dataclass
class GroundTruth:
    """True data-generating quantities for a simulated series."""

    true_changepoints: list[int]
    true_sigma_per_segment: list[float]
    true_active_set: list[int] = field(default_factory=list)
    true_theta: list[float] | None = None
    true_beta_per_segment: list[dict] | None = None
    rho: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "true_changepoints": self.true_changepoints,
            "true_sigma_per_segment": self.true_sigma_per_segment,
            "true_active_set": self.true_active_set,
            "meta": self.meta,
        }
        if self.true_theta is not None:
            out["true_theta"] = self.true_theta
        if self.true_beta_per_segment is not None:
            out["true_beta_per_segment"] = self.true_beta_per_segment
        if self.rho is not None:
            out["rho"] = self.rho
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            true_changepoints=list(d["true_changepoints"]),
            true_sigma_per_segment=list(d["true_sigma_per_segment"]),
            true_active_set=list(d.get("true_active_set", [])),
            true_theta=d.get("true_theta"),
            true_beta_per_segment=d.get("true_beta_per_segment"),
            rho=d.get("rho"),
            meta=d.get("meta", {}),
        )


# Piecewise-constant design: block means and 1-based inclusive block ends.
_EX1_THETA = (-0.18, 0.08, 1.07, -0.53, 0.16, -0.69, -0.16)
_EX1_ENDS = (138, 225, 242, 299, 308, 333, 497)
_EX1_SIGMA = 0.2


def gen_example1(seed: int) -> tuple[Dataset, GroundTruth]:
    """Piecewise-constant mean series: n = 497, six changepoints, noise sd 0.2."""
    n = _EX1_ENDS[-1]
    theta = np.empty(n)
    start = 0
    for value, end in zip(_EX1_THETA, _EX1_ENDS):
        theta[start:end] = value
        start = end
    rng = make_rng(seed)
    y = theta + _EX1_SIGMA * rng.standard_normal(n)
    truth = GroundTruth(
        true_changepoints=[e + 1 for e in _EX1_ENDS[:-1]],
        true_sigma_per_segment=[_EX1_SIGMA] * len(_EX1_THETA),
        true_theta=list(_EX1_THETA),
        meta={"example": 1, "seed": seed, "n": n, "p": 0},
    )
    return Dataset(y=y, meta={"example": 1, "seed": seed}), truth


# Changing regression design: (intercept, {covariate: coefficient}, noise sd),
# with 1-based inclusive segment ends.
_EX2_SEGMENTS = (
    (3.0, {2: 1.0, 12: 2.0}, 1.2),
    (1.0, {2: 2.0}, 0.8),
    (-2.5, {2: 2.0, 3: -1.0}, 1.0),
)
_EX2_ENDS = (75, 175, 250)


def gen_example2(seed: int) -> tuple[Dataset, GroundTruth]:
    """Changing linear model: n = p = 250, changepoints after 75 and 175."""
    n = _EX2_ENDS[-1]
    p = 250
    rng = make_rng(seed)
    X = rng.standard_normal((n, p))
    e = rng.standard_normal(n)
    y = np.empty(n)
    start = 0
    betas = []
    for intercept, coefs, sd in _EX2_SEGMENTS:
        end = _EX2_ENDS[len(betas)]
        mean = np.full(end - start, intercept)
        for j, c in coefs.items():
            mean += c * X[start:end, j - 1]
        y[start:end] = mean + sd * e[start:end]
        betas.append({"intercept": intercept, **{f"x{j}": c for j, c in coefs.items()}})
        start = end
    active = sorted({j for _, coefs, _ in _EX2_SEGMENTS for j in coefs})
    truth = GroundTruth(
        true_changepoints=[e + 1 for e in _EX2_ENDS[:-1]],
        true_sigma_per_segment=[s for _, _, s in _EX2_SEGMENTS],
        true_active_set=active,
        true_beta_per_segment=betas,
        meta={"example": 2, "seed": seed, "n": n, "p": p},
    )
    return Dataset(y=y, X=X, meta={"example": 2, "seed": seed}), truth


_EX3_SEGMENTS = (
    (3.0, {2: 1.0, 12: 3.0}, 1.2),
    (1.0, {2: 2.0}, 0.8),
    (-2.0, {2: 1.0, 3: -1.0}, 1.0),
)
_EX3_ENDS = (90, 210, 300)
_EX3_RHO = 0.5


def gen_example3(seed: int) -> tuple[Dataset, GroundTruth]:
    """Changing regression with a first-order autoregressive term.

    n = 300, p = 250 exogenous covariates, autocorrelation 0.5; the lag
    column is appended by the dataset (covariate p + 1) and the recursion
    starts from a zero pre-sample value.
    """
    n = _EX3_ENDS[-1]
    p = 250
    rng = make_rng(seed)
    X = rng.standard_normal((n, p))
    e = rng.standard_normal(n)
    bounds = (0,) + _EX3_ENDS
    y = np.empty(n)
    prev = 0.0
    seg = 0
    for i in range(n):
        if i >= bounds[seg + 1]:
            seg += 1
        intercept, coefs, sd = _EX3_SEGMENTS[seg]
        mean = intercept + _EX3_RHO * prev + sum(c * X[i, j - 1] for j, c in coefs.items())
        y[i] = mean + sd * e[i]
        prev = y[i]
    betas = [
        {"intercept": b[0], **{f"x{j}": c for j, c in b[1].items()}, "lag1": _EX3_RHO}
        for b in _EX3_SEGMENTS
    ]
    active = sorted({j for _, coefs, _ in _EX3_SEGMENTS for j in coefs}) + [p + 1]
    truth = GroundTruth(
        true_changepoints=[e + 1 for e in _EX3_ENDS[:-1]],
        true_sigma_per_segment=[s for _, _, s in _EX3_SEGMENTS],
        true_active_set=active,
        true_beta_per_segment=betas,
        rho=_EX3_RHO,
        meta={"example": 3, "seed": seed, "n": n, "p": p, "lag_column": p + 1},
    )
    return Dataset(y=y, X=X, ar_lag=True, meta={"example": 3, "seed": seed}), truth


def generate_example(example: int, seed: int) -> tuple[Dataset, GroundTruth]:
    gens = {1: gen_example1, 2: gen_example2, 3: gen_example3}
    if example not in gens:
        raise ValueError(f"unknown example {example}; choose 1, 2 or 3")
    return gens[example](seed)


# ---------------------------------------------------------------------------
# CSV input / output
# ---------------------------------------------------------------------------


@dataclass
class CsvSchema:
    """Column mapping and transformations for external series.

    ``covariates=None`` takes every non-response column in file order; an
    empty list gives a covariate-free dataset.  The square-root transform is
    applied before standardization; both are recorded in the dataset
    metadata.
    """

    response: str = "y"
    covariates: list[str] | None = None
    standardize: bool = False
    sqrt_transform: bool = False
    ar_lag: bool = False


def load_csv(path, schema: CsvSchema | None = None) -> Dataset:
    """Read a UTF-8, header-required CSV into a dataset.

    Raises SchemaError when named columns are missing and ParseError with the
    1-based data row and column name when a cell is not numeric.
    """
    schema = schema or CsvSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if schema.response not in header:
            raise SchemaError(f"{path}: missing response column {schema.response!r}")
        cov_names = (
            [h for h in header if h != schema.response]
            if schema.covariates is None
            else list(schema.covariates)
        )
        missing = [c for c in cov_names if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing covariate columns {missing}")
        idx = {name: header.index(name) for name in [schema.response] + cov_names}
        y_rows: list[float] = []
        x_rows: list[list[float]] = []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            vals = {}
            for name, col in idx.items():
                if col >= len(row):
                    raise ParseError(
                        f"{path}: row {rownum} has no value for column {name!r}",
                        row=rownum,
                        column=name,
                    )
                cell = row[col].strip()
                try:
                    vals[name] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {rownum}, column {name!r}: not a number: {cell!r}",
                        row=rownum,
                        column=name,
                    ) from None
            y_rows.append(vals[schema.response])
            x_rows.append([vals[c] for c in cov_names])

    y = np.asarray(y_rows)
    meta = {"source": str(path), "standardize": schema.standardize,
            "sqrt_transform": schema.sqrt_transform}
    if schema.sqrt_transform:
        if np.any(y < 0):
            raise ParseError(f"{path}: square-root transform needs nonnegative responses")
        y = np.sqrt(y)
    if schema.standardize:
        mu = float(np.mean(y))
        sd = float(np.std(y, ddof=0))
        if sd == 0:
            raise ParseError(f"{path}: cannot standardize a constant response")
        y = (y - mu) / sd
        meta["standardize_center"] = mu
        meta["standardize_scale"] = sd
    X = np.asarray(x_rows) if cov_names else None
    if X is not None and X.shape[1] == 0:
        X = None
    return Dataset(y=y, X=X, ar_lag=schema.ar_lag, meta=meta)


def write_dataset_csv(path, dataset: Dataset) -> None:
    """Write y plus x1..xp columns with full-precision floats."""
    p_x = 0 if dataset.X is None else dataset.X.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(p_x)])
        for i in range(dataset.n):
            row = [repr(float(dataset.y[i]))]
            if p_x:
                row += [repr(float(v)) for v in dataset.X[i]]
            writer.writerow(row)
