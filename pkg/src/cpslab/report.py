"""Machine-readable run reports and plot-data emission.

Reports serialize to JSON with sorted keys and no NaN tokens, so a report
round-trips bit-identically through parse -> serialize.  Plot data goes out
as plain two-column (or long-format) CSV files consumable by any plotting
tool; no rendering dependency exists anywhere in the package.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gibbs import PosteriorSummary
from .model import Dataset


@dataclass
class RunReport:
    """Everything one command run produced, plus the resolved configuration."""

    config: dict
    provenance: dict
    summary: dict | None = None
    baseline: dict | None = None
    timings: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.summary:
            for key in ("cp_prob", "pip"):
                vals = self.summary.get(key, [])
                if any(v is not None and not 0.0 <= v <= 1.0 for v in vals):
                    raise ValueError(f"summary field {key} outside [0, 1]")

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "provenance": self.provenance,
            "summary": self.summary,
            "baseline": self.baseline,
            "timings": self.timings,
        }
        return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(
            config=d["config"],
            provenance=d["provenance"],
            summary=d.get("summary"),
            baseline=d.get("baseline"),
            timings=d.get("timings", {}),
        )


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def summary_to_dict(summary: PosteriorSummary) -> dict:
    """JSON-ready view of a posterior summary (NaN fitted values become null)."""
    map_cps = [int(i) + 1 for i in np.flatnonzero(summary.map_model.segmentation.indicators)]
    map_cols = [int(j) + 1 for j in np.flatnonzero(summary.map_model.mask.included)]
    return {
        "cp_prob": [float(v) for v in summary.cp_prob],
        "pip": [float(v) for v in summary.pip],
        "partition_count_dist": {str(k): float(v) for k, v in summary.partition_count_dist.items()},
        "fitted_mean": [_clean(float(v)) for v in summary.fitted_mean],
        "map_changepoints": map_cps,
        "map_covariates": map_cols,
        "map_score": _clean(float(summary.map_score)),
        "n_samples": int(summary.n_samples),
    }


def covariate_labels(dataset: Dataset) -> list[str]:
    """Labels for the selectable columns: x1..xp, then lag1 when present."""
    p_x = 0 if dataset.X is None else dataset.X.shape[1]
    labels = [f"x{j + 1}" for j in range(p_x)]
    if dataset.ar_lag:
        labels.append("lag1")
    return labels


def write_plot_files(out_dir, dataset: Dataset, summary: PosteriorSummary) -> list[str]:
    """Emit the four plot-data CSVs; returns the file names written.

    cp_prob.csv         index, probability of a block starting there
    fitted.csv          index, observed value, posterior fitted mean
    partition_hist.csv  block count, posterior probability
    pip.csv             covariate label, posterior inclusion probability
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "cp_prob.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "cp_prob"])
        for i, v in enumerate(summary.cp_prob, start=1):
            w.writerow([i, repr(float(v))])
    written.append(path.name)

    path = out_dir / "fitted.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "y", "fitted_mean"])
        for i in range(dataset.n):
            fv = summary.fitted_mean[i]
            w.writerow(
                [i + 1, repr(float(dataset.y[i])), "" if math.isnan(fv) else repr(float(fv))]
            )
    written.append(path.name)

    path = out_dir / "partition_hist.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n_blocks", "probability"])
        for count, prob in sorted(summary.partition_count_dist.items()):
            w.writerow([count, repr(float(prob))])
    written.append(path.name)

    path = out_dir / "pip.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["covariate", "pip"])
        for label, v in zip(covariate_labels(dataset), summary.pip):
            w.writerow([label, repr(float(v))])
    written.append(path.name)
    return written
