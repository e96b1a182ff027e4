"""Leave-one-out diagnostics and accuracy metrics.

Each design point is held out in turn and predicted, over the full time
grid, by an emulator refitted to the remaining points. Correlation lengths
stay frozen at the full-data values by default (re-optimizing per fold is
available but 40x slower and not required for the diagnostic's purpose).

Summary metrics per fold: RMSE against the held-out series, mean 95%
credible-interval length (MCIL), and empirical CI coverage. The report
also carries each point's mean Euclidean distance to the rest of the
design (MED, physical units) and the Pearson correlations of MED with
RMSE and MCIL, which quantify how isolation in the design degrades
predictions.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import squareform, pdist

from .design import Design
from .emulator import (
    NigPrior,
    PredictiveSeries,
    TrainingSet,
    credible_interval,
    fit,
)
from .errors import NumericalDegeneracyError, OptimizationFailure
from .ioutil import atomic_write_text, fmt, meta_lines
from .kernels import DEFAULT_JITTER, KernelSpec


def rmse(observed, predicted) -> float:
    """Root mean square error between two equal-length series."""
    obs = np.asarray(observed, dtype=float).ravel()
    pred = np.asarray(predicted, dtype=float).ravel()
    if obs.size != pred.size:
        raise ValueError(f"length mismatch: {obs.size} observed vs {pred.size} predicted")
    if obs.size == 0:
        raise ValueError("series must contain at least one value")
    return float(np.sqrt(np.mean((pred - obs) ** 2)))


def med(design: Design, unit: bool = False) -> np.ndarray:
    """Mean Euclidean distance from each point to the other n-1 points.

    Physical coordinates by default (the reported diagnostic); unit-scale
    available for design work.
    """
    pts = design.unit_points if unit else design.points
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least two design points")
    dist = squareform(pdist(pts))
    return dist.sum(axis=1) / (n - 1)


def mcil(series: PredictiveSeries, level: float = 0.95) -> float:
    """Mean credible-interval length across the series' time points."""
    lo, hi = credible_interval(series, level)
    return float(np.mean(hi - lo))


@dataclass
class LooDiagnostic:
    """One fold: held-out observations vs the refitted emulator's prediction."""

    index: int
    observed: np.ndarray
    series: PredictiveSeries
    rmse: float
    mcil: float
    coverage_95: float


@dataclass
class DiagnosticsReport:
    """All folds plus design-geometry context and summary correlations."""

    diagnostics: list
    med: np.ndarray
    corr_med_rmse: float
    corr_med_mcil: float
    level: float
    failures: list = field(default_factory=list)

    @property
    def pooled_coverage(self) -> float:
        """Fraction of all held-out values inside their credible interval."""
        inside = sum(d.coverage_95 * d.observed.size for d in self.diagnostics)
        total = sum(d.observed.size for d in self.diagnostics)
        return inside / total if total else float("nan")

    def rmse_values(self) -> np.ndarray:
        return np.array([d.rmse for d in self.diagnostics])

    def mcil_values(self) -> np.ndarray:
        return np.array([d.mcil for d in self.diagnostics])


def _drop_point(train: TrainingSet, i: int) -> TrainingSet:
    keep = np.arange(train.n) != i
    design = Design(
        points=train.design.points[keep],
        unit_points=train.design.unit_points[keep],
        space=train.design.space,
        seed=train.design.seed,
    )
    return TrainingSet(design, train.time_grid, train.outputs[keep])


def loo(
    train: TrainingSet,
    input_basis,
    output_basis,
    kernel: KernelSpec,
    prior: NigPrior,
    jitter: float = DEFAULT_JITTER,
    level: float = 0.95,
    threads: int = 1,
    refit_lengths=None,
) -> DiagnosticsReport:
    """Leave-one-out validation over all n design points.

    ``refit_lengths`` is an optional callable mapping a fold's TrainingSet
    to a KernelSpec, enabling per-fold re-optimization; by default the
    given kernel is used unchanged for every fold. Folds are independent
    and may run on a thread pool; assembly order is by fold index either
    way. A fold that fails numerically is recorded and skipped.
    """
    if train.n < 3:
        raise ValueError(f"leave-one-out needs at least 3 points, got {train.n}")

    def run_fold(i: int):
        subset = _drop_point(train, i)
        spec = refit_lengths(subset) if refit_lengths is not None else kernel
        model = fit(prior, input_basis, output_basis, spec, subset, jitter)
        series = model.predict(train.design.points[i])
        observed = train.outputs[i]
        lo, hi = credible_interval(series, level)
        inside = np.mean((observed >= lo) & (observed <= hi))
        return LooDiagnostic(
            index=i,
            observed=observed,
            series=series,
            rmse=rmse(observed, series.location),
            mcil=mcil(series, level),
            coverage_95=float(inside),
        )

    diagnostics = []
    failures = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_fold, i) for i in range(train.n)]
            outcomes = []
            for i, fut in enumerate(futures):
                try:
                    outcomes.append(fut.result())
                except (NumericalDegeneracyError, OptimizationFailure) as exc:
                    failures.append({"index": i, "error": str(exc)})
            diagnostics = sorted(outcomes, key=lambda d: d.index)
    else:
        for i in range(train.n):
            try:
                diagnostics.append(run_fold(i))
            except (NumericalDegeneracyError, OptimizationFailure) as exc:
                failures.append({"index": i, "error": str(exc)})

    distances = med(train.design)
    ok = [d.index for d in diagnostics]
    if len(ok) >= 2:
        corr_rmse = float(np.corrcoef(distances[ok], [d.rmse for d in diagnostics])[0, 1])
        corr_mcil = float(np.corrcoef(distances[ok], [d.mcil for d in diagnostics])[0, 1])
    else:
        corr_rmse = corr_mcil = float("nan")
    return DiagnosticsReport(
        diagnostics=diagnostics,
        med=distances,
        corr_med_rmse=corr_rmse,
        corr_med_mcil=corr_mcil,
        level=level,
        failures=failures,
    )


# -- exports -------------------------------------------------------------


def save_fold_csv(diag: LooDiagnostic, path: str, level: float = 0.95, meta=None):
    """Per-fold series for external plotting: observed vs predictive band."""
    lo, hi = credible_interval(diag.series, level)
    lines = meta_lines(meta)
    lines.append("time,observed,location,lo95,hi95")
    for row in zip(diag.series.times, diag.observed, diag.series.location, lo, hi):
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_report_json(report: DiagnosticsReport, path: str, meta=None):
    doc = {
        "meta": meta or {},
        "level": report.level,
        "pooled_coverage": report.pooled_coverage,
        "corr_med_rmse": report.corr_med_rmse,
        "corr_med_mcil": report.corr_med_mcil,
        "folds": [
            {
                "index": d.index,
                "rmse": d.rmse,
                "mcil": d.mcil,
                "coverage": d.coverage_95,
                "med": report.med[d.index],
            }
            for d in report.diagnostics
        ],
        "failures": report.failures,
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")
