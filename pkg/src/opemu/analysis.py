"""Emulator-driven sensitivity sweeps and Monte-Carlo uncertainty analysis.

A sweep varies one input over a grid while the others stay fixed, tracking
the maximum predicted elevation (and interval width) along the curve. The
uncertainty analysis pushes Beta-distributed inputs through the emulator
and summarizes per-sample maximum elevation and mean CI length as
empirical quantiles.

Reproducibility: Beta draws use inverse-CDF transforms of a single seeded
uniform stream (one column per dimension, drawn in one block, so results
do not depend on dimension processing order), and quantiles use the
type-7 order-statistic convention (NumPy's default linear interpolation).
"""

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .emulator import OpeModel, PredictiveSeries, credible_interval
from .ioutil import atomic_write_text, fmt, meta_lines
from .validation import mcil

QUANTILE_LEVELS = (1.0, 5.0, 50.0, 95.0, 99.0)


def max_elevation(series: PredictiveSeries, pessimistic: bool = False, level: float = 0.95) -> float:
    """Largest predicted elevation over the series.

    Uses the predictive location; ``pessimistic=True`` instead takes the
    maximum of the upper credible bound for hazard-style headroom.
    """
    if series.location.size == 0:
        raise ValueError("series is empty")
    if pessimistic:
        _, hi = credible_interval(series, level)
        return float(hi.max())
    return float(series.location.max())


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep: vary ``dim`` over [lower, upper], fix the rest.

    ``fixed`` holds values for every dimension (the swept entry is ignored);
    the restricted interval must sit inside the model's design box.
    """

    dim: int
    lower: float
    upper: float
    fixed: tuple
    resolution: int = 21

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        if not self.lower < self.upper:
            raise ValueError("sweep interval must have lower < upper")


@dataclass
class SweepCurve:
    """Sweep result: the varied values and per-point summary statistics."""

    dim: int
    values: np.ndarray
    max_elev: np.ndarray
    mean_ci_length: np.ndarray
    mean_scale: float
    n_evaluations: int


def sensitivity_sweep(
    model: OpeModel, spec: SweepSpec, level: float = 0.95, pessimistic: bool = False
) -> SweepCurve:
    """Evaluate the emulator along the sweep grid (training time grid)."""
    space = model.design.space
    if not (0 <= spec.dim < space.k):
        raise ValueError(f"sweep dimension {spec.dim} out of range for k={space.k}")
    lo_b, hi_b = space.bounds[spec.dim]
    if spec.lower < lo_b - 1e-12 or spec.upper > hi_b + 1e-12:
        raise ValueError(
            f"sweep interval [{spec.lower}, {spec.upper}] leaves the design box "
            f"[{lo_b}, {hi_b}] for {space.names[spec.dim]}"
        )
    fixed = np.asarray(spec.fixed, dtype=float)
    if fixed.size != space.k:
        raise ValueError(f"fixed values need {space.k} entries, got {fixed.size}")
    values = np.linspace(spec.lower, spec.upper, spec.resolution)
    maxima = np.empty(spec.resolution)
    widths = np.empty(spec.resolution)
    scales = np.empty(spec.resolution)
    for i, v in enumerate(values):
        point = fixed.copy()
        point[spec.dim] = v
        series = model.predict(point)
        maxima[i] = max_elevation(series, pessimistic=pessimistic, level=level)
        widths[i] = mcil(series, level)
        scales[i] = float(np.mean(series.scale))
    return SweepCurve(
        dim=spec.dim,
        values=values,
        max_elev=maxima,
        mean_ci_length=widths,
        mean_scale=float(np.mean(scales)),
        n_evaluations=int(spec.resolution),
    )


@dataclass(frozen=True)
class BetaInputSpec:
    """Per-dimension scaled Beta distributions: (alpha, beta, lower, upper)."""

    dims: tuple

    def __post_init__(self):
        dims = tuple((float(a), float(b), float(lo), float(hi)) for a, b, lo, hi in self.dims)
        for i, (a, b, lo, hi) in enumerate(dims):
            if a <= 0 or b <= 0:
                raise ValueError(f"dimension {i}: Beta shapes must be positive")
            if not lo < hi:
                raise ValueError(f"dimension {i}: need lower < upper")
        object.__setattr__(self, "dims", dims)

    @property
    def k(self) -> int:
        return len(self.dims)


def sample_beta(spec: BetaInputSpec, n: int, seed: int) -> np.ndarray:
    """n i.i.d. input draws, Beta per dimension mapped onto [lower, upper]."""
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    rng = np.random.default_rng(seed)
    uniforms = rng.random((n, spec.k))
    out = np.empty((n, spec.k))
    for j, (a, b, lo, hi) in enumerate(spec.dims):
        out[:, j] = lo + (hi - lo) * beta_dist.ppf(uniforms[:, j], a, b)
    return out


@dataclass
class QuantileSummary:
    """Empirical percentiles of one scalar statistic over the MC samples."""

    statistic: str
    levels: tuple
    values: np.ndarray
    n_samples: int
    seed: int


@dataclass
class UqResult:
    max_elevation: QuantileSummary
    mean_ci_length: QuantileSummary
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    samples: np.ndarray
    max_values: np.ndarray
    mcil_values: np.ndarray


def uq_monte_carlo(
    model: OpeModel,
    spec: BetaInputSpec,
    n: int = 1000,
    seed: int = 0,
    levels=QUANTILE_LEVELS,
    level: float = 0.95,
    bins: int = 30,
    threads: int = 1,
) -> UqResult:
    """Monte-Carlo uncertainty propagation through the emulator.

    Draws n inputs, predicts each on the training time grid, reduces each
    series to (max elevation, mean CI length), and reports their empirical
    percentiles plus histogram data for the maximum. Deterministic per
    (model, spec, n, seed) regardless of thread count.
    """
    if n < 100:
        warnings.warn(
            f"n={n} Monte-Carlo samples is low for stable tail quantiles",
            stacklevel=2,
        )
    inputs = sample_beta(spec, n, seed)

    def summarize(row):
        series = model.predict(row)
        return max_elevation(series), mcil(series, level)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(summarize, inputs))
    else:
        pairs = [summarize(row) for row in inputs]
    max_vals = np.array([p[0] for p in pairs])
    mcil_vals = np.array([p[1] for p in pairs])

    lv = tuple(float(x) for x in levels)
    max_summary = QuantileSummary(
        statistic="max-elevation",
        levels=lv,
        values=np.quantile(max_vals, np.array(lv) / 100.0),
        n_samples=n,
        seed=seed,
    )
    mcil_summary = QuantileSummary(
        statistic="mean-CI-length",
        levels=lv,
        values=np.quantile(mcil_vals, np.array(lv) / 100.0),
        n_samples=n,
        seed=seed,
    )
    counts, edges = np.histogram(max_vals, bins=bins)
    return UqResult(
        max_elevation=max_summary,
        mean_ci_length=mcil_summary,
        histogram_edges=edges,
        histogram_counts=counts,
        samples=inputs,
        max_values=max_vals,
        mcil_values=mcil_vals,
    )


# -- exports -------------------------------------------------------------


def save_sweep_csv(curve: SweepCurve, name: str, path: str, meta=None):
    lines = meta_lines(meta)
    lines.append(f"{name},max_elev,mcil")
    for row in zip(curve.values, curve.max_elev, curve.mean_ci_length):
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_quantiles_csv(result: UqResult, path: str, meta=None):
    lines = meta_lines(meta)
    lines.append("statistic," + ",".join(f"p{v:g}" for v in result.max_elevation.levels))
    for summary in (result.max_elevation, result.mean_ci_length):
        lines.append(summary.statistic + "," + ",".join(fmt(v) for v in summary.values))
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_quantiles_json(result: UqResult, path: str, meta=None):
    doc = {
        "meta": meta or {},
        "levels_percent": list(result.max_elevation.levels),
        "max_elevation": result.max_elevation.values.tolist(),
        "mean_ci_length": result.mean_ci_length.values.tolist(),
        "n_samples": result.max_elevation.n_samples,
        "seed": result.max_elevation.seed,
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def save_histogram_csv(result: UqResult, path: str, meta=None):
    lines = meta_lines(meta)
    lines.append("bin_lo,bin_hi,count")
    for lo, hi, c in zip(
        result.histogram_edges[:-1], result.histogram_edges[1:], result.histogram_counts
    ):
        lines.append(f"{fmt(lo)},{fmt(hi)},{int(c)}")
    atomic_write_text(path, "\n".join(lines) + "\n")
