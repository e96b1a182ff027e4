"""Training-data sources: a toy wave simulator, file ingestion, unit scaling.

The toy simulator is a closed-form damped oscillation standing in for an
expensive wave-elevation code. It is built so that every downstream check
has an analytic answer: the maximum elevation grows linearly with the
speed input, grows as the start position moves landward (more negative),
and the oscillation period lengthens with the spread-ratio input. Extra
input dimensions beyond the first three are ignored, which gives
sensitivity tests a knowingly inert parameter.
"""

from dataclasses import dataclass

import numpy as np

from .design import Design, DesignSpace
from .emulator import TrainingSet
from .errors import DataError
from .ioutil import atomic_write_text, fmt, meta_lines, read_table


@dataclass(frozen=True)
class ToyWaveParams:
    """Closed-form toy wave: amplitude, envelope, and period knobs."""

    damping: float = 0.05
    base_period: float = 3.0
    period_per_spread: float = 0.8
    position_gain: float = 0.3
    speed_gain: float = 1.0

    def __post_init__(self):
        if self.damping <= 0 or self.base_period <= 0:
            raise ValueError("damping and base_period must be strictly positive")


DEFAULT_TOY = ToyWaveParams()


def toy_simulate(r, times, params: ToyWaveParams = DEFAULT_TOY) -> np.ndarray:
    """Deterministic toy elevation series at input (position, speed, spread).

    zeta(t) = speed * (1 + 0.3 * (-position) / 2)
              * (1 - exp(-t)) * exp(-damping * t)
              * sin(2 pi t / (base_period + 0.8 * spread))

    Starts at exactly zero, stays bounded by the amplitude factor, and is
    bitwise reproducible. Coordinates beyond the third are ignored.
    """
    r = np.asarray(r, dtype=float).ravel()
    if r.size < 3:
        raise ValueError(f"toy simulator needs at least 3 inputs, got {r.size}")
    position, speed, spread = r[0], r[1], r[2]
    t = np.asarray(times, dtype=float).ravel()
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    amplitude = params.speed_gain * speed * (1.0 + params.position_gain * (-position) / 2.0)
    period = params.base_period + params.period_per_spread * spread
    envelope = (1.0 - np.exp(-t)) * np.exp(-params.damping * t)
    return amplitude * envelope * np.sin(2.0 * np.pi * t / period)


def toy_training_set(
    design: Design, time_grid, params: ToyWaveParams = DEFAULT_TOY
) -> TrainingSet:
    """Evaluate the toy simulator over a whole design."""
    grid = np.asarray(time_grid, dtype=float).ravel()
    outputs = np.vstack([toy_simulate(p, grid, params) for p in design.points])
    return TrainingSet(design=design, time_grid=grid, outputs=outputs)


# -- training-file round trip -------------------------------------------


def write_training_csv(train: TrainingSet, path: str, meta: dict | None = None) -> None:
    """Write a training set: input columns, then one ``t=<value>`` column per
    grid time; one row per design point. UTF-8, dot decimal, LF newlines."""
    lines = meta_lines(meta)
    header = list(train.design.space.names) + [f"t={fmt(t)}" for t in train.time_grid]
    lines.append(",".join(header))
    for inputs, outputs in zip(train.design.points, train.outputs):
        row = [fmt(v) for v in inputs] + [fmt(v) for v in outputs]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def ingest_runs(path: str, space: DesignSpace) -> TrainingSet:
    """Read simulator runs from the training CSV format.

    The header's leading cells name the input dimensions (they must match
    ``space``); the remaining ``t=...`` cells define the time grid, which is
    taken as authoritative (no resampling). Errors carry the offending
    row/column location.
    """
    header, rows, _ = read_table(path)
    if not header:
        raise DataError(f"{path}: empty file")
    k = space.k
    if tuple(header[:k]) != space.names:
        raise DataError(
            f"{path}: header starts with {header[:k]!r}, expected input columns "
            f"{list(space.names)!r}"
        )
    time_labels = header[k:]
    if not time_labels:
        raise DataError(f"{path}: no time-grid columns (expected headers like t=0.0)")
    grid = np.empty(len(time_labels))
    for j, label in enumerate(time_labels):
        if not label.startswith("t="):
            raise DataError(f"{path}: column {k + j} header {label!r} is not a time")
        try:
            grid[j] = float(label[2:])
        except ValueError as exc:
            raise DataError(f"{path}: unparseable time header {label!r}") from exc
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise DataError(f"{path}: time grid is not strictly increasing")
    if not rows:
        raise DataError(f"{path}: no data rows")

    points = np.empty((len(rows), k))
    outputs = np.empty((len(rows), grid.size))
    for i, row in enumerate(rows):
        if len(row) != k + grid.size:
            raise DataError(
                f"{path}: row {i} has {len(row)} fields, expected {k + grid.size}"
            )
        for j in range(k):
            try:
                points[i, j] = float(row[j])
            except ValueError as exc:
                raise DataError(
                    f"{path}: row {i}, column {space.names[j]}: "
                    f"bad value {row[j]!r}"
                ) from exc
        for j in range(grid.size):
            try:
                value = float(row[k + j])
            except ValueError as exc:
                raise DataError(
                    f"{path}: row {i}, column {time_labels[j]}: bad value "
                    f"{row[k + j]!r}"
                ) from exc
            if not np.isfinite(value):
                raise DataError(
                    f"{path}: non-finite value at row {i}, column {time_labels[j]}"
                )
            outputs[i, j] = value

    design = Design(
        points=points, unit_points=space.to_unit(points), space=space, seed=0
    )
    return TrainingSet(design=design, time_grid=grid, outputs=outputs)


# -- dimensional scaling -------------------------------------------------


@dataclass(frozen=True)
class DimensionalScaling:
    """Physical scales that map dimensional quantities to model units.

    length: characteristic horizontal slide length (m); slope: beach slope;
    thickness: maximum vertical slide thickness (m); width: characteristic
    slide width (m); gravity: m/s^2.
    """

    length: float
    slope: float
    thickness: float
    width: float
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("length", "slope", "thickness", "width", "gravity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


def nondimensionalize(x, y, t, u0, zeta, scaling: DimensionalScaling):
    """Map dimensional (x', y', t', u0', zeta') to model units.

    Returns (x, y, t, u0, zeta, c) with positions scaled by the slide
    length, time by sqrt(g*slope/length), speed by sqrt(length*g*slope),
    elevation by the slide thickness, and c the length-to-width ratio.
    """
    s = scaling
    time_rate = np.sqrt(s.gravity * s.slope / s.length)
    return (
        np.asarray(x, dtype=float) / s.length,
        np.asarray(y, dtype=float) / s.length,
        np.asarray(t, dtype=float) * time_rate,
        np.asarray(u0, dtype=float) / np.sqrt(s.length * s.gravity * s.slope),
        np.asarray(zeta, dtype=float) / s.thickness,
        s.length / s.width,
    )


def dimensionalize(x, y, t, u0, zeta, scaling: DimensionalScaling):
    """Inverse of :func:`nondimensionalize` (c is fixed by the scaling)."""
    s = scaling
    time_rate = np.sqrt(s.gravity * s.slope / s.length)
    return (
        np.asarray(x, dtype=float) * s.length,
        np.asarray(y, dtype=float) * s.length,
        np.asarray(t, dtype=float) / time_rate,
        np.asarray(u0, dtype=float) * np.sqrt(s.length * s.gravity * s.slope),
        np.asarray(zeta, dtype=float) * s.thickness,
    )
