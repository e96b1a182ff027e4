"""Regression bases: shifted polynomials over inputs, Fourier terms over time.

The input set holds one shared constant plus a (linear, quadratic) pair per
dimension, each pair built on the coordinate mapped to [0, 1] and scaled so
the pair is orthonormal under the uniform weight on the unit interval:

    sqrt(3)*u      and      sqrt(5)*(4*u^2 - 3*u)

Note the pair is deliberately *not* orthogonal to the constant term; the
printed form is used as is, not re-derived as Legendre polynomials.

The output set holds a constant plus sin/cos pairs at a configurable list
of frequencies. The full regressor set is the outer product of the two,
which is only materialized on request (it has nu_r * nu_s columns).
"""

from dataclasses import dataclass

import numpy as np

from .design import Design, DesignSpace

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)

#: Oscillation frequencies used by the reference wave-elevation setup.
DEFAULT_FREQUENCIES = (1.0 / 6.0, 1.0 / 5.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0)


@dataclass(frozen=True)
class InputBasis:
    """Constant + per-dimension (linear, quadratic) polynomial pairs."""

    space: DesignSpace

    @property
    def size(self) -> int:
        return 1 + 2 * self.space.k

    def evaluate(self, r) -> np.ndarray:
        """Regressor vector at a single input point (physical units).

        Points outside the box are evaluated with the same polynomials
        (no clamping); extrapolation is flagged by the caller.
        """
        return self.evaluate_many(np.atleast_2d(np.asarray(r, dtype=float)))[0]

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Regressor matrix, one row per input point: shape (n, size)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.space.k:
            raise ValueError(
                f"points have {pts.shape[1]} coordinates, space has {self.space.k}"
            )
        u = self.space.to_unit(pts)
        n = pts.shape[0]
        out = np.empty((n, self.size))
        out[:, 0] = 1.0
        for j in range(self.space.k):
            uj = u[:, j]
            out[:, 1 + 2 * j] = SQRT3 * uj
            out[:, 2 + 2 * j] = SQRT5 * (4.0 * uj * uj - 3.0 * uj)
        return out


@dataclass(frozen=True)
class OutputBasis:
    """Constant + sin/cos pair per frequency, evaluated on the time axis."""

    frequencies: tuple = DEFAULT_FREQUENCIES

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies)
        if any(f <= 0 for f in freqs):
            raise ValueError("frequencies must be strictly positive")
        if len(set(freqs)) != len(freqs):
            raise ValueError("frequencies must be distinct")
        object.__setattr__(self, "frequencies", freqs)

    @property
    def size(self) -> int:
        return 1 + 2 * len(self.frequencies)

    def evaluate(self, t: float) -> np.ndarray:
        return self.evaluate_many([t])[0]

    def evaluate_many(self, times) -> np.ndarray:
        """Regressor matrix, one row per time point: shape (q, size)."""
        t = np.asarray(times, dtype=float).ravel()
        out = np.empty((t.size, self.size))
        out[:, 0] = 1.0
        for j, f in enumerate(self.frequencies):
            phase = 2.0 * np.pi * f * t
            out[:, 1 + 2 * j] = np.sin(phase)
            out[:, 2 + 2 * j] = np.cos(phase)
        return out


@dataclass(frozen=True)
class RegressorMatrixPair:
    """Per-factor regressor matrices whose Kronecker product is the full set.

    ``input_matrix`` is n x nu_r (design points), ``output_matrix`` is
    q x nu_s (time grid). The implicit full matrix has nu_r * nu_s columns
    and rows ordered with the input index outermost.
    """

    input_matrix: np.ndarray
    output_matrix: np.ndarray

    @property
    def columns(self) -> int:
        return self.input_matrix.shape[1] * self.output_matrix.shape[1]

    def full(self, max_elements: int = 10_000_000) -> np.ndarray:
        """Materialize the Kronecker product; guarded against large sizes."""
        n, q = self.input_matrix.shape[0], self.output_matrix.shape[0]
        if n * q * self.columns > max_elements:
            raise ValueError(
                f"full regressor matrix would have {n * q} x {self.columns} "
                "entries; raise max_elements to force materialization"
            )
        return np.kron(self.input_matrix, self.output_matrix)


def regressor_matrices(
    design: Design, time_grid, input_basis: InputBasis, output_basis: OutputBasis
) -> RegressorMatrixPair:
    """Evaluate both bases over a design and a time grid."""
    grid = np.asarray(time_grid, dtype=float).ravel()
    if design.points.shape[0] == 0:
        raise ValueError("design has no points")
    if grid.size == 0:
        raise ValueError("time grid is empty")
    return RegressorMatrixPair(
        input_matrix=input_basis.evaluate_many(design.points),
        output_matrix=output_basis.evaluate_many(grid),
    )
