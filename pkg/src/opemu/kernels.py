"""Separable power-exponential residual correlation.

The input kernel is a product of one-dimensional power-exponential terms
exp(-(|dx|/length)^p), one per input dimension; the output (time) kernel is
a single such term. The full residual correlation over (input, time) pairs
is their product, so the training correlation matrix is the Kronecker
product of an n x n input matrix and a q x q output matrix and is never
assembled densely.

The default exponent is 3/2: smooth, but not the infinitely smooth p=2
squared-exponential. A small jitter is added to each factor's diagonal
before factorization; dense time grids make the output factor nearly
singular without it.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor

from .design import Design
from .errors import NumericalDegeneracyError

DEFAULT_JITTER = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Correlation lengths (one per input dimension, one for time) and exponent."""

    input_lengths: tuple
    output_length: float
    exponent: float = 1.5

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.input_lengths))
        if any(v <= 0 for v in lengths) or self.output_length <= 0:
            raise ValueError("correlation lengths must be strictly positive")
        if not 0.0 < self.exponent <= 2.0:
            raise ValueError(f"exponent must lie in (0, 2], got {self.exponent}")
        object.__setattr__(self, "input_lengths", lengths)
        object.__setattr__(self, "output_length", float(self.output_length))

    @property
    def lengths(self) -> np.ndarray:
        """All lengths as one vector, inputs first, time last."""
        return np.array(self.input_lengths + (self.output_length,))


def input_correlation(r1, r2, spec: KernelSpec) -> float:
    """Product power-exponential correlation between two input points."""
    r1 = np.asarray(r1, dtype=float).ravel()
    r2 = np.asarray(r2, dtype=float).ravel()
    lengths = np.asarray(spec.input_lengths)
    z = (np.abs(r1 - r2) / lengths) ** spec.exponent
    return float(np.exp(-z.sum()))


def output_correlation(t1: float, t2: float, spec: KernelSpec) -> float:
    """Power-exponential correlation between two time points."""
    return float(np.exp(-((abs(t1 - t2) / spec.output_length) ** spec.exponent)))


def input_correlation_matrix(points_a, points_b, spec: KernelSpec) -> np.ndarray:
    """Cross-correlation matrix between two input point sets (no jitter)."""
    a = np.atleast_2d(np.asarray(points_a, dtype=float))
    b = np.atleast_2d(np.asarray(points_b, dtype=float))
    lengths = np.asarray(spec.input_lengths)
    out = np.zeros((a.shape[0], b.shape[0]))
    for j in range(a.shape[1]):
        out += (np.abs(a[:, j, None] - b[None, :, j]) / lengths[j]) ** spec.exponent
    return np.exp(-out)


def output_correlation_matrix(times_a, times_b, spec: KernelSpec) -> np.ndarray:
    """Cross-correlation matrix between two time sets (no jitter)."""
    ta = np.asarray(times_a, dtype=float).ravel()
    tb = np.asarray(times_b, dtype=float).ravel()
    d = np.abs(ta[:, None] - tb[None, :]) / spec.output_length
    return np.exp(-(d ** spec.exponent))


def input_length_derivatives(points, spec: KernelSpec) -> list:
    """d K_input / d length, one matrix per input dimension.

    For k(d) = exp(-sum_j (d_j/l_j)^p), the derivative w.r.t. l_j is
    K * p * d_j^p / l_j^(p+1); the jittered diagonal has zero derivative.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    K = input_correlation_matrix(pts, pts, spec)
    p = spec.exponent
    derivs = []
    for j, lj in enumerate(spec.input_lengths):
        d = np.abs(pts[:, j, None] - pts[None, :, j])
        derivs.append(K * p * d ** p / lj ** (p + 1))
    return derivs


def output_length_derivative(times, spec: KernelSpec) -> np.ndarray:
    """d K_output / d length for the time kernel."""
    t = np.asarray(times, dtype=float).ravel()
    K = output_correlation_matrix(t, t, spec)
    p = spec.exponent
    d = np.abs(t[:, None] - t[None, :])
    return K * p * d ** p / spec.output_length ** (p + 1)


@dataclass(frozen=True)
class KernelMatrices:
    """Jittered per-factor correlation matrices with cached Cholesky factors."""

    input_matrix: np.ndarray
    output_matrix: np.ndarray
    jitter: float
    input_chol: tuple
    output_chol: tuple

    @property
    def diag_at_zero(self) -> float:
        """Prior correlation of a point with itself, nugget included."""
        return (1.0 + self.jitter) ** 2

    def logdet(self) -> tuple:
        """(log|K_input|, log|K_output|) from the cached factors."""
        ld_r = 2.0 * np.sum(np.log(np.diag(self.input_chol[0])))
        ld_s = 2.0 * np.sum(np.log(np.diag(self.output_chol[0])))
        return float(ld_r), float(ld_s)


def _factor(matrix: np.ndarray, name: str) -> tuple:
    try:
        c, low = cho_factor(matrix, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(name, str(exc)) from exc
    return c, low


def kernel_matrices(
    design: Design, time_grid, spec: KernelSpec, jitter: float = DEFAULT_JITTER
) -> KernelMatrices:
    """Build and factorize both correlation matrices.

    Raises :class:`NumericalDegeneracyError` naming the offending factor if
    Cholesky fails even after jitter (e.g. duplicated design points with
    jitter=0).
    """
    if jitter < 0:
        raise ValueError(f"jitter must be non-negative, got {jitter}")
    grid = np.asarray(time_grid, dtype=float).ravel()
    Kr = input_correlation_matrix(design.points, design.points, spec)
    Ks = output_correlation_matrix(grid, grid, spec)
    Kr[np.diag_indices_from(Kr)] += jitter
    Ks[np.diag_indices_from(Ks)] += jitter
    return KernelMatrices(
        input_matrix=Kr,
        output_matrix=Ks,
        jitter=float(jitter),
        input_chol=_factor(Kr, "the input correlation matrix"),
        output_chol=_factor(Ks, "the output correlation matrix"),
    )
