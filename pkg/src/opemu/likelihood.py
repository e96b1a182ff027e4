"""Marginal likelihood of the correlation lengths, and prior hyperparameters.

The stacked training vector y = vec(F) is marginally Gaussian,

    y ~ Normal(0, C),    C = tau * (K + sigma2 * Q Q'),

with K the Kronecker-structured residual correlation and Q the outer-product
regressor matrix. The log marginal likelihood

    L = -1/2 y' C^-1 y - 1/2 log|C| - (nq/2) log(2 pi)

and its analytic gradient over (input lengths..., output length, tau) are
evaluated through the per-factor Cholesky decompositions plus the
matrix-inversion and determinant lemmas for the rank-nu regression term;
the nq x nq matrix is never formed. tau enters only as a device to make
the maximization well-posed; its estimate is reported but not used by the
conjugate update.

Correlation lengths are estimated by multi-start quasi-Newton ascent
(L-BFGS-B on the negative likelihood) in log-parameter space, which both
enforces positivity and makes the box bounds scale-free. Starting points
come from a seeded Latin Hypercube over the log bounds, so results are
deterministic given the seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .basis import InputBasis, OutputBasis
from .design import DesignSpace, lhd
from .emulator import NigPrior, TrainingSet
from .errors import DataError, NumericalDegeneracyError, OptimizationFailure
from .kernels import DEFAULT_JITTER, KernelSpec

_BARRIER = 1e25


@dataclass
class MarginalLikelihoodState:
    """Result of a likelihood evaluation or maximization."""

    input_lengths: tuple
    output_length: float
    tau: float
    value: float
    gradient: np.ndarray
    trace: list = field(default_factory=list)
    starts: list = field(default_factory=list)

    def kernel_spec(self, exponent: float = 1.5) -> KernelSpec:
        return KernelSpec(self.input_lengths, self.output_length, exponent)


@dataclass
class HyperparamEstimate:
    """Moment-matched NIG hyperparameters (or user-supplied overrides)."""

    size: int
    sigma2: float
    dof: float
    scale: float
    provenance: str = "estimated"

    @property
    def mean(self) -> np.ndarray:
        return np.zeros(self.size)

    def to_prior(self) -> NigPrior:
        return NigPrior.isotropic(self.size, self.sigma2, self.dof, self.scale)


class _Workspace:
    """Caches everything that does not depend on the correlation lengths."""

    def __init__(self, train, input_basis, output_basis, sigma2, exponent, jitter):
        self.F = train.outputs
        self.n, self.q = self.F.shape
        self.Gr = input_basis.evaluate_many(train.design.points)
        self.Gs = output_basis.evaluate_many(train.time_grid)
        self.nu = self.Gr.shape[1] * self.Gs.shape[1]
        self.sigma2 = float(sigma2)
        self.exponent = float(exponent)
        self.jitter = float(jitter)
        pts = train.design.points
        self.input_gaps = [
            np.abs(pts[:, j, None] - pts[None, :, j]) for j in range(pts.shape[1])
        ]
        grid = train.time_grid
        self.output_gap = np.abs(grid[:, None] - grid[None, :])
        self.k = pts.shape[1]

    def evaluate(self, lengths, tau, want_grad=False):
        """Log marginal likelihood (and gradient) at the given parameters."""
        lengths = np.asarray(lengths, dtype=float)
        tau = float(tau)
        p = self.exponent
        n, q, nu = self.n, self.q, self.nu

        expo_r = np.zeros((n, n))
        for j in range(self.k):
            expo_r += (self.input_gaps[j] / lengths[j]) ** p
        Kr0 = np.exp(-expo_r)
        Ks0 = np.exp(-((self.output_gap / lengths[-1]) ** p))
        Kr = Kr0 + self.jitter * np.eye(n)
        Ks = Ks0 + self.jitter * np.eye(q)
        try:
            chol_r = cho_factor(Kr, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError("the input correlation matrix", str(exc))
        try:
            chol_s = cho_factor(Ks, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError("the output correlation matrix", str(exc))

        KrGr = cho_solve(chol_r, self.Gr, check_finite=False)
        KsGs = cho_solve(chol_s, self.Gs, check_finite=False)
        Ar = self.Gr.T @ KrGr
        As = self.Gs.T @ KsGs
        S = np.kron(Ar, As)
        S[np.diag_indices_from(S)] += 1.0 / self.sigma2
        S = 0.5 * (S + S.T)
        try:
            chol_S = cho_factor(S, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError("the regression capacitance matrix", str(exc))

        W0 = cho_solve(chol_r, self.F, check_finite=False)
        W0 = cho_solve(chol_s, W0.T, check_finite=False).T
        b = (self.Gr.T @ W0 @ self.Gs).ravel()
        Sb = cho_solve(chol_S, b, check_finite=False)
        quad_K = float(np.sum(self.F * W0))
        quad_M = quad_K - float(b @ Sb)

        ld_r = 2.0 * np.sum(np.log(np.diag(chol_r[0])))
        ld_s = 2.0 * np.sum(np.log(np.diag(chol_s[0])))
        ld_S = 2.0 * np.sum(np.log(np.diag(chol_S[0])))
        ld_M = q * ld_r + n * ld_s + nu * math.log(self.sigma2) + ld_S

        value = (
            -0.5 * quad_M / tau
            - 0.5 * (n * q * math.log(tau) + ld_M)
            - 0.5 * n * q * math.log(2.0 * math.pi)
        )
        if not want_grad:
            return value, None

        # beta = M^-1 y reshaped to n x q
        Z = Sb.reshape(self.Gr.shape[1], self.Gs.shape[1])
        B = W0 - KrGr @ Z @ KsGs.T

        Kr_inv = cho_solve(chol_r, np.eye(n), check_finite=False)
        Ks_inv = cho_solve(chol_s, np.eye(q), check_finite=False)
        S_inv = cho_solve(chol_S, np.eye(nu), check_finite=False)

        grad = np.empty(self.k + 2)
        for j in range(self.k):
            dKr = Kr0 * (p * self.input_gaps[j] ** p / lengths[j] ** (p + 1))
            term1 = float(np.sum(B * (dKr @ B @ Ks))) / (2.0 * tau)
            proj = KrGr.T @ dKr @ KrGr
            trace = q * float(np.sum(Kr_inv * dKr)) - float(
                np.sum(S_inv * np.kron(proj, As))
            )
            grad[j] = term1 - 0.5 * trace
        dKs = Ks0 * (p * self.output_gap ** p / lengths[-1] ** (p + 1))
        term1 = float(np.sum(B * (Kr @ B @ dKs))) / (2.0 * tau)
        proj = KsGs.T @ dKs @ KsGs
        trace = n * float(np.sum(Ks_inv * dKs)) - float(
            np.sum(S_inv * np.kron(Ar, proj))
        )
        grad[self.k] = term1 - 0.5 * trace
        grad[self.k + 1] = 0.5 * quad_M / tau**2 - 0.5 * n * q / tau
        return value, grad


def log_marginal_likelihood(
    train: TrainingSet,
    input_basis: InputBasis,
    output_basis: OutputBasis,
    lengths,
    tau: float,
    sigma2: float,
    exponent: float = 1.5,
    jitter: float = DEFAULT_JITTER,
) -> float:
    """Log marginal likelihood at correlation lengths (inputs..., time).

    ``lengths`` has k+1 entries: one per input dimension plus the output
    (time) length.
    """
    _check_positive(lengths, tau, sigma2)
    ws = _Workspace(train, input_basis, output_basis, sigma2, exponent, jitter)
    value, _ = ws.evaluate(lengths, tau)
    return value


def log_marginal_likelihood_gradient(
    train: TrainingSet,
    input_basis: InputBasis,
    output_basis: OutputBasis,
    lengths,
    tau: float,
    sigma2: float,
    exponent: float = 1.5,
    jitter: float = DEFAULT_JITTER,
) -> np.ndarray:
    """Analytic gradient over (input lengths..., output length, tau)."""
    _check_positive(lengths, tau, sigma2)
    ws = _Workspace(train, input_basis, output_basis, sigma2, exponent, jitter)
    _, grad = ws.evaluate(lengths, tau, want_grad=True)
    return grad


def _check_positive(lengths, tau, sigma2):
    if np.any(np.asarray(lengths, dtype=float) <= 0):
        raise ValueError("correlation lengths must be strictly positive")
    if tau <= 0 or sigma2 <= 0:
        raise ValueError("tau and sigma2 must be strictly positive")


def default_length_bounds(space: DesignSpace, t_span: float) -> list:
    """Per-parameter search box: [1e-2, 1e2] times the dimension's width."""
    bounds = [(1e-2 * w, 1e2 * w) for w in space.widths]
    bounds.append((1e-2 * t_span, 1e2 * t_span))
    return bounds


def optimize_correlation_lengths(
    train: TrainingSet,
    input_basis: InputBasis,
    output_basis: OutputBasis,
    sigma2: float,
    init=None,
    bounds=None,
    tau_bounds=None,
    restarts: int = 5,
    seed: int = 0,
    exponent: float = 1.5,
    jitter: float = DEFAULT_JITTER,
    collect_trace: bool = False,
) -> MarginalLikelihoodState:
    """Maximize the marginal likelihood over correlation lengths and tau.

    Multi-start L-BFGS-B in log space. If ``init`` is given (k+2 values:
    lengths then tau) it seeds the first start; the rest come from a Latin
    Hypercube over the log bounds with the given seed. The best final value
    wins, ties broken by the lowest start index. Raises
    :class:`OptimizationFailure` if every start fails.
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    space = train.design.space
    t_span = float(train.time_grid[-1] - train.time_grid[0]) or 1.0
    if bounds is None:
        bounds = default_length_bounds(space, t_span)
    if len(bounds) != space.k + 1:
        raise ValueError(f"need {space.k + 1} length bounds, got {len(bounds)}")
    if tau_bounds is None:
        pooled = float(np.var(train.outputs))
        base = pooled if pooled > 0 else 1.0
        tau_bounds = (1e-4 * base, 1e4 * base)
    all_bounds = list(bounds) + [tuple(tau_bounds)]
    log_bounds = [(math.log(lo), math.log(hi)) for lo, hi in all_bounds]

    ws = _Workspace(train, input_basis, output_basis, sigma2, exponent, jitter)
    trace: list = []

    def objective(theta, start_idx, counter):
        params = np.exp(theta)
        try:
            value, grad = ws.evaluate(params[:-1], params[-1], want_grad=True)
        except NumericalDegeneracyError:
            return _BARRIER, np.zeros_like(theta)
        if not np.isfinite(value):
            return _BARRIER, np.zeros_like(theta)
        # chain rule: d/d log(theta) = theta * d/d theta
        grad_log = np.exp(theta) * grad
        if collect_trace:
            counter[0] += 1
            trace.append(
                (start_idx, counter[0], value, float(np.linalg.norm(grad_log)))
                + tuple(np.exp(theta))
            )
        return -value, -grad_log

    starts = _starting_points(log_bounds, restarts, seed, init)
    results = []
    diagnostics = []
    for idx, theta0 in enumerate(starts):
        counter = [0]
        try:
            res = minimize(
                objective,
                theta0,
                args=(idx, counter),
                method="L-BFGS-B",
                jac=True,
                bounds=log_bounds,
                options={"maxiter": 200, "ftol": 1e-12, "gtol": 1e-8},
            )
            ok = np.isfinite(res.fun) and res.fun < _BARRIER / 2
            diagnostics.append(
                {
                    "start": idx,
                    "x0": np.exp(theta0).tolist(),
                    "value": float(-res.fun),
                    "iterations": int(res.nit),
                    "converged": bool(res.success),
                    "message": str(res.message),
                }
            )
            if ok:
                results.append((idx, res))
        except NumericalDegeneracyError as exc:
            diagnostics.append(
                {"start": idx, "x0": np.exp(theta0).tolist(), "error": str(exc)}
            )
    if not results:
        raise OptimizationFailure(
            "all optimizer restarts failed to produce a finite likelihood",
            diagnostics,
        )
    best_idx, best = min(results, key=lambda item: (item[1].fun, item[0]))
    params = np.exp(best.x)
    value, grad = ws.evaluate(params[:-1], params[-1], want_grad=True)
    return MarginalLikelihoodState(
        input_lengths=tuple(params[: space.k]),
        output_length=float(params[space.k]),
        tau=float(params[-1]),
        value=float(value),
        gradient=grad,
        trace=trace,
        starts=diagnostics,
    )


def _starting_points(log_bounds, restarts, seed, init):
    """First start from ``init`` when given; the rest from a seeded LHD."""
    starts = []
    if init is not None:
        init = np.asarray(init, dtype=float)
        if init.size != len(log_bounds):
            raise ValueError(f"init needs {len(log_bounds)} entries, got {init.size}")
        starts.append(np.log(init))
    needed = restarts - len(starts)
    if needed > 0:
        space = DesignSpace(bounds=log_bounds)
        sample = lhd(max(needed, 2), space, seed).points[:needed]
        starts.extend(np.asarray(row) for row in sample)
    return starts


def estimate_hyperparams(
    train: TrainingSet,
    input_basis: InputBasis,
    output_basis: OutputBasis,
    dof: float = 3.0,
    split: float = 0.5,
) -> HyperparamEstimate:
    """Moment-match the NIG hyperparameters to the pooled training output.

    The pooled variance of all training outputs is apportioned between the
    regression term (fraction ``split``) and the residual process: with
    g2 the mean squared norm of the regressor rows,

        sigma2 = split * var * (dof - 2) / (dof * g2)
        scale  = (1 - split) * var * (dof - 2)

    so the implied prior predictive variance is of the order of the pooled
    variance (requires dof > 2). Values are overridable in the run config;
    the estimate is a starting point, not an inference.
    """
    if dof <= 2.0:
        raise ValueError(
            f"moment matching needs dof > 2 (prior variance undefined), got {dof}"
        )
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must lie strictly between 0 and 1, got {split}")
    pooled_var = float(np.var(train.outputs))
    if pooled_var <= 0.0:
        raise DataError("training outputs are constant; cannot match moments")
    Gr = input_basis.evaluate_many(train.design.points)
    Gs = output_basis.evaluate_many(train.time_grid)
    g2 = float(np.mean(np.sum(Gr**2, axis=1)) * np.mean(np.sum(Gs**2, axis=1)))
    sigma2 = split * pooled_var * (dof - 2.0) / (dof * g2)
    scale = (1.0 - split) * pooled_var * (dof - 2.0)
    return HyperparamEstimate(
        size=input_basis.size * output_basis.size,
        sigma2=sigma2,
        dof=float(dof),
        scale=scale,
        provenance="estimated",
    )
