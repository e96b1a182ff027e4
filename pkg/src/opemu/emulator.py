"""Conjugate Bayesian fitting of the separable multi-output emulator.

Model
-----
Training outputs form an n x q matrix F (n design points, q time points).
Stacked row-major with the input index outermost, y = vec(F) follows

    y = Q beta + eps,     Q = G_input (x) G_output          (Kronecker)
    beta | tau  ~ Normal(m, tau V)
    eps  | tau  ~ Normal(0, tau K),   K = K_input (x) K_output
    tau         ~ InverseGamma with density  tau^-(a/2 + 1) exp(-d / (2 tau))

With that parameterization ``a`` counts degrees of freedom directly and the
posterior is again of the same family with

    Vn^-1 = V^-1 + Q' K^-1 Q          an = a + n*q
    mn    = Vn (V^-1 m + Q' K^-1 y)   dn = d + res' K^-1 res + (mn-m)' V^-1 (mn-m)

where res = y - Q mn. Predictions at a new input r over any times are
Student-t with an degrees of freedom. Every K^-1 application goes through
the per-factor Cholesky decompositions; the n*q x n*q matrix is never formed.

Vectorization convention used throughout: for row-major vec,
(A (x) B) vec(X) = vec(A X B'); y = vec(F) and coefficient vectors reshape
to nu_r x nu_s matrices the same way.
"""

import hashlib
import json

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import t as student_t

from . import __version__
from .basis import InputBasis, OutputBasis, regressor_matrices
from .design import Design, DesignSpace
from .errors import DataError, NumericalDegeneracyError
from .ioutil import atomic_write_text
from .kernels import (
    DEFAULT_JITTER,
    KernelMatrices,
    KernelSpec,
    input_correlation_matrix,
    kernel_matrices,
    output_correlation_matrix,
)


class NigPrior:
    """Normal--Inverse-Gamma prior for the regression coefficients and tau.

    Parameters
    ----------
    mean : prior coefficient mean vector (length nu).
    cov : prior coefficient scale matrix V, or a scalar sigma2 for V = sigma2*I.
    dof : degrees of freedom a > 0.
    scale : tau scale d > 0.
    """

    def __init__(self, mean, cov, dof: float, scale: float):
        self.mean = np.asarray(mean, dtype=float).ravel()
        if np.ndim(cov) == 0:
            self.sigma2 = float(cov)
            if self.sigma2 <= 0:
                raise ValueError("sigma2 must be strictly positive")
            self.cov = self.sigma2 * np.eye(self.mean.size)
        else:
            self.sigma2 = None
            self.cov = np.asarray(cov, dtype=float)
            if self.cov.shape != (self.mean.size, self.mean.size):
                raise ValueError("cov shape does not match mean length")
            if not np.allclose(self.cov, self.cov.T, atol=1e-12):
                raise ValueError("cov must be symmetric")
        if dof <= 0 or scale <= 0:
            raise ValueError("dof and scale must be strictly positive")
        self.dof = float(dof)
        self.scale = float(scale)

    @classmethod
    def isotropic(cls, size: int, sigma2: float, dof: float, scale: float) -> "NigPrior":
        """Zero-mean prior with V = sigma2 * I."""
        return cls(np.zeros(size), sigma2, dof, scale)


class TrainingSet:
    """Design points, output time grid, and the n x q simulator outputs."""

    def __init__(self, design: Design, time_grid, outputs):
        self.design = design
        self.time_grid = np.asarray(time_grid, dtype=float).ravel()
        self.outputs = np.asarray(outputs, dtype=float)
        if self.outputs.shape != (design.n, self.time_grid.size):
            raise ValueError(
                f"outputs shape {self.outputs.shape} does not match "
                f"{design.n} design points x {self.time_grid.size} grid times"
            )
        if not np.all(np.isfinite(self.outputs)):
            i, j = np.argwhere(~np.isfinite(self.outputs))[0]
            raise DataError(
                f"non-finite output at row {i}, column t={float(self.time_grid[j])!r}"
            )
        if self.time_grid.size > 1 and not np.all(np.diff(self.time_grid) > 0):
            raise ValueError("time grid must be strictly increasing")

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def q(self) -> int:
        return self.time_grid.size

    def fingerprint(self) -> str:
        """SHA-256 over design points, grid, and outputs (provenance hash)."""
        h = hashlib.sha256()
        for arr in (self.design.points, self.time_grid, self.outputs):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return "sha256:" + h.hexdigest()


class PredictiveSeries:
    """Per-time Student-t predictive marginals at one input point."""

    def __init__(self, times, location, scale, dof, extrapolation=False,
                 clamped=0, min_unit_variance=0.0):
        self.times = np.asarray(times, dtype=float).ravel()
        self.location = np.asarray(location, dtype=float).ravel()
        self.scale = np.asarray(scale, dtype=float).ravel()
        self.dof = float(dof)
        self.extrapolation = bool(extrapolation)
        #: number of variance entries clipped up to zero (float cancellation)
        self.clamped = int(clamped)
        #: smallest pre-clamp unit variance; barely-negative values are
        #: cancellation noise, anything grossly negative is a bug signal
        self.min_unit_variance = float(min_unit_variance)


def credible_interval(series: PredictiveSeries, level: float = 0.95):
    """Symmetric Student-t interval per time point: (lower, upper) arrays."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie strictly between 0 and 1, got {level}")
    half = student_t.ppf(0.5 * (1.0 + level), series.dof) * series.scale
    return series.location - half, series.location + half


class OpeModel:
    """A fitted emulator: posterior state plus cached solver factors.

    Instances are immutable after construction and safe to share across
    threads; :meth:`predict` is pure.
    """

    def __init__(
        self,
        input_basis: InputBasis,
        output_basis: OutputBasis,
        kernel: KernelSpec,
        prior: NigPrior,
        jitter: float,
        design: Design,
        time_grid: np.ndarray,
        coeff_mean: np.ndarray,
        coeff_cov: np.ndarray,
        dof: float,
        scale: float,
        residual_weights: np.ndarray,
        training_fingerprint: str,
        kernel_cache: KernelMatrices | None = None,
    ):
        self.input_basis = input_basis
        self.output_basis = output_basis
        self.kernel = kernel
        self.prior = prior
        self.jitter = float(jitter)
        self.design = design
        self.time_grid = np.asarray(time_grid, dtype=float).ravel()
        self.coeff_mean = np.asarray(coeff_mean, dtype=float).ravel()
        self.coeff_cov = np.asarray(coeff_cov, dtype=float)
        self.dof = float(dof)
        self.scale = float(scale)
        self.residual_weights = np.asarray(residual_weights, dtype=float)
        self.training_fingerprint = training_fingerprint
        self._km = kernel_cache or kernel_matrices(design, self.time_grid, kernel, jitter)
        self._grid_cache = None

    # -- derived shapes ------------------------------------------------

    @property
    def coeff_matrix(self) -> np.ndarray:
        """Posterior coefficient mean as a nu_r x nu_s matrix."""
        return self.coeff_mean.reshape(self.input_basis.size, self.output_basis.size)

    @property
    def tau_estimate(self) -> float:
        """Posterior point estimate of the common variance multiplier."""
        return self.scale / self.dof

    # -- prediction ----------------------------------------------------

    def _output_side(self, times):
        """Precompute everything that depends only on the prediction times.

        Returns (Gs_new, Ks_cross, Ks_solve, explained_out, basis_proj)
        where Ks_solve = K_output^-1 Ks_cross' and basis_proj =
        G_output' Ks_solve (used in the regression-uncertainty term).
        """
        t = np.asarray(times, dtype=float).ravel()
        Gs_new = self.output_basis.evaluate_many(t)
        Ks_cross = output_correlation_matrix(t, self.time_grid, self.kernel)
        Ks_solve = cho_solve(self._km.output_chol, Ks_cross.T, check_finite=False)
        explained_out = np.einsum("ji,ij->j", Ks_cross, Ks_solve)
        Gs_train = self.output_basis.evaluate_many(self.time_grid)
        basis_proj = Gs_train.T @ Ks_solve
        return Gs_new, Ks_cross, Ks_solve, explained_out, basis_proj

    def _grid_side(self):
        if self._grid_cache is None:
            self._grid_cache = self._output_side(self.time_grid)
        return self._grid_cache

    def predict(self, r, times=None) -> PredictiveSeries:
        """Student-t predictive marginals at input ``r`` over ``times``.

        ``times=None`` predicts on the training grid (the precomputed fast
        path used by validation and Monte-Carlo analyses). Inputs outside
        the design box, or times beyond the training grid, set the
        extrapolation flag on the result.
        """
        r = np.asarray(r, dtype=float).ravel()
        if times is None:
            t = self.time_grid
            Gs_new, Ks_cross, Ks_solve, explained_out, basis_proj = self._grid_side()
        else:
            t = np.asarray(times, dtype=float).ravel()
            Gs_new, Ks_cross, Ks_solve, explained_out, basis_proj = self._output_side(t)

        gr = self.input_basis.evaluate(r)
        kr_vec = input_correlation_matrix(r, self.design.points, self.kernel).ravel()
        kr_solve = cho_solve(self._km.input_chol, kr_vec, check_finite=False)
        explained_in = float(kr_vec @ kr_solve)

        # location: regression surface + kernel-weighted residual correction
        location = gr @ self.coeff_matrix @ Gs_new.T
        location = location + Ks_cross @ (self.residual_weights.T @ kr_vec)

        # regression-uncertainty term rho' Vn rho with
        # rho_j = gr (x) gs_j - u (x) w_j
        Gr_train = self.input_basis.evaluate_many(self.design.points)
        u = Gr_train.T @ kr_solve
        P = np.einsum("i,jk->ijk", gr, Gs_new.T) - np.einsum("i,jk->ijk", u, basis_proj)
        P = P.reshape(self.coeff_mean.size, t.size)
        var_reg = np.einsum("ij,ij->j", P, self.coeff_cov @ P)

        unit_var = self._km.diag_at_zero - explained_in * explained_out + var_reg
        clamped = int(np.sum(unit_var < 0.0))
        min_unit_var = float(unit_var.min()) if unit_var.size else 0.0
        unit_var = np.maximum(unit_var, 0.0)
        scale = np.sqrt(self.tau_estimate * unit_var)

        extrapolation = not self.design.space.contains(r)
        if t.size and (t.min() < self.time_grid[0] or t.max() > self.time_grid[-1]):
            extrapolation = True
        return PredictiveSeries(t, location, scale, self.dof, extrapolation,
                                clamped, min_unit_var)


def fit(
    prior: NigPrior,
    input_basis: InputBasis,
    output_basis: OutputBasis,
    kernel: KernelSpec,
    train: TrainingSet,
    jitter: float = DEFAULT_JITTER,
) -> OpeModel:
    """Conjugate posterior update from a training set.

    All solves use the per-factor Cholesky decompositions; cost is
    O(n^3 + q^3 + nu^3) rather than O((nq)^3).
    """
    nu = input_basis.size * output_basis.size
    if prior.mean.size != nu:
        raise ValueError(
            f"prior has {prior.mean.size} coefficients, bases imply {nu}"
        )
    if train.design.space.k != input_basis.space.k:
        raise ValueError("training design dimension does not match the input basis")

    km = kernel_matrices(train.design, train.time_grid, kernel, jitter)
    pair = regressor_matrices(train.design, train.time_grid, input_basis, output_basis)
    Gr, Gs = pair.input_matrix, pair.output_matrix
    F = train.outputs

    KrGr = cho_solve(km.input_chol, Gr, check_finite=False)
    KsGs = cho_solve(km.output_chol, Gs, check_finite=False)
    # Q' K^-1 Q factorizes per side
    quad = np.kron(Gr.T @ KrGr, Gs.T @ KsGs)

    W0 = cho_solve(km.input_chol, F, check_finite=False)
    W0 = cho_solve(km.output_chol, W0.T, check_finite=False).T
    proj = (Gr.T @ W0 @ Gs).ravel()  # Q' K^-1 y

    try:
        Vinv = np.linalg.inv(prior.cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("the prior coefficient scale matrix", str(exc))
    post_prec = Vinv + quad
    try:
        prec_chol = cho_factor(post_prec, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("the posterior precision matrix", str(exc))
    coeff_mean = cho_solve(prec_chol, Vinv @ prior.mean + proj, check_finite=False)
    coeff_cov = cho_solve(prec_chol, np.eye(nu), check_finite=False)
    coeff_cov = 0.5 * (coeff_cov + coeff_cov.T)

    # scale update in residual form: guaranteed to stay positive
    R = F - Gr @ coeff_mean.reshape(input_basis.size, output_basis.size) @ Gs.T
    W = cho_solve(km.input_chol, R, check_finite=False)
    W = cho_solve(km.output_chol, W.T, check_finite=False).T
    dm = coeff_mean - prior.mean
    post_scale = float(prior.scale + np.sum(R * W) + dm @ Vinv @ dm)
    post_dof = prior.dof + train.n * train.q

    return OpeModel(
        input_basis=input_basis,
        output_basis=output_basis,
        kernel=kernel,
        prior=prior,
        jitter=jitter,
        design=train.design,
        time_grid=train.time_grid,
        coeff_mean=coeff_mean,
        coeff_cov=coeff_cov,
        dof=post_dof,
        scale=post_scale,
        residual_weights=W,
        training_fingerprint=train.fingerprint(),
        kernel_cache=km,
    )


def predict(model: OpeModel, r, times=None) -> PredictiveSeries:
    """Functional alias for :meth:`OpeModel.predict`."""
    return model.predict(r, times)


# -- serialization -----------------------------------------------------


def save_model(model: OpeModel, path: str, meta: dict | None = None) -> None:
    """Write a fitted model as JSON (full float precision, row-major arrays)."""
    prior_doc = {
        "mean": model.prior.mean.tolist(),
        "dof": model.prior.dof,
        "scale": model.prior.scale,
    }
    if model.prior.sigma2 is not None:
        prior_doc["sigma2"] = model.prior.sigma2
    else:
        prior_doc["cov"] = model.prior.cov.tolist()
    doc = {
        "format": "ope-model",
        "version": __version__,
        "meta": meta or {},
        "space": {
            "bounds": [list(b) for b in model.design.space.bounds],
            "names": list(model.design.space.names),
        },
        "output_basis": {"frequencies": list(model.output_basis.frequencies)},
        "kernel": {
            "input_lengths": list(model.kernel.input_lengths),
            "output_length": model.kernel.output_length,
            "exponent": model.kernel.exponent,
        },
        "jitter": model.jitter,
        "prior": prior_doc,
        "posterior": {
            "coeff_mean": model.coeff_mean.tolist(),
            "coeff_cov": model.coeff_cov.tolist(),
            "dof": model.dof,
            "scale": model.scale,
        },
        "design": {"points": model.design.points.tolist(), "seed": model.design.seed},
        "time_grid": model.time_grid.tolist(),
        "residual_weights": model.residual_weights.tolist(),
        "training_fingerprint": model.training_fingerprint,
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def load_model(path: str) -> OpeModel:
    """Read a model written by :func:`save_model`; rebuilds solver caches."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("format") != "ope-model":
        raise DataError(f"{path}: not a fitted-model file")
    space = DesignSpace(
        bounds=[tuple(b) for b in doc["space"]["bounds"]],
        names=tuple(doc["space"]["names"]),
    )
    points = np.array(doc["design"]["points"], dtype=float)
    design = Design(
        points=points,
        unit_points=space.to_unit(points),
        space=space,
        seed=int(doc["design"].get("seed", 0)),
    )
    prior_doc = doc["prior"]
    cov = prior_doc.get("sigma2")
    if cov is None:
        cov = np.array(prior_doc["cov"], dtype=float)
    prior = NigPrior(
        np.array(prior_doc["mean"], dtype=float),
        cov,
        prior_doc["dof"],
        prior_doc["scale"],
    )
    return OpeModel(
        input_basis=InputBasis(space),
        output_basis=OutputBasis(tuple(doc["output_basis"]["frequencies"])),
        kernel=KernelSpec(
            input_lengths=tuple(doc["kernel"]["input_lengths"]),
            output_length=doc["kernel"]["output_length"],
            exponent=doc["kernel"]["exponent"],
        ),
        prior=prior,
        jitter=doc["jitter"],
        design=design,
        time_grid=np.array(doc["time_grid"], dtype=float),
        coeff_mean=np.array(doc["posterior"]["coeff_mean"], dtype=float),
        coeff_cov=np.array(doc["posterior"]["coeff_cov"], dtype=float),
        dof=doc["posterior"]["dof"],
        scale=doc["posterior"]["scale"],
        residual_weights=np.array(doc["residual_weights"], dtype=float),
        training_fingerprint=doc.get("training_fingerprint", ""),
    )
