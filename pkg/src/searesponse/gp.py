"""Exact Gaussian Process regression with a Matern-5/2 ARD kernel and
per-observation (heteroscedastic) noise.

Inputs and targets are z-scored internally; per-point noise variances are
rescaled accordingly. Inference is a dense Cholesky factorization of
K + diag(noise) + jitter*I, with jitter escalating from 1e-8 of the mean
diagonal by factors of 100 (at most 3 times) on factorization failure.
Hyperparameters are chosen by maximizing the log marginal likelihood with
a derivative-free coordinate-wise golden-section search over
log-parameters, restarted from seeded log-uniform initializations.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from searesponse.errors import ConfigurationError, NumericError, SchemaError
from searesponse.seeding import TAG_GP_INIT, TAG_SUBSAMPLE, derive_seed

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

SQRT5 = math.sqrt(5.0)

JITTER_INITIAL = 1e-8
JITTER_GROWTH = 100.0
JITTER_MAX_ESCALATIONS = 3

LENGTHSCALE_BOUNDS = (1e-2, 1e2)
SIGNAL_VARIANCE_BOUNDS = (1e-3, 1e3)
LML_REL_TOL = 1e-6
MAX_COORDINATE_PASSES = 15
_GOLDEN_TOL = 1e-3  # log-space interval width
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KernelParams:
    """Matern-5/2 hyperparameters: signal variance and one lengthscale per
    input dimension, in standardized units."""

    signal_variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        if self.signal_variance <= 0.0:
            raise ConfigurationError(f"signal_variance must be positive, got {self.signal_variance}")
        if any(l <= 0.0 for l in self.lengthscales):
            raise ConfigurationError(f"lengthscales must be positive, got {self.lengthscales}")


@dataclass(frozen=True)
class PredictiveMoments:
    mean: float
    std: float


@dataclass
class GPModel:
    """A trained GP: standardized training data, factorized covariance, and
    the standardization constants needed to map back to raw units."""

    kernel: KernelParams
    train_inputs: np.ndarray      # (n, d), standardized
    train_targets: np.ndarray     # (n,), standardized
    noise_variances: np.ndarray   # (n,), standardized
    input_mean: np.ndarray
    input_scale: np.ndarray
    target_mean: float
    target_scale: float
    factor: np.ndarray            # lower-triangular Cholesky factor
    weights: np.ndarray           # (K + D + jitter I)^{-1} y, standardized
    jitter: float

    @property
    def n_train(self) -> int:
        return len(self.train_targets)


def matern52(x: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    """Covariance between two points: sv * (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r)
    with r the lengthscale-weighted Euclidean distance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ell = np.asarray(params.lengthscales, dtype=float)
    r = math.sqrt(float(np.sum(((x - y) / ell) ** 2)))
    return params.signal_variance * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * math.exp(-SQRT5 * r)


def matern52_matrix(a: np.ndarray, b: np.ndarray, params: KernelParams) -> np.ndarray:
    """Cross-covariance matrix between row sets a (n, d) and b (m, d)."""
    ell = np.asarray(params.lengthscales, dtype=float)
    r = cdist(a / ell, b / ell)
    return params.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)


def _factorize(k_matrix: np.ndarray, noise_variances: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky of K + diag(noise) + jitter*I with escalating jitter."""
    system = k_matrix + np.diag(noise_variances)
    jitter = JITTER_INITIAL * float(np.mean(np.diag(k_matrix)))
    diag = np.diag_indices_from(system)
    base_diag = system[diag].copy()
    for _ in range(1 + JITTER_MAX_ESCALATIONS):
        system[diag] = base_diag + jitter
        try:
            return cholesky(system, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= JITTER_GROWTH
    raise NumericError(
        f"covariance factorization failed even at jitter {jitter / JITTER_GROWTH:.3e}"
    )


def _check_consistent(inputs_std: np.ndarray, targets_std: np.ndarray,
                      noise_std: np.ndarray) -> None:
    # Identical inputs with different targets and zero noise make the system
    # singular regardless of jitter; report it instead of silently averaging.
    order = np.lexsort(inputs_std.T)
    x_sorted = inputs_std[order]
    same = np.all(x_sorted[1:] == x_sorted[:-1], axis=1)
    for idx in np.nonzero(same)[0]:
        i, j = order[idx], order[idx + 1]
        if targets_std[i] != targets_std[j] and noise_std[i] == 0.0 and noise_std[j] == 0.0:
            raise NumericError(
                "singular system: duplicated input with conflicting noise-free targets"
            )


def _assemble(kernel: KernelParams, inputs_std: np.ndarray, targets_std: np.ndarray,
              noise_std: np.ndarray, input_mean: np.ndarray, input_scale: np.ndarray,
              target_mean: float, target_scale: float) -> GPModel:
    _check_consistent(inputs_std, targets_std, noise_std)
    gram = matern52_matrix(inputs_std, inputs_std, kernel)
    factor, jitter = _factorize(gram, noise_std)
    weights = solve_triangular(factor, targets_std, lower=True, check_finite=False)
    weights = solve_triangular(factor.T, weights, lower=False, check_finite=False)
    return GPModel(
        kernel=kernel, train_inputs=inputs_std, train_targets=targets_std,
        noise_variances=noise_std, input_mean=input_mean, input_scale=input_scale,
        target_mean=target_mean, target_scale=target_scale,
        factor=factor, weights=weights, jitter=jitter,
    )


def _standardize(inputs: np.ndarray, targets: np.ndarray, noise_variances: np.ndarray):
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float).ravel()
    noise_variances = np.asarray(noise_variances, dtype=float).ravel()
    if inputs.ndim != 2:
        raise ConfigurationError("inputs must be a 2-d array (n, d)")
    n = len(inputs)
    if len(targets) != n or len(noise_variances) != n:
        raise ConfigurationError("inputs, targets, and noise_variances must have equal length")
    if np.any(noise_variances < 0.0):
        raise ConfigurationError("noise variances must be non-negative")
    input_mean = inputs.mean(axis=0)
    input_scale = inputs.std(axis=0)
    input_scale[input_scale == 0.0] = 1.0
    target_mean = float(targets.mean())
    target_scale = float(targets.std())
    if target_scale == 0.0:
        target_scale = 1.0
    inputs_std = (inputs - input_mean) / input_scale
    targets_std = (targets - target_mean) / target_scale
    noise_std = noise_variances / (target_scale * target_scale)
    return inputs_std, targets_std, noise_std, input_mean, input_scale, target_mean, target_scale


def train(inputs: np.ndarray, targets: np.ndarray, noise_variances: np.ndarray,
          kernel: KernelParams) -> GPModel:
    """Condition a GP with the given (standardized-space) kernel on data in
    raw units; noise variances are given per observation in raw target
    units squared."""
    parts = _standardize(inputs, targets, noise_variances)
    if len(parts[1]) < 2:
        raise ConfigurationError("need at least 2 training points")
    return _assemble(kernel, *parts)


def log_marginal_likelihood(inputs_std: np.ndarray, targets_std: np.ndarray,
                            noise_std: np.ndarray, kernel: KernelParams) -> float:
    """LML of standardized data under the GP prior; -inf when the covariance
    cannot be factorized."""
    gram = matern52_matrix(inputs_std, inputs_std, kernel)
    return _lml_from_gram(gram, targets_std, noise_std)


def _lml_from_gram(gram: np.ndarray, targets_std: np.ndarray, noise_std: np.ndarray) -> float:
    try:
        factor, _ = _factorize(gram, noise_std)
    except NumericError:
        return -math.inf
    half = solve_triangular(factor, targets_std, lower=True, check_finite=False)
    n = len(targets_std)
    return float(-0.5 * np.dot(half, half) - np.sum(np.log(np.diag(factor)))
                 - 0.5 * n * math.log(2.0 * math.pi))


class _LMLObjective:
    """LML as a function of log-hyperparameters, with the per-dimension
    squared-difference matrices precomputed once (the search evaluates the
    objective thousands of times on the same point set)."""

    def __init__(self, inputs_std: np.ndarray, targets_std: np.ndarray, noise_std: np.ndarray):
        self.targets = targets_std
        self.noise = noise_std
        diff = inputs_std[:, None, :] - inputs_std[None, :, :]
        self.sqdiff = diff * diff  # (n, n, d)

    def __call__(self, log_vec: np.ndarray) -> float:
        sv = math.exp(log_vec[0])
        inv_sq = np.exp(-2.0 * np.asarray(log_vec[1:]))
        r = np.sqrt(self.sqdiff @ inv_sq)
        gram = sv * (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * np.exp(-SQRT5 * r)
        return _lml_from_gram(gram, self.targets, self.noise)


def _golden_max(fun, lo: float, hi: float) -> tuple[float, float]:
    """Golden-section maximization of fun on [lo, hi] (log-space coords)."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > _GOLDEN_TOL:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    x = c if fc >= fd else d
    return (x, fc) if fc >= fd else (x, fd)


def fit_hyperparams(inputs: np.ndarray, targets: np.ndarray, noise_variances: np.ndarray,
                    restarts: int = 5, seed: int = 0,
                    lengthscale_bounds: tuple[float, float] = LENGTHSCALE_BOUNDS,
                    signal_variance_bounds: tuple[float, float] = SIGNAL_VARIANCE_BOUNDS,
                    ) -> KernelParams:
    """Maximize the log marginal likelihood over log-hyperparameters.

    Coordinate-wise golden-section passes (lengthscales first, then signal
    variance) repeat until the relative LML improvement over a full pass
    drops below 1e-6; the best of `restarts` initializations wins, ties
    broken by the lowest restart index. Restart 0 is anchored at unit
    hyperparameters, the rest are log-uniform over the bounds.
    """
    inputs_std, targets_std, noise_std, *_ = _standardize(inputs, targets, noise_variances)
    n, dim = inputs_std.shape
    if n < 5:
        raise ConfigurationError(f"need at least 5 points to fit hyperparameters, got {n}")
    if restarts < 1:
        raise ConfigurationError("restarts must be >= 1")

    log_bounds = [(math.log(signal_variance_bounds[0]), math.log(signal_variance_bounds[1]))]
    log_bounds += [(math.log(lengthscale_bounds[0]), math.log(lengthscale_bounds[1]))] * dim
    # Optimize lengthscales before the signal variance: with noisy targets
    # this settles the correlation structure while the amplitude is still
    # order one.
    coord_order = list(range(1, dim + 1)) + [0]

    def to_params(log_vec: np.ndarray) -> KernelParams:
        return KernelParams(signal_variance=math.exp(log_vec[0]),
                            lengthscales=tuple(math.exp(v) for v in log_vec[1:]))

    lml_of = _LMLObjective(inputs_std, targets_std, noise_std)

    best_vec = None
    best_lml = -math.inf
    for restart in range(restarts):
        if restart == 0:
            vec = np.zeros(dim + 1)
        else:
            rng = np.random.default_rng(derive_seed(seed, TAG_GP_INIT, restart))
            vec = np.array([rng.uniform(lo, hi) for lo, hi in log_bounds])
        current = lml_of(vec)
        for _ in range(MAX_COORDINATE_PASSES):
            previous = current
            for coord in coord_order:
                lo, hi = log_bounds[coord]

                def line(v, _coord=coord):
                    trial = vec.copy()
                    trial[_coord] = v
                    return lml_of(trial)

                x, fx = _golden_max(line, lo, hi)
                if fx > current:
                    vec[coord] = x
                    current = fx
            if current - previous < LML_REL_TOL * max(1.0, abs(previous)):
                break
        if current > best_lml:
            best_lml = current
            best_vec = vec.copy()
    if best_vec is None or not math.isfinite(best_lml):
        raise NumericError("hyperparameter search failed: no factorizable candidate found")
    logger.debug("fit_hyperparams: lml=%.4f params=%s", best_lml, to_params(best_vec))
    return to_params(best_vec)


def predict_batch(model: GPModel, points: np.ndarray,
                  include_noise: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and std at many points (raw units).

    The predictive variance is epistemic only; include_noise adds the mean
    training noise variance as a homoscedastic stand-in.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    points_std = (points - model.input_mean) / model.input_scale
    kstar = matern52_matrix(model.train_inputs, points_std, model.kernel)
    mean_std = kstar.T @ model.weights
    half = solve_triangular(model.factor, kstar, lower=True, check_finite=False)
    var = model.kernel.signal_variance - np.einsum("ij,ij->j", half, half)
    if include_noise:
        var = var + float(np.mean(model.noise_variances))
    var = np.maximum(var, 0.0)
    mean = model.target_mean + model.target_scale * mean_std
    std = model.target_scale * np.sqrt(var)
    return mean, std


def predict(model: GPModel, x: np.ndarray, include_noise: bool = False) -> PredictiveMoments:
    """Posterior mean and std at one point, de-standardized to target units."""
    means, stds = predict_batch(model, np.atleast_2d(x), include_noise=include_noise)
    return PredictiveMoments(mean=float(means[0]), std=float(stds[0]))


def sample_posterior(model: GPModel, x: np.ndarray, seed: int) -> float:
    """One Gaussian draw from the predictive distribution at x."""
    moments = predict(model, x)
    rng = np.random.default_rng(seed)
    return float(rng.normal(moments.mean, moments.std))


def subsample_cap(n: int, n_max: int, seed: int) -> np.ndarray:
    """Sorted indices of a seeded subsample, identity when n <= n_max."""
    if n <= n_max:
        return np.arange(n)
    rng = np.random.default_rng(derive_seed(seed, TAG_SUBSAMPLE))
    idx = np.sort(rng.choice(n, size=n_max, replace=False))
    logger.info("capping GP training set: %d -> %d points", n, n_max)
    return idx


def save_model(path: str | Path, model: GPModel) -> None:
    """Persist a model as self-describing JSON; floats round-trip exactly."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kernel": {
            "signal_variance": model.kernel.signal_variance,
            "lengthscales": list(model.kernel.lengthscales),
        },
        "standardization": {
            "input_mean": model.input_mean.tolist(),
            "input_scale": model.input_scale.tolist(),
            "target_mean": model.target_mean,
            "target_scale": model.target_scale,
        },
        "train_inputs": model.train_inputs.tolist(),
        "train_targets": model.train_targets.tolist(),
        "noise_variances": model.noise_variances.tolist(),
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path: str | Path) -> GPModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}")
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise SchemaError(f"{path}: unsupported format version {version!r}")
    try:
        kernel = KernelParams(
            signal_variance=float(payload["kernel"]["signal_variance"]),
            lengthscales=tuple(float(v) for v in payload["kernel"]["lengthscales"]),
        )
        std = payload["standardization"]
        return _assemble(
            kernel,
            np.asarray(payload["train_inputs"], dtype=float),
            np.asarray(payload["train_targets"], dtype=float),
            np.asarray(payload["noise_variances"], dtype=float),
            np.asarray(std["input_mean"], dtype=float),
            np.asarray(std["input_scale"], dtype=float),
            float(std["target_mean"]),
            float(std["target_scale"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed model file: {exc}")
