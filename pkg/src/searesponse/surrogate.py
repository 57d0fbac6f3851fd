"""GP surrogate for the simulator: predict distribution parameters and the
peak count from weather inputs, then regenerate synthetic peak samples.

One GP per target (each distribution parameter plus the count L), trained
on the table's per-point means with the per-point standard deviations
squared as heteroscedastic noise. Generation either uses posterior means
("point" mode) or draws the parameters from each GP's predictive Gaussian
("sample" mode), then draws L values from the resulting distribution.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from searesponse.distfit import DistFamily, TrainingRow, TrainingTable
from searesponse.errors import ConfigurationError, InsufficientDataError, SchemaError
from searesponse.gp import (
    GPModel,
    fit_hyperparams,
    load_model,
    predict,
    predict_batch,
    save_model,
    subsample_cap,
    train,
)
from searesponse.seeding import TAG_COUNT, TAG_THETA, TAG_VALUES, derive_seed
from searesponse.weather import WeatherRecord

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
MIN_TRAIN_ROWS = 20

MODE_POINT = "point"
MODE_SAMPLE = "sample"

COUNT_TARGET = "l_count"

# Relative positivity floors per parameter (fraction of the predicted mean
# magnitude), applied with a resample-once policy in sample mode. Scale-type
# parameters get a nominal 1e-6 floor; the Weibull shape gets a larger 0.1
# floor because draws near zero produce numerically explosive tails; location
# parameters (Gumbel mu) are unconstrained (None).
SCALE_FLOOR_FACTOR = 1e-6
SHAPE_FLOOR_FACTOR = 0.1

_FLOOR_FACTORS: dict[DistFamily, tuple] = {
    DistFamily.GUMBEL: (None, SCALE_FLOOR_FACTOR),
    DistFamily.RAYLEIGH: (SCALE_FLOOR_FACTOR,),
    DistFamily.WEIBULL: (SHAPE_FLOOR_FACTOR, SCALE_FLOOR_FACTOR),
}


@dataclass(frozen=True)
class GPSettings:
    """Knobs for surrogate GP training."""

    restarts: int = 5
    max_points: int = 2000


@dataclass
class SurrogateModel:
    family: DistFamily
    param_models: dict[str, GPModel]
    l_model: GPModel
    mode: str = MODE_SAMPLE

    def __post_init__(self):
        if self.mode not in (MODE_POINT, MODE_SAMPLE):
            raise ConfigurationError(f"mode must be {MODE_POINT!r} or {MODE_SAMPLE!r}, got {self.mode!r}")
        expected = self.family.param_names
        if tuple(self.param_models) != expected:
            raise ConfigurationError(
                f"{self.family.value} needs one model per parameter {expected}, "
                f"got {tuple(self.param_models)}"
            )


@dataclass
class GeneratedOutput:
    """Synthetic counterpart of a simulator run; same peaks-array shape."""

    peaks: np.ndarray
    mode: str
    seed: int

    def __post_init__(self):
        self.peaks = np.asarray(self.peaks, dtype=float)

    @property
    def count(self) -> int:
        return len(self.peaks)


def train_surrogate(
    table: Union[TrainingTable, Sequence[TrainingRow]],
    family: DistFamily,
    settings: GPSettings = GPSettings(),
    seed: int = 0,
    mode: str = MODE_SAMPLE,
) -> SurrogateModel:
    """Fit one GP per distribution parameter and one for the peak count.

    Uses the train-split rows whose fits for `family` are present; requires
    at least 20 of them. Hyperparameters are optimized per target.
    """
    rows = table.train_rows() if isinstance(table, TrainingTable) else list(table)
    usable = [(r, r.family_values(family)) for r in rows]
    usable = [(r, v) for r, v in usable if v is not None]
    if len(usable) < MIN_TRAIN_ROWS:
        raise InsufficientDataError(
            f"{family.value}: need >= {MIN_TRAIN_ROWS} rows with fits, got {len(usable)}"
        )
    inputs = np.array([[r.hs, r.tp, r.vw] for r, _ in usable])
    means = np.array([v[0] for _, v in usable])
    stds = np.array([v[1] for _, v in usable])
    l_means = np.array([r.l_mean for r, _ in usable])
    l_stds = np.array([r.l_std for r, _ in usable])

    idx = subsample_cap(len(inputs), settings.max_points, seed)
    inputs = inputs[idx]
    targets = {name: (means[idx, j], stds[idx, j] ** 2)
               for j, name in enumerate(family.param_names)}
    targets[COUNT_TARGET] = (l_means[idx], l_stds[idx] ** 2)

    models = {}
    for j, (name, (y, noise)) in enumerate(targets.items()):
        kernel = fit_hyperparams(inputs, y, noise,
                                 restarts=settings.restarts, seed=derive_seed(seed, j))
        models[name] = train(inputs, y, noise, kernel)
        logger.info("trained %s/%s GP on %d rows: %s", family.value, name, len(inputs), kernel)
    l_model = models.pop(COUNT_TARGET)
    return SurrogateModel(family=family, param_models=models, l_model=l_model, mode=mode)


def _draw_theta(mean: float, std: float, floor_factor: Optional[float], mode: str,
                rng: np.random.Generator, frozen_shift: Optional[float]) -> float:
    floor = None if floor_factor is None else floor_factor * abs(mean)
    if mode == MODE_POINT:
        value = mean
    elif frozen_shift is not None:
        value = mean + frozen_shift * std
    else:
        value = float(rng.normal(mean, std))
        if floor is not None and value < floor:
            value = float(rng.normal(mean, std))  # resample once, then clamp
    if floor is not None and value < floor:
        value = floor
    return value


def _moments_at(model: SurrogateModel, x: np.ndarray):
    theta = [predict(gp, x) for gp in model.param_models.values()]
    count = predict(model.l_model, x)
    return [(m.mean, m.std) for m in theta], (count.mean, count.std)


def generate_from_moments(
    family: DistFamily,
    theta_moments: Sequence[tuple[float, float]],
    l_moments: tuple[float, float],
    mode: str,
    seed: int,
    frozen_shifts: Optional[np.ndarray] = None,
) -> GeneratedOutput:
    """Draw (theta, L, peak values) from precomputed predictive moments.

    This is the single sampling path: generate_responses routes through it
    after a per-point GP prediction, and the order-statistics driver routes
    through it with moments precomputed for a whole weather sequence, so
    both produce identical output for identical seeds.
    """
    theta = []
    for j, (mean, std) in enumerate(theta_moments):
        rng = np.random.default_rng(derive_seed(seed, TAG_THETA, j))
        shift = None if frozen_shifts is None else float(frozen_shifts[j])
        theta.append(_draw_theta(mean, std, _FLOOR_FACTORS[family][j], mode, rng, shift))
    rng = np.random.default_rng(derive_seed(seed, TAG_COUNT))
    count = int(np.rint(rng.normal(l_moments[0], l_moments[1])))
    count = max(count, 0)
    rng = np.random.default_rng(derive_seed(seed, TAG_VALUES))
    if count == 0:
        values = np.empty(0)
    elif family is DistFamily.GUMBEL:
        values = rng.gumbel(theta[0], theta[1], size=count)
    elif family is DistFamily.RAYLEIGH:
        values = rng.rayleigh(theta[0], size=count)
    else:
        values = theta[1] * rng.weibull(theta[0], size=count)
    return GeneratedOutput(peaks=values, mode=mode, seed=seed)


def predict_params(model: SurrogateModel, x: WeatherRecord, seed: int,
                   frozen_shifts: Optional[np.ndarray] = None) -> tuple[tuple[float, ...], int]:
    """Map one weather record to distribution parameters and a count draw.

    Point mode returns posterior means for theta; sample mode draws each
    parameter from its predictive Gaussian (independently across
    parameters). L is drawn from its predictive Gaussian in both modes,
    rounded and clamped to >= 0; scale-type parameters are clamped to a
    relative floor with a resample-once policy in sample mode.
    """
    point = np.array([x.hs, x.tp, x.vw])
    theta_moments, l_moments = _moments_at(model, point)
    theta = []
    for j, (mean, std) in enumerate(theta_moments):
        rng = np.random.default_rng(derive_seed(seed, TAG_THETA, j))
        shift = None if frozen_shifts is None else float(frozen_shifts[j])
        theta.append(_draw_theta(mean, std, _FLOOR_FACTORS[model.family][j], model.mode, rng, shift))
    rng = np.random.default_rng(derive_seed(seed, TAG_COUNT))
    count = max(int(np.rint(rng.normal(l_moments[0], l_moments[1]))), 0)
    return tuple(theta), count


def generate_responses(model: SurrogateModel, x: WeatherRecord, seed: int,
                       frozen_shifts: Optional[np.ndarray] = None) -> GeneratedOutput:
    """One surrogate stand-in for a simulator run at weather record x."""
    point = np.array([x.hs, x.tp, x.vw])
    theta_moments, l_moments = _moments_at(model, point)
    return generate_from_moments(model.family, theta_moments, l_moments,
                                 model.mode, seed, frozen_shifts)


def predict_moments_batch(model: SurrogateModel, inputs: np.ndarray):
    """Predictive moments for all targets over an (n, 3) input array.

    Returns (theta_moments, l_moments) where theta_moments[i] is a list of
    (mean, std) per parameter for row i, and l_moments[i] likewise for L.
    Each row goes through the same single-point prediction path as
    generate_responses, so cached moments are bit-identical to per-record
    calls (BLAS results differ across batch shapes at the last ulp).
    """
    inputs = np.atleast_2d(inputs)
    theta, counts = [], []
    for row in inputs:
        theta_m, l_m = _moments_at(model, row)
        theta.append(theta_m)
        counts.append(l_m)
    return theta, counts


@dataclass
class TargetEval:
    """Hold-out diagnostics for one GP target."""

    target: str
    true: np.ndarray
    pred_mean: np.ndarray
    pred_std: np.ndarray
    rmse: float
    coverage95: float


def interval_coverage(true: np.ndarray, mean: np.ndarray, std: np.ndarray,
                      z: float = 1.959963984540054) -> float:
    """Fraction of true values inside the central 95% predictive interval."""
    return float(np.mean(np.abs(true - mean) <= z * std))


def evaluate_surrogate(model: SurrogateModel, rows: Sequence[TrainingRow],
                       include_noise: bool = False) -> list[TargetEval]:
    """Predicted-vs-true comparison of every GP target on hold-out rows.

    Rows missing the model's family fits are skipped. Each target reports
    RMSE and the empirical coverage of the 95% predictive interval.
    """
    usable = [(r, r.family_values(model.family)) for r in rows]
    usable = [(r, v) for r, v in usable if v is not None]
    if not usable:
        raise InsufficientDataError(f"no usable rows with {model.family.value} fits")
    inputs = np.array([[r.hs, r.tp, r.vw] for r, _ in usable])
    truths = {name: np.array([v[0][j] for _, v in usable])
              for j, name in enumerate(model.family.param_names)}
    truths[COUNT_TARGET] = np.array([r.l_mean for r, _ in usable])
    models = dict(model.param_models)
    models[COUNT_TARGET] = model.l_model
    out = []
    for name, gp_model in models.items():
        mean, std = predict_batch(gp_model, inputs, include_noise=include_noise)
        true = truths[name]
        rmse = float(np.sqrt(np.mean((true - mean) ** 2)))
        out.append(TargetEval(target=name, true=true, pred_mean=mean, pred_std=std,
                              rmse=rmse, coverage95=interval_coverage(true, mean, std)))
    return out


def save_surrogate(directory: str | Path, model: SurrogateModel) -> None:
    """Persist the bundle: one GP file per target plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    targets = list(model.param_models) + [COUNT_TARGET]
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "family": model.family.value,
        "mode": model.mode,
        "targets": targets,
        "files": {name: f"gp_{name}.json" for name in targets},
    }
    for name, gp_model in model.param_models.items():
        save_model(directory / f"gp_{name}.json", gp_model)
    save_model(directory / f"gp_{COUNT_TARGET}.json", model.l_model)
    (directory / "bundle.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_surrogate(directory: str | Path) -> SurrogateModel:
    directory = Path(directory)
    manifest_path = directory / "bundle.json"
    if not manifest_path.exists():
        raise SchemaError(f"{directory}: missing bundle.json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise SchemaError(f"{directory}: unsupported bundle version {manifest.get('format_version')!r}")
    try:
        family = DistFamily(manifest["family"])
        mode = manifest["mode"]
        files = manifest["files"]
        param_models = {name: load_model(directory / files[name]) for name in family.param_names}
        l_model = load_model(directory / files[COUNT_TARGET])
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"{directory}: malformed bundle: {exc}")
    return SurrogateModel(family=family, param_models=param_models, l_model=l_model, mode=mode)
