"""Maximum-likelihood fits of peak-response samples and training-table
construction.

Each simulator run is fitted with Gumbel, Rayleigh, and Weibull
distributions; the M per-run parameter estimates at one design point are
aggregated into means and standard deviations (the Table-style training
schema), with the standard deviations later serving as per-point noise
levels for the surrogate GPs.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from searesponse.errors import (
    ConfigurationError,
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
    NumericError,
    ParseError,
    SchemaError,
)
from searesponse.seeding import TAG_SIM, TAG_SPLIT, derive_seed
from searesponse.simulator import SimConfig, simulate
from searesponse.weather import WeatherRecord

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329

NEWTON_TOL = 1e-9
NEWTON_MAX_ITER = 100
WEIBULL_SHAPE_CAP = 100.0

TRAIN_FRACTION = 0.8


class DistFamily(str, Enum):
    GUMBEL = "gumbel"
    RAYLEIGH = "rayleigh"
    WEIBULL = "weibull"

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]


_PARAM_NAMES = {
    DistFamily.GUMBEL: ("mu", "beta"),
    DistFamily.RAYLEIGH: ("sigma",),
    DistFamily.WEIBULL: ("k", "lambda"),
}


@dataclass(frozen=True)
class FitResult:
    """One maximum-likelihood fit: ordered parameters plus the achieved
    log-likelihood in nats."""

    family: DistFamily
    params: tuple[float, ...]
    log_likelihood: float


@dataclass(frozen=True)
class FitAggregate:
    """Mean/std of parameters over M fits of one family, plus L statistics."""

    family: DistFamily
    means: tuple[float, ...]
    stds: tuple[float, ...]
    l_mean: float
    l_std: float


@dataclass
class TrainingRow:
    """One design point of the training table; None marks a failed fit."""

    hs: float
    tp: float
    vw: float
    gumbel_mu: Optional[float] = None
    gumbel_mu_std: Optional[float] = None
    gumbel_beta: Optional[float] = None
    gumbel_beta_std: Optional[float] = None
    rayleigh_sigma: Optional[float] = None
    rayleigh_sigma_std: Optional[float] = None
    weibull_k: Optional[float] = None
    weibull_k_std: Optional[float] = None
    weibull_lambda: Optional[float] = None
    weibull_lambda_std: Optional[float] = None
    l_mean: float = 0.0
    l_std: float = 0.0
    split: str = "train"

    def family_values(self, family: DistFamily) -> Optional[tuple[tuple[float, ...], tuple[float, ...]]]:
        """(means, stds) for one family, or None if any field is missing."""
        means, stds = [], []
        for name in family.param_names:
            mean = getattr(self, f"{family.value}_{name}")
            std = getattr(self, f"{family.value}_{name}_std")
            if mean is None or std is None:
                return None
            means.append(mean)
            stds.append(std)
        return tuple(means), tuple(stds)


TABLE_COLUMNS = tuple(f.name for f in fields(TrainingRow))


@dataclass
class TrainingTable:
    rows: list[TrainingRow]

    @property
    def train_indices(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.rows) if r.split == "train"], dtype=int)

    @property
    def test_indices(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.rows) if r.split == "test"], dtype=int)

    def train_rows(self) -> list[TrainingRow]:
        return [r for r in self.rows if r.split == "train"]

    def test_rows(self) -> list[TrainingRow]:
        return [r for r in self.rows if r.split == "test"]


def _check_sample(data: np.ndarray, positive: bool) -> np.ndarray:
    data = np.asarray(data, dtype=float).ravel()
    if len(data) < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {len(data)}")
    if positive and np.any(data <= 0.0):
        raise DomainError("all observations must be positive")
    return data


def fit_rayleigh(data: Sequence[float]) -> FitResult:
    """Closed-form Rayleigh MLE: sigma = sqrt(sum(x^2) / (2n))."""
    x = _check_sample(np.asarray(data), positive=True)
    sigma = math.sqrt(float(np.sum(x * x)) / (2.0 * len(x)))
    ll = rayleigh_loglik(x, sigma)
    return FitResult(family=DistFamily.RAYLEIGH, params=(sigma,), log_likelihood=ll)


def rayleigh_loglik(x: np.ndarray, sigma: float) -> float:
    n = len(x)
    return float(np.sum(np.log(x)) - 2.0 * n * math.log(sigma) - np.sum(x * x) / (2.0 * sigma * sigma))


def fit_gumbel(data: Sequence[float]) -> FitResult:
    """Gumbel MLE by Newton iteration on the scale.

    The scale equation g(beta) = beta - mean(x) + sum(x w)/sum(w) with
    w = exp(-x/beta) is strictly increasing (g' = 1 + Var_w(x)/beta^2), so
    Newton from the moment initializer beta0 = s*sqrt(6)/pi converges to the
    unique root; the location then follows in closed form.
    """
    x = _check_sample(np.asarray(data), positive=False)
    xbar = float(np.mean(x))
    s = float(np.std(x, ddof=1))
    if s == 0.0:
        raise DegenerateFitError("constant data: Gumbel scale would be zero")
    beta = s * math.sqrt(6.0) / math.pi
    x0 = float(np.min(x))
    shifted = x - x0
    trace = [beta]
    for _ in range(NEWTON_MAX_ITER):
        w = np.exp(-shifted / beta)
        total = float(np.sum(w))
        mean_w = float(np.sum(x * w)) / total
        var_w = float(np.sum((x - mean_w) ** 2 * w)) / total
        g = beta - xbar + mean_w
        gprime = 1.0 + var_w / (beta * beta)
        step = g / gprime
        new_beta = beta - step
        if new_beta <= 0.0:
            new_beta = beta / 2.0
        trace.append(new_beta)
        if abs(new_beta - beta) < NEWTON_TOL * beta:
            beta = new_beta
            break
        beta = new_beta
    else:
        raise NumericError("Gumbel MLE did not converge", trace=trace)
    mu = x0 - beta * math.log(float(np.mean(np.exp(-shifted / beta))))
    ll = gumbel_loglik(x, mu, beta)
    return FitResult(family=DistFamily.GUMBEL, params=(mu, beta), log_likelihood=ll)


def gumbel_loglik(x: np.ndarray, mu: float, beta: float) -> float:
    z = (x - mu) / beta
    return float(-len(x) * math.log(beta) - np.sum(z) - np.sum(np.exp(-z)))


def fit_weibull(data: Sequence[float]) -> FitResult:
    """Weibull MLE: Newton on the shape profile equation, scale closed-form.

    Works on centered log-data, so the profile equation is scale-invariant
    and safe against overflow; the shape is capped at 100.
    """
    x = _check_sample(np.asarray(data), positive=True)
    logx = np.log(x)
    center = float(np.mean(logx))
    t = logx - center
    s_log = float(np.std(t, ddof=1))
    if s_log == 0.0:
        raise DegenerateFitError("constant data: Weibull fit is degenerate")
    k = min(math.pi / (s_log * math.sqrt(6.0)), WEIBULL_SHAPE_CAP)
    trace = [k]
    for _ in range(NEWTON_MAX_ITER):
        e = np.exp(k * t)
        a = float(np.mean(e))
        b = float(np.mean(t * e))
        c = float(np.mean(t * t * e))
        f = b / a - 1.0 / k  # mean(t) = 0 by construction
        fprime = (c * a - b * b) / (a * a) + 1.0 / (k * k)
        new_k = k - f / fprime
        if new_k <= 0.0:
            new_k = k / 2.0
        new_k = min(new_k, WEIBULL_SHAPE_CAP)
        trace.append(new_k)
        if abs(new_k - k) < NEWTON_TOL * k:
            k = new_k
            break
        k = new_k
    else:
        raise NumericError("Weibull MLE did not converge", trace=trace)
    lam = math.exp(center) * float(np.mean(np.exp(k * t))) ** (1.0 / k)
    ll = weibull_loglik(x, k, lam)
    return FitResult(family=DistFamily.WEIBULL, params=(k, lam), log_likelihood=ll)


def weibull_loglik(x: np.ndarray, k: float, lam: float) -> float:
    n = len(x)
    return float(
        n * math.log(k) - n * k * math.log(lam)
        + (k - 1.0) * np.sum(np.log(x)) - np.sum((x / lam) ** k)
    )


_FITTERS = {
    DistFamily.GUMBEL: fit_gumbel,
    DistFamily.RAYLEIGH: fit_rayleigh,
    DistFamily.WEIBULL: fit_weibull,
}


def fit_family(family: DistFamily, data: Sequence[float]) -> FitResult:
    return _FITTERS[family](data)


def aggregate_fits(fits: Sequence[FitResult], counts: Sequence[int]) -> FitAggregate:
    """Mean and sample standard deviation (M-1 denominator) of the M
    parameter estimates of one family, plus statistics of the peak count."""
    if len(fits) < 2:
        raise ConfigurationError(f"need at least 2 fits to aggregate, got {len(fits)}")
    if len(counts) != len(fits):
        raise ConfigurationError("counts must have one entry per fit")
    family = fits[0].family
    if any(f.family is not family for f in fits):
        raise ConfigurationError("all fits must be of the same family")
    params = np.array([f.params for f in fits])
    counts = np.asarray(counts, dtype=float)
    return FitAggregate(
        family=family,
        means=tuple(float(v) for v in params.mean(axis=0)),
        stds=tuple(float(v) for v in params.std(axis=0, ddof=1)),
        l_mean=float(counts.mean()),
        l_std=float(counts.std(ddof=1)),
    )


def _table_row(record: WeatherRecord, m_runs: int, cfg: SimConfig, seeds: list[int]) -> TrainingRow:
    fits: dict[DistFamily, list[FitResult]] = {fam: [] for fam in DistFamily}
    failed: set[DistFamily] = set()
    counts = []
    for m in range(m_runs):
        out = simulate(record, cfg, seeds[m])
        counts.append(out.count)
        for fam in DistFamily:
            if fam in failed:
                continue
            try:
                fits[fam].append(fit_family(fam, out.peaks))
            except (InsufficientDataError, DomainError, DegenerateFitError, NumericError):
                failed.add(fam)
    counts_arr = np.asarray(counts, dtype=float)
    row = TrainingRow(
        hs=record.hs, tp=record.tp, vw=record.vw,
        l_mean=float(counts_arr.mean()), l_std=float(counts_arr.std(ddof=1)),
    )
    for fam in DistFamily:
        if fam in failed:
            continue
        agg = aggregate_fits(fits[fam], counts)
        for name, mean, std in zip(fam.param_names, agg.means, agg.stds):
            setattr(row, f"{fam.value}_{name}", mean)
            setattr(row, f"{fam.value}_{name}_std", std)
    return row


def build_training_table(
    design: Sequence[WeatherRecord],
    m_runs: int,
    cfg: SimConfig,
    seed: int,
    threads: int = 1,
) -> TrainingTable:
    """Run the simulator M times per design point, fit all three families
    per run, and aggregate into one row per point.

    A family that fails on any of the M runs is marked missing for that row
    (the other families keep their data). Rows come back in design order
    regardless of thread scheduling, and the 80/20 split is a seeded
    shuffle, so the table is a pure function of (design, m_runs, cfg, seed).
    """
    if m_runs < 2:
        raise ConfigurationError(f"m_runs must be >= 2 (std undefined), got {m_runs}")
    seeds = [[derive_seed(seed, TAG_SIM, i, m) for m in range(m_runs)] for i in range(len(design))]
    if threads > 1 and len(design) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda args: _table_row(*args),
                                 [(r, m_runs, cfg, seeds[i]) for i, r in enumerate(design)]))
    else:
        rows = [_table_row(r, m_runs, cfg, seeds[i]) for i, r in enumerate(design)]
    n = len(rows)
    if n:
        rng = np.random.default_rng(derive_seed(seed, TAG_SPLIT))
        perm = rng.permutation(n)
        n_train = int(round(TRAIN_FRACTION * n))
        test_set = set(int(i) for i in perm[n_train:])
        for i, row in enumerate(rows):
            row.split = "test" if i in test_set else "train"
    logger.info("built training table: %d rows (%d train / %d test), M=%d",
                n, n - sum(r.split == "test" for r in rows),
                sum(r.split == "test" for r in rows), m_runs)
    return TrainingTable(rows=rows)


def write_training_table(path: str | Path, table: TrainingTable) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in table.rows:
            record = []
            for col in TABLE_COLUMNS:
                value = getattr(row, col)
                if value is None:
                    record.append("")
                elif col == "split":
                    record.append(value)
                else:
                    record.append(repr(float(value)))
            writer.writerow(record)


def load_training_table(path: str | Path) -> TrainingTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file")
        if tuple(header) != TABLE_COLUMNS:
            raise SchemaError(f"{path}: unexpected columns {header}")
        rows = []
        for line, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(TABLE_COLUMNS):
                raise ParseError(f"expected {len(TABLE_COLUMNS)} fields, got {len(record)}", line=line)
            kwargs = {}
            for col, value in zip(TABLE_COLUMNS, record):
                if col == "split":
                    if value not in ("train", "test"):
                        raise ParseError(f"split must be train or test, got {value!r}", line=line)
                    kwargs[col] = value
                elif value == "":
                    kwargs[col] = None
                else:
                    try:
                        kwargs[col] = float(value)
                    except ValueError:
                        raise ParseError(f"non-numeric value {value!r} in column {col}", line=line)
            for col in ("hs", "tp", "vw", "l_mean", "l_std"):
                if kwargs[col] is None:
                    raise ParseError(f"column {col} may not be empty", line=line)
            rows.append(TrainingRow(**kwargs))
    return TrainingTable(rows=rows)
