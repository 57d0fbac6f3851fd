"""Brute-force order statistics over a weather sequence.

Streams every hour's peak array (from the simulator or a surrogate) through
a bounded top-k accumulator, repeats the whole sweep M times with derived
seeds to estimate the distribution of Y_k, and compares candidate results
against a reference run.
"""

from __future__ import annotations

import csv
import heapq
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from searesponse.errors import ConfigurationError, InsufficientDataError, SchemaError
from searesponse.seeding import TAG_QOI, derive_seed
from searesponse.simulator import SimConfig, simulate
from searesponse.surrogate import (
    SurrogateModel,
    generate_from_moments,
    predict_moments_batch,
)
from searesponse.weather import WeatherRecord, records_to_array

logger = logging.getLogger(__name__)

SOURCE_SIMULATOR = "simulator"
SOURCE_SURROGATE = "surrogate"

RANK_SUMMARY_COLUMNS = ("rank", "mean", "p2.5", "p97.5")


class TopK:
    """Bounded collection of the k largest values seen so far (min-heap).

    Ties among equal values are kept arbitrarily; the retained multiset
    always equals the k largest of everything inserted.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        self.k = k
        self._heap: list[float] = []

    def __len__(self) -> int:
        return len(self._heap)

    def update(self, batch: Sequence[float]) -> "TopK":
        values = np.asarray(batch, dtype=float).ravel()
        pos = 0
        heap = self._heap
        while len(heap) < self.k and pos < len(values):
            heapq.heappush(heap, float(values[pos]))
            pos += 1
        if pos < len(values):
            # Anything not above the current floor can never enter; the
            # pushpop handles stragglers whose floor rose mid-batch.
            for v in values[pos:][values[pos:] > heap[0]]:
                heapq.heappushpop(heap, float(v))
        return self

    def merge(self, other: "TopK") -> "TopK":
        if other.k != self.k:
            raise ConfigurationError(f"cannot merge TopK with k={other.k} into k={self.k}")
        merged = TopK(self.k)
        merged.update(np.asarray(self._heap))
        merged.update(np.asarray(other._heap))
        return merged

    def values_descending(self) -> np.ndarray:
        return np.sort(np.asarray(self._heap, dtype=float))[::-1]


def topk_update(acc: TopK, batch: Sequence[float]) -> TopK:
    """Fold a batch of responses into the accumulator."""
    return acc.update(batch)


def extract_yk(acc: TopK) -> float:
    """The kth-largest value seen: the smallest retained value."""
    if len(acc) < acc.k:
        raise InsufficientDataError(
            f"need {acc.k} responses for Y_{acc.k}, saw {len(acc)} (deficit {acc.k - len(acc)})"
        )
    return float(min(acc._heap))


@dataclass(frozen=True)
class QoiConfig:
    """k: order-statistic rank; theta_frozen: draw the surrogate's parameter
    shifts once per realization instead of per (realization, hour)."""

    k: int = 100
    n_hours: int = 0
    realizations: int = 1
    source: str = SOURCE_SIMULATOR
    base_seed: int = 0
    theta_frozen: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.n_hours < 1:
            raise ConfigurationError(f"n_hours must be >= 1, got {self.n_hours}")
        if self.realizations < 1:
            raise ConfigurationError(f"realizations must be >= 1, got {self.realizations}")
        if self.source not in (SOURCE_SIMULATOR, SOURCE_SURROGATE):
            raise ConfigurationError(f"unknown source {self.source!r}")


@dataclass
class QoiResult:
    """M realized values of Y_k plus per-rank summaries across realizations."""

    k: int
    source: str
    base_seed: int
    yk_samples: np.ndarray    # (M,)
    rank_means: np.ndarray    # (k,), rank 1 first
    rank_p025: np.ndarray
    rank_p975: np.ndarray
    total_count: int


def _one_realization(batches, k: int, m: int) -> tuple[np.ndarray, int]:
    acc = TopK(k)
    total = 0
    for peaks in batches:
        total += len(peaks)
        acc.update(peaks)
    if len(acc) < k:
        raise InsufficientDataError(
            f"realization {m}: only {len(acc)} peaks total, need {k} for Y_{k}"
        )
    return acc.values_descending(), total


def run_qoi(
    cfg: QoiConfig,
    weather: Sequence[WeatherRecord],
    model: Union[SimConfig, SurrogateModel],
    threads: int = 1,
) -> QoiResult:
    """Estimate the distribution of Y_k by M full sweeps over the weather.

    Every (realization, hour) pair gets a seed derived from the base seed,
    so results are a pure function of (cfg, weather, model) and independent
    of thread scheduling. The weather sequence is fixed across
    realizations; only the seeds vary.
    """
    if len(weather) != cfg.n_hours:
        raise ConfigurationError(f"weather length {len(weather)} != configured n_hours {cfg.n_hours}")
    if isinstance(model, SimConfig):
        if cfg.source != SOURCE_SIMULATOR:
            raise ConfigurationError(f"source {cfg.source!r} does not match a SimConfig model")

        def realization_batches(m: int):
            for i, record in enumerate(weather):
                yield simulate(record, model, derive_seed(cfg.base_seed, TAG_QOI, m, i)).peaks

    elif isinstance(model, SurrogateModel):
        if cfg.source != SOURCE_SURROGATE:
            raise ConfigurationError(f"source {cfg.source!r} does not match a SurrogateModel")
        # GP moments depend only on the hour, not the realization: compute
        # them once for the whole sequence. The draws themselves still run
        # per (realization, hour) with the same seeds and sampling path as
        # generate_responses, so output is identical to the per-record API.
        theta_moments, l_moments = predict_moments_batch(model, records_to_array(weather))
        n_params = len(model.family.param_names)

        def realization_batches(m: int):
            shifts = None
            if cfg.theta_frozen:
                shift_rng = np.random.default_rng(derive_seed(cfg.base_seed, TAG_QOI, m))
                shifts = shift_rng.standard_normal(n_params)
            for i in range(len(weather)):
                out = generate_from_moments(
                    model.family, theta_moments[i], l_moments[i], model.mode,
                    derive_seed(cfg.base_seed, TAG_QOI, m, i),
                    frozen_shifts=shifts,
                )
                yield out.peaks

    else:
        raise ConfigurationError(f"model must be SimConfig or SurrogateModel, got {type(model)!r}")

    def one(m: int):
        return _one_realization(realization_batches(m), cfg.k, m)

    if threads > 1 and cfg.realizations > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(cfg.realizations)))
    else:
        results = [one(m) for m in range(cfg.realizations)]

    ranks = np.vstack([r[0] for r in results])          # (M, k)
    total = int(sum(r[1] for r in results))
    p025, p975 = np.percentile(ranks, [2.5, 97.5], axis=0)
    logger.info("qoi %s: k=%d M=%d hours=%d, %d responses processed",
                cfg.source, cfg.k, cfg.realizations, cfg.n_hours, total)
    return QoiResult(
        k=cfg.k, source=cfg.source, base_seed=cfg.base_seed,
        yk_samples=ranks[:, cfg.k - 1].copy(),
        rank_means=ranks.mean(axis=0), rank_p025=p025, rank_p975=p975,
        total_count=total,
    )


@dataclass(frozen=True)
class YkSummary:
    mean: float
    std: float
    p025: float
    p50: float
    p975: float


def _yk_summary(samples: np.ndarray) -> YkSummary:
    p = np.percentile(samples, [2.5, 50.0, 97.5])
    std = float(samples.std(ddof=1)) if len(samples) > 1 else 0.0
    return YkSummary(mean=float(samples.mean()), std=std,
                     p025=float(p[0]), p50=float(p[1]), p975=float(p[2]))


@dataclass
class ComparisonReport:
    """Candidate (a) vs reference (b) comparison of two Y_k estimates."""

    k: int
    a_source: str
    b_source: str
    a_yk: YkSummary
    b_yk: YkSummary
    relative_mean_difference: float
    conservative: bool
    band_overlap_fraction: float
    closest_rank: int
    a_rank_means: np.ndarray
    a_rank_p025: np.ndarray
    a_rank_p975: np.ndarray
    b_rank_means: np.ndarray
    b_rank_p025: np.ndarray
    b_rank_p975: np.ndarray


def compare_qoi(a: QoiResult, b: QoiResult) -> ComparisonReport:
    """Compare candidate a against reference b (same k).

    The signed relative difference is positive when the candidate's mean
    Y_k exceeds the reference's (a conservative estimate); closest_rank is
    the rank in b whose mean across realizations best matches a's mean
    Y_k, with ties resolved toward the deepest rank.
    """
    if a.k != b.k:
        raise ConfigurationError(f"cannot compare k={a.k} against k={b.k}")
    a_yk = _yk_summary(a.yk_samples)
    b_yk = _yk_summary(b.yk_samples)
    diff = (a_yk.mean - b_yk.mean) / abs(b_yk.mean)
    within = (a.rank_means >= b.rank_p025) & (a.rank_means <= b.rank_p975)
    gaps = np.abs(b.rank_means - a_yk.mean)
    closest = a.k - int(np.argmin(gaps[::-1]))
    return ComparisonReport(
        k=a.k, a_source=a.source, b_source=b.source,
        a_yk=a_yk, b_yk=b_yk,
        relative_mean_difference=float(diff),
        conservative=diff > 0.0,
        band_overlap_fraction=float(np.mean(within)),
        closest_rank=closest,
        a_rank_means=a.rank_means, a_rank_p025=a.rank_p025, a_rank_p975=a.rank_p975,
        b_rank_means=b.rank_means, b_rank_p025=b.rank_p025, b_rank_p975=b.rank_p975,
    )


def save_qoi_result(directory: str | Path, result: QoiResult) -> None:
    """Write yk_samples.csv, rank_summary.csv, and summary.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "yk_samples.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["realization", "yk"])
        for m, value in enumerate(result.yk_samples):
            writer.writerow([m, repr(float(value))])
    with (directory / "rank_summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RANK_SUMMARY_COLUMNS)
        for j in range(result.k):
            writer.writerow([
                j + 1,
                repr(float(result.rank_means[j])),
                repr(float(result.rank_p025[j])),
                repr(float(result.rank_p975[j])),
            ])
    summary = {
        "k": result.k,
        "source": result.source,
        "base_seed": result.base_seed,
        "realizations": len(result.yk_samples),
        "total_count": result.total_count,
        "yk": _yk_summary(result.yk_samples).__dict__,
    }
    (directory / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def load_qoi_result(directory: str | Path) -> QoiResult:
    directory = Path(directory)
    summary_path = directory / "summary.json"
    if not summary_path.exists():
        raise SchemaError(f"{directory}: missing summary.json")
    summary = json.loads(summary_path.read_text())
    with (directory / "yk_samples.csv").open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["realization", "yk"]:
            raise SchemaError(f"{directory}/yk_samples.csv: unexpected header {header}")
        yk_samples = np.array([float(row[1]) for row in reader if row])
    with (directory / "rank_summary.csv").open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != RANK_SUMMARY_COLUMNS:
            raise SchemaError(f"{directory}/rank_summary.csv: unexpected header {header}")
        rows = [row for row in reader if row]
    means = np.array([float(r[1]) for r in rows])
    p025 = np.array([float(r[2]) for r in rows])
    p975 = np.array([float(r[3]) for r in rows])
    return QoiResult(
        k=int(summary["k"]), source=summary["source"], base_seed=int(summary["base_seed"]),
        yk_samples=yk_samples, rank_means=means, rank_p025=p025, rank_p975=p975,
        total_count=int(summary["total_count"]),
    )
