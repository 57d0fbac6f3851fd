"""Hourly weather inputs: CSV ingestion, synthetic multi-year sequences,
and uniform training designs over the input box.

Each record is one hour of sea state: significant wave height ``hs`` [m],
peak wave period ``tp`` [s], and mean wind speed ``vw`` [m/s].
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit

from searesponse.errors import ConfigurationError, ParseError, SchemaError
from searesponse.seeding import TAG_WEATHER, derive_seed

logger = logging.getLogger(__name__)

WEATHER_COLUMNS = ("index", "hs", "tp", "vw")

# Hour-to-hour persistence of the synthetic sequence, applied in logit space.
AR1_COEFF = 0.95


@dataclass(frozen=True)
class WeatherRecord:
    """One hour of sea state."""

    hs: float
    tp: float
    vw: float
    index: int


@dataclass(frozen=True)
class InputBox:
    """Per-variable (min, max) bounds on the weather inputs."""

    hs: tuple[float, float] = (0.2, 12.0)
    tp: tuple[float, float] = (4.0, 20.0)
    vw: tuple[float, float] = (0.0, 30.0)

    def __post_init__(self):
        for name, (lo, hi) in self.bounds().items():
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ConfigurationError(f"{name} bounds must be finite, got ({lo}, {hi})")
            if lo >= hi:
                raise ConfigurationError(f"{name} bounds degenerate: min {lo} >= max {hi}")
            floor = 0.0 if name == "vw" else None
            if floor is not None:
                if lo < floor:
                    raise ConfigurationError(f"{name} min must be >= {floor}, got {lo}")
            elif lo <= 0.0:
                raise ConfigurationError(f"{name} min must be positive, got {lo}")

    def bounds(self) -> dict[str, tuple[float, float]]:
        return {"hs": self.hs, "tp": self.tp, "vw": self.vw}

    def contains(self, record: WeatherRecord) -> bool:
        return (
            self.hs[0] <= record.hs <= self.hs[1]
            and self.tp[0] <= record.tp <= self.tp[1]
            and self.vw[0] <= record.vw <= self.vw[1]
        )


DEFAULT_BOX = InputBox()


def _parse_row(row: list[str], line: int) -> WeatherRecord:
    try:
        index = int(row[0])
        hs, tp, vw = (float(v) for v in row[1:4])
    except ValueError as exc:
        raise ParseError(f"non-numeric value in row {row!r}: {exc}", line=line) from None
    if not all(np.isfinite(v) for v in (hs, tp, vw)):
        raise ParseError(f"non-finite value in row {row!r}", line=line)
    if hs <= 0.0:
        raise ParseError(f"hs must be positive, got {hs}", line=line)
    if tp <= 0.0:
        raise ParseError(f"tp must be positive, got {tp}", line=line)
    if vw < 0.0:
        raise ParseError(f"vw must be non-negative, got {vw}", line=line)
    return WeatherRecord(hs=hs, tp=tp, vw=vw, index=index)


def load_weather(path: str | Path) -> list[WeatherRecord]:
    """Load an hourly weather CSV with header ``index,hs,tp,vw``.

    Raises SchemaError on a wrong header and ParseError (with the 1-based
    file line) on non-numeric or physically impossible values.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(WEATHER_COLUMNS)}")
        if tuple(h.strip() for h in header) != WEATHER_COLUMNS:
            raise SchemaError(
                f"{path}: expected columns {','.join(WEATHER_COLUMNS)}, got {','.join(header)}"
            )
        records = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(WEATHER_COLUMNS):
                raise ParseError(f"expected {len(WEATHER_COLUMNS)} fields, got {len(row)}", line=line)
            records.append(_parse_row(row, line))
    logger.info("loaded %d weather records from %s", len(records), path)
    return records


def write_weather(path: str | Path, records: Sequence[WeatherRecord]) -> None:
    """Write records in the canonical CSV format (deterministic float repr)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WEATHER_COLUMNS)
        for r in records:
            writer.writerow([r.index, repr(float(r.hs)), repr(float(r.tp)), repr(float(r.vw))])


def _ar1_series(n: int, coeff: float, rng: np.random.Generator) -> np.ndarray:
    # Stationary AR(1) with N(0,1) marginals: x0 ~ N(0,1), innovations
    # scaled by sqrt(1-coeff^2).
    eps = rng.standard_normal(n)
    eps[1:] *= np.sqrt(1.0 - coeff * coeff)
    return lfilter([1.0], [1.0, -coeff], eps)


def synthesize_weather(n_hours: int, box: InputBox = DEFAULT_BOX, seed: int = 0) -> list[WeatherRecord]:
    """Generate a correlated synthetic hourly sequence inside the box.

    Each variable follows an independent stationary AR(1) process
    (coefficient 0.95) in logit space, squashed into its box interval, so
    consecutive hours are strongly positively correlated while marginals
    stay strictly inside the bounds. Deterministic for a fixed seed.
    """
    if n_hours < 1:
        raise ConfigurationError(f"n_hours must be >= 1, got {n_hours}")
    columns = {}
    for j, (name, (lo, hi)) in enumerate(box.bounds().items()):
        rng = np.random.default_rng(derive_seed(seed, TAG_WEATHER, j))
        z = _ar1_series(n_hours, AR1_COEFF, rng)
        columns[name] = lo + (hi - lo) * expit(z)
    return [
        WeatherRecord(hs=float(columns["hs"][i]), tp=float(columns["tp"][i]),
                      vw=float(columns["vw"][i]), index=i)
        for i in range(n_hours)
    ]


def sample_uniform_inputs(n: int, box: InputBox = DEFAULT_BOX, seed: int = 0) -> list[WeatherRecord]:
    """Draw n independent design points, each coordinate uniform on its interval."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(derive_seed(seed, TAG_WEATHER))
    draws = {name: rng.uniform(lo, hi, size=n) for name, (lo, hi) in box.bounds().items()}
    return [
        WeatherRecord(hs=float(draws["hs"][i]), tp=float(draws["tp"][i]),
                      vw=float(draws["vw"][i]), index=i)
        for i in range(n)
    ]


def records_to_array(records: Sequence[WeatherRecord]) -> np.ndarray:
    """Stack records into an (n, 3) array of columns (hs, tp, vw)."""
    out = np.empty((len(records), 3))
    for i, r in enumerate(records):
        out[i, 0] = r.hs
        out[i, 1] = r.tp
        out[i, 2] = r.vw
    return out
