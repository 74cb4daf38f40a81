"""Exogenous inputs: martingale wind forecasts, scenario fans, demand/price series."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

# Stream purposes.  Every random draw in the package comes from
# ``stream(seed, purpose, *keys)`` so runs are reproducible and parallel
# evaluation can split streams per scenario without coordination.
TRUTH = 1
FAN = 2
TUNE = 3
DIRECTION = 4
SERIES = 5
STOPPING = 6

CSV_HEADER = ("step", "demand_mwh", "h2_price_per_mwh")


class IngestionError(ValueError):
    pass


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), *(int(k) for k in keys)))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class ForecastModel:
    relative_std: float = 0.1
    seed: int = 0
    clamp_max: Optional[float] = None

    def __post_init__(self):
        if not self.relative_std >= 0:
            raise ValueError(f"relative_std must be >= 0, got {self.relative_std}")


@dataclass(frozen=True)
class ScenarioFan:
    point_forecast: np.ndarray   # (h,)
    paths: np.ndarray            # (n_scenarios, h)

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    def __len__(self) -> int:
        return self.paths.shape[0]


@dataclass(frozen=True)
class ExogenousSeries:
    demand: np.ndarray
    hydrogen_price: np.ndarray
    initial_wind: float

    def __post_init__(self):
        d = np.asarray(self.demand, dtype=float)
        p = np.asarray(self.hydrogen_price, dtype=float)
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "hydrogen_price", p)
        if d.shape != p.shape or d.ndim != 1:
            raise IngestionError("demand and price series must be 1-D and of equal length")
        if np.any(d < 0) or np.any(p < 0) or self.initial_wind < 0:
            raise IngestionError("exogenous series must be nonnegative")

    def __len__(self) -> int:
        return self.demand.size

    def head(self, T: int) -> "ExogenousSeries":
        if T > len(self):
            raise IngestionError(f"series has {len(self)} steps, {T} requested")
        return ExogenousSeries(self.demand[:T], self.hydrogen_price[:T], self.initial_wind)


def _step(f: np.ndarray, model: ForecastModel, rng: np.random.Generator) -> np.ndarray:
    eps = model.relative_std * f * rng.standard_normal(f.shape)
    out = np.maximum(f + eps, 0.0)
    if model.clamp_max is not None:
        out = np.minimum(out, model.clamp_max)
    return out


def evolve_forecast(f: float, model: ForecastModel, rng: np.random.Generator) -> float:
    """One martingale update ``f + N(0, (rho f)^2)``, floored at zero."""
    return float(_step(np.array([f], dtype=float), model, rng)[0])


def sample_fan(f: float, horizon: int, count: int, model: ForecastModel,
               rng: np.random.Generator) -> ScenarioFan:
    """``count`` independent forecast paths of length ``horizon`` started at ``f``.

    Draws are taken lead time by lead time across all paths.
    """
    if horizon < 0 or count < 1:
        raise ValueError("need horizon >= 0 and count >= 1")
    paths = np.empty((count, horizon))
    cur = np.full(count, float(f))
    for k in range(horizon):
        cur = _step(cur, model, rng)
        paths[:, k] = cur
    return ScenarioFan(np.full(horizon, float(f)), paths)


def truth_path(model: ForecastModel, initial_wind: float, T: int, rng: np.random.Generator) -> np.ndarray:
    """Realised wind ``E_0 .. E_{T-1}`` with ``E_0`` equal to the initial value."""
    if T < 1:
        raise ValueError("T must be >= 1")
    out = np.empty(T)
    cur = np.array([float(initial_wind)])
    out[0] = cur[0]
    for t in range(1, T):
        cur = _step(cur, model, rng)
        out[t] = cur[0]
    return out


def load_series(path, initial_wind: float) -> ExogenousSeries:
    """Read ``step,demand_mwh,h2_price_per_mwh`` rows (header required)."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"series file not found: {path}")
    demand, price = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise IngestionError(f"{path}:1: expected header {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise IngestionError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                step = int(row[0])
                d = float(row[1])
                p = float(row[2])
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from None
            if step != len(demand):
                raise IngestionError(f"{path}:{lineno}: expected step {len(demand)}, got {step}")
            if not (math.isfinite(d) and math.isfinite(p)) or d < 0 or p < 0:
                raise IngestionError(f"{path}:{lineno}: demand and price must be finite and nonnegative")
            demand.append(d)
            price.append(p)
    if not demand:
        raise IngestionError(f"{path}: no data rows")
    return ExogenousSeries(np.array(demand), np.array(price), float(initial_wind))


def write_series(series: ExogenousSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, (d, p) in enumerate(zip(series.demand, series.hydrogen_price)):
            w.writerow([t, repr(float(d)), repr(float(p))])


def synthesize_series(peak: float, T: int, seed: int = 0, initial_wind: Optional[float] = None,
                      price_level: float = 40.0) -> ExogenousSeries:
    """Seasonal demand peaking exactly at ``peak`` and monthly step prices.

    Demand follows an annual cosine (winter high) with a weekday/weekend
    pattern and mild noise; prices are piecewise constant per 1/12 year.
    """
    if peak <= 0 or T < 1:
        raise ValueError("need peak > 0 and T >= 1")
    rng = stream(seed, SERIES)
    t = np.arange(T)
    season = 1.0 + 0.25 * np.cos(2 * np.pi * t / 365.0)
    week = np.where(t % 7 >= 5, 0.9, 1.0)
    noise = 1.0 + 0.03 * rng.standard_normal(T)
    d = season * week * noise
    d = d * (peak / d.max())
    n_months = int(math.ceil(T * 12 / 365)) + 1
    monthly = price_level * (1.0 + 0.3 * np.cos(2 * np.pi * np.arange(n_months) / 12.0)) \
        * np.exp(0.15 * rng.standard_normal(n_months))
    price = monthly[(t * 12) // 365]
    f0 = 0.8 * peak if initial_wind is None else initial_wind
    return ExogenousSeries(d, price, float(f0))
