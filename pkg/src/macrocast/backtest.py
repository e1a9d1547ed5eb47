"""Ex-ante walk-forward forecasting.

For a target quarter ``t`` the forecast origin is ``t - horizon``. Only data
dated at or before the origin is visible, and columns released with a lag are
cut back further and filled forward with an AR(2) model, so every record is
computed from an information set a forecaster could actually have held.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, CoverageError, MacrocastError
from .forest import ForestParams, fit_forest, mean_and_sigma, predict_forest
from .gapfill import DEFAULT_MAX_GAP, extend_series, fit_ar2
from .quarterly import PanelDataset, Quarter, QuarterlySeries, quarter_range

US_TABLE2_FEATURES = (
    "treasury_bill_3m",
    "share_price_change",
    "household_debt_gdp",
    "corporate_debt_gdp",
)
US_ALL_FEATURES = US_TABLE2_FEATURES + ("bond_yield_10y", "public_debt_gdp")


@dataclass(frozen=True)
class BacktestConfig:
    target_column: str
    feature_columns: tuple[str, ...]
    train_start: Quarter
    first_forecast: Quarter
    last_forecast: Quarter
    lags: tuple[int, ...] = (4, 5)
    horizon: int = 4
    window: int | None = None  # rolling window length in quarters; None = expanding
    n_forests: int = 100
    forest_params: ForestParams = field(default_factory=ForestParams)
    # (column, publication lag in quarters)
    lagged_release: tuple[tuple[str, int], ...] = ()
    ar_fit: str = "window"  # "window": refit per origin; "full": one fit on the whole series
    max_gap: int = DEFAULT_MAX_GAP

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        object.__setattr__(self, "lags", tuple(int(k) for k in self.lags))
        object.__setattr__(
            self, "lagged_release", tuple((str(c), int(k)) for c, k in self.lagged_release)
        )
        if not self.feature_columns:
            raise ConfigError("feature_columns is empty")
        if len(set(self.feature_columns)) != len(self.feature_columns):
            raise ConfigError(f"duplicate feature columns in {list(self.feature_columns)}")
        if not self.lags or min(self.lags) < 1 or len(set(self.lags)) != len(self.lags):
            raise ConfigError(f"lags must be distinct positive integers, got {list(self.lags)}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.horizon != min(self.lags):
            raise ConfigError(
                f"horizon {self.horizon} must equal the shortest lag {min(self.lags)}"
            )
        if self.first_forecast > self.last_forecast:
            raise ConfigError(f"first_forecast {self.first_forecast} is after {self.last_forecast}")
        earliest = self.train_start + (self.horizon + max(self.lags))
        if self.first_forecast < earliest:
            raise ConfigError(
                f"first_forecast {self.first_forecast} leaves no training rows; earliest is {earliest}"
            )
        if self.window is not None and self.window < 1:
            raise ConfigError(f"rolling window must be positive, got {self.window}")
        if self.n_forests < 1:
            raise ConfigError(f"n_forests must be positive, got {self.n_forests}")
        if self.ar_fit not in ("window", "full"):
            raise ConfigError(f"ar_fit must be 'window' or 'full', got {self.ar_fit!r}")
        for col, lag in self.lagged_release:
            if lag < 0:
                raise ConfigError(f"publication lag for {col} must be >= 0, got {lag}")
            if lag > self.max_gap:
                raise ConfigError(
                    f"publication lag {lag} for {col} exceeds max_gap {self.max_gap}"
                )

    @property
    def n_features(self) -> int:
        return len(self.feature_columns) * len(self.lags)

    def feature_names(self) -> list[str]:
        return [f"{c}_lag{k}" for c in self.feature_columns for k in self.lags]

    def targets(self) -> list[Quarter]:
        return quarter_range(self.first_forecast, self.last_forecast)

    def origin(self, target: Quarter) -> Quarter:
        return target - self.horizon

    def with_features(self, columns: Sequence[str]) -> BacktestConfig:
        return replace(self, feature_columns=tuple(columns))


@dataclass(frozen=True)
class ForecastRecord:
    target_quarter: Quarter
    prediction: float
    avg_sigma: float
    forest_means: tuple[float, ...]
    estimated_inputs: tuple[tuple[str, Quarter], ...] = ()


@dataclass(frozen=True)
class BacktestResult:
    config: BacktestConfig
    records: tuple[ForecastRecord, ...]
    actuals: QuarterlySeries

    @property
    def predictions(self) -> np.ndarray:
        return np.array([r.prediction for r in self.records])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([r.avg_sigma for r in self.records])

    def replicate_predictions(self) -> np.ndarray:
        """``(n_records, n_replicates)`` matrix of per-forest means."""
        return np.array([r.forest_means for r in self.records])

    def quarters(self) -> list[Quarter]:
        return [r.target_quarter for r in self.records]


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from non-negative integer parts."""
    ss = np.random.SeedSequence([int(p) % 2**64 for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def information_set(
    panel: PanelDataset, cfg: BacktestConfig, origin: Quarter
) -> tuple[PanelDataset, tuple[tuple[str, Quarter], ...]]:
    """Panel as seen at ``origin``.

    Every column is cut at the origin; lagged-release columns are cut a further
    ``lag`` quarters and re-extended to the origin with AR(2) forecasts.
    """
    if origin < panel.first or origin > panel.last:
        raise CoverageError(f"panel {panel.first}..{panel.last} does not contain origin {origin}")
    cols: dict[str, np.ndarray] = {}
    estimated: list[tuple[str, Quarter]] = []
    lagged = dict(cfg.lagged_release)
    for name in panel.names:
        s = panel.series(name)
        seen = s.truncate(origin)
        lag = lagged.get(name, 0)
        if lag > 0:
            visible = s.truncate(origin - lag)
            model = fit_ar2(s if cfg.ar_fit == "full" else visible)
            seen = extend_series(visible, origin, model, cfg.max_gap)
            estimated += [(name, q) for q in seen.estimated]
        cols[name] = seen.values
    return PanelDataset(panel.first, origin, cols), tuple(estimated)


def _training_quarters(cfg: BacktestConfig, target: Quarter) -> list[Quarter]:
    end = cfg.origin(target)
    start = cfg.train_start + max(cfg.lags)
    if cfg.window is not None:
        start = max(start, end - (cfg.window - 1))
    return quarter_range(start, end)


def build_design(
    panel: PanelDataset, cfg: BacktestConfig, target_quarter: Quarter
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature vector for ``target_quarter`` plus the training matrix and targets.

    Columns are ordered feature-major: ``(col0, lag0), (col0, lag1), ...``.
    Nothing dated after ``target_quarter - horizon`` is read.
    """
    origin = cfg.origin(target_quarter)
    missing = [c for c in (cfg.target_column, *cfg.feature_columns) if c not in panel.columns]
    if missing:
        raise CoverageError(f"series {missing[0]} not found in panel")
    if panel.first > cfg.train_start:
        raise CoverageError(f"panel starts {panel.first}, after train_start {cfg.train_start}")
    if panel.last < origin:
        raise CoverageError(f"panel ends {panel.last}, before origin {origin} of {target_quarter}")
    train_q = _training_quarters(cfg, target_quarter)
    if not train_q:
        raise CoverageError(f"no training rows for target {target_quarter}")

    base = panel.first.index
    feats = np.stack([panel.columns[c] for c in cfg.feature_columns])
    lags = np.asarray(cfg.lags)

    def rows_for(quarters: np.ndarray) -> np.ndarray:
        # (n, n_cols, n_lags) -> (n, n_cols * n_lags)
        pos = quarters[:, None] - lags[None, :] - base
        return feats[:, pos].transpose(1, 0, 2).reshape(len(quarters), -1)

    tq = np.array([q.index for q in train_q])
    X = rows_for(tq)
    y = panel.columns[cfg.target_column][tq - base]
    x = rows_for(np.array([target_quarter.index]))[0]
    return x, np.ascontiguousarray(X), np.ascontiguousarray(y)


def ensemble_forecast(
    X: np.ndarray,
    y: np.ndarray,
    x: np.ndarray,
    n_forests: int,
    forest_params: ForestParams,
    seed_context: Sequence[int],
) -> tuple[float, float, tuple[float, ...]]:
    """Average ``n_forests`` independently seeded forests.

    Forest ``r`` uses seed ``derive_seed(*seed_context, r)``. Returns the mean
    of the forest means, the mean of the within-forest tree spreads, and the
    forest means themselves.
    """
    if n_forests < 1:
        raise ConfigError(f"n_forests must be positive, got {n_forests}")
    means, sigmas = [], []
    for r in range(n_forests):
        params = replace(forest_params, seed=derive_seed(*seed_context, r))
        point = predict_forest(fit_forest(X, y, params), x)
        means.append(point.mean)
        sigmas.append(point.sigma)
    mean, _ = mean_and_sigma(np.array(means))
    avg_sigma, _ = mean_and_sigma(np.array(sigmas))
    return mean, avg_sigma, tuple(means)


Predictor = Callable[[np.ndarray, np.ndarray, np.ndarray, Quarter], "tuple[float, float, tuple[float, ...]]"]


def forest_predictor(cfg: BacktestConfig) -> Predictor:
    def predict(X, y, x, target: Quarter):
        return ensemble_forecast(
            X, y, x, cfg.n_forests, cfg.forest_params, (cfg.forest_params.seed, target.index)
        )

    return predict


def worker_count() -> int:
    raw = os.environ.get("MACROCAST_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"MACROCAST_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ConfigError(f"MACROCAST_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def forecast_one(
    panel: PanelDataset, cfg: BacktestConfig, target: Quarter, predictor: Predictor | None = None
) -> ForecastRecord:
    predictor = predictor or forest_predictor(cfg)
    try:
        info, estimated = information_set(panel, cfg, cfg.origin(target))
        x, X, y = build_design(info, cfg, target)
        pred, sigma, means = predictor(X, y, x, target)
    except MacrocastError as exc:
        raise type(exc)(f"target {target}: {exc}") from exc
    used = {(c, target - k) for c in cfg.feature_columns for k in cfg.lags}
    est = tuple((c, q) for c, q in estimated if (c, q) in used)
    return ForecastRecord(target, pred, sigma, means, est)


def run_walk_forward(
    panel: PanelDataset,
    cfg: BacktestConfig,
    predictor: Predictor | None = None,
    workers: int | None = None,
) -> BacktestResult:
    """One record per target quarter, in order.

    Targets may be computed concurrently; each depends only on its own seeds
    so the result does not depend on ``workers``.
    """
    if cfg.target_column not in panel.columns:
        raise CoverageError(f"series {cfg.target_column} not found in panel")
    if panel.last < cfg.last_forecast:
        raise CoverageError(
            f"target {cfg.target_column} ends {panel.last}, before last_forecast {cfg.last_forecast}"
        )
    predictor = predictor or forest_predictor(cfg)
    targets = cfg.targets()
    workers = worker_count() if workers is None else workers

    def one(t: Quarter) -> ForecastRecord:
        return forecast_one(panel, cfg, t, predictor)

    if workers > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(one, targets))
    else:
        records = tuple(map(one, targets))
    actuals = panel.series(cfg.target_column).window(cfg.first_forecast, cfg.last_forecast)
    return BacktestResult(cfg, records, actuals)
