"""Run configuration files and data loading for the command line.

The format is one ``key = value`` pair per line. Blank lines and lines
starting with ``#`` are ignored, list values are comma-separated, and relative
paths are resolved against the directory holding the config file::

    target = gdp_growth
    features = treasury_bill_3m, share_price_change, household_debt_gdp
    train_start = 1970Q2
    first_forecast = 1990Q2
    last_forecast = 2010Q4
    lagged_release = household_debt_gdp:2
    transform.gdp_growth = pct_change_annualised
    variant.Omitting household debt to GDP = treasury_bill_3m, share_price_change
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backtest import BacktestConfig
from .errors import ConfigError, CoverageError, MacrocastError
from .evaluation import US_TABLE3_VARIANTS
from .forest import ForestParams
from .gapfill import DEFAULT_MAX_GAP
from .quarterly import PanelDataset, Quarter, QuarterlySeries, load_series_csv, parse_quarter, pct_change

TRANSFORMS = ("none", "pct_change", "pct_change_annualised")
FORMATS = ("csv", "jsonl")

_SCALAR_KEYS = {
    "target", "features", "lags", "horizon", "train_start", "first_forecast", "last_forecast",
    "window", "n_forests", "n_trees", "mtry", "min_node_size", "seed", "lagged_release",
    "ar_fit", "max_gap", "data_dir", "output_dir", "format", "ablation_mode", "variants",
    "write_forest_means", "ols_baseline", "calm_period", "focus_period",
}
_REQUIRED = ("target", "features", "train_start", "first_forecast", "last_forecast")


@dataclass(frozen=True)
class RunConfig:
    backtest: BacktestConfig
    data_dir: Path
    output_dir: Path
    transforms: dict[str, str] = field(default_factory=dict)
    variants: tuple[tuple[str, tuple[str, ...]], ...] = ()
    ablation_mode: str = "replicate"
    report_format: str = "csv"
    write_forest_means: bool = False
    ols_baseline: bool = True
    calm_period: tuple[Quarter, Quarter] | None = None
    focus_period: tuple[Quarter, Quarter] | None = None
    source_text: str = ""

    def columns(self) -> list[str]:
        """Every column the run reads, target first, without repeats."""
        cols = [self.backtest.target_column, *self.backtest.feature_columns]
        for _, vs in self.variants:
            cols += vs
        return list(dict.fromkeys(cols))


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int(key: str, value: str, lo: int | None = None) -> int:
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if lo is not None and n < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {n}")
    return n


def _bool(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {value!r}")


def _quarter(key: str, value: str) -> Quarter:
    try:
        return parse_quarter(value)
    except MacrocastError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _period(key: str, value: str) -> tuple[Quarter, Quarter]:
    parts = [p.strip() for p in value.replace("..", ",").split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'FIRST..LAST', got {value!r}")
    return _quarter(key, parts[0]), _quarter(key, parts[1])


def _window(value: str) -> int | None:
    if value == "expanding":
        return None
    if value.startswith("rolling:"):
        return _int("window", value[len("rolling:"):], lo=1)
    raise ConfigError(f"window: expected 'expanding' or 'rolling:N', got {value!r}")


def _lagged(value: str) -> tuple[tuple[str, int], ...]:
    out = []
    for item in _split_list(value):
        col, sep, lag = item.partition(":")
        if not sep:
            raise ConfigError(f"lagged_release: expected 'column:lag', got {item!r}")
        out.append((col.strip(), _int("lagged_release", lag.strip(), lo=0)))
    return tuple(out)


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    base = Path(base_dir)
    raw: dict[str, str] = {}
    transforms: dict[str, str] = {}
    custom: list[tuple[str, tuple[str, ...]]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, value = s.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {s!r}")
        key, value = key.strip(), value.strip()
        if key.startswith("transform."):
            col = key[len("transform."):]
            if value not in TRANSFORMS:
                raise ConfigError(f"line {lineno}: transform for {col} must be one of {', '.join(TRANSFORMS)}")
            if col in transforms:
                raise ConfigError(f"line {lineno}: duplicate key {key}")
            transforms[col] = value
        elif key.startswith("variant."):
            label = key[len("variant."):].strip()
            if not label:
                raise ConfigError(f"line {lineno}: variant label is empty")
            custom.append((label, tuple(_split_list(value))))
        elif key in _SCALAR_KEYS:
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key}")
            raw[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")

    lags = tuple(_int("lags", v, lo=1) for v in _split_list(raw.get("lags", "4,5")))
    mtry_raw = raw.get("mtry", "auto")
    params = ForestParams(
        n_trees=_int("n_trees", raw.get("n_trees", "500"), lo=1),
        mtry=None if mtry_raw == "auto" else _int("mtry", mtry_raw, lo=1),
        min_node_size=_int("min_node_size", raw.get("min_node_size", "5"), lo=1),
        seed=_int("seed", raw.get("seed", "0"), lo=0),
    )
    try:
        bt = BacktestConfig(
            target_column=raw["target"],
            feature_columns=tuple(_split_list(raw["features"])),
            train_start=_quarter("train_start", raw["train_start"]),
            first_forecast=_quarter("first_forecast", raw["first_forecast"]),
            last_forecast=_quarter("last_forecast", raw["last_forecast"]),
            lags=lags,
            horizon=_int("horizon", raw.get("horizon", str(min(lags) if lags else 4)), lo=1),
            window=_window(raw.get("window", "expanding")),
            n_forests=_int("n_forests", raw.get("n_forests", "100"), lo=1),
            forest_params=params,
            lagged_release=_lagged(raw.get("lagged_release", "")),
            ar_fit=raw.get("ar_fit", "window"),
            max_gap=_int("max_gap", raw.get("max_gap", str(DEFAULT_MAX_GAP)), lo=0),
        )
    except MacrocastError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    preset = raw.get("variants", "none")
    if preset == "us_table3":
        variants = list(US_TABLE3_VARIANTS) + custom
    elif preset == "none":
        variants = custom
    else:
        raise ConfigError(f"variants: expected 'us_table3' or 'none', got {preset!r}")

    mode = raw.get("ablation_mode", "replicate")
    if mode not in ("replicate", "ensemble"):
        raise ConfigError(f"ablation_mode must be 'replicate' or 'ensemble', got {mode!r}")
    fmt = raw.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}, got {fmt!r}")

    return RunConfig(
        backtest=bt,
        data_dir=(base / raw.get("data_dir", ".")).resolve(),
        output_dir=(base / raw.get("output_dir", "out")).resolve(),
        transforms=transforms,
        variants=tuple(variants),
        ablation_mode=mode,
        report_format=fmt,
        write_forest_means=_bool("write_forest_means", raw.get("write_forest_means", "false")),
        ols_baseline=_bool("ols_baseline", raw.get("ols_baseline", "true")),
        calm_period=_period("calm_period", raw["calm_period"]) if "calm_period" in raw else None,
        focus_period=_period("focus_period", raw["focus_period"]) if "focus_period" in raw else None,
        source_text=text,
    )


def load_config(path: Path | str) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, p.parent)


def series_path(run: RunConfig, name: str) -> Path:
    return run.data_dir / f"{name}.csv"


def load_series(run: RunConfig, name: str) -> QuarterlySeries:
    path = series_path(run, name)
    if not path.is_file():
        raise CoverageError(f"series {name} not found")
    s = load_series_csv(path.read_bytes(), name)
    kind = run.transforms.get(name, "none")
    if kind == "pct_change":
        s = pct_change(s)
    elif kind == "pct_change_annualised":
        s = pct_change(s, annualise=True)
    return s


def required_end(cfg: BacktestConfig, name: str) -> Quarter:
    """Last quarter of ``name`` that any forecast in the run can see."""
    if name == cfg.target_column:
        return cfg.last_forecast
    return cfg.origin(cfg.last_forecast) - dict(cfg.lagged_release).get(name, 0)


def load_panel(run: RunConfig) -> PanelDataset:
    """Panel over ``train_start..last_forecast`` for every column the run reads.

    A column may end before ``last_forecast`` as long as it reaches the last
    quarter any origin can see; the unseen tail is padded with its final value
    and never read.
    """
    cfg = run.backtest
    first, last = cfg.train_start, cfg.last_forecast
    n = last - first + 1
    cols: dict[str, np.ndarray] = {}
    for name in run.columns():
        s = load_series(run, name)
        need = required_end(cfg, name)
        if s.start > first:
            raise CoverageError(f"series {name} starts {s.start}, after train_start {first}")
        if s.end < need:
            raise CoverageError(f"series {name} ends {s.end}, needed through {need}")
        vals = s.window(first, min(s.end, last)).values
        if len(vals) < n:
            vals = np.concatenate([vals, np.full(n - len(vals), vals[-1])])
        cols[name] = vals
    return PanelDataset(first, last, cols)


def data_fingerprints(run: RunConfig) -> list[tuple[str, str]]:
    return [
        (name, hashlib.sha256(series_path(run, name).read_bytes()).hexdigest())
        for name in run.columns()
    ]
