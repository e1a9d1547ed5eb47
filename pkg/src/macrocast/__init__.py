"""Walk-forward random-forest forecasting of quarterly GDP growth."""

from __future__ import annotations

__version__ = "0.1.0"

from .backtest import (
    BacktestConfig,
    BacktestResult,
    ForecastRecord,
    build_design,
    ensemble_forecast,
    run_walk_forward,
)
from .errors import MacrocastError
from .evaluation import (
    AblationReport,
    EvalReport,
    OLSFit,
    UncertaintyReport,
    evaluate_backtest,
    ols_baseline,
    ols_regress,
    run_ablation,
    uncertainty_report,
)
from .forest import Forest, ForestParams, RegressionTree, fit_forest, fit_tree, predict_forest, predict_tree
from .gapfill import ARModel, extend_series, fit_ar2, forecast_recursive
from .quarterly import PanelDataset, Quarter, QuarterlySeries, align, load_series_csv, parse_quarter, pct_change

__all__ = [
    "ARModel", "AblationReport", "BacktestConfig", "BacktestResult", "EvalReport", "Forest",
    "ForecastRecord", "ForestParams", "MacrocastError", "OLSFit", "PanelDataset", "Quarter",
    "QuarterlySeries", "RegressionTree", "UncertaintyReport", "align", "build_design",
    "ensemble_forecast", "evaluate_backtest", "extend_series", "fit_ar2", "fit_forest", "fit_tree",
    "forecast_recursive", "load_series_csv", "ols_baseline", "ols_regress", "parse_quarter",
    "pct_change", "predict_forest", "predict_tree", "run_ablation", "run_walk_forward",
    "uncertainty_report",
]
