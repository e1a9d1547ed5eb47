"""Scoring of forecast track records.

Every forecast series is judged the same way: regress the actual outcomes on
the forecasts with an intercept and report the fit. Also here: the linear
baseline run through the identical walk-forward protocol, variable-omission
ablation, and summaries of the within-forest tree spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .backtest import BacktestConfig, BacktestResult, run_walk_forward
from .errors import ConfigError, MacrocastError, RangeError, RankError, ShapeError
from .quarterly import PanelDataset, Quarter
from .tables import Table, table

US_TABLE3_VARIANTS: tuple[tuple[str, tuple[str, ...]], ...] = (
    (
        "Including Treasury Bill, change in share prices, Household and Corporate debt",
        ("treasury_bill_3m", "share_price_change", "household_debt_gdp", "corporate_debt_gdp"),
    ),
    (
        "Omitting change in share prices",
        ("treasury_bill_3m", "household_debt_gdp", "corporate_debt_gdp"),
    ),
    (
        "Omitting Treasury Bill rate",
        ("share_price_change", "household_debt_gdp", "corporate_debt_gdp"),
    ),
    (
        "Omitting household debt to GDP",
        ("treasury_bill_3m", "share_price_change", "corporate_debt_gdp"),
    ),
    (
        "Omitting corporate debt to GDP",
        ("treasury_bill_3m", "share_price_change", "household_debt_gdp"),
    ),
    ("Omitting both debt variables", ("treasury_bill_3m", "share_price_change")),
)


@dataclass(frozen=True)
class OLSFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    r2: float
    adj_r2: float
    resid_se: float
    n: int


@dataclass(frozen=True)
class EvalReport:
    fit: OLSFit
    period: tuple[Quarter, Quarter]
    pairs: tuple[tuple[float, float], ...]  # (actual, predicted)


@dataclass(frozen=True)
class AblationRow:
    label: str
    feature_columns: tuple[str, ...]
    adj_r2: float


@dataclass(frozen=True)
class AblationReport:
    rows: tuple[AblationRow, ...]
    mode: str

    def as_dict(self) -> dict[str, float]:
        return {r.label: r.adj_r2 for r in self.rows}


@dataclass(frozen=True)
class UncertaintyReport:
    summary: tuple[float, float, float, float, float]  # min, q1, mean, q3, max
    corr_pred_sigma: float
    corr_degenerate: bool
    n: int
    turning_point_rows: tuple[tuple[Quarter, float, float], ...]  # quarter, prediction, avg_sigma


def ols_regress(y: Sequence[float], x: Sequence[float]) -> OLSFit:
    """Simple regression of ``y`` on ``x`` with an intercept.

    Standard errors are the classical homoskedastic ones and
    ``adj_r2 = 1 - (1 - r2)(n - 1)/(n - 2)``.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    x = np.asarray(x, dtype=np.float64).ravel()
    if y.size != x.size:
        raise ShapeError(f"y has {y.size} values but x has {x.size}")
    n = y.size
    if n < 3:
        raise ShapeError(f"need at least 3 observations, got {n}")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx == 0.0 or np.all(x == x[0]):
        raise RankError("regressor is constant; slope is not identified")
    slope = float(dx @ dy) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ssr = float(resid @ resid)
    sst = float(dy @ dy)
    # no variation to explain: report zero rather than 0/0
    r2 = 0.0 if sst == 0.0 else min(1.0, max(0.0, 1.0 - ssr / sst))
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)
    s2 = ssr / (n - 2)
    slope_se = math.sqrt(s2 / sxx)
    intercept_se = math.sqrt(s2 * (1.0 / n + xm * xm / sxx))
    return OLSFit(slope, intercept, slope_se, intercept_se, r2, adj, math.sqrt(s2), n)


def evaluate_backtest(result: BacktestResult) -> EvalReport:
    actual = result.actuals.values
    pred = result.predictions
    if len(actual) != len(pred):
        raise ShapeError(f"{len(actual)} actuals for {len(pred)} records")
    fit = ols_regress(actual, pred)
    period = (result.records[0].target_quarter, result.records[-1].target_quarter)
    return EvalReport(fit, period, tuple(zip(actual.tolist(), pred.tolist())))


def replicate_adj_r2(result: BacktestResult) -> float:
    """Mean adjusted R² over replicates, each scored on its own forecasts."""
    actual = result.actuals.values
    reps = result.replicate_predictions()
    return float(np.mean([ols_regress(actual, reps[:, r]).adj_r2 for r in range(reps.shape[1])]))


def _ols_predict(X: np.ndarray, y: np.ndarray, x: np.ndarray, target: Quarter):
    design = np.column_stack([np.ones(len(y)), X])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise RankError(
            f"linear baseline design at origin for {target} has rank {rank} < {design.shape[1]}"
        )
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = float(coef[0] + x @ coef[1:])
    return pred, 0.0, (pred,)


def ols_baseline(panel: PanelDataset, cfg: BacktestConfig, workers: int | None = None) -> BacktestResult:
    """Walk-forward run with a multiple linear regression in place of the forests."""
    return run_walk_forward(panel, cfg, predictor=_ols_predict, workers=workers)


def run_ablation(
    panel: PanelDataset,
    cfg: BacktestConfig,
    variants: Sequence[tuple[str, Sequence[str]]],
    mode: str = "replicate",
    workers: int | None = None,
) -> AblationReport:
    """Re-run the backtest once per feature set.

    ``mode="replicate"`` scores each forest replicate's forecasts separately
    and averages the adjusted R² values; ``mode="ensemble"`` scores the
    replicate-averaged forecasts once, like :func:`evaluate_backtest`.
    """
    if mode not in ("replicate", "ensemble"):
        raise ConfigError(f"ablation mode must be 'replicate' or 'ensemble', got {mode!r}")
    if not variants:
        raise ConfigError("no ablation variants given")
    labels = [label for label, _ in variants]
    dup = {lab for lab in labels if labels.count(lab) > 1}
    if dup:
        raise ConfigError(f"duplicate ablation label {sorted(dup)[0]!r}")
    for label, cols in variants:
        unknown = [c for c in cols if c not in panel.columns]
        if unknown:
            raise ConfigError(f"variant {label!r} uses unknown column {unknown[0]}")
        if not cols:
            raise ConfigError(f"variant {label!r} has no features")

    rows = []
    for label, cols in variants:
        try:
            res = run_walk_forward(panel, cfg.with_features(cols), workers=workers)
        except MacrocastError as exc:
            raise type(exc)(f"variant {label!r}: {exc}") from exc
        score = replicate_adj_r2(res) if mode == "replicate" else evaluate_backtest(res).fit.adj_r2
        rows.append(AblationRow(label, tuple(cols), score))
    return AblationReport(tuple(rows), mode)


def _period_mask(result: BacktestResult, period: tuple[Quarter, Quarter]) -> np.ndarray:
    first, last = period
    if last < first:
        raise RangeError(f"empty period {first}..{last}")
    qs = result.quarters()
    if first < qs[0] or last > qs[-1]:
        raise RangeError(f"period {first}..{last} is outside the record range {qs[0]}..{qs[-1]}")
    return np.array([first <= q <= last for q in qs])


def pearson(a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
    """Correlation and a degenerate flag; zero variance in either input gives ``(0.0, True)``."""
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0 or np.all(a == a[0]) or np.all(b == b[0]):
        return 0.0, True
    r = float(da @ db) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r)), False


def five_number(values: np.ndarray) -> tuple[float, float, float, float, float]:
    """Min, first quartile, mean, third quartile, max.

    Quartiles use linear interpolation between order statistics (numpy's
    default ``"linear"`` method, the inclusive convention).
    """
    v = np.asarray(values, dtype=np.float64)
    if np.all(v == v[0]):
        c = float(v[0])
        return (c, c, c, c, c)
    q1, q3 = np.percentile(v, [25, 75], method="linear")
    mean = min(max(float(v.mean()), float(v.min())), float(v.max()))
    return (float(v.min()), float(q1), mean, float(q3), float(v.max()))


def uncertainty_report(
    result: BacktestResult,
    calm_period: tuple[Quarter, Quarter],
    focus_period: tuple[Quarter, Quarter],
) -> UncertaintyReport:
    calm = _period_mask(result, calm_period)
    focus = _period_mask(result, focus_period)
    sig = result.sigmas
    pred = result.predictions
    corr, degenerate = pearson(pred[calm], sig[calm])
    rows = tuple(
        (r.target_quarter, r.prediction, r.avg_sigma)
        for r, keep in zip(result.records, focus)
        if keep
    )
    return UncertaintyReport(five_number(sig[calm]), corr, degenerate, int(calm.sum()), rows)


# --- report tables ---------------------------------------------------------

EVAL_HEADER = ("label", "n", "slope", "slope_se", "intercept", "intercept_se", "r2", "adj_r2", "resid_se")


def evaluation_table(rows: Sequence[tuple[str, OLSFit]]) -> Table:
    return table(
        EVAL_HEADER,
        [
            (lab, f.n, f.slope, f.slope_se, f.intercept, f.intercept_se, f.r2, f.adj_r2, f.resid_se)
            for lab, f in rows
        ],
    )


def ablation_table(report: AblationReport) -> Table:
    return table(("label", "adj_r2"), [(r.label, r.adj_r2) for r in report.rows])


def uncertainty_table(report: UncertaintyReport) -> Table:
    return table(("quarter", "prediction", "avg_sigma"), report.turning_point_rows)


def backtest_table(result: BacktestResult) -> Table:
    return table(
        ("quarter", "actual", "prediction", "avg_sigma"),
        [
            (r.target_quarter, float(a), r.prediction, r.avg_sigma)
            for r, a in zip(result.records, result.actuals.values)
        ],
    )


def forest_means_table(result: BacktestResult) -> Table:
    n = len(result.records[0].forest_means) if result.records else 0
    return table(
        ("quarter", *(f"forest_{r}" for r in range(n))),
        [(r.target_quarter, *r.forest_means) for r in result.records],
    )
