from __future__ import annotations

import numpy as np
import pytest

from macrocast.backtest import BacktestConfig
from macrocast.forest import ForestParams
from macrocast.quarterly import PanelDataset, Quarter, align
from macrocast.synth import generate

FEATURES = ("treasury_bill_3m", "share_price_change", "household_debt_gdp", "corporate_debt_gdp")
LAGGED = (("household_debt_gdp", 2), ("corporate_debt_gdp", 2))


def synth_panel(scenario="threshold_recession", n=200, seed=1) -> PanelDataset:
    sp = generate(scenario, n, seed)
    return align(list(sp.series), (sp.start, sp.start + (n - 1)))


def small_config(panel: PanelDataset, **kw) -> BacktestConfig:
    base = dict(
        target_column="gdp_growth",
        feature_columns=FEATURES,
        train_start=panel.first,
        first_forecast=panel.first + 60,
        last_forecast=panel.first + 71,
        n_forests=3,
        forest_params=ForestParams(n_trees=20, seed=5),
        lagged_release=LAGGED,
    )
    base.update(kw)
    return BacktestConfig(**base)


@pytest.fixture(scope="session")
def panel() -> PanelDataset:
    return synth_panel(n=120)


@pytest.fixture
def make_panel():
    def build(first: Quarter, columns: dict[str, np.ndarray]) -> PanelDataset:
        n = len(next(iter(columns.values())))
        return PanelDataset(first, first + (n - 1), columns)

    return build
