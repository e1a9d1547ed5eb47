from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import normal_equations
from conftest import small_config
from macrocast.backtest import BacktestResult, ForecastRecord, run_walk_forward
from macrocast.errors import ConfigError, RangeError, RankError, ShapeError
from macrocast.evaluation import (
    US_TABLE3_VARIANTS,
    ablation_table,
    evaluate_backtest,
    evaluation_table,
    five_number,
    ols_baseline,
    ols_regress,
    pearson,
    replicate_adj_r2,
    run_ablation,
    uncertainty_report,
    uncertainty_table,
)
from macrocast.quarterly import PanelDataset, Quarter, QuarterlySeries
from macrocast.tables import to_csv


def fake_result(actual, pred, sigma=None, start=Quarter(2000, 1), means=None):
    n = len(actual)
    sigma = sigma if sigma is not None else [1.0] * n
    recs = tuple(
        ForecastRecord(start + k, float(pred[k]), float(sigma[k]), tuple(means[k]) if means else (float(pred[k]),))
        for k in range(n)
    )
    return BacktestResult(None, recs, QuarterlySeries("y", start, actual))


class TestOLS:
    def test_perfect_fit(self):
        x = np.arange(1.0, 11.0)
        f = ols_regress(2 * x + 1, x)
        assert f.slope == pytest.approx(2.0, abs=1e-12)
        assert f.intercept == pytest.approx(1.0, abs=1e-12)
        assert f.r2 == 1.0 and f.resid_se == pytest.approx(0.0, abs=1e-12)

    def test_three_points(self):
        f = ols_regress([0, 1, 1], [0, 1, 2])
        assert f.slope == pytest.approx(0.5, abs=1e-12)
        assert f.intercept == pytest.approx(1 / 6, abs=1e-12)
        assert f.r2 == pytest.approx(0.75, abs=1e-12)
        assert f.adj_r2 == pytest.approx(0.5, abs=1e-12)
        assert f.n == 3

    def test_constant_x(self):
        with pytest.raises(RankError):
            ols_regress([1, 2, 3], [4, 4, 4])

    def test_shape(self):
        with pytest.raises(ShapeError):
            ols_regress([1, 2, 3], [1, 2])
        with pytest.raises(ShapeError):
            ols_regress([1, 2], [1, 2])

    def test_standard_errors_by_hand(self):
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([2.0, 4.1, 5.9, 8.2, 9.8])
        f = ols_regress(y, x)
        resid = y - (f.intercept + f.slope * x)
        s2 = resid @ resid / 3
        sxx = ((x - x.mean()) ** 2).sum()
        assert f.slope_se == pytest.approx(np.sqrt(s2 / sxx), rel=1e-12)
        assert f.intercept_se == pytest.approx(np.sqrt(s2 * (1 / 5 + x.mean() ** 2 / sxx)), rel=1e-12)
        assert f.resid_se == pytest.approx(np.sqrt(s2), rel=1e-12)

    @settings(max_examples=100)
    @given(st.integers(0, 2**32 - 1))
    def test_normal_equations(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 200))
        x = rng.normal(size=n) * rng.uniform(0.5, 5) + rng.normal()
        y = rng.normal() * x + rng.normal() + rng.normal(size=n)
        f = ols_regress(y, x)
        slope, intercept = normal_equations(y.tolist(), x.tolist())
        assert f.slope == pytest.approx(slope, rel=1e-10, abs=1e-10)
        assert f.intercept == pytest.approx(intercept, rel=1e-10, abs=1e-10)
        assert f.adj_r2 == 1 - (1 - f.r2) * (n - 1) / (n - 2)
        assert 0.0 <= f.r2 <= 1.0 and f.adj_r2 <= f.r2 and f.resid_se >= 0
        resid = y - (f.intercept + f.slope * x)
        scale = max(1.0, float(np.abs(y).max()))
        assert abs(resid.sum()) < 1e-8 * n * scale
        assert abs(resid @ x) < 1e-8 * n * scale * max(1.0, float(np.abs(x).max()))

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=30)
        y = x + rng.normal(size=30)
        assert ols_regress(y, a * x + b).r2 == pytest.approx(ols_regress(y, x).r2, abs=1e-9)

    def test_constant_y(self):
        f = ols_regress([2.0, 2.0, 2.0, 2.0], [1.0, 2.0, 3.0, 4.0])
        assert f.r2 == 0.0 and f.slope == 0.0


class TestEvaluate:
    def test_oracle_forecaster(self):
        a = np.random.default_rng(0).normal(size=40)
        f = evaluate_backtest(fake_result(a, a)).fit
        assert f.slope == pytest.approx(1.0) and f.intercept == pytest.approx(0.0, abs=1e-12)
        assert f.adj_r2 == pytest.approx(1.0)

    def test_period_and_pairs(self):
        a = np.arange(5.0)
        rep = evaluate_backtest(fake_result(a, a[::-1] + np.array([0, 0.1, 0, 0.2, 0])))
        assert rep.period == (Quarter(2000, 1), Quarter(2001, 1))
        assert len(rep.pairs) == rep.fit.n == 5

    def test_shuffled_forecasts_near_zero(self):
        vals = []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a = rng.normal(size=80)
            vals.append(evaluate_backtest(fake_result(a, rng.permutation(a))).fit.adj_r2)
        assert abs(np.mean(vals)) < 0.02

    def test_replicate_average(self):
        a = np.random.default_rng(1).normal(size=20)
        means = [(v + 0.1, v - 0.3 * k) for k, v in enumerate(a)]
        res = fake_result(a, [np.mean(m) for m in means], means=means)
        reps = np.array(means)
        want = np.mean([ols_regress(a, reps[:, r]).adj_r2 for r in range(2)])
        assert replicate_adj_r2(res) == want


class TestBaseline:
    def test_recovers_linear_truth(self):
        rng = np.random.default_rng(2)
        n = 80
        first = Quarter(1980, 1)
        cols = {c: rng.normal(size=n) for c in ("a", "b")}
        y = np.zeros(n)
        y[5:] = 2.0 * cols["a"][1:-4] - 0.5 * cols["a"][:-5] + 1.5 * cols["b"][1:-4] + 0.7
        panel = PanelDataset(first, first + (n - 1), {"y": y, **cols})
        cfg = small_config(
            panel, target_column="y", feature_columns=("a", "b"), lagged_release=(),
            first_forecast=first + 40, last_forecast=first + 79,
        )
        res = ols_baseline(panel, cfg, workers=1)
        assert np.allclose(res.predictions, res.actuals.values, atol=1e-8)
        assert all(r.avg_sigma == 0.0 for r in res.records)
        assert ols_baseline(panel, cfg, workers=1).records == res.records

    def test_singular_design_names_origin(self, panel):
        dup = panel.replace(corporate_debt_gdp=panel.columns["treasury_bill_3m"] * 2)
        cfg = small_config(dup, lagged_release=())
        with pytest.raises(RankError, match=str(cfg.first_forecast)):
            ols_baseline(dup, cfg, workers=1)


class TestAblation:
    def test_full_set_matches_standalone(self, panel):
        cfg = small_config(panel)
        base = run_walk_forward(panel, cfg, workers=1)
        ens = run_ablation(panel, cfg, [("all", cfg.feature_columns)], mode="ensemble", workers=1)
        assert ens.rows[0].adj_r2 == evaluate_backtest(base).fit.adj_r2
        rep = run_ablation(panel, cfg, [("all", cfg.feature_columns)], workers=1)
        assert rep.mode == "replicate" and rep.rows[0].adj_r2 == replicate_adj_r2(base)

    def test_table3_labels(self, panel):
        cfg = small_config(panel, n_forests=1, forest_params=small_config(panel).forest_params,
                           last_forecast=panel.first + 63)
        rep = run_ablation(panel, cfg, US_TABLE3_VARIANTS, workers=1)
        assert [r.label for r in rep.rows] == [v[0] for v in US_TABLE3_VARIANTS]
        assert rep.rows[1].label == "Omitting change in share prices"
        assert to_csv(ablation_table(rep)).splitlines()[0] == "label,adj_r2"

    def test_bad_variants(self, panel):
        cfg = small_config(panel)
        with pytest.raises(ConfigError, match="duplicate"):
            run_ablation(panel, cfg, [("a", ("treasury_bill_3m",)), ("a", ("share_price_change",))])
        with pytest.raises(ConfigError):
            run_ablation(panel, cfg, [])
        with pytest.raises(ConfigError, match="bond_yield_10y"):
            run_ablation(panel, cfg, [("a", ("bond_yield_10y",))])
        with pytest.raises(ConfigError):
            run_ablation(panel, cfg, [("a", cfg.feature_columns)], mode="median")


class TestUncertainty:
    def test_constant_sigma(self):
        a = np.arange(10.0)
        rep = uncertainty_report(
            fake_result(a, a + 1, sigma=[2.0] * 10),
            (Quarter(2000, 1), Quarter(2001, 4)),
            (Quarter(2001, 1), Quarter(2001, 2)),
        )
        assert rep.summary == (2.0,) * 5
        assert rep.corr_pred_sigma == 0.0 and rep.corr_degenerate
        assert rep.n == 8
        assert rep.turning_point_rows == ((Quarter(2001, 1), 5.0, 2.0), (Quarter(2001, 2), 6.0, 2.0))
        assert to_csv(uncertainty_table(rep)).startswith("quarter,prediction,avg_sigma\n2001Q1,5.0,2.0\n")

    def test_summary_order(self):
        rng = np.random.default_rng(4)
        s = rng.gamma(2.0, size=40)
        rep = uncertainty_report(
            fake_result(rng.normal(size=40), rng.normal(size=40), sigma=s),
            (Quarter(2000, 1), Quarter(2009, 4)),
            (Quarter(2005, 1), Quarter(2005, 4)),
        )
        mn, q1, mean, q3, mx = rep.summary
        assert mn <= q1 <= q3 <= mx and mn <= mean <= mx
        assert (q1, q3) == tuple(np.percentile(s, [25, 75]))
        assert -1 <= rep.corr_pred_sigma <= 1 and not rep.corr_degenerate

    def test_period_errors(self):
        a = np.arange(10.0)
        res = fake_result(a, a)
        with pytest.raises(RangeError):
            uncertainty_report(res, (Quarter(2001, 1), Quarter(2000, 1)), (Quarter(2000, 1), Quarter(2000, 1)))
        with pytest.raises(RangeError):
            uncertainty_report(res, (Quarter(1999, 1), Quarter(2000, 1)), (Quarter(2000, 1), Quarter(2000, 1)))

    def test_five_number_linear_quartiles(self):
        assert five_number(np.array([1.0, 2.0, 3.0, 4.0])) == (1.0, 1.75, 2.5, 3.25, 4.0)

    def test_pearson(self):
        r, deg = pearson(np.array([1.0, 2.0, 3.0]), np.array([2.0, 4.0, 6.0]))
        assert r == pytest.approx(1.0) and not deg


def test_evaluation_csv_header():
    f = ols_regress([0, 1, 1], [0, 1, 2])
    text = to_csv(evaluation_table([("x", f)]))
    assert text.splitlines()[0] == "label,n,slope,slope_se,intercept,intercept_se,r2,adj_r2,resid_se"
    assert text.splitlines()[1].startswith("x,3,0.5")
