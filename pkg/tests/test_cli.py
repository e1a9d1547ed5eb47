from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from macrocast.cli import main
from macrocast.config import load_panel, parse_config
from macrocast.errors import ConfigError, CoverageError
from macrocast.evaluation import US_TABLE3_VARIANTS
from macrocast.quarterly import Quarter, QuarterlySeries, write_series_csv
from macrocast.synth import MIN_QUARTERS, generate

FAST = """\
target = gdp_growth
features = treasury_bill_3m, share_price_change, household_debt_gdp, corporate_debt_gdp
train_start = 1960Q1
first_forecast = 1975Q1
last_forecast = 1977Q4
lagged_release = household_debt_gdp:2, corporate_debt_gdp:2
n_forests = 2
n_trees = 15
seed = 3
data_dir = data
output_dir = out
"""


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory) -> Path:
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--seed", "7", "--quarters", "80", "--scenario", "threshold_recession", "--out", str(d / "data")]) == 0
    return d


def write_cfg(root: Path, text: str, name="run.cfg") -> Path:
    p = root / name
    p.write_text(text)
    return p


class TestConfig:
    def test_minimal(self):
        run = parse_config(FAST, "/base")
        cfg = run.backtest
        assert cfg.lags == (4, 5) and cfg.horizon == 4 and cfg.window is None
        assert cfg.forest_params.n_trees == 15 and cfg.forest_params.mtry is None
        assert run.data_dir == Path("/base/data")
        assert run.report_format == "csv" and run.variants == ()

    def test_options(self):
        text = FAST + "\n".join([
            "# comment",
            "window = rolling:30",
            "mtry = 2",
            "format = jsonl",
            "variants = us_table3",
            "variant.extra = treasury_bill_3m",
            "transform.share_price_change = pct_change",
            "calm_period = 1975Q1..1976Q4",
            "ablation_mode = ensemble",
        ])
        run = parse_config(text)
        assert run.backtest.window == 30 and run.backtest.forest_params.mtry == 2
        assert run.report_format == "jsonl" and run.ablation_mode == "ensemble"
        assert len(run.variants) == 7 and run.variants[:6] == US_TABLE3_VARIANTS
        assert run.transforms == {"share_price_change": "pct_change"}
        assert run.calm_period == (Quarter(1975, 1), Quarter(1976, 4))

    @pytest.mark.parametrize(
        "extra",
        ["bogus = 1", "seed = 1", "window = sometimes", "mtry = many", "transform.x = log",
         "format = xml", "lags = 4, 6\nhorizon = 3", "no equals sign", "variants = uk"],
    )
    def test_rejects(self, extra):
        with pytest.raises(ConfigError):
            parse_config(FAST + extra + "\n")

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="target"):
            parse_config("features = a\n")

    def test_short_lagged_column_is_padded(self, tmp_path):
        for name in ("y", "a"):
            s = QuarterlySeries(name, Quarter(2000, 1), np.arange(40.0) + (1 if name == "a" else 0))
            if name == "a":
                s = s.truncate(Quarter(2000, 1) + 33)  # ends at last origin minus 2
            (tmp_path / f"{name}.csv").write_text(write_series_csv(s))
        text = "target = y\nfeatures = a\ntrain_start = 2000Q1\nfirst_forecast = 2005Q1\n"
        text += "last_forecast = 2009Q4\nlagged_release = a:2\n"
        panel = load_panel(parse_config(text, tmp_path))
        assert panel.last == Quarter(2009, 4)
        text2 = text.replace("a:2", "a:1")
        with pytest.raises(CoverageError, match="needed through"):
            load_panel(parse_config(text2, tmp_path))


class TestSynth:
    def test_files_and_determinism(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["synth", "--seed", "7", "--quarters", "200", "--scenario", "linear", "--out", str(tmp_path / sub)]) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert "gdp_growth.csv" in names and "manifest.txt" in names and "synth.cfg" in names
        for n in names:
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()

    def test_threshold_has_recessions(self):
        for seed in range(5):
            sp = generate("threshold_recession", 200, seed)
            growth = sp.get("gdp_growth").values
            assert len(sp.episodes()) >= 2
            neg = np.flatnonzero(growth < 0)
            runs = 1 + int(np.sum(np.diff(neg) > 2)) if neg.size else 0
            assert runs >= 2

    def test_manifest_documents_rule(self, tmp_path):
        main(["synth", "--seed", "1", "--quarters", "60", "--scenario", "threshold_recession", "--out", str(tmp_path)])
        text = (tmp_path / "manifest.txt").read_text()
        assert "household_debt_gdp[t-4] > 78.5" in text and "episode = " in text

    def test_too_short(self, tmp_path, capsys):
        assert main(["synth", "--seed", "1", "--quarters", "10", "--scenario", "linear", "--out", str(tmp_path)]) == 2
        assert capsys.readouterr().err.startswith("length: ")
        assert MIN_QUARTERS > 10

    def test_unknown_scenario(self, tmp_path, capsys):
        assert main(["synth", "--seed", "1", "--quarters", "100", "--scenario", "boom", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert err.startswith("config: ") and err.count("\n") == 1


class TestBacktestCommand:
    def test_happy_path_and_rerun(self, data_dir, tmp_path):
        cfg = write_cfg(data_dir, FAST)
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert files == ["backtest.csv", "evaluation.csv", "manifest.txt"]
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        lines = (tmp_path / "a" / "backtest.csv").read_text().splitlines()
        assert lines[0] == "quarter,actual,prediction,avg_sigma" and len(lines) == 13
        ev = (tmp_path / "a" / "evaluation.csv").read_text().splitlines()
        assert [r.split(",")[0] for r in ev[1:]] == ["random_forest", "ols_baseline"]
        man = (tmp_path / "a" / "manifest.txt").read_text()
        assert "gdp_growth.csv = " in man and "seed = 3" in man

    def test_optional_outputs(self, data_dir, tmp_path):
        extra = "write_forest_means = true\ncalm_period = 1975Q1..1976Q4\nfocus_period = 1977Q1..1977Q4\nformat = jsonl\n"
        cfg = write_cfg(data_dir, FAST + extra, "opt.cfg")
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert files == ["backtest.jsonl", "evaluation.jsonl", "forest_means.jsonl", "manifest.txt", "uncertainty.jsonl"]
        rows = [json.loads(x) for x in (tmp_path / "uncertainty.jsonl").read_text().splitlines()]
        assert [r["quarter"] for r in rows] == ["1977Q1", "1977Q2", "1977Q3", "1977Q4"]
        fm = json.loads((tmp_path / "forest_means.jsonl").read_text().splitlines()[0])
        assert set(fm) == {"quarter", "forest_0", "forest_1"}
        assert "avg_sigma q1 = " in (tmp_path / "manifest.txt").read_text()

    def test_missing_column_file(self, data_dir, tmp_path, capsys):
        d = tmp_path / "data"
        d.mkdir()
        for p in (data_dir / "data").glob("*.csv"):
            if p.name != "household_debt_gdp.csv":
                (d / p.name).write_bytes(p.read_bytes())
        cfg = write_cfg(tmp_path, FAST)
        assert main(["backtest", "--config", str(cfg)]) == 2
        assert capsys.readouterr().err == "coverage: series household_debt_gdp not found\n"

    def test_bad_config(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, FAST + "n_forests = -1\n")
        assert main(["backtest", "--config", str(cfg)]) == 2
        assert capsys.readouterr().err.startswith("config: ")

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["backtest", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["backtest"])
        assert exc.value.code == 2

    def test_internal_error_exit_1(self, data_dir, monkeypatch, capsys):
        import macrocast.cli as cli

        def boom(*a, **k):
            raise RuntimeError("unexpected")

        monkeypatch.setattr(cli, "run_walk_forward", boom)
        assert main(["backtest", "--config", str(write_cfg(data_dir, FAST))]) == 1
        assert capsys.readouterr().err.startswith("internal: ")


class TestAblateCommand:
    def test_single_variant_matches_backtest(self, data_dir, tmp_path):
        cols = "treasury_bill_3m, share_price_change, household_debt_gdp, corporate_debt_gdp"
        cfg = write_cfg(data_dir, FAST + f"variant.full = {cols}\nablation_mode = ensemble\n", "abl.cfg")
        assert main(["ablate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert main(["backtest", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        abl = (tmp_path / "ablation.csv").read_text().splitlines()
        ev = (tmp_path / "evaluation.csv").read_text().splitlines()
        assert abl[0] == "label,adj_r2" and len(abl) == 2
        assert abl[1].split(",")[1] == ev[1].split(",")[7]
        assert (tmp_path / "ablation_manifest.txt").exists()

    def test_table3_variants(self, data_dir, tmp_path):
        cfg = write_cfg(data_dir, FAST.replace("n_forests = 2", "n_forests = 1") + "variants = us_table3\n", "t3.cfg")
        assert main(["ablate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        rows = (tmp_path / "ablation.csv").read_text().splitlines()[1:]
        assert len(rows) == 6
        assert [r.rsplit(",", 1)[0].strip('"') for r in rows] == [v[0] for v in US_TABLE3_VARIANTS]

    def test_empty_variants(self, data_dir, capsys):
        assert main(["ablate", "--config", str(write_cfg(data_dir, FAST, "e.cfg"))]) == 2
        assert capsys.readouterr().err.startswith("config: ")


class TestEvalCommand:
    def series_file(self, path, start, values):
        path.write_text(write_series_csv(QuarterlySeries("v", start, values)))
        return str(path)

    def test_identical(self, tmp_path, capsys):
        vals = np.random.default_rng(0).normal(size=20)
        f = self.series_file(tmp_path / "f.csv", Quarter(2000, 1), vals)
        assert main(["eval", "--forecast", f, "--actual", f]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("label,n,slope")
        fields = out[1].split(",")
        assert fields[0] == "2000Q1..2004Q4" and float(fields[2]) == pytest.approx(1.0)
        assert float(fields[6]) == pytest.approx(1.0)

    def test_overlap_of_one(self, tmp_path, capsys):
        f = self.series_file(tmp_path / "f.csv", Quarter(2000, 1), [1.0, 2.0, 3.0])
        a = self.series_file(tmp_path / "a.csv", Quarter(2000, 3), [1.0, 2.0, 3.0])
        assert main(["eval", "--forecast", f, "--actual", a]) == 2
        assert capsys.readouterr().err.startswith("shape: ")

    def test_no_overlap(self, tmp_path, capsys):
        f = self.series_file(tmp_path / "f.csv", Quarter(2000, 1), [1.0, 2.0, 3.0])
        a = self.series_file(tmp_path / "a.csv", Quarter(2005, 1), [1.0, 2.0, 3.0])
        assert main(["eval", "--forecast", f, "--actual", a]) == 2

    def test_random_forecasts(self, tmp_path, capsys):
        adj = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            f = self.series_file(tmp_path / "f.csv", Quarter(1990, 1), rng.normal(size=80))
            a = self.series_file(tmp_path / "a.csv", Quarter(1990, 1), rng.normal(size=80))
            assert main(["eval", "--forecast", f, "--actual", a]) == 0
            adj.append(float(capsys.readouterr().out.splitlines()[1].split(",")[7]))
        assert abs(np.mean(adj)) < 0.03


@pytest.mark.parametrize("name", ["us", "us_table3", "uk"])
def test_shipped_configs_parse(name):
    from macrocast.config import load_config

    run = load_config(Path(__file__).parent.parent / "configs" / f"{name}.cfg")
    assert run.backtest.first_forecast == Quarter(1990, 2)
    assert len(run.backtest.targets()) == 83
