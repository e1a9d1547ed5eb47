"""``macrocast`` command line.

Exit status is 0 on success, 2 for usage, configuration or data errors and 1
for anything unexpected. Errors are reported as a single ``<kind>: <message>``
line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .backtest import BacktestConfig
from .config import RunConfig, data_fingerprints, load_config, load_panel
from .errors import CoverageError, MacrocastError, ShapeError
from .evaluation import (
    ablation_table,
    backtest_table,
    evaluate_backtest,
    evaluation_table,
    forest_means_table,
    ols_baseline,
    ols_regress,
    run_ablation,
    uncertainty_report,
    uncertainty_table,
)
from .backtest import run_walk_forward
from .quarterly import load_series_csv, write_series_csv
from .synth import generate
from .tables import Table, render, to_csv


def _describe(cfg: BacktestConfig) -> list[str]:
    fp = cfg.forest_params
    return [
        f"target = {cfg.target_column}",
        f"features = {', '.join(cfg.feature_columns)}",
        f"lags = {', '.join(map(str, cfg.lags))}",
        f"horizon = {cfg.horizon}",
        f"train_start = {cfg.train_start}",
        f"first_forecast = {cfg.first_forecast}",
        f"last_forecast = {cfg.last_forecast}",
        f"window = {'expanding' if cfg.window is None else f'rolling:{cfg.window}'}",
        f"n_forests = {cfg.n_forests}",
        f"n_trees = {fp.n_trees}",
        f"mtry = {'auto' if fp.mtry is None else fp.mtry}",
        f"min_node_size = {fp.min_node_size}",
        f"seed = {fp.seed}",
        f"lagged_release = {', '.join(f'{c}:{k}' for c, k in cfg.lagged_release)}",
        f"ar_fit = {cfg.ar_fit}",
        f"max_gap = {cfg.max_gap}",
    ]


def _manifest(run: RunConfig, extra: Sequence[str], outputs: dict[str, str]) -> str:
    lines = [f"macrocast {__version__}", "", "[config]", *_describe(run.backtest)]
    lines += [f"transform.{c} = {t}" for c, t in sorted(run.transforms.items())]
    lines += extra
    lines += ["", "[data sha256]"]
    lines += [f"{name}.csv = {digest}" for name, digest in data_fingerprints(run)]
    lines += ["", "[outputs sha256]"]
    lines += [f"{name} = {hashlib.sha256(body.encode()).hexdigest()}" for name, body in outputs.items()]
    return "\n".join(lines) + "\n"


def _write(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, body in files.items():
        (out / name).write_text(body, encoding="utf-8", newline="")


def _out_dir(run: RunConfig, override: str | None) -> Path:
    return Path(override) if override else run.output_dir


def cmd_backtest(args: argparse.Namespace) -> int:
    run = load_config(args.config)
    panel = load_panel(run)
    cfg = run.backtest
    ext = run.report_format
    result = run_walk_forward(panel, cfg)
    rows = [("random_forest", evaluate_backtest(result).fit)]
    if run.ols_baseline:
        rows.append(("ols_baseline", evaluate_backtest(ols_baseline(panel, cfg)).fit))

    files = {
        f"backtest.{ext}": render(backtest_table(result), ext),
        f"evaluation.{ext}": render(evaluation_table(rows), ext),
    }
    if run.write_forest_means:
        files[f"forest_means.{ext}"] = render(forest_means_table(result), ext)
    extra = []
    if run.calm_period and run.focus_period:
        rep = uncertainty_report(result, run.calm_period, run.focus_period)
        files[f"uncertainty.{ext}"] = render(uncertainty_table(rep), ext)
        mn, q1, mean, q3, mx = rep.summary
        extra = [
            "",
            "[uncertainty]",
            f"calm_period = {run.calm_period[0]}..{run.calm_period[1]}",
            f"focus_period = {run.focus_period[0]}..{run.focus_period[1]}",
            f"avg_sigma min = {mn!r}",
            f"avg_sigma q1 = {q1!r}",
            f"avg_sigma mean = {mean!r}",
            f"avg_sigma q3 = {q3!r}",
            f"avg_sigma max = {mx!r}",
            f"corr(prediction, avg_sigma) = {rep.corr_pred_sigma!r}"
            + (" (degenerate)" if rep.corr_degenerate else ""),
            f"n = {rep.n}",
        ]
    files["manifest.txt"] = _manifest(run, extra, files)
    _write(_out_dir(run, args.out), files)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    run = load_config(args.config)
    report = run_ablation(load_panel(run), run.backtest, run.variants, mode=run.ablation_mode)
    ext = run.report_format
    files = {f"ablation.{ext}": render(ablation_table(report), ext)}
    extra = ["", "[ablation]", f"ablation_mode = {report.mode}"]
    extra += [f"variant.{r.label} = {', '.join(r.feature_columns)}" for r in report.rows]
    files["ablation_manifest.txt"] = _manifest(run, extra, files)
    _write(_out_dir(run, args.out), files)
    return 0


SYNTH_CONFIG = """\
# walk-forward run over a synthetic panel written by `macrocast synth`
target = gdp_growth
features = treasury_bill_3m, share_price_change, household_debt_gdp, corporate_debt_gdp
train_start = {start}
first_forecast = {first}
last_forecast = {last}
lagged_release = household_debt_gdp:2, corporate_debt_gdp:2
n_forests = 10
n_trees = 100
seed = {seed}
data_dir = .
output_dir = out
"""


def cmd_synth(args: argparse.Namespace) -> int:
    panel = generate(args.scenario, args.quarters, args.seed)
    files = {f"{s.name}.csv": write_series_csv(s) for s in panel.series}
    start = panel.start
    end = start + (args.quarters - 1)
    first = max(start + 9, start + (args.quarters * 3) // 5)
    files["synth.cfg"] = SYNTH_CONFIG.format(start=start, first=first, last=end, seed=args.seed)
    episodes = panel.episodes()
    lines = [
        f"macrocast {__version__}",
        f"scenario = {panel.scenario}",
        f"seed = {panel.seed}",
        f"quarters = {args.quarters}",
        f"range = {start}..{end}",
        f"rule = {panel.description}",
        f"recession_rule_episodes = {len(episodes)}",
        *(f"episode = {a}..{b}" for a, b in episodes),
        "",
        "[files sha256]",
        *(f"{name} = {hashlib.sha256(body.encode()).hexdigest()}" for name, body in files.items()),
    ]
    files["manifest.txt"] = "\n".join(lines) + "\n"
    _write(Path(args.out), files)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    fc = load_series_csv(_read(args.forecast, "forecast"), "forecast")
    ac = load_series_csv(_read(args.actual, "actual"), "actual")
    first, last = max(fc.start, ac.start), min(fc.end, ac.end)
    if last < first:
        raise CoverageError(f"forecast {fc.start}..{fc.end} and actual {ac.start}..{ac.end} do not overlap")
    n = last - first + 1
    if n < 3:
        raise ShapeError(f"forecast and actual overlap on {n} quarter(s) {first}..{last}; need at least 3")
    fit = ols_regress(ac.window(first, last).values, fc.window(first, last).values)
    sys.stdout.write(to_csv(evaluation_table([(f"{first}..{last}", fit)])))
    return 0


def _read(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CoverageError(f"cannot read {what} file {path}: {exc.strerror}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macrocast", description="Walk-forward random-forest growth forecasts.")
    p.add_argument("--version", action="version", version=f"macrocast {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("backtest", help="run the walk-forward backtest and score it")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="output directory (overrides output_dir)")
    b.set_defaults(func=cmd_backtest)

    a = sub.add_parser("ablate", help="re-run the backtest once per feature set")
    a.add_argument("--config", required=True)
    a.add_argument("--out", help="output directory (overrides output_dir)")
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("synth", help="write a synthetic panel")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--quarters", type=int, required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="score an external forecast series against actuals")
    e.add_argument("--forecast", required=True)
    e.add_argument("--actual", required=True)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MacrocastError as exc:
        print(exc.diagnostic(), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        msg = f"internal: {type(exc).__name__}: {exc}".replace("\n", " ")
        print(msg, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
