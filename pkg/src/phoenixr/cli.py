"""Command-line entry point: ``phoenixr <subcommand> [options]``.

Exit status is 0 on success, 1 on a usage error and 2 when the input data
cannot be read or fitted.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from phoenixr import __version__
from phoenixr.characterize import long_run_report, parse_window, windowed_quartiles
from phoenixr.errors import DataError, PhoenixError
from phoenixr.fitter import FitConfig, fit_phoenix_r
from phoenixr.forecast import compare_models
from phoenixr.model import DAILY_PERIOD, HOURLY_PERIOD, PhoenixRModel, simulate
from phoenixr.peaks import find_peaks
from phoenixr.series import PopularitySeries, dump_json, load_events, load_series, save_series
from phoenixr.synthetic import gen_synthetic

JOBS_ENV = "PHOENIXR_JOBS"
MODEL_ALIASES = {"phoenix": "phoenix_r", "phoenix_r": "phoenix_r",
                 "td": "temporal_dynamics", "temporal_dynamics": "temporal_dynamics"}

log = logging.getLogger("phoenixr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _global_flags(parser: argparse.ArgumentParser, defaults: bool) -> None:
    # subcommands repeat the flags with suppressed defaults so that a value
    # given before the subcommand is not overwritten
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=d(0), help="random seed (default 0)")
    parser.add_argument("--jobs", type=_positive_int, default=d(_default_jobs()),
                        help=f"worker processes for batch commands (default ${JOBS_ENV} or 1)")
    parser.add_argument("--log-level", default=d("WARNING"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], type=str.upper)
    parser.add_argument("--format", default=d(None), choices=["json", "csv"],
                        help="output format where a command offers both "
                             "(default: from the output file suffix)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phoenixr", description="Revisit-aware popularity cascades.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, defaults=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        _global_flags(p, defaults=False)
        return p

    p = command("simulate", "simulate a model forward")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--n", type=_positive_int, required=True, help="number of windows")
    p.add_argument("--out", required=True)
    p.add_argument("--emit", default="", help="extra columns: audience,revisits")

    p = command("peaks", "candidate shock starts of a series")
    p.add_argument("--series", required=True)
    p.add_argument("--out", required=True)

    p = command("fit", "fit a model with automatic shock count")
    _fit_flags(p)
    p.add_argument("--series", required=True)
    p.add_argument("--out", required=True)

    p = command("fit-batch", "fit every series listed in a file")
    _fit_flags(p)
    p.add_argument("--list", required=True, help="file with one series path per line")
    p.add_argument("--out", required=True, help="output directory")

    p = command("characterize", "revisit statistics of an event log")
    p.add_argument("--events", required=True)
    p.add_argument("--windows", default="1h,1d,1w,1m")
    p.add_argument("--min-pop", type=int, default=500)
    p.add_argument("--min-window-pop", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--ccdf-csv", help="also write threshold,fraction rows here")

    p = command("evaluate", "forecasting comparison over a corpus")
    p.add_argument("--list", required=True, help="file with one series path per line")
    p.add_argument("--splits", default="0.05,0.25,0.5")
    p.add_argument("--deltas", default="1,7,30")
    p.add_argument("--models", default="phoenix,td")
    p.add_argument("--ensemble-size", type=_positive_int, default=10)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", help="flat series,model,split,delta,rmse rows (default: next to --out)")

    p = command("gen-synthetic", "noisy series from a known model")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--noise", type=float, default=0.0, help="noise sd relative to the peak")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", required=True, help="ground-truth JSON")
    return parser


def _fit_flags(p: argparse.ArgumentParser) -> None:
    cadence = p.add_mutually_exclusive_group()
    cadence.add_argument("--daily", dest="period_e", action="store_const", const=DAILY_PERIOD)
    cadence.add_argument("--hourly", dest="period_e", action="store_const", const=HOURLY_PERIOD)
    p.set_defaults(period_e=DAILY_PERIOD)
    p.add_argument("--period", action="store_true", help="fit a periodic visit rate")
    p.add_argument("--epsilon", type=float, default=0.05)


# ------------------------------------------------------------ helpers

def _read_json(path: str) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _read_model(path: str) -> PhoenixRModel:
    obj = _read_json(path)
    if isinstance(obj, dict) and "model" in obj and "shocks" not in obj:
        obj = obj["model"]  # accept a fit or truth file too
    return PhoenixRModel.from_json(obj)


def read_series(path: str) -> PopularitySeries:
    if path.endswith(".json"):
        obj = _read_json(path)
        if not isinstance(obj, dict):
            raise DataError(f"{path}: expected a series object")
        return PopularitySeries.from_json(obj)
    return load_series(path)


def _format(args, path: str) -> str:
    if args.format:
        return args.format
    return "json" if path.endswith(".json") else "csv"


def _write_series(path: str, series: PopularitySeries, fmt: str, **extra) -> None:
    if fmt == "json":
        obj = series.to_json()
        for name, values in extra.items():
            obj[name] = [float(v) for v in values]
        dump_json(obj, path)
    else:
        save_series(path, series, **extra)


def _read_list(path: str) -> list[str]:
    base = Path(path).parent
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            p = Path(line)
            entries.append(str(p if p.is_absolute() else base / p))
    if not entries:
        raise DataError(f"{path}: no series paths listed")
    return entries


def _fit_config(args) -> FitConfig:
    return FitConfig(epsilon=args.epsilon, rng_seed=args.seed,
                     period_enabled=args.period, period_e=args.period_e)


def _fit_one(job: tuple[str, FitConfig]) -> dict:
    path, config = job
    series = read_series(path)
    return fit_phoenix_r(series, config).to_json()


def _fit_one_safe(job: tuple[str, FitConfig]) -> tuple[str, dict | None, str | None]:
    try:
        return job[0], _fit_one(job), None
    except PhoenixError as exc:
        return job[0], None, str(exc)


# ------------------------------------------------------------ commands

def cmd_simulate(args) -> None:
    model = _read_model(args.model)
    run = simulate(model, args.n)
    wanted = [e.strip() for e in args.emit.split(",") if e.strip()]
    extra = {}
    for name in wanted:
        if name == "audience":
            extra["audience"] = run.audience.values
        elif name == "revisits":
            extra["revisits"] = run.revisits.values
        else:
            raise UsageError(f"--emit: unknown column {name!r}; choose audience, revisits")
    _write_series(args.out, run.popularity, _format(args, args.out), **extra)


def cmd_peaks(args) -> None:
    candidates = find_peaks(read_series(args.series))
    if _format(args, args.out) == "json":
        dump_json(candidates.to_json(), args.out)
        return
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["start", "peak_volume"])
        writer.writerows(zip(candidates.starts, candidates.peak_volumes))


def cmd_fit(args) -> None:
    result = _fit_one((args.series, _fit_config(args)))
    if _format(args, args.out) == "json":
        dump_json(result, args.out)
        return
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s", "S0", "beta", "gamma", "omega"])
        for sh in result["model"]["shocks"]:
            writer.writerow([sh["s"], repr(sh["S0"]), repr(sh["beta"]),
                             repr(sh["gamma"]), repr(sh["omega"])])


def cmd_fit_batch(args) -> int:
    paths = _read_list(args.list)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = _fit_config(args)
    jobs = [(p, config) for p in paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_fit_one_safe, jobs))
    else:
        results = [_fit_one_safe(job) for job in jobs]

    summary = []
    used: set[str] = set()
    for path, fit, error in results:
        stem = Path(path).stem
        name = stem
        k = 1
        while name in used:
            k += 1
            name = f"{stem}-{k}"
        used.add(name)
        entry = {"series": path, "fit": None, "error": error}
        if fit is not None:
            entry["fit"] = f"{name}.fit.json"
            dump_json(fit, out / entry["fit"])
        else:
            log.error("%s: %s", path, error)
        summary.append(entry)
    dump_json({"fits": summary}, out / "summary.json")
    return 2 if any(e["error"] for e in summary) else 0


def cmd_characterize(args) -> None:
    windows = [w.strip() for w in args.windows.split(",") if w.strip()]
    if not windows:
        raise UsageError("--windows: give at least one window length")
    lengths = [(w, parse_window(w)) for w in windows]
    events = load_events(args.events)
    report = long_run_report(events, args.min_pop)
    quartiles = []
    for label, seconds in lengths:
        try:
            q = windowed_quartiles(events, seconds, args.min_window_pop).to_json()
        except DataError as exc:
            # one sparse window size should not sink the whole report
            log.warning("window %s: %s", label, exc)
            q = {"window_length": seconds, "q25": None, "median": None, "q75": None,
                 "windows_counted": 0}
        q["window"] = label
        quartiles.append(q)
    obj = {"long_run": report.to_json(), "windowed": quartiles,
           "min_window_popularity": args.min_window_pop}
    dump_json(obj, args.out)
    if args.ccdf_csv:
        with open(args.ccdf_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["threshold", "fraction"])
            for t, f in report.ccdf:
                writer.writerow([repr(t), repr(f)])


def _csv_list(text: str, cast, flag: str) -> list:
    try:
        items = [cast(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r}") from None
    if not items:
        raise UsageError(f"{flag}: empty list")
    return items


def cmd_evaluate(args) -> None:
    splits = _csv_list(args.splits, float, "--splits")
    deltas = _csv_list(args.deltas, int, "--deltas")
    kinds = []
    for name in _csv_list(args.models, str, "--models"):
        if name not in MODEL_ALIASES:
            raise UsageError(f"--models: unknown model {name!r}; choose from {', '.join(MODEL_ALIASES)}")
        kinds.append(MODEL_ALIASES[name])
    paths = _read_list(args.list)
    corpus = {p: read_series(p) for p in paths}
    report = compare_models(corpus, splits, deltas, kinds, seed=args.seed,
                            ensemble_size=args.ensemble_size, jobs=args.jobs)
    dump_json(report.to_json(), args.out)
    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "model", "split", "delta", "rmse"])
        for sid, model, split, delta, value in report.csv_rows():
            writer.writerow([sid, model, split, delta, repr(value)])


def cmd_gen_synthetic(args) -> None:
    model = _read_model(args.model)
    syn = gen_synthetic(model, args.n, args.noise, args.seed)
    _write_series(args.out, syn.series, _format(args, args.out))
    dump_json(syn.truth_json(), args.truth)


COMMANDS = {
    "simulate": cmd_simulate,
    "peaks": cmd_peaks,
    "fit": cmd_fit,
    "fit-batch": cmd_fit_batch,
    "characterize": cmd_characterize,
    "evaluate": cmd_evaluate,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().rstrip() + "\nphoenixr: error: a subcommand is required")
        logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
        code = COMMANDS[args.command](args)
        return int(code or 0)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (PhoenixError, OSError) as exc:
        print(f"phoenixr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
