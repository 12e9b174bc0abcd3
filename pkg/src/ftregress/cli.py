"""Command-line driver: fit, predict, cross-validate, adapt ranks, run studies.

Options come from flags and, optionally, an INI file given with
``--config`` whose ``[<command>]`` section (falling back to ``[DEFAULT]``)
uses the long flag names without dashes, e.g. ``num_kernels = 6``.  Flags
override the file.  Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from .bench import (
    FUNCTIONS, STUDY_HEADER, SUMMARY_HEADER, StudySpec, rows_to_csv, run_study, summarize,
)
from .data import Dataset, ingest_csv, read_csv
from .errors import ConfigError, FTError, InputError, NumericalError
from .modelsel import Hypergrid, grid_search, rank_adapt
from .models import HyperParams, fit_model
from .optimize import OptimOptions
from .parallel import worker_count
from .serialize import load_model, save_model, write_atomic

logger = logging.getLogger("ftregress")

# built-in defaults; the config file and then flags override these
DEFAULTS = {
    "target": None,
    "rank": "2",
    "degree": None,
    "num_kernels": None,
    "basis": "legendre",
    "optimizer": "aao",
    "lambda": "0",
    "width": "1",
    "folds": "20",
    "seed": "0",
    "normalize": "true",
    "delta": "1e-4",
    "max_iters": "500",
    "r_max": "10",
    "function": "sinsum",
    "sizes": "1000",
    "realizations": "20",
    "optimizers": "aao,als",
    "validation": "10000",
    "adaptive": "false",
}


class Settings:
    """Resolved option lookup: flag, then config section, then default."""

    def __init__(self, args: argparse.Namespace, section: Optional[configparser.SectionProxy]):
        self.args = args
        self.section = section

    def raw(self, name: str):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if self.section is not None and name in self.section:
            return self.section[name]
        return DEFAULTS.get(name)

    def get_str(self, name: str) -> Optional[str]:
        value = self.raw(name)
        return None if value is None else str(value)

    def get_int(self, name: str) -> int:
        return _parse(int, name, self.raw(name))

    def get_float(self, name: str) -> float:
        return _parse(float, name, self.raw(name))

    def get_bool(self, name: str) -> bool:
        value = self.raw(name)
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name} must be a boolean, got {value!r}")

    def get_list(self, name: str, kind=float) -> list:
        value = self.raw(name)
        if value is None:
            return []
        items = [v.strip() for v in str(value).split(",") if v.strip()]
        return [_parse(kind, name, v) for v in items]


def _parse(kind, name, value):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be {kind.__name__}, got {value!r}") from None


# ---------------------------------------------------------------------------
# shared option handling
# ---------------------------------------------------------------------------


def _rank(text: str):
    parts = [p for p in text.replace("-", ",").split(",") if p.strip()]
    vals = [_parse(int, "rank", p) for p in parts]
    return vals[0] if len(vals) == 1 else tuple(vals)


def _num_basis(cfg: Settings, basis: str) -> List[int]:
    """Basis sizes ``p`` from ``--degree`` (Legendre) or ``--num-kernels``."""
    if basis == "legendre":
        if getattr(cfg.args, "num_kernels", None) is not None:
            raise ConfigError("--num-kernels applies to kernel bases; use --degree")
        degrees = cfg.get_list("degree", int) or [4]
        if min(degrees) < 0:
            raise ConfigError("degree must be non-negative")
        return [deg + 1 for deg in degrees]
    if getattr(cfg.args, "degree", None) is not None:
        raise ConfigError("--degree applies to the legendre basis; use --num-kernels")
    counts = cfg.get_list("num_kernels", int) or [6]
    if min(counts) < 1:
        raise ConfigError("num-kernels must be positive")
    return counts


def _options(cfg: Settings) -> OptimOptions:
    return OptimOptions(max_iters=cfg.get_int("max_iters"))


def _hyper(cfg: Settings, p: int) -> HyperParams:
    return HyperParams(
        rank=_rank(cfg.get_str("rank")), p=p, basis=cfg.get_str("basis"), lam=cfg.get_float("lambda"),
        width=cfg.get_float("width"), optimizer=cfg.get_str("optimizer"),
    )


def _need(cfg: Settings, name: str, must_exist: bool = False) -> str:
    path = cfg.get_str(name)
    if not path:
        raise ConfigError(f"--{name} is required")
    if must_exist and not os.path.isfile(path):
        raise ConfigError(f"--{name}: no such file {path!r}")
    if not must_exist:
        folder = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(folder):
            raise ConfigError(f"--{name}: directory {folder!r} does not exist")
    return path


def _load_data(cfg: Settings) -> Dataset:
    return ingest_csv(_need(cfg, "data", must_exist=True), cfg.get_str("target"), cfg.get_bool("normalize"))


def _model_meta(data: Dataset, hyper: HyperParams) -> dict:
    meta = data.stats()
    meta["hyper"] = {
        "rank": hyper.rank if isinstance(hyper.rank, int) else list(hyper.rank),
        "p": hyper.p, "basis": hyper.basis, "lambda": hyper.lam, "width": hyper.width,
        "optimizer": hyper.optimizer,
    }
    return meta


def _train_mse(model, data: Dataset) -> float:
    pred = data.restore_targets(model.predict(data.X))
    resid = pred - data.restore_targets(data.y)
    return float(resid @ resid) / data.n


def _write_json(path: str, payload: dict) -> None:
    write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(cfg: Settings) -> int:
    data = _load_data(cfg)
    model_path = _need(cfg, "model")
    basis = cfg.get_str("basis")
    ps = _num_basis(cfg, basis)
    if len(ps) != 1:
        raise ConfigError("fit takes a single basis size")
    hyper = _hyper(cfg, ps[0])
    model, report = fit_model(hyper, data, _options(cfg), seed=cfg.get_int("seed"))
    if not np.all(np.isfinite(model.params)):
        raise NumericalError("fit produced non-finite parameters")
    save_model(model, model_path, _model_meta(data, hyper))
    payload = report.as_dict()
    payload.update(train_mse=_train_mse(model, data), n=data.n, d=data.d)
    out = cfg.get_str("out") or model_path + ".report.json"
    _write_json(out, payload)
    logger.info("fitted %s model, train mse %.6e", report.method, payload["train_mse"])
    return 0


def cmd_predict(cfg: Settings) -> int:
    model, meta = load_model(_need(cfg, "model", must_exist=True))
    out = _need(cfg, "out")
    target = cfg.get_str("target") or meta.get("target")
    X, y, names, tname = read_csv(_need(cfg, "data", must_exist=True), target, require_target=False)
    if X.shape[1] != model.d:
        raise InputError(f"model expects {model.d} features, data has {X.shape[1]}")
    x_mean = np.asarray(meta.get("x_mean", np.zeros(model.d)), dtype=float)
    x_std = np.asarray(meta.get("x_std", np.ones(model.d)), dtype=float)
    pred = model.predict((X - x_mean) / x_std)
    pred = pred * float(meta.get("y_std", 1.0)) + float(meta.get("y_mean", 0.0))
    write_atomic(out, _csv_text(["prediction"], [[float(v)] for v in pred]))
    if y is not None:
        resid = pred - y
        mse = float(resid @ resid) / y.size
        _write_json(out + ".mse.json", {"mse": mse, "n": int(y.size), "target": tname})
        print(f"mse {mse!r}")
    return 0


def cmd_cv(cfg: Settings) -> int:
    data = _load_data(cfg)
    out = _need(cfg, "out")
    basis = cfg.get_str("basis")
    ranks = [_rank(r) for r in str(cfg.get_str("rank")).split(",") if r.strip()]
    grid = Hypergrid(
        ranks=ranks, ps=_num_basis(cfg, basis), widths=cfg.get_list("width"), lams=cfg.get_list("lambda"),
        folds=cfg.get_int("folds"), seed=cfg.get_int("seed"), basis=basis, optimizer=cfg.get_str("optimizer"),
    )
    result = grid_search(grid, data, _options(cfg), log=logger.info, workers=worker_count())
    header = ["rank", "p", "width", "lambda", "cv_mse", "winner"]
    write_atomic(out, _csv_text(header, [[r[h] for h in header] for r in result.rows()]))
    w = result.winner
    print(f"winner rank={w.rank} p={w.p} width={w.width} lambda={w.lam} cv_mse={result.best_mse!r}")
    return 0


def cmd_adapt(cfg: Settings) -> int:
    data = _load_data(cfg)
    model_path = _need(cfg, "model")
    ps = _num_basis(cfg, cfg.get_str("basis"))
    if len(ps) != 1:
        raise ConfigError("adapt takes a single basis size")
    base = _hyper(cfg, ps[0])
    model, trace = rank_adapt(data, cfg.get_float("delta"), base, _options(cfg), folds=cfg.get_int("folds"),
                              seed=cfg.get_int("seed"), r_max=cfg.get_int("r_max"))
    save_model(model, model_path, _model_meta(data, base))
    rows = [
        [i, "-".join(map(str, s.ranks)), s.cv, s.action, "" if s.rounded is None else "-".join(map(str, s.rounded))]
        for i, s in enumerate(trace)
    ]
    out = cfg.get_str("out") or model_path + ".trace.csv"
    write_atomic(out, _csv_text(["step", "ranks", "cv_mse", "action", "rounded"], rows))
    print("ranks " + " ".join(map(str, model.ranks)))
    return 0


def cmd_bench(cfg: Settings) -> int:
    out = _need(cfg, "out")
    basis = cfg.get_str("basis")
    ps = _num_basis(cfg, basis)
    if len(ps) != 1:
        raise ConfigError("bench takes a single basis size")
    name = cfg.get_str("function")
    if name not in FUNCTIONS:
        raise ConfigError(f"unknown benchmark {name!r}; choose from {sorted(FUNCTIONS)}")
    spec = StudySpec(
        function=name, sample_sizes=cfg.get_list("sizes", int), realizations=cfg.get_int("realizations"),
        optimizers=tuple(o.strip() for o in cfg.get_str("optimizers").split(",") if o.strip()),
        rank=_rank(cfg.get_str("rank")), p=ps[0], basis=basis, lam=cfg.get_float("lambda"),
        width=cfg.get_float("width"), adaptive=cfg.get_bool("adaptive"), delta=cfg.get_float("delta"),
        folds=cfg.get_int("folds"), n_val=cfg.get_int("validation"), seed=cfg.get_int("seed"), opts=_options(cfg),
    )
    rows = run_study(spec, log=logger.info, workers=worker_count())
    write_atomic(out, rows_to_csv(rows, STUDY_HEADER))
    write_atomic(out + ".summary.csv", rows_to_csv(summarize(rows), SUMMARY_HEADER))
    return 0


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv, "adapt": cmd_adapt, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftregress", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI file with per-command sections")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", help="CSV file with a header row")
            p.add_argument("--target", help="target column (default: last)")
            p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None)
        p.add_argument("--seed", type=int)

    def model_flags(p):
        p.add_argument("--rank", help="interior rank, or a full rank vector like 1,2,2,1")
        p.add_argument("--degree", help="Legendre degree (comma list for cv)")
        p.add_argument("--num-kernels", dest="num_kernels", help="kernels per entry (comma list for cv)")
        p.add_argument("--basis", choices=("legendre", "kernel", "moving-kernel"))
        p.add_argument("--optimizer", choices=("aao", "sgd", "als"))
        p.add_argument("--lambda", dest="lambda", help="regularization weight")
        p.add_argument("--width", help="kernel width multiplier")
        p.add_argument("--max-iters", dest="max_iters", type=int)

    p = sub.add_parser("fit", help="fit a model and write it with a fit report")
    common(p)
    model_flags(p)
    p.add_argument("--model", help="output model file")
    p.add_argument("--out", help="fit report JSON (default: <model>.report.json)")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--data", help="feature CSV (targets optional)")
    p.add_argument("--target", help="target column, if present")
    p.add_argument("--model", help="model file")
    p.add_argument("--out", help="prediction CSV")

    p = sub.add_parser("cv", help="cross-validated grid search")
    common(p)
    model_flags(p)
    p.add_argument("--folds", type=int)
    p.add_argument("--out", help="CV table CSV")

    p = sub.add_parser("adapt", help="cross-validated rank adaptation")
    common(p)
    model_flags(p)
    p.add_argument("--folds", type=int)
    p.add_argument("--delta", type=float, help="rounding tolerance")
    p.add_argument("--r-max", dest="r_max", type=int)
    p.add_argument("--model", help="output model file")
    p.add_argument("--out", help="adaptation trace CSV (default: <model>.trace.csv)")

    p = sub.add_parser("bench", help="convergence study on a synthetic function")
    common(p, data=False)
    model_flags(p)
    p.add_argument("--function", choices=sorted(FUNCTIONS))
    p.add_argument("--sizes", help="comma-separated training sizes")
    p.add_argument("--realizations", type=int)
    p.add_argument("--optimizers", help="comma-separated optimizers")
    p.add_argument("--validation", type=int, help="validation sample size")
    p.add_argument("--adaptive", action="store_true", default=None)
    p.add_argument("--delta", type=float)
    p.add_argument("--folds", type=int)
    p.add_argument("--out", help="study CSV; the summary goes to <out>.summary.csv")
    return parser


def _section(path: Optional[str], command: str):
    if not path:
        return None
    if not os.path.isfile(path):
        raise ConfigError(f"--config: no such file {path!r}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if parser.has_section(command):
        return parser[command]
    return parser[configparser.DEFAULTSECT]


def _fail(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": message}), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Settings(args, _section(args.config, args.command))
        return COMMANDS[args.command](cfg)
    except FTError as exc:
        return _fail(type(exc).__name__, exc.exit_code, str(exc))
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail("NumericalError", NumericalError.exit_code, str(exc))
    except OSError as exc:
        return _fail("InputError", InputError.exit_code, str(exc))


if __name__ == "__main__":
    sys.exit(main())
