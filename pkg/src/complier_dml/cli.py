"""Command-line entry points: fit, simulate, truth, test-instruments.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation error.
Errors are written to stderr as a single JSON object.

Config files hold one ``key = value`` per line (``#`` starts a comment). Keys
match the long flag names with dashes or underscores; values are typed by the
key. Command-line flags override file values.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .crossfit import EstimatorConfig, TrimPolicy, estimate
from .dataset import IVDataset, load_csv
from .dictionary import DictionarySpec
from .errors import ComplierDMLError, ConfigError, SchemaError
from .inference import band_skipping_degenerate, wald_statistic
from .moments import TargetSpec
from .report import dumps, estimate_dict
from .riesz import RieszHyper

EXIT = {"config": 2, "data": 3, "estimation": 4}
DEFAULT_GRID = tuple(float(v) for v in range(-3, 6))


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _str_list(text):
    return [s.strip() for s in str(text).split(",") if s.strip()]


# key -> (type, default, help); every key is also a --flag
OPTIONS = {
    "data": (str, None, "input CSV"),
    "y": (str, "y", "outcome column"),
    "d": (str, "d", "treatment column"),
    "z": (str, "z", "instrument column"),
    "x": (_str_list, None, "comma-separated covariate columns (default: all others)"),
    "z2": (str, None, "second instrument column (test-instruments)"),
    "target": (str, "late", "late | chars | cdf"),
    "chars": (_str_list, None, "covariate columns for chars (default: all covariates)"),
    "grid": (str, "default", "comma-separated ascending outcome grid or 'default'"),
    "method": (str, "auto", "auto | plugin | kappa"),
    "folds": (int, 5, "number of cross-fitting folds (2-10)"),
    "degree": (int, 4, "polynomial degree"),
    "interactions": (_bool, False, "pairwise covariate products"),
    "layout": (str, "main-interaction", "main-interaction | split"),
    "standardize": (_bool, True, "center and scale covariates"),
    "c1": (float, 1.0, "tuning constant c1"),
    "c2": (float, 0.1, "tuning constant c2"),
    "c3": (float, 0.1, "intercept penalty factor c3"),
    "ridge-on-norm": (float, 0.2, "constant added to the normalisation"),
    "max-outer-iter": (int, 10, "tuning loop cap"),
    "lambda-multiplier": (float, 1.0, "scale on the balancing-weight lambda"),
    "logistic-lambda-scale": (float, 0.5, "plug-in propensity penalty scale"),
    "trim": (str, "none", "none | trim | censor"),
    "epsilon": (float, 1e-12, "trim/censor threshold"),
    "monotone": (_bool, False, "rearrange CDF estimates to be monotone"),
    "alpha": (float, 0.05, "band / test level"),
    "bootstrap-draws": (int, 10_000, "multiplier bootstrap draws"),
    "seed": (int, 0, "master seed"),
    "out": (str, None, "output path (default stdout)"),
    "threads": (int, 1, "worker threads; results do not depend on it"),
    "design": (str, "step-propensity", "simulation design"),
    "reps": (int, 500, "Monte Carlo replications"),
    "n": (int, 1000, "simulated sample size"),
    "methods": (_str_list, ["auto"], "methods for simulate"),
}
# not echoed: they never change the numbers in a report
NOT_ECHOED = ("out", "threads", "config")


def read_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err.strerror}") from None
    values = {}
    for num, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{num}: unknown key {key!r}")
        values[key] = OPTIONS[key][0](value)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="complier-dml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("fit", "simulate", "truth", "test-instruments"):
        p = sub.add_parser(name)
        p.add_argument("--config")
        for key, (_, default, help_text) in OPTIONS.items():
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None,
                           help=f"{help_text} (default: {default})")
    return parser


def resolve(args) -> dict:
    """Defaults, then config file, then flags."""
    settings = {k: v[1] for k, v in OPTIONS.items()}
    if args.config:
        settings.update(read_config_file(args.config))
    for key, (kind, _, _) in OPTIONS.items():
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            try:
                settings[key] = kind(value)
            except ValueError:
                raise ConfigError(f"bad value for --{key}: {value!r}") from None
    return settings


def echo(settings: dict) -> dict:
    return {k: v for k, v in settings.items() if k not in NOT_ECHOED}


def parse_grid(text, default=DEFAULT_GRID) -> tuple:
    if text in (None, "", "default"):
        return default
    try:
        grid = tuple(float(v) for v in _str_list(text))
    except ValueError:
        raise ConfigError(f"grid must be comma-separated numbers, got {text!r}") from None
    return grid


def _hyper(s, multiplier=None) -> RieszHyper:
    return RieszHyper(s["c1"], s["c2"], s["c3"], s["ridge-on-norm"], s["max-outer-iter"],
                      s["lambda-multiplier"] if multiplier is None else multiplier)


def estimator_config(s) -> EstimatorConfig:
    return EstimatorConfig(
        method=s["method"], folds=s["folds"], seed=s["seed"], hyper=_hyper(s),
        gamma_hyper=_hyper(s, 1.0), trim=TrimPolicy(s["trim"], s["epsilon"]),
        logistic_lambda_scale=s["logistic-lambda-scale"], monotone=s["monotone"],
        threads=s["threads"])


def _load(s):
    if not s["data"]:
        raise ConfigError("--data is required")
    data = load_csv(s["data"], {"y": s["y"], "d": s["d"], "z": s["z"], "x": s["x"]})
    names = list(data.covariate_names)
    if not s["x"] and s["z2"] in names:
        # the second instrument is never a covariate
        keep = [j for j, nm in enumerate(names) if nm != s["z2"]]
        if not keep:
            raise SchemaError("no covariate columns besides the second instrument")
        data = IVDataset(data.y, data.d, data.z, data.x[:, keep], tuple(names[j] for j in keep))
    return data


def _dictionary(s, k) -> DictionarySpec:
    return DictionarySpec(k=k, degree=s["degree"], interactions=s["interactions"],
                          layout=s["layout"], standardize=s["standardize"])


def _target(s, data) -> TargetSpec:
    kind = s["target"]
    if kind == "late":
        return TargetSpec("late")
    if kind == "chars":
        names = s["chars"] or list(data.covariate_names)
        missing = [c for c in names if c not in data.covariate_names]
        if missing:
            raise ConfigError(f"chars columns are not covariates: {missing}")
        idx = tuple(data.covariate_names.index(c) for c in names)
        return TargetSpec("characteristics", characteristics=idx, characteristic_names=tuple(names))
    if kind == "cdf":
        return TargetSpec("cdf", grid=parse_grid(s["grid"]))
    raise ConfigError(f"target must be late|chars|cdf, got {kind!r}")


def _band_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def cdf_band(report, s) -> dict:
    band = band_skipping_degenerate(report.theta, report.cov, report.n_used, s["alpha"],
                                    s["bootstrap-draws"], _band_seed(s["seed"]), s["threads"])
    out = band.to_dict()
    out.pop("seed")
    return out


def cmd_fit(s) -> str:
    data = _load(s)
    target = _target(s, data)
    report = estimate(data, target, _dictionary(s, data.k), estimator_config(s))
    band = cdf_band(report, s) if target.kind == "cdf" else None
    return dumps(estimate_dict(report, "fit", echo(s), band=band)) + "\n"


def cmd_test_instruments(s) -> str:
    if not s["z2"]:
        raise ConfigError("--z2 is required")
    data = _load(s)
    z2 = load_csv(s["data"], {"y": s["y"], "d": s["d"], "z": s["z2"], "x": s["x"]}).z
    if s["target"] == "late":
        s = dict(s, target="chars")
    target = _target(s, data)
    if target.kind != "characteristics":
        raise ConfigError("test-instruments compares complier characteristics (--target chars)")
    spec = _dictionary(s, data.k)
    cfg = estimator_config(s)
    r1 = estimate(data, target, spec, cfg)
    r2 = estimate(data.with_instrument(z2), target, spec, cfg)
    res = wald_statistic(r1, r2, s["alpha"])
    out = estimate_dict(r1, "test-instruments", echo(s),
                        wald={"W": res.W, "df": res.df, "p": res.p_value, "reject": res.reject,
                              "theta_z2": r2.theta, "se_z2": r2.se})
    return dumps(out) + "\n"


def cmd_truth(s) -> str:
    from .simlab import BETA_GRID, DELTA_GRID, truth_oracle

    if s["grid"] in (None, "", "default"):
        rows = [("beta", y, v) for y, v in zip(BETA_GRID, truth_oracle(BETA_GRID)[0])]
        rows += [("delta", y, v) for y, v in zip(DELTA_GRID, truth_oracle(DELTA_GRID)[1])]
    else:
        grid = parse_grid(s["grid"])
        beta, delta = truth_oracle(grid)
        rows = [("beta", y, v) for y, v in zip(grid, beta)]
        rows += [("delta", y, v) for y, v in zip(grid, delta)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "y", "value"])
    for name, y, v in rows:
        w.writerow([name, format(float(y), ".17g"), format(float(v), ".17g")])
    return buf.getvalue()


def cmd_simulate(s) -> str:
    from .simlab import MCConfig, run_monte_carlo

    if s["design"] != "step-propensity":
        raise ConfigError(f"unknown design {s['design']!r}; available: step-propensity")
    cfg = MCConfig(reps=s["reps"], n=s["n"], methods=tuple(s["methods"]), folds=s["folds"],
                   lambda_multiplier=s["lambda-multiplier"], epsilon=s["epsilon"],
                   seed=s["seed"], threads=s["threads"])
    return run_monte_carlo(cfg).to_csv()


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "truth": cmd_truth,
            "test-instruments": cmd_test_instruments}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = resolve(args)
        text = COMMANDS[args.command](settings)
        if settings["out"]:
            with open(settings["out"], "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except ComplierDMLError as err:
        sys.stderr.write(json.dumps({"error": err.to_dict()}) + "\n")
        return EXIT.get(err.kind, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
