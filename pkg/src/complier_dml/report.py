"""Deterministic JSON emission: fixed key order, 17 significant digits, NaN as null."""
from __future__ import annotations

import json
import math

import numpy as np

from . import __version__


def _scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return "null"
        if f == 0.0:
            return "0.0" if math.copysign(1.0, f) > 0 else "-0.0"
        text = format(f, ".17g")
        if "e" not in text and "." not in text:
            text += ".0"
        return text
    return json.dumps(str(v))


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


def target_dict(target) -> dict:
    out = {"kind": target.kind}
    if target.kind == "cdf":
        out["grid"] = list(target.grid)
    if target.kind == "characteristics":
        out["characteristics"] = list(target.characteristics)
    return out


def estimate_dict(report, command: str, config_echo: dict, band=None, wald=None) -> dict:
    out = {
        "version": __version__,
        "command": command,
        "method": report.method,
        "target": target_dict(report.target),
        "labels": list(report.labels),
        "theta": report.theta,
        "se": report.se,
        "cov": report.cov,
    }
    if report.target.kind == "cdf":
        out["grid"] = list(report.target.grid)
        if report.theta_raw is not None:
            out["theta_unrestricted"] = report.theta_raw
    out["n"] = report.n
    out["n_used"] = report.n_used
    out["dropped"] = report.dropped
    out["seed"] = report.seed
    out["diagnostics"] = {"per_fold": report.per_fold}
    if band is not None:
        out["band"] = band
    if wald is not None:
        out["wald"] = wald
    out["config"] = config_echo
    return out
