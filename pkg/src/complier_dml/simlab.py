"""Simulation designs, the quadrature truth oracle, and the Monte Carlo harness."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .crossfit import EstimatorConfig, TrimPolicy, estimate
from .dataset import IVDataset
from .dictionary import simulation_spec
from .errors import ComplierDMLError, ConfigError
from .inference import band_skipping_degenerate
from .moments import TargetSpec
from .riesz import RieszHyper

BETA_GRID = tuple(float(v) for v in range(-3, 5))
DELTA_GRID = tuple(float(v) for v in range(-2, 6))
QUAD_TOL = 1e-9


@dataclass(frozen=True)
class StepPropensityDesign:
    n: int = 1000

    def __post_init__(self):
        if self.n < 10:
            raise ConfigError("design needs n >= 10")

    @staticmethod
    def propensity(x):
        return np.where(np.asarray(x) <= 0.5, 0.05, 0.95)

    @staticmethod
    def gamma_y(z, x):
        return 2.0 * np.asarray(z) * np.asarray(x) ** 2

    @staticmethod
    def gamma_d(z, x):
        return np.asarray(z) * np.asarray(x)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def generate(design: StepPropensityDesign = StepPropensityDesign(), seed=0) -> IVDataset:
    rng = _rng(seed)
    n = design.n
    x = rng.uniform(0.0, 1.0, n)
    z = (rng.uniform(size=n) < design.propensity(x)).astype(float)
    d = (rng.uniform(size=n) < design.gamma_d(z, x)).astype(float)
    y = design.gamma_y(z, x) + rng.standard_normal(n)
    return IVDataset(y, d, z, x[:, None], ("x",))


def truth_oracle(grid) -> tuple[np.ndarray, np.ndarray]:
    """(beta_0, delta_0) on the grid by adaptive quadrature over x in [0, 1].

    The complier mass is the integral of x over [0, 1], i.e. 1/2.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if not np.all(np.isfinite(grid)):
        raise ConfigError("grid must be finite")
    beta, delta = np.empty(grid.size), np.empty(grid.size)
    for i, y in enumerate(grid):
        b, _ = quad(lambda x: ndtr(y - 2 * x * x) * (x - 1.0) + ndtr(y), 0.0, 1.0,
                    epsabs=QUAD_TOL, epsrel=0.0, limit=200)
        dl, _ = quad(lambda x: ndtr(y - 2 * x * x) * x, 0.0, 1.0,
                     epsabs=QUAD_TOL, epsrel=0.0, limit=200)
        beta[i], delta[i] = b / 0.5, dl / 0.5
    return beta, delta


# --- two-instrument designs for the equality test ------------------------------

@dataclass(frozen=True)
class TwoInstrumentDesign:
    """Binary X-dependent instruments Z1, Z2 with a scalar uniform covariate.

    ``shifted=False``: Z1, Z2 iid Bernoulli(0.3 + 0.4x), C ~ Bernoulli(0.3 + 0.5x)
    and D = C * max(Z1, Z2). Compliers of either instrument share the same
    covariate law, so complier means of x coincide.

    ``shifted=True``: D = max(C1 Z1, C2 Z2) with C1 ~ Bernoulli(0.1 + 0.8x) and
    C2 ~ Bernoulli(0.9 - 0.8x), so Z1-compliers lean to high x and Z2-compliers
    to low x.
    """

    n: int = 1000
    shifted: bool = False


def generate_two_instruments(design: TwoInstrumentDesign, seed=0):
    """Returns (dataset with instrument Z1, Z2 column)."""
    rng = _rng(seed)
    n = design.n
    x = rng.uniform(size=n)
    pz = 0.3 + 0.4 * x
    z1 = (rng.uniform(size=n) < pz).astype(float)
    z2 = (rng.uniform(size=n) < pz).astype(float)
    if design.shifted:
        c1 = rng.uniform(size=n) < 0.1 + 0.8 * x
        c2 = rng.uniform(size=n) < 0.9 - 0.8 * x
        d = np.maximum(c1 * z1, c2 * z2)
    else:
        c = rng.uniform(size=n) < 0.3 + 0.5 * x
        d = c * np.maximum(z1, z2)
    y = d + x + rng.standard_normal(n)
    return IVDataset(y, d.astype(float), z1, x[:, None], ("x",)), z2


# --- Monte Carlo harness -------------------------------------------------------

METHODS = {
    "auto": dict(method="auto"),
    "plugin": dict(method="plugin", trim=TrimPolicy("none")),
    "plugin-trim": dict(method="plugin", trim=TrimPolicy("trim")),
    "plugin-censor": dict(method="plugin", trim=TrimPolicy("censor")),
    "kappa": dict(method="kappa"),
}


@dataclass(frozen=True)
class MCConfig:
    reps: int = 500
    n: int = 1000
    methods: tuple = ("auto",)
    beta_grid: tuple = BETA_GRID
    delta_grid: tuple = DELTA_GRID
    folds: int = 5
    lambda_multiplier: float = 1.0
    epsilon: float = 1e-12
    seed: int = 0
    threads: int = 1
    band_alpha: float | None = None
    band_draws: int = 10_000

    def __post_init__(self):
        if self.reps < 2:
            raise ConfigError("reps must be >= 2")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def estimator_config(self, method: str, seed: int) -> EstimatorConfig:
        kw = dict(METHODS[method])
        if "trim" in kw:
            kw["trim"] = replace(kw["trim"], epsilon=self.epsilon)
        # the multiplier scales the balancing-weight penalty only; gamma keeps the default loop
        return EstimatorConfig(folds=self.folds, seed=seed,
                               hyper=RieszHyper(lambda_multiplier=self.lambda_multiplier),
                               gamma_hyper=RieszHyper(), **kw)


def order_statistic(values, prob: float) -> float:
    """Sorted value at 1-based index ceil(prob * m)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return float("nan")
    k = min(max(math.ceil(prob * v.size - 1e-12), 1), v.size)
    return float(v[k - 1])


@dataclass
class MCSummary:
    config: MCConfig
    rows: list
    estimates: dict = field(repr=False, default_factory=dict)
    failures: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "parameter", "y", "median", "q10", "q90", "failures"])
        for r in self.rows:
            w.writerow([r["method"], r["parameter"], _fmt(r["y"]), _fmt(r["median"]),
                        _fmt(r["q10"]), _fmt(r["q90"]), r["failures"]])
        return buf.getvalue()

    def row(self, method, parameter, y) -> dict:
        for r in self.rows:
            if r["method"] == method and r["parameter"] == parameter and r["y"] == y:
                return r
        raise KeyError((method, parameter, y))

    def medians(self, method, parameter) -> np.ndarray:
        return np.array([r["median"] for r in self.rows
                         if r["method"] == method and r["parameter"] == parameter])

    def widths(self, method, parameter) -> np.ndarray:
        return np.array([r["q90"] - r["q10"] for r in self.rows
                         if r["method"] == method and r["parameter"] == parameter])


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _union_grid(cfg: MCConfig):
    grid = tuple(sorted(set(cfg.beta_grid) | set(cfg.delta_grid)))
    bidx = [2 * grid.index(y) for y in cfg.beta_grid]
    didx = [2 * grid.index(y) + 1 for y in cfg.delta_grid]
    return grid, np.array(bidx), np.array(didx)


def _replicate(cfg: MCConfig, child: np.random.SeedSequence, target, bidx, didx, delta_truth):
    data_ss, fold_ss, boot_ss = child.spawn(3)
    data = generate(StepPropensityDesign(cfg.n), np.random.default_rng(data_ss))
    fold_seed = int(fold_ss.generate_state(1)[0])
    spec = simulation_spec().fit(data.x)
    out = {}
    for m in cfg.methods:
        try:
            rep = estimate(data, target, spec, cfg.estimator_config(m, fold_seed))
        except ComplierDMLError as err:
            out[m] = err
            continue
        if not np.all(np.isfinite(rep.theta)):
            out[m] = ComplierDMLError("non-finite estimate")
            continue
        cover = None
        if cfg.band_alpha is not None and m != "kappa":
            band = band_skipping_degenerate(rep.theta[didx], rep.cov[np.ix_(didx, didx)],
                                            rep.n_used, cfg.band_alpha, cfg.band_draws,
                                            int(boot_ss.generate_state(1)[0]))
            cover = band.covers(delta_truth)
        out[m] = (rep.theta[bidx], rep.theta[didx], cover)
    return out


def run_monte_carlo(cfg: MCConfig = MCConfig()) -> MCSummary:
    grid, bidx, didx = _union_grid(cfg)
    target = TargetSpec("cdf", grid=grid)
    delta_truth = truth_oracle(cfg.delta_grid)[1]
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.reps)

    def run(child):
        return _replicate(cfg, child, target, bidx, didx, delta_truth)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, children))
    else:
        results = [run(c) for c in children]

    rows, estimates, failures, coverage = [], {}, {}, {}
    for m in cfg.methods:
        ok = [r[m] for r in results if isinstance(r[m], tuple)]
        failures[m] = len(results) - len(ok)
        betas = np.array([o[0] for o in ok]).reshape(len(ok), len(cfg.beta_grid))
        deltas = np.array([o[1] for o in ok]).reshape(len(ok), len(cfg.delta_grid))
        estimates[m] = {"beta": betas, "delta": deltas}
        covers = [o[2] for o in ok if o[2] is not None]
        if covers:
            coverage[m] = float(np.mean(covers))
        for name, ys, vals in (("beta", cfg.beta_grid, betas), ("delta", cfg.delta_grid, deltas)):
            for j, y in enumerate(ys):
                col = vals[:, j]
                rows.append({"method": m, "parameter": name, "y": float(y),
                             "median": order_statistic(col, 0.5),
                             "q10": order_statistic(col, 0.1),
                             "q90": order_statistic(col, 0.9),
                             "failures": failures[m]})
    return MCSummary(cfg, rows, estimates, failures, coverage)
