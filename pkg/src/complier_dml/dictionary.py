"""Polynomial dictionaries b(z, x) built from a covariate dictionary q(x).

Coordinate ordering of q(x) is frozen:

    [1, x_1, x_1^2, ..., x_1^deg, x_2, ..., x_k^deg, x_1*x_2, x_1*x_3, ..., x_{k-1}*x_k]

where the pairwise products appear only when ``interactions`` is set. Two
layouts lift q to b:

    main-interaction  b(z, x) = [q(x); z*q(x)]
    split             b(z, x) = [z*q(x); (1-z)*q(x)]
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .errors import ConfigError, ShapeError

LAYOUTS = ("main-interaction", "split")


@dataclass(frozen=True)
class DictionarySpec:
    k: int = 1
    degree: int = 4
    interactions: bool = False
    layout: str = "main-interaction"
    standardize: bool = True
    center: tuple | None = None
    scale: tuple | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("covariate width k must be >= 1")
        if self.degree < 0:
            raise ConfigError("degree must be >= 0")
        if self.layout not in LAYOUTS:
            raise ConfigError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        for name in ("center", "scale"):
            v = getattr(self, name)
            if v is not None and len(v) != self.k:
                raise ConfigError(f"{name} must have length k={self.k}")

    @property
    def q_width(self) -> int:
        w = 1 + self.k * self.degree
        if self.interactions:
            w += self.k * (self.k - 1) // 2
        return w

    @property
    def p(self) -> int:
        return 2 * self.q_width

    @property
    def intercept_indices(self) -> tuple:
        if self.layout == "split":
            return (0, self.q_width)
        return (0,)

    @property
    def fitted(self) -> bool:
        return not self.standardize or self.center is not None

    def fit(self, x) -> "DictionarySpec":
        """Freeze column centering/scaling from a covariate sample.

        Constant columns keep unit scale. A no-op when ``standardize`` is off.
        """
        if not self.standardize:
            return self
        x = _as_matrix(x, self.k)
        center = x.mean(axis=0)
        sd = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(self.k)
        sd = np.where(sd > 0, sd, 1.0)
        return replace(self, center=tuple(float(c) for c in center),
                       scale=tuple(float(s) for s in sd))

    def _prepare(self, x) -> np.ndarray:
        x = _as_matrix(x, self.k)
        if self.standardize:
            if self.center is None:
                raise ConfigError("standardized DictionarySpec must be fit() before use")
            x = (x - np.asarray(self.center)) / np.asarray(self.scale)
        return x

    def q(self, x) -> np.ndarray:
        """Covariate dictionary q(x) for an (n, k) array; returns (n, q_width)."""
        xs = self._prepare(x)
        n = xs.shape[0]
        cols = [np.ones(n)]
        for j in range(self.k):
            col = np.ones(n)
            for _ in range(self.degree):
                col = col * xs[:, j]
                cols.append(col)
        if self.interactions:
            for a, b in combinations(range(self.k), 2):
                cols.append(xs[:, a] * xs[:, b])
        return np.column_stack(cols)

    def basis(self, z, x) -> np.ndarray:
        """Rows b(z_i, x_i) for arrays z (n,) and x (n, k)."""
        qx = self.q(x)
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != qx.shape[0]:
            raise ShapeError("z and x row counts differ")
        zc = z[:, None]
        if self.layout == "split":
            return np.hstack([zc * qx, (1.0 - zc) * qx])
        return np.hstack([qx, zc * qx])

    def contrast(self, x) -> np.ndarray:
        """Rows b(1, x_i) - b(0, x_i)."""
        qx = self.q(x)
        if self.layout == "split":
            return np.hstack([qx, -qx])
        return np.hstack([np.zeros_like(qx), qx])


def _as_matrix(x, k) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if k == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != k:
        raise ShapeError(f"covariate width mismatch: expected {k}, got shape {x.shape}")
    return x


def expand(spec: DictionarySpec, z, x) -> np.ndarray:
    """b(z, x) for a single observation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.k,):
        raise ShapeError(f"covariate width mismatch: expected {spec.k}, got {x.shape}")
    return spec.basis([z], x[None, :])[0]


def instrument_contrast(spec: DictionarySpec, x) -> np.ndarray:
    """b(1, x) - b(0, x) for a single observation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.k,):
        raise ShapeError(f"covariate width mismatch: expected {spec.k}, got {x.shape}")
    return spec.contrast(x[None, :])[0]


@dataclass(frozen=True)
class SubDictionary:
    indices: tuple

    @property
    def size(self) -> int:
        return len(self.indices)


def sub_dictionary_size(p: int) -> int:
    return min(max(math.ceil(p / 40), 2), p)


def sub_dictionary(spec_or_p) -> SubDictionary:
    """Leading ceil(p/40) coordinates, at least 2; coordinate 0 is the intercept."""
    p = spec_or_p if isinstance(spec_or_p, int) else spec_or_p.p
    if p < 2:
        raise ConfigError("sub-dictionary needs p >= 2")
    return SubDictionary(tuple(range(sub_dictionary_size(p))))


def simulation_spec(standardize: bool = True) -> DictionarySpec:
    """Fourth-order polynomials of a scalar covariate and their z-interactions (p=10)."""
    return DictionarySpec(k=1, degree=4, interactions=False,
                          layout="main-interaction", standardize=standardize)
