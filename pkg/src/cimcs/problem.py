"""Problem instances for L0-regularized compressed sensing.

An instance is a column-normalized Gaussian observation matrix ``A``
(M x N), a sparse source ``xi * x`` and the observation ``y = A(xi*x) + n``.
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .coupling import DenseCoupling


class ParameterError(ValueError):
    """Invalid model or instance parameter."""


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"          # signed
    HALF_GAUSSIAN = "half_gaussian"  # non-negative
    GAMMA = "gamma"                # non-negative
    BILATERAL_GAMMA = "bilateral_gamma"  # signed


class Chi(str, enum.Enum):
    NONNEG = "+"
    SIGNED = "pm"

    @classmethod
    def parse(cls, value) -> "Chi":
        if isinstance(value, Chi):
            return value
        v = str(value).strip().lower()
        if v in ("+", "nonneg", "nonnegative", "plus"):
            return cls.NONNEG
        if v in ("pm", "+-", "±", "signed"):
            return cls.SIGNED
        raise ParameterError(f"unknown chi {value!r}")


@dataclass(frozen=True)
class SourceDistribution:
    """Distribution ``g(x)`` of the non-zero source values.

    Gaussian kinds use ``sigma2``; Gamma kinds use shape ``k`` and scale
    ``theta``. The bilateral Gamma is a Gamma magnitude with a random sign.
    """

    kind: Kind = Kind.GAUSSIAN
    sigma2: float = 1.0
    k: float = 2.0
    theta: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        self.validate()

    def validate(self) -> None:
        if self.kind in (Kind.GAUSSIAN, Kind.HALF_GAUSSIAN):
            if not self.sigma2 > 0:
                raise ParameterError(f"sigma2 must be > 0, got {self.sigma2}")
        else:
            if not self.k > 0:
                raise ParameterError(f"shape k must be > 0, got {self.k}")
            if not self.theta > 0:
                raise ParameterError(f"scale theta must be > 0, got {self.theta}")

    @property
    def signed(self) -> bool:
        return self.kind in (Kind.GAUSSIAN, Kind.BILATERAL_GAMMA)

    @property
    def chi(self) -> Chi:
        return Chi.SIGNED if self.signed else Chi.NONNEG

    def second_moment(self) -> float:
        return second_moment(self)

    def pdf(self, x):
        """Density g(x), vectorized."""
        x = np.asarray(x, dtype=float)
        if self.kind is Kind.GAUSSIAN:
            return np.exp(-x * x / (2 * self.sigma2)) / math.sqrt(2 * math.pi * self.sigma2)
        if self.kind is Kind.HALF_GAUSSIAN:
            g = 2 * np.exp(-x * x / (2 * self.sigma2)) / math.sqrt(2 * math.pi * self.sigma2)
            return np.where(x >= 0, g, 0.0)
        ax = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            logg = ((self.k - 1) * np.log(ax) - ax / self.theta
                    - math.lgamma(self.k) - self.k * math.log(self.theta))
            g = np.where(ax > 0, np.exp(logg), 1.0 / self.theta if self.k == 1 else 0.0)
        if self.kind is Kind.GAMMA:
            return np.where(x >= 0, g, 0.0)
        return 0.5 * g

    def support(self) -> tuple[float, float]:
        """Interval holding all but a negligible (~1e-20) part of the mass."""
        if self.kind in (Kind.GAUSSIAN, Kind.HALF_GAUSSIAN):
            hi = 10.0 * math.sqrt(self.sigma2)
        else:
            hi = self.theta * (self.k + 12.0 * math.sqrt(self.k) + 50.0)
        return (-hi if self.signed else 0.0), hi

    @classmethod
    def gaussian(cls, sigma2: float = 1.0) -> "SourceDistribution":
        return cls(Kind.GAUSSIAN, sigma2=sigma2)

    @classmethod
    def half_gaussian(cls, sigma2: float = 1.0) -> "SourceDistribution":
        return cls(Kind.HALF_GAUSSIAN, sigma2=sigma2)

    @classmethod
    def gamma(cls, k: float = 2.0, theta: float = 0.4) -> "SourceDistribution":
        return cls(Kind.GAMMA, k=k, theta=theta)

    @classmethod
    def bilateral_gamma(cls, k: float = 2.0, theta: float = 0.4) -> "SourceDistribution":
        return cls(Kind.BILATERAL_GAMMA, k=k, theta=theta)


def second_moment(dist: SourceDistribution) -> float:
    """Closed-form <x^2>_x of the source distribution."""
    if dist.kind in (Kind.GAUSSIAN, Kind.HALF_GAUSSIAN):
        return float(dist.sigma2)
    return float(dist.k * (dist.k + 1) * dist.theta ** 2)


def sample_source(dist: SourceDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. values from ``dist``."""
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    dist.validate()
    if dist.kind is Kind.GAUSSIAN:
        return rng.normal(0.0, math.sqrt(dist.sigma2), size=count)
    if dist.kind is Kind.HALF_GAUSSIAN:
        return np.abs(rng.normal(0.0, math.sqrt(dist.sigma2), size=count))
    mag = rng.gamma(dist.k, dist.theta, size=count)
    if dist.kind is Kind.GAMMA:
        return mag
    sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    return sign * mag


@dataclass(frozen=True)
class InstanceParams:
    n: int
    alpha: float
    a: float
    beta: float = 0.0
    dist: SourceDistribution = field(default_factory=SourceDistribution)
    chi: Chi | None = None
    seed: int = 0

    def __post_init__(self):
        chi = self.dist.chi if self.chi is None else Chi.parse(self.chi)
        object.__setattr__(self, "chi", chi)
        self.validate()

    @property
    def m(self) -> int:
        return int(round(self.alpha * self.n))

    @property
    def support_size(self) -> int:
        return int(round(self.a * self.n))

    def validate(self) -> None:
        if self.n < 1:
            raise ParameterError(f"n must be positive, got {self.n}")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.a <= 1:
            raise ParameterError(f"a must be in [0, 1], got {self.a}")
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if self.m < 1:
            raise ParameterError(f"round(alpha*n) = {self.m} < 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.chi is not self.dist.chi:
            raise ParameterError(
                f"chi {self.chi.value!r} inconsistent with distribution {self.dist.kind.value!r}")

    def to_json(self) -> dict:
        return {
            "n": self.n, "alpha": self.alpha, "a": self.a, "beta": self.beta,
            "dist": self.dist.kind.value, "sigma2": self.dist.sigma2,
            "k": self.dist.k, "theta": self.dist.theta,
            "chi": self.chi.value, "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "InstanceParams":
        dist = SourceDistribution(Kind(d["dist"]), sigma2=d["sigma2"], k=d["k"], theta=d["theta"])
        return cls(n=int(d["n"]), alpha=float(d["alpha"]), a=float(d["a"]),
                   beta=float(d["beta"]), dist=dist, chi=Chi.parse(d["chi"]),
                   seed=int(d["seed"]))


@dataclass(frozen=True, eq=False)
class Instance:
    a_mat: np.ndarray
    y: np.ndarray
    x_true: np.ndarray
    xi_true: np.ndarray
    params: InstanceParams

    @property
    def n(self) -> int:
        return self.a_mat.shape[1]

    @property
    def m(self) -> int:
        return self.a_mat.shape[0]

    @property
    def chi(self) -> Chi:
        return self.params.chi

    @property
    def signal(self) -> np.ndarray:
        """The planted signal xi * x."""
        return self.x_true * self.xi_true

    @cached_property
    def coupling(self) -> DenseCoupling:
        return DenseCoupling.from_matrix(self.a_mat, self.y)


def normalize_columns(a: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->j", a, a))
    if np.any(norms == 0):
        raise ParameterError("observation matrix has an all-zero column")
    return a / norms


def synthesize(params: InstanceParams) -> Instance:
    """Random instance drawn from the statistical-mechanics observation model.

    Draw order from the seeded generator is fixed: matrix, support, source
    values, noise. Noise has std ``beta`` and is added after the columns are
    normalized.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    n, m = params.n, params.m
    a = rng.standard_normal((m, n)) / math.sqrt(m)
    a = normalize_columns(a)
    xi = np.zeros(n, dtype=np.int8)
    xi[rng.choice(n, size=params.support_size, replace=False)] = 1
    x = sample_source(params.dist, n, rng)
    noise = rng.normal(0.0, params.beta, size=m) if params.beta > 0 else np.zeros(m)
    y = a @ (xi * x) + noise
    for arr in (a, x, y, xi):
        arr.setflags(write=False)
    return Instance(a_mat=a, y=y, x_true=x, xi_true=xi, params=params)


# --- flat-file export -------------------------------------------------------

MAGIC = b"CIML0CS1"
_HEADER = struct.Struct("<8sII")


def write_matrix(path, mat: np.ndarray) -> None:
    mat = np.asarray(mat, dtype="<f8")
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    rows, cols = mat.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(np.ascontiguousarray(mat).tobytes())


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} float64 values")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(float)


def save_instance(inst: Instance, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix(d / "a.mat", inst.a_mat)
    write_matrix(d / "y.vec", inst.y)
    write_matrix(d / "x.vec", inst.x_true)
    (d / "xi.bits").write_text("".join(f"{int(b)}\n" for b in inst.xi_true))
    (d / "params.json").write_text(json.dumps(inst.params.to_json(), indent=2) + "\n")
    return d


def load_instance(directory) -> Instance:
    d = Path(directory)
    params = InstanceParams.from_json(json.loads((d / "params.json").read_text()))
    a = read_matrix(d / "a.mat")
    y = read_matrix(d / "y.vec").ravel()
    x = read_matrix(d / "x.vec").ravel()
    xi = np.array([int(t) for t in (d / "xi.bits").read_text().split()], dtype=np.int8)
    if a.shape != (y.size, x.size) or xi.size != x.size:
        raise ValueError(f"{d}: inconsistent shapes a={a.shape} y={y.size} x={x.size} xi={xi.size}")
    return Instance(a_mat=a, y=y, x_true=x, xi_true=xi, params=params)
