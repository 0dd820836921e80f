"""Data and parameter types for the parallel linear mediation model.

    M_i = X alpha_i + eps_i,            i = 1..p
    Y   = X gamma + sum_i M_i beta_i + zeta

Estimation works with the unit-variance criterion

    l(alpha, beta, gamma) = tr{(M - X alpha)'(M - X alpha)}
                            + (Y - X gamma - M beta)'(Y - X gamma - M beta)

which is taken to be -2 log L with the Gaussian constants dropped.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


def _frozen(a, ndim, name):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise ContractError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Exposure ``x`` (n,), mediators ``m`` (n, p) and outcome ``y`` (n,)."""

    x: np.ndarray
    m: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x, 1, "x")
        m = _frozen(self.m, 2, "m")
        y = _frozen(self.y, 1, "y")
        n = x.shape[0]
        if n < 2:
            raise ContractError(f"need at least 2 subjects, got {n}")
        if m.shape[0] != n or y.shape[0] != n:
            raise ContractError(
                f"row counts disagree: x={n}, m={m.shape[0]}, y={y.shape[0]}")
        if m.shape[1] < 1:
            raise ContractError("need at least one mediator")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.m.shape[1]

    def subset(self, columns) -> "Dataset":
        """Restrict to the given 0-based mediator columns, preserving order."""
        return Dataset(self.x, self.m[:, list(columns)], self.y)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.m, other.m)
                and np.array_equal(self.y, other.y))


@dataclass(frozen=True, eq=False)
class MediationParams:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: float

    def __post_init__(self):
        a = _frozen(self.alpha, 1, "alpha")
        b = _frozen(self.beta, 1, "beta")
        if a.shape != b.shape:
            raise ContractError(f"alpha and beta lengths differ: {a.size} vs {b.size}")
        g = float(self.gamma)
        if not np.isfinite(g):
            raise ContractError("gamma is not finite")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "gamma", g)

    @property
    def p(self) -> int:
        return self.alpha.size

    @classmethod
    def zeros(cls, p: int) -> "MediationParams":
        return cls(np.zeros(p), np.zeros(p), 0.0)

    def __eq__(self, other):
        if not isinstance(other, MediationParams):
            return NotImplemented
        return (np.array_equal(self.alpha, other.alpha)
                and np.array_equal(self.beta, other.beta) and self.gamma == other.gamma)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist(),
                "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "MediationParams":
        return cls(d["alpha"], d["beta"], d["gamma"])


@dataclass(frozen=True, eq=False)
class Effects:
    """Direct, per-mediator indirect, total indirect and total effects."""

    de: float
    ie: np.ndarray
    tie: float
    te: float

    def to_dict(self) -> dict:
        return {"de": self.de, "ie": self.ie.tolist(), "tie": self.tie, "te": self.te}


def _check_dims(params: MediationParams, data: Dataset):
    if params.p != data.p:
        raise ContractError(
            f"parameter length {params.p} does not match mediator count {data.p}")


def loglik(params: MediationParams, data: Dataset) -> float:
    """Residual criterion ``l``; equals -2 log L up to an additive constant."""
    _check_dims(params, data)
    rm = data.m - np.outer(data.x, params.alpha)
    ry = data.y - data.x * params.gamma - data.m @ params.beta
    return float(np.sum(rm * rm) + ry @ ry)


def effects(params: MediationParams) -> Effects:
    ie = params.alpha * params.beta
    ie.setflags(write=False)
    tie = float(np.sum(ie))
    de = params.gamma
    return Effects(de=de, ie=ie, tie=tie, te=de + tie)


STANDARDIZE_MODES = ("none", "unit-scale", "full")


@dataclass(frozen=True, eq=False)
class Scaling:
    """Per-column centres and scales taken from one dataset.

    ``apply`` maps the data onto the working scale; ``to_raw`` maps
    coefficients estimated there back to the original units, where the
    model holds for the centred data returned by ``centered``.
    """

    mode: str
    x_mean: float
    x_sd: float
    m_mean: np.ndarray
    m_sd: np.ndarray
    y_mean: float
    y_sd: float

    @classmethod
    def of(cls, data: Dataset, mode: str = "none") -> "Scaling":
        if mode not in STANDARDIZE_MODES:
            raise ContractError(f"unknown standardization mode {mode!r}")
        p = data.p
        if mode == "none":
            return cls(mode, 0.0, 1.0, np.zeros(p), np.ones(p), 0.0, 1.0)
        sd_m = data.m.std(axis=0, ddof=1)
        bad = np.flatnonzero(~(sd_m > 0))
        if bad.size:
            raise ContractError(f"mediator column m{bad[0] + 1} has zero variance")
        sd_y = float(data.y.std(ddof=1))
        if not sd_y > 0:
            raise ContractError("outcome column y has zero variance")
        sd_x = 1.0
        if mode == "full":
            sd_x = float(data.x.std(ddof=1))
            if not sd_x > 0:
                raise ContractError("exposure column x has zero variance")
        return cls(mode, float(data.x.mean()), sd_x, data.m.mean(axis=0), sd_m,
                   float(data.y.mean()), sd_y)

    def apply(self, data: Dataset) -> Dataset:
        if self.mode == "none":
            return data
        return Dataset((data.x - self.x_mean) / self.x_sd,
                       (data.m - self.m_mean) / self.m_sd,
                       (data.y - self.y_mean) / self.y_sd)

    def centered(self, data: Dataset) -> Dataset:
        """Original units with the stored means removed."""
        if self.mode == "none":
            return data
        return Dataset(data.x - self.x_mean, data.m - self.m_mean, data.y - self.y_mean)

    def to_raw(self, params: MediationParams) -> MediationParams:
        return MediationParams(params.alpha * self.m_sd / self.x_sd,
                               params.beta * self.y_sd / self.m_sd,
                               params.gamma * self.y_sd / self.x_sd)

    def to_working(self, params: MediationParams) -> MediationParams:
        return MediationParams(params.alpha * self.x_sd / self.m_sd,
                               params.beta * self.m_sd / self.y_sd,
                               params.gamma * self.x_sd / self.y_sd)


def standardize(data: Dataset, mode: str = "none") -> Dataset:
    """Optionally rescale a dataset.

    ``"unit-scale"`` centres Y and each mediator and divides by the sample
    standard deviation (ddof=1); X is centred only so a 0/1 coding survives as
    a shift. ``"full"`` additionally scales X to unit sample standard
    deviation. ``"none"`` returns the input unchanged. A zero-variance column
    raises :class:`ContractError` naming it.
    """
    return Scaling.of(data, mode).apply(data)


# -- CSV interchange: header ``y,x,m1,...,mp`` ------------------------------

def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y", "x"] + [f"m{j + 1}" for j in range(data.p)])
    for i in range(data.n):
        w.writerow([repr(float(data.y[i])), repr(float(data.x[i]))]
                   + [repr(float(v)) for v in data.m[i]])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ContractError("empty dataset file")
    header = [h.strip() for h in rows[0]]
    p = len(header) - 2
    expected = ["y", "x"] + [f"m{j + 1}" for j in range(p)]
    if p < 1 or header != expected:
        raise ContractError("dataset header must be y,x,m1,...,mp")
    body = [r for r in rows[1:] if r]
    try:
        arr = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ContractError(f"non-numeric dataset entry: {exc}") from None
    if arr.ndim != 2 or arr.shape[1] != p + 2:
        raise ContractError("ragged dataset rows")
    return Dataset(arr[:, 1], arr[:, 2:], arr[:, 0])


def read_dataset(path) -> Dataset:
    return dataset_from_csv(Path(path).read_text(encoding="utf-8"))


def bic(fit_loglik: float, q: int, n: int) -> float:
    """``q ln(n) - 2 ln L`` with ``-2 ln L`` taken as the :func:`loglik` value."""
    if n < 2 or q < 0:
        raise ContractError("bic needs n >= 2 and q >= 0")
    return q * math.log(n) + fit_loglik
