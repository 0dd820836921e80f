"""Sure independence screening on absolute marginal correlation with Y."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ContractError, Dataset


def round_half_away(v: float) -> int:
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def reduced_dim(n: int, k: float) -> int:
    """``k n / ln n`` rounded half away from zero, never below 1."""
    if n < 2:
        raise ContractError("reduced_dim needs n >= 2")
    if not k > 0:
        raise ContractError("k must be positive")
    return max(1, round_half_away(k * n / math.log(n)))


@dataclass(frozen=True)
class ScreenConfig:
    k: float = 1.0
    d_override: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k > 0):
            raise ContractError(f"k must be positive, got {self.k}")
        if self.d_override is not None and int(self.d_override) < 1:
            raise ContractError("d_override must be a positive integer")

    def dimension(self, n: int, p: int) -> int:
        d = self.d_override if self.d_override is not None else reduced_dim(n, self.k)
        if d > p:
            raise ContractError(f"reduced dimension {d} exceeds the {p} available mediators")
        return int(d)

    def to_dict(self) -> dict:
        return {"k": self.k, "d_override": self.d_override}

    @classmethod
    def from_dict(cls, d: dict) -> "ScreenConfig":
        extra = set(d) - {"k", "d_override"}
        if extra:
            raise ContractError(f"unknown screen keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ScreenResult:
    kept_indices: tuple   # 1-based, descending score
    scores: np.ndarray
    screened: Dataset

    @property
    def columns(self) -> np.ndarray:
        """0-based column positions of the kept mediators."""
        return np.asarray(self.kept_indices, dtype=int) - 1

    def to_dict(self) -> dict:
        return {"kept_indices": list(self.kept_indices), "scores": self.scores.tolist()}


def marginal_scores(data: Dataset) -> np.ndarray:
    """``|cor(M_i, Y)|`` for every mediator column."""
    mc = data.m - data.m.mean(axis=0)
    yc = data.y - data.y.mean()
    sm = np.sqrt(np.sum(mc * mc, axis=0))
    bad = np.flatnonzero(~(sm > 0))
    if bad.size:
        raise ContractError(f"mediator column m{bad[0] + 1} has zero variance")
    sy = math.sqrt(float(yc @ yc))
    if not sy > 0:
        raise ContractError("outcome column y has zero variance")
    return np.abs(mc.T @ yc) / (sm * sy)


def sis_screen(data: Dataset, cfg: ScreenConfig) -> ScreenResult:
    d = cfg.dimension(data.n, data.p)
    scores = marginal_scores(data)
    # stable sort on -score keeps ascending index order within ties
    order = np.argsort(-scores, kind="stable")[:d]
    scores.setflags(write=False)
    return ScreenResult(tuple(int(i) + 1 for i in order), scores, data.subset(order))
