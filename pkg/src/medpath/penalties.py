"""LASSO / Pathway LASSO penalties and their proximal maps.

Pathway penalty per mediator pair::

    kappa * (|a b| + nu (a^2 + b^2)) + lambda_alpha |a| + lambda_beta |b|

plus ``lambda_gamma |gamma|`` on the direct effect. The plain LASSO is the
``kappa = 0`` member of the same family. The pair term is convex for
``nu >= 0.5``, which makes every proximal map below single valued.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import ContractError, Dataset, MediationParams, loglik

VARIANTS = ("lasso", "pathway")
STRATEGIES = ("TR", "MD", "SMD")


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty variant plus every tuning parameter.

    ``strategy`` controls the direct-effect penalty: ``TR`` leaves gamma
    unpenalized, ``MD`` requires ``lambda_gamma > 0`` and ``SMD`` requires
    ``lambda_gamma >= gamma_floor``.
    """

    variant: str = "lasso"
    lambda_alpha: float = 0.0
    lambda_beta: float = 0.0
    lambda_gamma: float = 0.0
    gamma_floor: float = 0.3
    kappa: float = 0.0
    nu: float = 2.0
    strategy: str = "TR"

    def __post_init__(self):
        for f in ("lambda_alpha", "lambda_beta", "lambda_gamma", "gamma_floor",
                  "kappa", "nu"):
            v = float(getattr(self, f))
            if not (math.isfinite(v) and v >= 0):
                raise ContractError(f"{f} must be finite and nonnegative, got {v}")
            object.__setattr__(self, f, v)
        if self.variant not in VARIANTS:
            raise ContractError(f"variant must be one of {VARIANTS}")
        if self.strategy not in STRATEGIES:
            raise ContractError(f"strategy must be one of {STRATEGIES}")
        if self.variant == "pathway" and self.nu < 0.5:
            raise ContractError(f"nu must be >= 0.5 for the pathway penalty, got {self.nu}")
        if self.strategy == "TR" and self.lambda_gamma != 0:
            raise ContractError("strategy TR requires lambda_gamma = 0")
        if self.strategy == "MD" and not self.lambda_gamma > 0:
            raise ContractError("strategy MD requires lambda_gamma > 0")
        if self.strategy == "SMD" and self.lambda_gamma < self.gamma_floor:
            raise ContractError(
                f"strategy SMD requires lambda_gamma >= {self.gamma_floor}, "
                f"got {self.lambda_gamma}")

    @property
    def pair_kappa(self) -> float:
        # the plain LASSO carries no product term whatever kappa says
        return self.kappa if self.variant == "pathway" else 0.0

    @property
    def total_penalty(self) -> float:
        return self.lambda_alpha + self.lambda_beta + self.lambda_gamma

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "PenaltyConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        extra = set(d) - set(known)
        if extra:
            raise ContractError(f"unknown penalty keys: {sorted(extra)}")
        return cls(**known)


def effective_lambda_gamma(config, requested: float) -> float:
    """Direct-effect penalty actually applied under ``config.strategy``.

    ``config`` is anything with ``strategy`` and ``gamma_floor`` attributes.
    """
    if requested < 0:
        raise ContractError("requested lambda_gamma must be nonnegative")
    if config.strategy == "TR":
        return 0.0
    if config.strategy == "MD":
        if requested <= 0:
            raise ContractError("strategy MD is defined by lambda_gamma > 0")
        return float(requested)
    return float(max(requested, config.gamma_floor))


def penalty_value(config: PenaltyConfig, params: MediationParams) -> float:
    a, b = params.alpha, params.beta
    val = (config.lambda_alpha * np.sum(np.abs(a)) + config.lambda_beta * np.sum(np.abs(b))
           + config.lambda_gamma * abs(params.gamma))
    k = config.pair_kappa
    if k:
        val += k * np.sum(np.abs(a * b) + config.nu * (a * a + b * b))
    return float(val)


def objective(config: PenaltyConfig, params: MediationParams, data: Dataset) -> float:
    return 0.5 * loglik(params, data) + penalty_value(config, params)


def prox_l1(v, t):
    """Soft threshold ``sign(v) * max(|v| - t, 0)``; scalar or array."""
    if np.any(np.asarray(t) < 0):
        raise ContractError("threshold must be nonnegative")
    if np.ndim(v) == 0 and np.ndim(t) == 0:
        return _soft(float(v), float(t))
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@numba.njit(cache=True)
def _soft(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


@numba.njit(cache=True)
def _pair_obj(x, y, a, b, step, kappa, nu, la, lb):
    return (0.5 * ((x - a) ** 2 + (y - b) ** 2) / step
            + kappa * (abs(x * y) + nu * (x * x + y * y)) + la * abs(x) + lb * abs(y))


@numba.njit(cache=True)
def _prox_pair(a, b, step, kappa, nu, la, lb):
    if step <= 0.0:
        return a, b
    shrink = 1.0 + 2.0 * step * kappa * nu
    # origin and the two axes: the product term vanishes there
    bx, by = 0.0, 0.0
    best = _pair_obj(0.0, 0.0, a, b, step, kappa, nu, la, lb)
    cx = _soft(a, step * la) / shrink
    f = _pair_obj(cx, 0.0, a, b, step, kappa, nu, la, lb)
    if f < best:
        best, bx, by = f, cx, 0.0
    cy = _soft(b, step * lb) / shrink
    f = _pair_obj(0.0, cy, a, b, step, kappa, nu, la, lb)
    if f < best:
        best, bx, by = f, 0.0, cy
    # open quadrants: 2x2 linear stationarity system per sign pattern
    off = step * kappa
    det = shrink * shrink - off * off
    for sx in (-1.0, 1.0):
        ra = a - step * la * sx
        for sy in (-1.0, 1.0):
            rb = b - step * lb * sy
            e = off * sx * sy
            x = (shrink * ra - e * rb) / det
            y = (shrink * rb - e * ra) / det
            if x * sx > 0.0 and y * sy > 0.0:
                f = _pair_obj(x, y, a, b, step, kappa, nu, la, lb)
                if f < best:
                    best, bx, by = f, x, y
    return bx, by


@numba.njit(cache=True)
def _prox_pairs(a, b, step, kappa, nu, la, lb, out_a, out_b):
    for i in range(a.shape[0]):
        out_a[i], out_b[i] = _prox_pair(a[i], b[i], step, kappa, nu, la, lb)


def prox_pathway_pair(a, b, step, kappa, nu, la, lb):
    """Exact minimizer over (x, y) of

    ``((x-a)^2 + (y-b)^2) / (2 step) + kappa (|xy| + nu (x^2+y^2)) + la|x| + lb|y|``.

    Candidates are the origin, the two axes (soft threshold followed by the
    quadratic shrink) and the stationary point of each open sign quadrant;
    the feasible candidate with the smallest value wins.
    """
    if kappa < 0 or la < 0 or lb < 0:
        raise ContractError("kappa, la and lb must be nonnegative")
    if kappa > 0 and nu < 0.5:
        raise ContractError("nu must be >= 0.5")
    return _prox_pair(float(a), float(b), float(step), float(kappa), float(nu),
                      float(la), float(lb))


def prox_pathway(a, b, step, kappa, nu, la, lb):
    """Vectorized :func:`prox_pathway_pair` over equal-length arrays."""
    a = np.ascontiguousarray(a, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    out_a, out_b = np.empty_like(a), np.empty_like(b)
    _prox_pairs(a, b, float(step), float(kappa), float(nu), float(la), float(lb),
                out_a, out_b)
    return out_a, out_b
