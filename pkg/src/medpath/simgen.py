"""Seeded generation of the simulation designs.

Layout for the default fractions and p = 200::

    index      0..19    20..39   40..59   60..199
    alpha      nonzero  nonzero  0        0
    beta       nonzero  0        nonzero  0
    type       1        3        2        4

Inside every contiguous nonzero run the first ``round(0.05 p)`` entries are
large-tier draws (mean 6) and the remainder small-tier draws (mean 4).
Counts round half up and the trailing zero block absorbs any remainder.

Randomness comes from a Philox counter-based generator; the draw order is
x, alpha magnitudes, beta magnitudes, mediator noise, outcome noise.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .model import ContractError, Dataset, Effects, MediationParams, effects

P_PRESETS = (30, 50, 100, 150, 200, 500, 1000)
DE_SWEEP = (36, 80, 137, 213, 320, 480, 747, 1280, 2880, 6080)
DE_SWEEP_TIE = 320.0


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class Scenario:
    n: int = 50
    p: int = 200
    gamma_true: float = 2.0
    frac_alpha_nonzero: float = 0.20
    # alternating nonzero / zero runs, starting with nonzero
    beta_pattern: tuple = (0.10, 0.10, 0.10, 0.70)
    # (fraction of p per run, mean, sd)
    large_signal: tuple = (0.05, 6.0, 0.1)
    small_signal: tuple = (0.05, 4.0, 0.1)
    mediator_rho: float = 0.1
    outcome_sd: float = 0.1
    seed: int = 0
    target_tie: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta_pattern", tuple(float(f) for f in self.beta_pattern))
        object.__setattr__(self, "large_signal", tuple(float(f) for f in self.large_signal))
        object.__setattr__(self, "small_signal", tuple(float(f) for f in self.small_signal))
        if self.n < 2 or self.p < 1:
            raise ContractError("scenario needs n >= 2 and p >= 1")
        fracs = [self.frac_alpha_nonzero, *self.beta_pattern,
                 self.large_signal[0], self.small_signal[0]]
        if any(not 0 <= f <= 1 for f in fracs):
            raise ContractError("scenario fractions must lie in [0, 1]")
        if abs(sum(self.beta_pattern) - 1) > 1e-9:
            raise ContractError("beta_pattern fractions must sum to 1")
        if self.large_signal[2] <= 0 or self.small_signal[2] <= 0 or self.outcome_sd <= 0:
            raise ContractError("standard deviations must be positive")
        lo = -1.0 / (self.p - 1) if self.p > 1 else -math.inf
        if not lo < self.mediator_rho < 1:
            raise ContractError(f"mediator_rho must lie in ({lo}, 1)")
        if self.target_tie is not None and self.target_tie <= 0:
            raise ContractError("target_tie must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("beta_pattern", "large_signal", "small_signal"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ContractError(f"unknown scenario keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class Truth:
    params: MediationParams
    effects: Effects
    mediator_type: np.ndarray
    outcome_noise: np.ndarray = field(repr=False, default=None)

    @property
    def ie_support(self) -> np.ndarray:
        return self.mediator_type == 1

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "effects": self.effects.to_dict(),
                "mediator_type": self.mediator_type.tolist(),
                "outcome_noise": self.outcome_noise.tolist()}


def _runs(mask):
    """Start/stop pairs of the True runs in a boolean vector."""
    edges = np.flatnonzero(np.diff(np.r_[0, mask.astype(int), 0]))
    return list(zip(edges[::2], edges[1::2]))


def layout(sc: Scenario):
    """Tier codes (0 zero, 1 large, 2 small) for alpha and beta, and mediator types."""
    p = sc.p
    a_cnt = round_half_up(sc.frac_alpha_nonzero * p)
    counts = [round_half_up(f * p) for f in sc.beta_pattern[:-1]]
    if a_cnt > p or sum(counts) > p:
        raise ContractError(f"fractions are infeasible for p={p}")
    counts.append(p - sum(counts))
    a_nz = np.zeros(p, bool)
    a_nz[:a_cnt] = True
    b_nz = np.zeros(p, bool)
    pos = 0
    for k, c in enumerate(counts):
        if k % 2 == 0:
            b_nz[pos:pos + c] = True
        pos += c
    mtype = np.where(a_nz & b_nz, 1, np.where(b_nz, 2, np.where(a_nz, 3, 4)))
    n_large = round_half_up(sc.large_signal[0] * p)
    tiers = []
    for nz in (a_nz, b_nz):
        tier = np.zeros(p, int)
        # runs split wherever the mediator type changes
        for lo, hi in _runs(nz):
            for lo2, hi2 in _split_by(mtype, lo, hi):
                cut = min(hi2, lo2 + n_large)
                tier[lo2:cut] = 1
                tier[cut:hi2] = 2
        tiers.append(tier)
    return tiers[0], tiers[1], mtype


def _split_by(labels, lo, hi):
    start = lo
    for i in range(lo + 1, hi + 1):
        if i == hi or labels[i] != labels[start]:
            yield start, i
            start = i


def expected_tie(sc: Scenario, scale: float = 1.0) -> float:
    ta, tb, _ = layout(sc)
    means = np.array([0.0, sc.large_signal[1], sc.small_signal[1]]) * scale
    return float(np.sum(means[ta] * means[tb]))


def _tier_scale(sc: Scenario) -> float:
    if sc.target_tie is None:
        return 1.0
    base = expected_tie(sc)
    if base <= 0:
        raise ContractError("target_tie set but the layout has no Type 1 mediators")
    return math.sqrt(sc.target_tie / base)


def cs_sqrt_apply(z: np.ndarray, rho: float) -> np.ndarray:
    """Right-multiply rows of ``z`` by the symmetric square root of the
    compound-symmetry matrix (1 on the diagonal, ``rho`` elsewhere)."""
    p = z.shape[1]
    s0 = math.sqrt(1.0 - rho)
    s1 = math.sqrt(1.0 - rho + p * rho)
    return s0 * z + ((s1 - s0) / p) * z.sum(axis=1, keepdims=True)


def cs_cov(p: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


def generate(sc: Scenario):
    """Draw one dataset and its ground truth; identical seeds give identical output."""
    ta, tb, mtype = layout(sc)
    scale = _tier_scale(sc)
    rng = np.random.Generator(np.random.Philox(sc.seed))
    n, p = sc.n, sc.p
    x = rng.binomial(1, 0.5, size=n).astype(float)

    def draw(tier):
        z = rng.standard_normal(p)
        (_, mu_l, sd_l), (_, mu_s, sd_s) = sc.large_signal, sc.small_signal
        return np.where(tier == 1, mu_l * scale + sd_l * z,
                        np.where(tier == 2, mu_s * scale + sd_s * z, 0.0))

    alpha = draw(ta)
    beta = draw(tb)
    noise = cs_sqrt_apply(rng.standard_normal((n, p)), sc.mediator_rho)
    zeta = sc.outcome_sd * rng.standard_normal(n)
    m = np.outer(x, alpha) + noise
    y = outcome(x, m, MediationParams(alpha, beta, sc.gamma_true), zeta)
    params = MediationParams(alpha, beta, sc.gamma_true)
    zeta.setflags(write=False)
    truth = Truth(params, effects(params), mtype, zeta)
    return Dataset(x, m, y), truth


def outcome(x, m, params: MediationParams, zeta):
    return x * params.gamma + m @ params.beta + zeta


def replicate_seed(base_seed: int, index: int) -> int:
    return int(base_seed) + int(index)


def de_sweep_scenarios(base: Scenario = Scenario()):
    """Ten scenarios with E[TIE] = 320 and the direct effect swept upward."""
    if (base.n, base.p) != (50, 200):
        raise ContractError("the direct-effect sweep is defined for n=50, p=200")
    return [replace(base, gamma_true=float(g), target_tie=DE_SWEEP_TIE) for g in DE_SWEEP]
