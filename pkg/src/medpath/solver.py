"""ADMM solver for the penalized mediation criterion.

The variables (alpha, beta, gamma) are duplicated into consensus copies. The
smooth block is the quadratic loss ``l / 2``; it splits into a diagonal part
for alpha (one single-column least squares per mediator) and a ridge system
in (gamma, beta) on the design ``[x, M]``. The prox block is the whole
penalty and is separable per mediator pair plus gamma.

For the plain LASSO, alpha never meets beta in the criterion, so alpha is
solved exactly in closed form and ADMM only runs on (gamma, beta).

The ridge system is solved through an eigendecomposition of the smaller Gram
matrix of ``[x, M]``, so changing ``rho`` (residual balancing) costs nothing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .model import ContractError, Dataset, Effects, MediationParams, bic, effects, loglik
from .penalties import PenaltyConfig, _prox_pair, _soft, objective


ADAPT_EVERY = 10


class SingularSubproblemError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 5000
    tol_primal: float = 1e-8
    tol_dual: float = 1e-8
    rho: float = 1.0
    nonzero_tol: float = 1e-8
    seed: int = 0
    adapt_rho: bool = True
    record_history: bool = True

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ContractError("max_iter must be >= 1")
        for f in ("tol_primal", "tol_dual", "rho", "nonzero_tol"):
            v = getattr(self, f)
            if not (math.isfinite(v) and v > 0):
                raise ContractError(f"{f} must be positive, got {v}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ContractError(f"unknown solver keys: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True, eq=False)
class FitResult:
    params: MediationParams
    effects: Effects
    objective: float
    loglik: float
    bic: float
    iterations: int
    converged: bool
    support_alpha: np.ndarray
    support_beta: np.ndarray
    q: int
    history: np.ndarray | None = field(default=None, repr=False)

    ok = True

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "effects": self.effects.to_dict(),
            "objective": self.objective,
            "loglik": self.loglik,
            "bic": self.bic,
            "iterations": self.iterations,
            "converged": self.converged,
            "support_alpha": self.support_alpha.astype(int).tolist(),
            "support_beta": self.support_beta.astype(int).tolist(),
            "q": self.q,
        }


@dataclass(frozen=True)
class FitFailure:
    """Placeholder for a grid or path entry whose fit raised."""

    message: str
    ok = False


class Prepared:
    """Data-dependent quantities shared by every fit on one dataset."""

    def __init__(self, data: Dataset):
        self.data = data
        x, m, y = data.x, data.m, data.y
        self.xx = float(x @ x)
        self.xm = np.ascontiguousarray(m.T @ x)
        self.mcol2 = np.ascontiguousarray(np.sum(m * m, axis=0))
        self.A = np.ascontiguousarray(np.column_stack([x, m]))
        self.Atb = np.ascontiguousarray(self.A.T @ y)
        self.yty = float(y @ y)
        n, d = self.A.shape
        self.wide = n < d
        gram = self.A @ self.A.T if self.wide else self.A.T @ self.A
        lam, vec = np.linalg.eigh(gram)
        self.lam = np.ascontiguousarray(np.maximum(lam, 0.0))
        self.Q = np.ascontiguousarray(vec)
        self.rank_deficient = self.wide or lam.min() <= 1e-12 * max(lam.max(), 1.0)

    def ridge_solve(self, v, ridge):
        """Solve ``([x M]'[x M] + ridge I) w = v``."""
        if ridge <= 0 and self.rank_deficient:
            raise SingularSubproblemError(
                "quadratic subproblem is singular: [x, M] is rank deficient and "
                "the ridge term is zero")
        if self.wide:
            t = self.Q.T @ (self.A @ v) / (self.lam + ridge)
            return (v - self.A.T @ (self.Q @ t)) / ridge
        return self.Q @ ((self.Q.T @ v) / (self.lam + ridge))

    def closed_form_alpha(self, lambda_alpha):
        """Exact LASSO alpha: soft-thresholded single-column least squares."""
        return _alpha_closed_form(self.xx, self.xm, lambda_alpha)


def _alpha_closed_form(xx, xm, lambda_alpha):
    if xx <= 0:
        raise SingularSubproblemError("exposure column is identically zero")
    return np.sign(xm) * np.maximum(np.abs(xm) - lambda_alpha, 0.0) / xx


def lasso_alpha(data: Dataset, lambda_alpha: float) -> np.ndarray:
    """LASSO alpha on ``data``; it never depends on beta or gamma."""
    return _alpha_closed_form(float(data.x @ data.x), data.m.T @ data.x, lambda_alpha)


@numba.njit(cache=True)
def _admm(A, Atb, yty, Q, lam, wide, xx, xm, mcol2, joint,
          la, lb, lg, kappa, nu, alpha0, w0,
          rho, max_iter, tol_p, tol_d, adapt, hist):
    n, d = A.shape
    p = d - 1
    za = alpha0.copy()
    zw = w0.copy()
    ta = za.copy()
    tw = zw.copy()
    ua = np.zeros(p)
    # dual warm start -grad f(z)/rho makes any optimal z0 a fixed point
    Az = A @ zw
    uw = -(A.T @ Az - Atb) / rho
    if joint:
        ua = -(xx * za - xm) / rho
    rho_lo = rho * 1e-10
    rho_hi = rho * 1e10

    def block_obj(za, zw, Az):
        val = 0.5 * (yty - 2.0 * (zw @ Atb) + Az @ Az) + lg * abs(zw[0])
        for i in range(p):
            b = zw[i + 1]
            val += lb * abs(b)
            if joint:
                a = za[i]
                val += (0.5 * (mcol2[i] - 2.0 * a * xm[i] + a * a * xx)
                        + la * abs(a) + kappa * (abs(a * b) + nu * (a * a + b * b)))
        return val

    best = block_obj(za, zw, Az)
    best_a = za.copy()
    best_w = zw.copy()
    converged = False
    it = 0
    sqd = math.sqrt(d + (p if joint else 0))
    while it < max_iter:
        it += 1
        # smooth block
        v = Atb + rho * (zw - uw)
        if wide:
            t = (Q.T @ (A @ v)) / (lam + rho)
            tw = (v - A.T @ (Q @ t)) / rho
        else:
            tw = Q @ ((Q.T @ v) / (lam + rho))
        if joint:
            ta = (xm + rho * (za - ua)) / (xx + rho)
        # prox block
        za_old = za.copy()
        zw_old = zw.copy()
        step = 1.0 / rho
        zw[0] = _soft(tw[0] + uw[0], lg * step)
        for i in range(p):
            if joint:
                za[i], zw[i + 1] = _prox_pair(ta[i] + ua[i], tw[i + 1] + uw[i + 1],
                                              step, kappa, nu, la, lb)
            else:
                zw[i + 1] = _soft(tw[i + 1] + uw[i + 1], lb * step)
        uw += tw - zw
        r2 = np.sum((tw - zw) ** 2)
        s2 = np.sum((zw - zw_old) ** 2)
        th2 = np.sum(tw ** 2)
        z2 = np.sum(zw ** 2)
        u2 = np.sum(uw ** 2)
        if joint:
            ua += ta - za
            r2 += np.sum((ta - za) ** 2)
            s2 += np.sum((za - za_old) ** 2)
            th2 += np.sum(ta ** 2)
            z2 += np.sum(za ** 2)
            u2 += np.sum(ua ** 2)
        r = math.sqrt(r2)
        s = rho * math.sqrt(s2)
        Az = A @ zw
        f = block_obj(za, zw, Az)
        if f <= best:
            best = f
            best_a[:] = za
            best_w[:] = zw
        hist[it - 1] = best
        eps_p = tol_p * (sqd + math.sqrt(max(th2, z2)))
        eps_d = tol_d * (sqd + rho * math.sqrt(u2))
        if r <= eps_p and s <= eps_d:
            converged = True
            break
        # rebalance only every few iterations; flipping rho on every step
        # can stall the iteration indefinitely
        if adapt and it % ADAPT_EVERY == 0:
            if r > 10.0 * s and rho * 2.0 <= rho_hi:
                rho *= 2.0
                uw /= 2.0
                ua /= 2.0
            elif s > 10.0 * r and rho / 2.0 >= rho_lo:
                rho /= 2.0
                uw *= 2.0
                ua *= 2.0
    return best_a, best_w, it, converged


def _validate_init(init, p):
    if init is None:
        return MediationParams.zeros(p)
    if init.p != p:
        raise ContractError(f"init has {init.p} mediators, data has {p}")
    return init


def _run(prep: Prepared, pen: PenaltyConfig, cfg: SolverConfig, init: MediationParams):
    data = prep.data
    joint = pen.pair_kappa > 0
    if joint:
        alpha0 = np.array(init.alpha, dtype=float)
    else:
        alpha0 = prep.closed_form_alpha(pen.lambda_alpha)
    w0 = np.concatenate([[init.gamma], init.beta]).astype(float)
    hist = np.empty(int(cfg.max_iter))
    a, w, it, conv = _admm(
        prep.A, prep.Atb, prep.yty, prep.Q, prep.lam, prep.wide, prep.xx, prep.xm,
        prep.mcol2, joint, pen.lambda_alpha, pen.lambda_beta, pen.lambda_gamma,
        pen.pair_kappa, pen.nu, np.ascontiguousarray(alpha0), np.ascontiguousarray(w0),
        float(cfg.rho), int(cfg.max_iter), float(cfg.tol_primal), float(cfg.tol_dual),
        bool(cfg.adapt_rho), hist)
    if not joint:
        a = alpha0
    params = MediationParams(a, w[1:], w[0])
    history = None
    if cfg.record_history:
        history = hist[:it].copy()
        if not joint:
            # alpha block is constant inside the kernel; add its share back
            ra = data.m - np.outer(data.x, a)
            history += 0.5 * float(np.sum(ra * ra)) + pen.lambda_alpha * np.abs(a).sum()
    return _result(params, pen, cfg, data, it, conv, history)


def _result(params, pen, cfg, data, it, conv, history=None) -> FitResult:
    tol = cfg.nonzero_tol
    sa = np.abs(params.alpha) > tol
    sb = np.abs(params.beta) > tol
    q = int(sa.sum() + sb.sum() + (abs(params.gamma) > tol))
    ll = loglik(params, data)
    return FitResult(
        params=params, effects=effects(params), objective=objective(pen, params, data),
        loglik=ll, bic=bic(ll, q, data.n), iterations=int(it), converged=bool(conv),
        support_alpha=sa, support_beta=sb, q=q, history=history)


def fit(data: Dataset, pen: PenaltyConfig, cfg: SolverConfig = SolverConfig(),
        init: MediationParams | None = None, *, prepared: Prepared | None = None) -> FitResult:
    """Minimize ``l/2 + penalty`` from ``init`` (zeros by default).

    Non-convergence within ``cfg.max_iter`` is reported through
    ``converged=False``; the best iterate seen is returned either way.
    """
    prep = prepared if prepared is not None else Prepared(data)
    init = _validate_init(init, data.p)
    return _run(prep, pen, cfg, init)


def fit_path(data: Dataset, pens, cfg: SolverConfig = SolverConfig(), *,
             prepared: Prepared | None = None):
    """Fit a sequence of configurations, each warm-started from the last success."""
    pens = list(pens)
    if not pens:
        raise ContractError("penalty path is empty")
    if len({p.variant for p in pens}) > 1:
        raise ContractError("all configurations on a path must share the variant")
    prep = prepared if prepared is not None else Prepared(data)
    out = []
    warm = None
    for pen in pens:
        try:
            res = fit(data, pen, cfg, warm, prepared=prep)
        except (ContractError, ArithmeticError) as exc:
            out.append(FitFailure(str(exc)))
            continue
        warm = res.params
        out.append(res)
    return out


def restate(res: FitResult, params: MediationParams, pen: PenaltyConfig,
            cfg: SolverConfig, data: Dataset) -> FitResult:
    """Re-evaluate a fit at ``params`` on ``data``, keeping its diagnostics.

    Used to express a fit from a rescaled or decoupled problem in other
    units; objective, loglik, BIC and supports are recomputed.
    """
    if params.p != data.p:
        raise ContractError(f"params have {params.p} mediators, data has {data.p}")
    return _result(params, pen, cfg, data, res.iterations, res.converged)


def with_alpha(res: FitResult, alpha, pen: PenaltyConfig, cfg: SolverConfig,
               data: Dataset) -> FitResult:
    """Same (beta, gamma) fit as ``res`` with a different, decoupled alpha.

    Only meaningful for the plain LASSO, where the alpha block does not
    interact with the rest of the criterion.
    """
    if pen.pair_kappa > 0:
        raise ContractError("alpha is coupled to beta under the pathway penalty")
    params = MediationParams(alpha, res.params.beta, res.params.gamma)
    return restate(res, params, pen, cfg, data)


def quiet(cfg: SolverConfig) -> SolverConfig:
    return replace(cfg, record_history=False)
