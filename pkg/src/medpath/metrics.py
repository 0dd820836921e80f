"""Support recovery and estimation accuracy for indirect effects."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .model import ContractError, MediationParams

CLASSIFICATION = ("tpr", "tnr", "tdr", "f1", "youden")
ACCURACY = ("mse_alpha", "mse_beta", "mse_ie", "rb_ie", "rb_de")


@dataclass(frozen=True)
class MetricsReport:
    """Either half may be absent; ``rb_*`` is ``None`` when the true total is 0."""

    tpr: float | None = None
    tnr: float | None = None
    tdr: float | None = None
    f1: float | None = None
    youden: float | None = None
    mse_alpha: float | None = None
    mse_beta: float | None = None
    mse_ie: float | None = None
    rb_ie: float | None = None
    rb_de: float | None = None
    confusion: tuple | None = None   # (tp, fp, tn, fn)

    def merge(self, other: "MetricsReport") -> "MetricsReport":
        """Fill this report's empty fields from ``other``."""
        vals = {f.name: getattr(other, f.name) for f in fields(self)
                if getattr(self, f.name) is None}
        return replace(self, **vals)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if d["confusion"] is not None:
            d["confusion"] = list(d["confusion"])
        return d

    def to_row(self) -> dict:
        """Flat mapping for CSV output; absent values become empty strings."""
        d = self.to_dict()
        conf = d.pop("confusion") or ["", "", "", ""]
        d.update(zip(("tp", "fp", "tn", "fn"), conf))
        return {k: "" if v is None else v for k, v in d.items()}


def support_of(v, tol: float = 1e-8) -> np.ndarray:
    if not tol > 0:
        raise ContractError("tol must be positive")
    return np.abs(np.asarray(v, dtype=float)) > tol


def ie_support(params: MediationParams, tol: float = 1e-8) -> np.ndarray:
    return support_of(params.alpha, tol) & support_of(params.beta, tol)


def recovery_metrics(est_support, true_support) -> MetricsReport:
    est = np.asarray(est_support, dtype=bool)
    true = np.asarray(true_support, dtype=bool)
    if est.shape != true.shape:
        raise ContractError(f"support lengths differ: {est.size} vs {true.size}")
    tp = int(np.sum(est & true))
    fp = int(np.sum(est & ~true))
    tn = int(np.sum(~est & ~true))
    fn = int(np.sum(~est & true))
    tpr = tp / (tp + fn) if tp + fn else 1.0
    tnr = tn / (tn + fp) if tn + fp else 1.0
    tdr = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * tpr * tdr / (tpr + tdr) if tpr + tdr > 0 else 0.0
    return MetricsReport(tpr=tpr, tnr=tnr, tdr=tdr, f1=f1, youden=tpr + tnr - 1.0,
                         confusion=(tp, fp, tn, fn))


def relative_bias(estimate: float, true: float) -> float | None:
    """``(estimate - true) / true``; ``None`` when the true value is 0."""
    if true == 0:
        return None
    return (estimate - true) / true


def estimation_metrics(est: MediationParams, truth: MediationParams) -> MetricsReport:
    if est.p != truth.p:
        raise ContractError(f"parameter lengths differ: {est.p} vs {truth.p}")
    ie_hat = est.alpha * est.beta
    ie = truth.alpha * truth.beta
    return MetricsReport(
        mse_alpha=float(np.mean((est.alpha - truth.alpha) ** 2)),
        mse_beta=float(np.mean((est.beta - truth.beta) ** 2)),
        mse_ie=float(np.mean((ie_hat - ie) ** 2)),
        rb_ie=relative_bias(float(ie_hat.sum()), float(ie.sum())),
        rb_de=relative_bias(est.gamma, truth.gamma))


def evaluate(est: MediationParams, truth: MediationParams, tol: float = 1e-8) -> MetricsReport:
    """Both halves: IE-support recovery and estimation accuracy."""
    rec = recovery_metrics(ie_support(est, tol), ie_support(truth, tol))
    return rec.merge(estimation_metrics(est, truth))


def mean_report(reports) -> MetricsReport:
    """Field-wise arithmetic mean; a field absent anywhere stays absent.

    The confusion counts are dropped since their mean is not a count.
    """
    reports = list(reports)
    if not reports:
        raise ContractError("no reports to average")
    out = {}
    for name in CLASSIFICATION + ACCURACY:
        vals = [getattr(r, name) for r in reports]
        out[name] = None if any(v is None for v in vals) else float(np.mean(vals))
    return MetricsReport(**out)
