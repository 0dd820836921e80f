"""Independent reference implementations used by the tests.

Nothing here imports the solver or the proximal maps; the oracles only
share the data containers with the package.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def loglik_loops(alpha, beta, gamma, x, m, y):
    """Residual criterion by explicit element-wise loops."""
    n, p = m.shape
    total = 0.0
    for i in range(n):
        for j in range(p):
            total += (m[i, j] - x[i] * alpha[j]) ** 2
        fitted = x[i] * gamma
        for j in range(p):
            fitted += m[i, j] * beta[j]
        total += (y[i] - fitted) ** 2
    return total


def pathway_objective(theta, x, m, y, la, lb, lg, kappa, nu):
    """``l/2 + penalty`` with theta laid out as (alpha, gamma, beta)."""
    p = m.shape[1]
    a, g, b = theta[:p], theta[p], theta[p + 1:]
    rm = m - np.outer(x, a)
    ry = y - x * g - m @ b
    val = 0.5 * (np.sum(rm ** 2) + ry @ ry)
    val += la * np.abs(a).sum() + lb * np.abs(b).sum() + lg * abs(g)
    val += kappa * np.sum(np.abs(a * b) + nu * (a * a + b * b))
    return float(val)


class Quadratic:
    """The smooth part ``0.5 t'Ht - g't`` of the criterion, plus the L1 weights.

    Layout (alpha_1..alpha_p, gamma, beta_1..beta_p).
    """

    def __init__(self, x, m, y, la, lb, lg, kappa, nu):
        n, p = m.shape
        d = 2 * p + 1
        H = np.zeros((d, d))
        g = np.zeros(d)
        H[:p, :p] = np.eye(p) * (x @ x)
        g[:p] = m.T @ x
        A = np.column_stack([x, m])
        H[p:, p:] = A.T @ A
        g[p:] = A.T @ y
        if kappa:
            H[:p, :p] += 2 * kappa * nu * np.eye(p)
            H[p + 1:, p + 1:] += 2 * kappa * nu * np.eye(p)
        self.H, self.g, self.p, self.kappa = H, g, p, kappa
        self.w = np.r_[np.full(p, la), lg, np.full(p, lb)]

    def partner(self, j):
        p = self.p
        if j < p:
            return j + p + 1
        if j > p:
            return j - p - 1
        return None

    def threshold(self, theta, j):
        k = self.partner(j)
        extra = 0.0 if k is None or not self.kappa else self.kappa * abs(theta[k])
        return self.w[j] + extra


def coordinate_descent(q: Quadratic, iters=200000, tol=1e-15, theta0=None):
    """Cyclic exact coordinate minimization."""
    H, g = q.H, q.g
    d = g.size
    theta = np.zeros(d) if theta0 is None else theta0.copy()
    grad = H @ theta - g
    for _ in range(iters):
        biggest = 0.0
        for j in range(d):
            hjj = H[j, j]
            z = hjj * theta[j] - grad[j]
            t = q.threshold(theta, j)
            new = math.copysign(max(abs(z) - t, 0.0), z) / hjj
            delta = new - theta[j]
            if delta:
                grad += H[:, j] * delta
                theta[j] = new
                biggest = max(biggest, abs(delta))
        if biggest < tol:
            break
    return theta


def kkt_residual(q: Quadratic, theta) -> float:
    """Largest violation of the coordinate-wise optimality conditions.

    Coordinate-wise conditions are exact here because the only coupling
    term is ``|alpha_i beta_i|``, which is smooth in one argument whenever
    the other is nonzero and differentiable at the origin.
    """
    grad = q.H @ theta - q.g
    worst = 0.0
    for j in range(theta.size):
        t = q.threshold(theta, j)
        if theta[j] != 0:
            v = abs(grad[j] + t * np.sign(theta[j]))
        else:
            v = max(0.0, abs(grad[j]) - t)
        worst = max(worst, v)
    return worst


def polish(q: Quadratic, theta, zero_tol=1e-9):
    """Exact minimizer on the face picked out by the signs of ``theta``.

    Returns ``None`` if the face solution is sign-inconsistent or fails the
    optimality check.
    """
    s = np.where(np.abs(theta) > zero_tol, np.sign(theta), 0.0)
    act = np.flatnonzero(s)
    out = np.zeros_like(theta)
    if act.size:
        H = q.H[np.ix_(act, act)].copy()
        rhs = q.g[act] - q.w[act] * s[act]
        pos = {j: i for i, j in enumerate(act)}
        for j in act:
            k = q.partner(j)
            if k is not None and k in pos and q.kappa:
                # kappa |a b| = kappa s_a s_b a b on the face
                H[pos[j], pos[k]] += q.kappa * s[j] * s[k]
        try:
            sol = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            return None
        if np.any(sol * s[act] <= 0):
            return None
        out[act] = sol
    if kkt_residual(q, out) > 1e-8:
        return None
    return out


def reference_minimum(data, la, lb, lg, kappa=0.0, nu=2.0):
    """(theta, objective) by coordinate descent followed by face polishing."""
    q = Quadratic(data.x, data.m, data.y, la, lb, lg, kappa, nu)
    theta = coordinate_descent(q)
    pol = polish(q, theta)
    if pol is not None:
        theta = pol
    f = pathway_objective(theta, data.x, data.m, data.y, la, lb, lg, kappa, nu)
    return theta, f


# -- proximal oracle ---------------------------------------------------------

def pair_objective(x, y, a, b, step, kappa, nu, la, lb):
    return (((x - a) ** 2 + (y - b) ** 2) / (2 * step)
            + kappa * (np.abs(x * y) + nu * (x * x + y * y)) + la * np.abs(x) + lb * np.abs(y))


def prox_pair_by_grid(a, b, step, kappa, nu, la, lb, coarse=0.05, final=1e-10):
    """Dense grid over a box holding the minimizer, then repeated zooming."""
    r = 2 * max(abs(a), abs(b)) + 1
    xs = np.arange(-r, r + coarse / 2, coarse)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    F = pair_objective(X, Y, a, b, step, kappa, nu, la, lb)
    i, j = np.unravel_index(np.argmin(F), F.shape)
    cx, cy, h = xs[i], xs[j], coarse
    # include the axes explicitly; the minimizer often sits exactly on one
    while h > final:
        offs = np.linspace(-2 * h, 2 * h, 41)
        gx = np.r_[cx + offs, 0.0]
        gy = np.r_[cy + offs, 0.0]
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        F = pair_objective(X, Y, a, b, step, kappa, nu, la, lb)
        i, j = np.unravel_index(np.argmin(F), F.shape)
        cx, cy, h = gx[i], gy[j], h / 10
    return float(cx), float(cy)


def brute_force_top(m, y, d):
    """Top-d mediators by |Pearson correlation| computed one column at a time."""
    scores = []
    for j in range(m.shape[1]):
        c = np.corrcoef(m[:, j], y)[0, 1]
        scores.append((-abs(c), j))
    return [j for _, j in sorted(scores)[:d]]


def enumerate_faces(p):
    """All sign patterns of length p; used by tiny exhaustive checks."""
    return itertools.product((-1, 0, 1), repeat=p)
