"""Pietsch-factorization upper bounds for 2-summing norms on l^inf domains.

For A: l^inf_M -> l^inf_R with rows a_r and any probability vector mu on the
M coordinates,

    ||A x||_inf^2 <= max_r sum_m a_rm^2 / mu_m * sum_m mu_m x_m^2,

and summing over a witness gives pi_2(A) <= f(mu) := max_r (sum_m a_rm^2 / mu_m)^(1/2).
Every mu is therefore a certificate. The optimum equals pi_2(A), and by
minimax it also equals max over probability vectors lam on the rows of
sum_m (sum_r lam_r a_rm^2)^(1/2), whose maximizer gives mu_m proportional to
(sum_r lam_r a_rm^2)^(1/2). Mirror ascent on lam produces a starting mu,
which SLSQP then polishes in epigraph form. Whatever the solvers return,
the reported upper is f evaluated at a normalized mu, so it stays valid.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

_ITERATIONS = 400
# SLSQP is dense; larger problems keep the mirror-ascent certificate
_POLISH_MAX_VARS = 64


class PietschCertificate(NamedTuple):
    upper: float
    mu: np.ndarray
    dual_lower: float


def pietsch_value(rows: np.ndarray, mu: np.ndarray) -> float:
    """f(mu) = max_r (sum_m a_rm^2 / mu_m)^(1/2); columns with mu_m = 0 must vanish."""
    a2 = np.asarray(rows, dtype=float) ** 2
    used = a2.any(axis=0)
    if np.any(mu[used] <= 0):
        return float("inf")
    ratio = np.zeros_like(a2)
    ratio[:, used] = a2[:, used] / mu[used]
    return float(np.sqrt(ratio.sum(axis=1).max()))


def pietsch_upper(rows, iterations: int = _ITERATIONS) -> PietschCertificate:
    """Best Pietsch certificate found for the operator with the given rows."""
    a2 = np.atleast_2d(np.asarray(rows, dtype=float)) ** 2
    if not a2.any():
        return PietschCertificate(0.0, np.full(a2.shape[1], 1.0 / a2.shape[1]), 0.0)
    a2 = a2[a2.any(axis=1)]
    R = a2.shape[0]
    lam = np.full(R, 1.0 / R)
    best = (np.inf, None)
    dual = 0.0
    for it in range(iterations):
        c = np.sqrt(lam @ a2)  # (M,)
        total = c.sum()
        dual = max(dual, total)
        mu = c / total
        val = pietsch_value(a2 ** 0.5, mu)
        if val < best[0]:
            best = (val, mu)
        # gradient of (sum_m c_m)^2 in lam is total * sum_m a2 / c_m
        safe = np.where(c > 0, c, np.inf)
        g = (a2 / safe).sum(axis=1)
        step = 1.0 / np.sqrt(it + 1.0)
        lam = lam * np.exp(step * (g / g.max() - 1.0))
        lam /= lam.sum()
        if best[0] <= dual * (1 + 1e-12):
            return PietschCertificate(float(best[0]), best[1], float(dual))
    mu = _polish(a2, best[1]) if a2.any(axis=0).sum() <= _POLISH_MAX_VARS else None
    if mu is not None:
        val = pietsch_value(a2 ** 0.5, mu)
        if val < best[0]:
            best = (val, mu)
    return PietschCertificate(float(best[0]), best[1], float(dual))


def _polish(a2: np.ndarray, mu0: np.ndarray):
    used = a2.any(axis=0)
    b = a2[:, used]
    m = b.shape[1]
    x0 = np.append(mu0[used], np.max(b @ (1.0 / mu0[used])))
    cons = [
        {"type": "eq", "fun": lambda x: x[:m].sum() - 1.0,
         "jac": lambda x: np.append(np.ones(m), 0.0)},
        {"type": "ineq", "fun": lambda x: x[m] - b @ (1.0 / x[:m]),
         "jac": lambda x: np.hstack([b / x[:m] ** 2, np.ones((b.shape[0], 1))])},
    ]
    res = minimize(lambda x: x[m], x0, jac=lambda x: np.append(np.zeros(m), 1.0),
                   bounds=[(1e-12, 1.0)] * m + [(0, None)], constraints=cons,
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 500})
    if not np.all(np.isfinite(res.x)):
        return None
    mu = np.zeros(a2.shape[1])
    mu[used] = np.maximum(res.x[:m], 1e-300)
    return mu / mu.sum()
