"""2-summing and (2,1)-summing norms on l^inf domains, and cotype-2 constants.

On l^inf_M the weak l^q norm of x_1..x_k is the largest l^q norm of a
coordinate column of the witness matrix, so the feasible set of the summing
ratio is a product of column balls. The search ascends the (convex)
numerator (sum_n ||A x_n||^2)^(1/2) over that product; a Pietsch
certificate supplies the upper end.
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np

from .gaussian import McConfig, gamma_uppers, gaussian_moment_mc
from .pietsch import pietsch_upper
from .rademacher import best_upper, cotype2_search, estimate_from_search, single_canonical
from .search import (
    Objective,
    SearchConfig,
    WitnessSearch,
    lmo_column_l1_ball,
    lmo_square_function_ball,
    norm_grad,
)
from .spaces import (
    INF,
    BoundEstimate,
    ContractError,
    DegenerateWitnessError,
    DomainError,
    OperatorFamily,
    SeqSpace,
    Witness,
    as_vectors,
    lp_norm,
    operator_norm,
)

# cotype2_search refines the Gaussian witnesses only up to this domain dimension
_REFINE_DIM = 16


def _require_linf(space: SeqSpace) -> None:
    if not space.is_inf:
        raise ContractError(f"summing norms are only implemented on l^inf domains, got {space!r}")


def weak_lq_norm(space: SeqSpace, vs, q: float) -> float:
    """max_m (sum_n |v_{n,m}|^q)^(1/q) on an l^inf space."""
    _require_linf(space)
    if q < 1:
        raise DomainError("q must be >= 1")
    V = as_vectors(space, vs)
    return float(lp_norm(V, q, axis=0).max())


def _single(A: OperatorFamily) -> np.ndarray:
    if len(A) != 1:
        raise ContractError("summing norms are defined for a single operator")
    _require_linf(A.domain)
    return np.asarray(A.members[0])


class SummingObjective(Objective):
    """(sum_n ||A x_n||^2)^(1/2) over the weak l^q norm (q = 1 or 2) of the x_n."""

    has_oracle = True
    n_ops = 1

    def __init__(self, A: OperatorFamily, q: float):
        self.M = _single(A)
        self.dim = A.domain.dim
        self.pc = A.codomain.p
        self.q = q

    def contrib(self, X):
        return (lp_norm(X @ self.M.T, self.pc) ** 2)[..., None]

    def parts(self, X, A):
        num = np.sqrt(self.contrib(X)[..., 0].sum(axis=1))
        return num, lp_norm(X, self.q, axis=1).max(axis=1)

    def num_grad(self, X, A):
        Y = X @ self.M.T
        n = lp_norm(Y, self.pc)  # (B, k)
        total = np.sqrt((n * n).sum(axis=1))
        w = n / np.where(total > 0, total, 1.0)[:, None]
        return (norm_grad(Y, self.pc) * w[..., None]) @ self.M

    def oracle(self, G):
        if self.q == 1.0:
            return lmo_column_l1_ball(G)
        return lmo_square_function_ball(G, INF)


def summing_ratio(A: OperatorFamily, w: Witness, q: float) -> float:
    M = _single(A)
    w.validate(A)
    X = np.asarray(w.vectors)
    num = float(np.sqrt(np.sum(lp_norm(X @ M.T, A.codomain.p) ** 2)))
    den = weak_lq_norm(A.domain, X, q)
    if den < 1e-14:
        if num < 1e-14:
            return 0.0
        raise DegenerateWitnessError("weak norm of the witness vanishes")
    return num / den


def summing_uppers(A: OperatorFamily) -> List[Tuple[float, str]]:
    """Registered uppers for pi_2 (valid for pi_{2,1} too, which is never larger)."""
    M = _single(A)
    if not M.any():
        return [(0.0, "zero-family")]
    out = []
    if A.codomain.dim == 1:
        # a functional is 2-summing with norm equal to its operator norm
        out.append((operator_norm(M, A.domain, A.codomain), "functional-norm"))
    if A.codomain.dim == 1 or A.codomain.is_inf:
        out.append((pietsch_upper(M).upper, "pietsch"))
    return out


def _summing_search(A: OperatorFamily, q: float, cfg: Optional[SearchConfig]) -> BoundEstimate:
    cfg = cfg or SearchConfig()
    obj = SummingObjective(A, q)
    upper = best_upper(summing_uppers(A))
    search = WitnessSearch(obj, cfg, upper=upper[0])
    res = search.run(single_canonical(A))
    return estimate_from_search(res, cfg, lambda w: summing_ratio(A, w, q), upper)


def pi2_search(A: OperatorFamily, cfg: Optional[SearchConfig] = None) -> BoundEstimate:
    """Bracket the 2-summing norm of a single operator on an l^inf domain."""
    return _summing_search(A, 2.0, cfg)


def pi21_search(A: OperatorFamily, cfg: Optional[SearchConfig] = None) -> BoundEstimate:
    """Bracket the (2,1)-summing norm of a single operator on an l^inf domain."""
    return _summing_search(A, 1.0, cfg)


# -- Gaussian cotype ------------------------------------------------------------------


def gaussian_cotype2_uppers(A: OperatorFamily) -> List[Tuple[float, str]]:
    """Uppers for C_2^gamma(A); the row-functional rules include the coordinate lemma."""
    M = A.members[0]
    if not M.any():
        return [(0.0, "zero-family")]
    out = []
    if A.codomain.dim == 1 or A.codomain.p == 2.0:
        nrm = operator_norm(M, A.domain, A.codomain)
        if nrm is not None:
            out.append((nrm, "hilbert-codomain"))
    if A.codomain.is_inf:
        out.extend((v, "rows:" + tag) for v, tag in gamma_uppers(A.unstacked()))
    if A.domain.is_inf and (A.codomain.dim == 1 or A.codomain.is_inf):
        out.append((pietsch_upper(M).upper, "pietsch"))
    return out


def gaussian_cotype2_search(A: OperatorFamily, cfg: Optional[SearchConfig] = None,
                            mc: Optional[McConfig] = None,
                            refine: Optional[bool] = None) -> BoundEstimate:
    """Statistically certified lower bound for the Gaussian cotype-2 constant of A.

    Each candidate witness scores (sum ||A x_n||^2)^(1/2) divided by the upper
    confidence limit of its Gaussian average. Candidates are the basis and
    norming witnesses, plus the Rademacher cotype search's certificate when
    ``refine`` is set (default: domain dimension at most 16).
    """
    if len(A) != 1:
        raise ContractError("gaussian_cotype2_search needs a single-member family")
    cfg = cfg or SearchConfig()
    mc = mc or McConfig()
    M = np.asarray(A.members[0])
    upper = best_upper(gaussian_cotype2_uppers(A))
    if refine is None:
        refine = A.domain.dim <= _REFINE_DIM
    cands = [Witness(tuple(ops), v) for ops, v in single_canonical(A)]
    if refine:
        cands.append(cotype2_search(A, cfg).certificate)
    best = None
    for w in cands:
        if w.is_zero:
            continue
        X = np.asarray(w.vectors)
        num = float(np.sqrt(np.sum(lp_norm(X @ M.T, A.codomain.p) ** 2)))
        den = gaussian_moment_mc(A.domain, X, 2.0, mc)
        if den.high <= 0:
            continue
        val = num / den.high
        if best is None or val > best[0]:
            best = (val, w, num / den.mean if den.mean > 0 else 0.0, den)
    meta = {"seed": mc.seed, "samples": mc.samples, "level": mc.level}
    if best is None or best[0] == 0.0:
        w0 = cands[0]
        return BoundEstimate(0.0, upper[0], w0, upper[1], meta=meta, degenerate=True)
    val, w, point, den = best
    meta.update({"estimate": point, "denominator": den.to_dict()})
    half = max(point - val, 0.0)
    return BoundEstimate(val, upper[0], w, upper[1], ci=(half, mc.level), meta=meta)


def cotype_ratio_bracket(N: int) -> Tuple[float, float]:
    """(sqrt(log N) / 4, sqrt(2 log 2N)): the range of C_2(A) / C_2^gamma(A) for the coordinate operator."""
    if int(N) != N or N < 2:
        raise DomainError("the cotype ratio bracket needs N >= 2")
    return math.sqrt(math.log(N)) / 4.0, math.sqrt(2.0 * math.log(2.0 * N))
