"""Exact Rademacher averages, R-bound witnesses and the R-bound search."""

from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .pietsch import pietsch_upper
from .search import Objective, SearchConfig, WitnessSearch
from .spaces import (
    INF,
    BoundEstimate,
    BudgetError,
    ContractError,
    DegenerateWitnessError,
    OperatorFamily,
    SeqSpace,
    Witness,
    as_vectors,
    disjoint_supports,
    lp_norm,
    norming_vector,
    operator_norm,
)

ENUMERATION_CAP = 24
_BLOCK = 1 << 16
_BATCH_ENUM_CAP = 16


def sign_block(k: int, start: int, stop: int) -> np.ndarray:
    """Sign patterns start..stop-1 over k slots, bit j of the index flips slot j."""
    idx = np.arange(start, stop, dtype=np.int64)
    return 1.0 - 2.0 * ((idx[:, None] >> np.arange(k, dtype=np.int64)) & 1)


def rademacher_moment(space: SeqSpace, vs, q: float = 2.0, cap: int = ENUMERATION_CAP) -> float:
    """(E ||sum_n r_n v_n||^q)^(1/q), computed by enumerating every sign pattern.

    Patterns come in +/- pairs of equal norm, so only those with r_1 = +1 are
    summed. Vectors with pairwise disjoint supports need no enumeration: every
    pattern then has the same norm.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    V = as_vectors(space, vs)
    k = V.shape[0]
    if disjoint_supports(V):
        return float(lp_norm(np.abs(V).sum(axis=0), space.p))
    if k > cap:
        raise BudgetError(
            f"{k} vectors need 2^{k} sign patterns, above the cap of 2^{cap}; use Monte Carlo sampling"
        )
    n_pat = 1 << (k - 1)
    total = 0.0
    for start in range(0, n_pat, _BLOCK):
        signs = sign_block(k - 1, start, min(n_pat, start + _BLOCK))
        sums = V[0] + signs @ V[1:]
        total += float((lp_norm(sums, space.p) ** q).sum())
    return (total / n_pat) ** (1.0 / q)


def batch_rademacher_moment(X: np.ndarray, p, q: float = 2.0) -> np.ndarray:
    """Second (or q-th) Rademacher moment for a batch X of shape (B, k, d).

    Rows with k above the batch cap are only handled when their supports are
    disjoint; other such rows come back as NaN.
    """
    B, k, d = X.shape
    if k <= _BATCH_ENUM_CAP:
        signs = np.hstack([np.ones((1 << (k - 1), 1)), sign_block(k - 1, 0, 1 << (k - 1))])
        norms = lp_norm(np.matmul(signs, X), p)  # (B, P)
        return np.mean(norms**q, axis=1) ** (1.0 / q)
    out = np.full(B, np.nan)
    for b in range(B):
        if disjoint_supports(X[b]):
            out[b] = lp_norm(np.abs(X[b]).sum(axis=0), p)
    return out


def r_ratio(family: OperatorFamily, w: Witness) -> float:
    """Witness ratio (E||sum r_n T_n x_n||^2)^(1/2) / (E||sum r_n x_n||^2)^(1/2)."""
    w.validate(family)
    den = rademacher_moment(family.domain, w.vectors)
    images = np.einsum("kcd,kd->kc", family.members[list(w.op_indices)], w.vectors)
    if family.codomain.dim == 1:
        # orthogonality of the r_n
        num = float(np.sqrt(np.sum(images**2)))
    else:
        num = rademacher_moment(family.codomain, images) if images.any() else 0.0
    return _safe_ratio(num, den)


def _safe_ratio(num: float, den: float) -> float:
    if den < 1e-14:
        if num < 1e-14:
            return 0.0
        raise DegenerateWitnessError("witness denominator vanishes")
    return num / den


def diag_c0_rbound(a) -> float:
    """R-bound of the functionals x -> a_n x_n on c_0: the l^2 norm of a."""
    a = np.asarray(a, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficients must be finite")
    return float(np.sqrt(np.sum(a * a)))


# -- analytic uppers ------------------------------------------------------------


def member_norms(family: OperatorFamily) -> Optional[np.ndarray]:
    norms = [operator_norm(m, family.domain, family.codomain) for m in family.members]
    if any(n is None for n in norms):
        return None
    return np.array(norms)


def randomized_uppers(family: OperatorFamily) -> List[Tuple[float, str]]:
    """Registered upper bounds valid for both the R-bound and the gamma-bound.

    * zero family: 0;
    * a singleton {T}: ||T|| (linearity, so exact);
    * scalar-valued members: (sum_n ||T_n||^2)^(1/2) over distinct members,
      by orthogonality and contraction (exact for the diagonal c_0 family);
    * any finite family: sum_n ||T_n|| over distinct members;
    * scalar-valued members on l^inf: pi_2 of the stacked operator, through a
      Pietsch certificate (the weak l^2 norm of the x_n is at most their
      Rademacher or Gaussian average).
    """
    fam = family.distinct()
    if not fam.members.any():
        return [(0.0, "zero-family")]
    norms = member_norms(fam)
    if norms is None:
        return []
    out = []
    if len(fam) == 1:
        out.append((float(norms[0]), "singleton-norm"))
    if fam.codomain.dim == 1:
        out.append((float(np.sqrt(np.sum(norms**2))), "functional-l2"))
    out.append((float(np.sum(norms)), "triangle"))
    if fam.codomain.dim == 1 and fam.domain.p is INF:
        out.append((pietsch_upper(fam.members[:, 0, :]).upper, "pietsch"))
    return out


def best_upper(candidates: Sequence[Tuple[float, str]]) -> Tuple[float, str]:
    """Smallest candidate; near-ties (1e-9 relative) go to the earlier, closed-form entry."""
    if not candidates:
        return math.inf, "none"
    low = min(v for v, _ in candidates)
    for v, tag in candidates:
        if v <= low * (1 + 1e-9) + 1e-15:
            return v, tag
    return min(candidates, key=lambda c: c[0])


# -- objectives and canonical witnesses --------------------------------------------


class RademacherObjective(Objective):
    """R-bound witness ratio for an operator family."""

    def __init__(self, family: OperatorFamily):
        self.T = np.asarray(family.members)
        self.n_ops = len(family)
        self.dim = family.domain.dim
        self.pd = family.domain.p
        self.pc = family.codomain.p
        self.separable = family.codomain.dim == 1
        if self.separable:
            self.rows = self.T[:, 0, :]

    def contrib(self, X):
        return (X @ self.rows.T) ** 2

    def parts(self, X, A):
        if self.separable:
            C = np.take_along_axis(self.contrib(X), A[..., None], axis=2)[..., 0]
            num = np.sqrt(C.sum(axis=1))
        else:
            Y = np.einsum("bkcd,bkd->bkc", self.T[A], X)
            num = batch_rademacher_moment(Y, self.pc)
        return num, batch_rademacher_moment(X, self.pd)


class CotypeObjective(Objective):
    """(sum_i ||A x_i||^2)^(1/2) over the Rademacher average of the x_i."""

    def __init__(self, family: OperatorFamily):
        if len(family) != 1:
            raise ContractError("cotype constants are defined for a single operator")
        self.M = np.asarray(family.members[0])
        self.dim = family.domain.dim
        self.pd = family.domain.p
        self.pc = family.codomain.p

    def contrib(self, X):
        return (lp_norm(X @ self.M.T, self.pc) ** 2)[..., None]

    def parts(self, X, A):
        return np.sqrt(self.contrib(X)[..., 0].sum(axis=1)), batch_rademacher_moment(X, self.pd)


def canonical_witnesses(family: OperatorFamily) -> List[Tuple[List[int], np.ndarray]]:
    """Standard choices: each operator with its best basis vector, and with a norming vector."""
    N, d = len(family), family.domain.dim
    T = family.members
    out = []
    colnorms = lp_norm(T, family.codomain.p, axis=1)  # (N, d)
    best_col = np.argmax(colnorms, axis=1)
    out.append((list(range(N)), np.eye(d)[best_col]))
    norming = [norming_vector(m, family.domain, family.codomain) for m in T]
    if all(v is not None for v in norming):
        out.append((list(range(N)), np.array(norming)))
        out.extend(([n], v[None]) for n, v in enumerate(norming))
    return out


def single_canonical(family: OperatorFamily) -> List[Tuple[List[int], np.ndarray]]:
    """Witnesses for one operator: all basis vectors, and a norming vector."""
    d = family.domain.dim
    out = [([0] * d, np.eye(d))]
    v = norming_vector(family.members[0], family.domain, family.codomain)
    if v is not None:
        out.append(([0], v[None]))
    return out


def estimate_from_search(res, cfg: SearchConfig, evaluate, upper: Tuple[float, str],
                         extra_meta: Optional[dict] = None) -> BoundEstimate:
    """Package a search result, re-evaluating the certificate on the public path."""
    cert = Witness(tuple(int(i) for i in res.ops), res.vectors)
    lower = evaluate(cert) if res.value > 0 else 0.0
    up, tag = upper
    meta = {
        "seed": cfg.seed,
        "search": cfg.to_dict(),
        "evaluations": res.evaluations,
        "search_value": res.value,
        "distinct_lower": res.distinct_value,
    }
    if extra_meta:
        meta.update(extra_meta)
    # guard the bracket against last-digit disagreement between evaluation paths
    if math.isfinite(up) and up < lower <= up * (1 + 1e-9) + 1e-12:
        lower = up
    return BoundEstimate(lower=lower, upper=up, certificate=cert, upper_source=tag,
                         meta=meta, degenerate=lower == 0.0)


def r_bound_search(family: OperatorFamily, cfg: Optional[SearchConfig] = None) -> BoundEstimate:
    """Bracket the R-bound of ``family``: searched witness below, registered formula above."""
    cfg = cfg or SearchConfig()
    upper = best_upper(randomized_uppers(family))
    search = WitnessSearch(RademacherObjective(family), cfg, upper=upper[0])
    res = search.run(canonical_witnesses(family))
    return estimate_from_search(res, cfg, lambda w: r_ratio(family, w), upper)


def cotype2_ratio(family: OperatorFamily, w: Witness) -> float:
    """(sum ||A x_n||^2)^(1/2) / (E||sum r_n x_n||^2)^(1/2) for a single operator A."""
    if len(family) != 1:
        raise ContractError("cotype constants are defined for a single operator")
    w.validate(family)
    images = w.vectors @ family.members[0].T
    num = float(np.sqrt(np.sum(lp_norm(images, family.codomain.p) ** 2)))
    return _safe_ratio(num, rademacher_moment(family.domain, w.vectors))


def cotype2_uppers(family: OperatorFamily) -> List[Tuple[float, str]]:
    """Registered uppers for C_2(A), also valid for the Gaussian cotype constant.

    Scalar or Hilbert codomain: C_2(A) = ||A|| (orthogonality). l^inf codomain:
    C_2(A) is at most the R-bound of the row functionals. l^inf domain with
    scalar or l^inf codomain: C_2(A) <= pi_2(A), bounded by a Pietsch certificate.
    """
    M = family.members[0]
    if not M.any():
        return [(0.0, "zero-family")]
    out = []
    if family.codomain.dim == 1 or family.codomain.p == 2.0:
        nrm = operator_norm(M, family.domain, family.codomain)
        if nrm is not None:
            out.append((nrm, "hilbert-codomain"))
    if family.codomain.p is INF:
        rows = family.unstacked()
        out.extend((v, "rows:" + tag) for v, tag in randomized_uppers(rows))
    if family.domain.p is INF and (family.codomain.dim == 1 or family.codomain.p is INF):
        out.append((pietsch_upper(M).upper, "pietsch"))
    return out


def cotype2_search(family: OperatorFamily, cfg: Optional[SearchConfig] = None) -> BoundEstimate:
    """Bracket the Rademacher cotype-2 constant C_2(A) of a single-member family."""
    if len(family) != 1:
        raise ContractError("cotype2_search needs a single-member family")
    cfg = cfg or SearchConfig()
    upper = best_upper(cotype2_uppers(family))
    search = WitnessSearch(CotypeObjective(family), cfg, upper=upper[0])
    res = search.run(single_canonical(family))
    return estimate_from_search(res, cfg, lambda w: cotype2_ratio(family, w), upper)
