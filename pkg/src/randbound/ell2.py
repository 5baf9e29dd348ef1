"""Square-function (l^2-) bounds: witness ratios, search, duality and products.

On sequence spaces the square function of x_1..x_k is the coordinatewise
vector (sum_i |x_i|^2)^(1/2). When the domain is l^inf its unit ball is a
product of Euclidean balls, one per coordinate column of the witness matrix
X (k x d); the search keeps every column inside its ball and ascends the
numerator, which is a convex function of X. Other exponents use the same
linear maximization oracle with column lengths set by l^p duality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .pietsch import pietsch_upper
from .rademacher import best_upper, canonical_witnesses, estimate_from_search, member_norms
from .search import Objective, SearchConfig, WitnessSearch, lmo_square_function_ball, norm_grad
from .spaces import (
    INF,
    BoundEstimate,
    DegenerateWitnessError,
    OperatorFamily,
    ShapeError,
    Witness,
    adjoint_family,
    lp_norm,
    square_function,
    square_function_norm,
)

# Published upper bound for the real Grothendieck constant.
KG = 1.78222

DUALITY_RTOL = 0.10


def ell2_ratio(family: OperatorFamily, w: Witness) -> float:
    """||(sum |T_n x_n|^2)^(1/2)|| / ||(sum |x_n|^2)^(1/2)|| for one witness."""
    w.validate(family)
    den = square_function_norm(family.domain, w.vectors)
    images = np.einsum("kcd,kd->kc", family.members[list(w.op_indices)], w.vectors)
    num = square_function_norm(family.codomain, images)
    if den < 1e-14:
        if num < 1e-14:
            return 0.0
        raise DegenerateWitnessError("witness square function vanishes")
    return num / den


class Ell2Objective(Objective):
    """Batched square-function ratio with a gradient and the domain-ball oracle."""

    has_oracle = True

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

    def _images(self, X, A):
        return np.einsum("bkcd,bkd->bkc", self.T[A], X)

    def parts(self, X, A):
        num = lp_norm(square_function(self._images(X, A)), self.pc)
        return num, lp_norm(square_function(X), self.pd)

    def num_grad(self, X, A):
        Y = self._images(X, A)
        s = square_function(Y)  # (B, c)
        gs = norm_grad(s, self.pc) / np.where(s > 0, s, 1.0)
        return np.einsum("bkcd,bkc->bkd", self.T[A], Y * gs[:, None, :])

    def oracle(self, G):
        return lmo_square_function_ball(G, self.pd)


# -- analytic uppers --------------------------------------------------------------


def _direct_uppers(family: OperatorFamily) -> List[Tuple[float, str]]:
    fam = family.distinct()
    if not fam.members.any():
        return [(0.0, "zero-family")]
    out = []
    norms = member_norms(fam)
    if norms is not None:
        if len(fam) == 1:
            # Krivine: every bounded operator between lattices is l^2-bounded
            out.append((KG * float(norms[0]), "grothendieck-singleton"))
        else:
            # lattice triangle inequality over the members, then Krivine per member
            out.append((KG * float(norms.sum()), "grothendieck-union"))
        dom, cod = fam.domain, fam.codomain
        concave_dom = dom.dim == 1 or (dom.p is not INF and dom.p <= 2.0)
        convex_cod = cod.dim == 1 or cod.p is INF or cod.p >= 2.0
        if concave_dom and convex_cod:
            # Minkowski in l^{q/2} (q >= 2) and its reverse (p <= 2)
            out.append((float(norms.max()), "lattice-convexity"))
    if fam.domain.p is INF and (fam.codomain.p is INF or fam.codomain.dim == 1):
        # row r: Minkowski over columns, then each column ratio is at most 1
        rowwise = np.abs(fam.members).max(axis=0).sum(axis=1).max()
        out.append((float(rowwise), "linf-rowwise"))
        # row r of the square function only sees the functionals row_r(T_n):
        # their l^2-bound is pi_2 of the operator stacking them
        pis = [pietsch_upper(fam.members[:, r, :]).upper for r in range(fam.codomain.dim)]
        out.append((max(pis), "pietsch"))
    return out


def ell2_uppers(family: OperatorFamily) -> List[Tuple[float, str]]:
    """Registered upper bounds for the l^2-bound, including those of the adjoint family.

    The adjoint family has the same l^2-bound, so its formulas count too
    (tagged ``adjoint:<name>``).
    """
    own = _direct_uppers(family)
    dual = [(v, "adjoint:" + tag) for v, tag in _direct_uppers(adjoint_family(family))]
    return own + dual


def _reported_upper(cands: List[Tuple[float, str]], singleton: bool) -> Tuple[float, str]:
    """Singletons report the Grothendieck formula; other families the smallest candidate."""
    if singleton:
        kg = [c for c in cands if c[1] in ("grothendieck-singleton", "adjoint:grothendieck-singleton")]
        zero = [c for c in cands if c[1] == "zero-family"]
        if zero:
            return zero[0]
        if kg:
            return best_upper(kg)
    return best_upper(cands)


def ell2_bound_search(family: OperatorFamily, cfg: Optional[SearchConfig] = None,
                      sharp: bool = False) -> BoundEstimate:
    """Bracket the l^2-bound of ``family``.

    The lower end is the best witness found (distinct operators first). The
    upper end is K_G ||T|| for singletons and the smallest registered formula
    otherwise; ``sharp=True`` uses the smallest formula for singletons too.
    Every candidate is listed in ``meta["upper_candidates"]``. K_G times the
    best distinct-only ratio is reported as ``meta["kg_distinct_bound"]``;
    it bounds the constant only when the distinct search is exact.
    """
    cfg = cfg or SearchConfig()
    cands = ell2_uppers(family)
    upper = _reported_upper(cands, len(family.distinct()) == 1 and not sharp)
    search = WitnessSearch(Ell2Objective(family), cfg, upper=upper[0])
    res = search.run(canonical_witnesses(family))
    meta = {
        "kg_distinct_bound": KG * res.distinct_value,
        "upper_candidates": {tag: v for v, tag in sorted(cands, key=lambda c: c[1])},
    }
    return estimate_from_search(res, cfg, lambda w: ell2_ratio(family, w), upper, meta)


# -- duality and products --------------------------------------------------------------


class DualityCheck(NamedTuple):
    primal: BoundEstimate
    dual: BoundEstimate
    consistent: bool


def _below(lower: float, upper: float) -> bool:
    return lower <= upper * (1 + 1e-9) + 1e-12


def ell2_duality_check(family: OperatorFamily, cfg: Optional[SearchConfig] = None,
                       rtol: float = DUALITY_RTOL) -> DualityCheck:
    """Search the family and its adjoint; the two must bracket each other consistently."""
    cfg = cfg or SearchConfig()
    primal = ell2_bound_search(family, cfg)
    dual = ell2_bound_search(adjoint_family(family), cfg)
    ok = _below(primal.lower, dual.upper) and _below(dual.lower, primal.upper)
    top = max(primal.lower, dual.lower)
    if top > 0:
        ok = ok and abs(primal.lower - dual.lower) <= rtol * top
    return DualityCheck(primal, dual, bool(ok))


def compose_families(S: OperatorFamily, T: OperatorFamily) -> OperatorFamily:
    """All products S_i T_j, ordered with j varying fastest.

    One-dimensional spaces match whatever their exponent, since every l^p_1 is R.
    """
    same = S.domain.dim == T.codomain.dim and (S.domain.dim == 1 or S.domain.p == T.codomain.p)
    if not same:
        raise ShapeError(f"cannot compose: {T.codomain!r} is not {S.domain!r}")
    prods = np.einsum("icm,jmd->ijcd", S.members, T.members).reshape(-1, S.codomain.dim, T.domain.dim)
    name = f"{S.name}*{T.name}" if S.name or T.name else ""
    return OperatorFamily(T.domain, S.codomain, prods, name)


@dataclass(frozen=True)
class ProductCheck:
    composed: BoundEstimate
    left: BoundEstimate
    right: BoundEstimate
    holds: bool

    def __bool__(self) -> bool:
        return self.holds


def ell2_product_check(S: OperatorFamily, T: OperatorFamily,
                       cfg: Optional[SearchConfig] = None) -> ProductCheck:
    """The composed family's lower bound must not exceed the product of the uppers."""
    cfg = cfg or SearchConfig()
    ST = compose_families(S, T)
    est = ell2_bound_search(ST, cfg)
    s_est = ell2_bound_search(S, cfg)
    t_est = ell2_bound_search(T, cfg)
    bound = s_est.upper * t_est.upper
    holds = True if math.isinf(bound) or math.isnan(bound) else _below(est.lower, bound)
    return ProductCheck(est, s_est, t_est, bool(holds))
