"""Verification suites and the gap scan behind the command-line interface.

Each suite returns a list of report rows. A row always carries ``case``,
``lower``, ``upper``, ``ci_halfwidth``, ``pass``, ``elapsed_ms``, the
``invariant`` it checks and the ``rule`` that turns the numbers into the pass
flag; ``row_passes`` recomputes that flag from the row alone.

Rules:

* ``le``: lower <= upper + ci_halfwidth;
* ``closed``: |upper - lower| <= tol;
* ``rel``: upper - lower <= tol * upper (lower <= upper by construction);
* ``bracket``: ``le``, and reference <= lower + 2 ci_halfwidth;
* ``duality``: each lower at most the other side's upper, and the lowers
  within ``tol`` relative of each other.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import oracles
from .ell2 import KG, DUALITY_RTOL, ell2_bound_search, ell2_duality_check, ell2_product_check
from .gaussian import (
    McConfig,
    coord_gamma_bracket,
    expsup_check,
    gamma_ratio_mc,
    gap_ratio_floor,
    gaussian_moment_mc,
    komatsu_lower_tail,
    sudakov_check,
)
from .rademacher import cotype2_search, diag_c0_rbound, r_bound_search, rademacher_moment
from .search import SearchConfig
from .spaces import (
    INF,
    DomainError,
    SeqSpace,
    Witness,
    coordinate_family,
    diagonal_c0_family,
    embedding_family,
    make_family,
    operator_norm,
    square_function_norm,
)
from .summing import pi2_search

_ABS_TOL = 1e-12
IDENTITY_RTOL = 0.02


@dataclass
class SuiteOptions:
    seed: int = 42
    samples: int = 100_000
    confidence: float = 0.99
    budget: int = 64
    cases: Optional[int] = None
    n: Optional[Sequence[int]] = None
    a: Optional[List[Sequence[float]]] = None
    timing: bool = True

    @property
    def search(self) -> SearchConfig:
        return SearchConfig(restarts=self.budget, seed=self.seed)

    @property
    def mc(self) -> McConfig:
        return McConfig(samples=self.samples, seed=self.seed, level=self.confidence)

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(salt,)))

    def count(self, default: int) -> int:
        return default if self.cases is None else self.cases


def _num(x: float):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _val(x) -> float:
    return math.inf if x == "inf" else (-math.inf if x == "-inf" else float(x))


def row_passes(row: dict) -> bool:
    """Recompute a row's pass flag from its numeric fields."""
    lo, up, ci = _val(row["lower"]), _val(row["upper"]), _val(row["ci_halfwidth"])
    rule = row["rule"]
    slack = _ABS_TOL * max(1.0, abs(up) if math.isfinite(up) else 1.0)
    if rule == "le":
        # lower + k*ci <= upper; k = -1 by default, k = 3 demands a three-sigma margin
        return lo + row.get("ci_sigmas", -1.0) * ci <= up + slack
    if rule == "closed":
        return abs(up - lo) <= row["tol"] and lo <= up + row["tol"]
    if rule == "rel":
        return lo <= up + slack and up - lo <= row["tol"] * max(abs(up), _ABS_TOL)
    if rule == "bracket":
        return lo <= up + ci + slack and _val(row["reference"]) <= lo + 2 * ci + slack
    if rule == "duality":
        pl, pu = _val(row["primal_lower"]), _val(row["primal_upper"])
        dl, du = _val(row["dual_lower"]), _val(row["dual_upper"])
        tol = 1e-9
        ok = pl <= du * (1 + tol) + _ABS_TOL and dl <= pu * (1 + tol) + _ABS_TOL
        top = max(pl, dl)
        return ok and (top == 0 or abs(pl - dl) <= row["tol"] * top)
    raise ValueError(f"unknown rule {rule!r}")


class _Rows:
    def __init__(self, opts: SuiteOptions):
        self.opts = opts
        self.rows: List[dict] = []

    def add(self, case: str, invariant: str, rule: str, fn: Callable[[], dict]) -> None:
        t0 = time.perf_counter()
        fields = fn()
        ms = (time.perf_counter() - t0) * 1e3 if self.opts.timing else 0.0
        row = {"case": case, "invariant": invariant, "rule": rule, "ci_halfwidth": 0.0}
        row.update(fields)
        for k in ("lower", "upper", "ci_halfwidth"):
            row[k] = _num(float(row[k]))
        row["elapsed_ms"] = round(ms, 3)
        row["pass"] = row_passes(row)
        self.rows.append(row)


# -- suites ----------------------------------------------------------------------------


def suite_sudakov(opts: SuiteOptions) -> List[dict]:
    """Fixed grid of ones and normal vectors; ``cases`` adds random normal vectors.

    Random sizes are log-uniform on [2, max n] so large n stay represented
    without dominating the runtime. Rows pass only with a three-sigma margin
    below the estimate; the engine's own flag is reported as ``holds``.
    """
    out = _Rows(opts)
    ns = opts.n or (1, 2, 10, 100, 1000, 10000)
    rng = opts.rng(1)
    xs = [(f"n={n},x={label}", x) for n in ns
          for label, x in (("ones", np.ones(n)), ("normal", rng.standard_normal(n)))]
    top = max(ns)
    for i in range(opts.cases or 0):
        n = int(round(math.exp(rng.uniform(math.log(2), math.log(max(top, 2))))))
        xs.append((f"random#{i},n={n}", rng.standard_normal(n)))
    for case, x in xs:
        def run(x=x):
            chk = sudakov_check(x, opts.mc)
            return {"lower": chk.lhs, "upper": 4 * chk.rhs.mean, "ci_halfwidth": 4 * chk.rhs.half_width,
                    "ci_sigmas": 3.0, "holds": chk.holds}
        out.add(case, "gaussian-engine/sudakov", "le", run)
    return out.rows


def suite_komatsu(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    for s in np.round(np.arange(0, 101) * 0.1, 10):
        out.add(f"s={s:.1f}", "gaussian-engine/komatsu", "le",
                lambda s=s: {"lower": komatsu_lower_tail(s), "upper": oracles.gaussian_tail_integral(s)})
    return out.rows


def suite_expsup(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    ns = opts.n or [2**j for j in range(13)]
    for n in ns:
        def run(n=n):
            chk = expsup_check(n, opts.mc)
            return {"lower": chk.estimate.mean, "upper": chk.bound, "ci_halfwidth": chk.estimate.half_width,
                    "ci_sigmas": 3.0}
        out.add(f"n={n}", "gaussian-engine/expsup", "le", run)
    return out.rows


_EXPONENTS = (1.0, 1.5, 2.0, 3.0, INF)


def random_vectors(rng: np.random.Generator, max_k: int = 6, max_d: int = 5):
    k = int(rng.integers(1, max_k + 1))
    d = int(rng.integers(1, max_d + 1))
    p = _EXPONENTS[int(rng.integers(len(_EXPONENTS)))]
    return SeqSpace(d, p), rng.standard_normal((k, d))


def suite_comparison(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    rng = opts.rng(2)
    c = math.sqrt(math.pi / 2)
    for i in range(opts.count(20)):
        space, V = random_vectors(rng)

        def run_g(space=space, V=V):
            g = gaussian_moment_mc(space, V, 2.0, opts.mc)
            return {"lower": rademacher_moment(space, V), "upper": c * g.mean, "ci_halfwidth": c * g.half_width,
                    "ci_sigmas": -3.0}

        def run_s(space=space, V=V):
            return {"lower": square_function_norm(space, V), "upper": math.sqrt(2) * rademacher_moment(space, V)}

        out.add(f"rademacher-vs-gaussian#{i}", "rademacher-engine/comparison-constant", "le", run_g)
        out.add(f"square-vs-rademacher#{i}", "ell2-engine/square-function-comparison", "le", run_s)
    return out.rows


def suite_diag(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    vecs = opts.a or [(3.0, 4.0)]
    for a in vecs:
        def run(a=a):
            est = r_bound_search(diagonal_c0_family(a), opts.search)
            return {"lower": est.lower, "upper": diag_c0_rbound(a), "tol": 1e-6}
        out.add("a=" + ",".join(f"{v:g}" for v in a), "rademacher-engine/diag-exact", "closed", run)
    return out.rows


def random_functional_family(rng: np.random.Generator, max_m: int = 3, max_n: int = 3):
    M = int(rng.integers(1, max_m + 1))
    N = int(rng.integers(1, max_n + 1))
    return make_family(rng.standard_normal((N, 1, M)), INF, 1.0)


def suite_identities(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    rng = opts.rng(3)
    for i in range(opts.count(20)):
        fam = random_functional_family(rng)

        def run_r(fam=fam):
            a = r_bound_search(fam, opts.search).lower
            b = cotype2_search(fam.stacked(), opts.search).lower
            return {"lower": min(a, b), "upper": max(a, b), "tol": IDENTITY_RTOL, "r": a, "c2": b}

        def run_l(fam=fam):
            a = ell2_bound_search(fam, opts.search).lower
            b = pi2_search(fam.stacked(), opts.search).lower
            return {"lower": min(a, b), "upper": max(a, b), "tol": IDENTITY_RTOL, "ell2": a, "pi2": b}

        out.add(f"R=C2#{i}", "summing-norms/identity-r-cotype", "rel", run_r)
        out.add(f"ell2=pi2#{i}", "summing-norms/identity-ell2-pi2", "rel", run_l)
    return out.rows


def random_small_family(rng: np.random.Generator):
    N = int(rng.integers(1, 4))
    c = int(rng.integers(1, 4))
    d = int(rng.integers(1, 4))
    pd = _EXPONENTS[int(rng.integers(len(_EXPONENTS)))]
    pc = _EXPONENTS[int(rng.integers(len(_EXPONENTS)))]
    return make_family(rng.standard_normal((N, c, d)), pd, pc)


def suite_duality(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    rng = opts.rng(4)
    n_fam = opts.count(50)
    for i in range(n_fam):
        fam = random_small_family(rng)

        def run(fam=fam):
            chk = ell2_duality_check(fam, opts.search)
            p, d = chk.primal, chk.dual
            return {"lower": min(p.lower, d.lower), "upper": max(p.lower, d.lower), "tol": DUALITY_RTOL,
                    "primal_lower": p.lower, "primal_upper": _num(p.upper),
                    "dual_lower": d.lower, "dual_upper": _num(d.upper)}
        out.add(f"adjoint#{i}", "ell2-engine/duality", "duality", run)
    for i in range(4 * n_fam):
        d = 2 + i % 2
        T = make_family(rng.standard_normal((d, d)))

        def run_s(T=T):
            est = ell2_bound_search(T, opts.search)
            return {"lower": est.lower, "upper": KG * operator_norm(T.members[0], T.domain, T.codomain)}
        out.add(f"singleton#{i}", "ell2-engine/singleton-grothendieck", "le", run_s)
    return out.rows


def product_cases(rng: np.random.Generator):
    I2 = make_family(np.eye(2))
    yield "identities", I2, I2
    for j in range(3):
        yield f"random#{j}", make_family(rng.standard_normal((2, 2))), make_family(rng.standard_normal((2, 2)))
    coord, emb = coordinate_family(2), embedding_family(2)
    yield "coordinate-after-embedding", coord, emb
    yield "embedding-after-coordinate", emb, coord


def suite_product(opts: SuiteOptions) -> List[dict]:
    out = _Rows(opts)
    for name, S, T in product_cases(opts.rng(5)):
        def run(S=S, T=T):
            chk = ell2_product_check(S, T, opts.search)
            return {"lower": chk.composed.lower, "upper": chk.left.upper * chk.right.upper}
        out.add(name, "ell2-engine/product", "le", run)
    return out.rows


SUITES: Dict[str, Callable[[SuiteOptions], List[dict]]] = {
    "sudakov": suite_sudakov,
    "komatsu": suite_komatsu,
    "expsup": suite_expsup,
    "comparison-constants": suite_comparison,
    "diag-exact": suite_diag,
    "identities": suite_identities,
    "duality": suite_duality,
    "product": suite_product,
}


# -- gap scan --------------------------------------------------------------------------


def gap_rows(Ns: Sequence[int], opts: SuiteOptions) -> List[dict]:
    """Per N: R-lower, gamma-upper, gamma MC lower, bracket endpoints and the ratio floor."""
    for N in Ns:
        if N < 2:
            raise DomainError(f"gap scan needs N >= 2, got {N}")
    out = _Rows(opts)
    for N in Ns:
        def run(N=N):
            fam = coordinate_family(N)
            r = r_bound_search(fam, opts.search)
            lo, hi = coord_gamma_bracket(N)
            g = gamma_ratio_mc(fam, Witness(tuple(range(N)), np.eye(N)), opts.mc)
            return {"lower": g.low, "upper": hi, "ci_halfwidth": g.half_width, "reference": lo,
                    "r_lower": r.lower, "gamma_upper": hi, "gamma_estimate": g.mean,
                    "bracket_lower": lo, "bracket_upper": hi, "ratio_floor": gap_ratio_floor(N),
                    "r_over_gamma_upper": r.lower / hi}
        out.add(f"N={N}", "gaussian-engine/coordinate-bracket", "bracket", run)
    return out.rows


def floor_increasing(rows: List[dict]) -> bool:
    floors = [r["ratio_floor"] for r in sorted(rows, key=lambda r: int(r["case"][2:]))]
    return all(b > a for a, b in zip(floors, floors[1:]))
