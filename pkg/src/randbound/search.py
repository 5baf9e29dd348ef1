"""Seeded witness search shared by every bound engine.

A witness is a batch entry ``(A, X)``: ``X`` holds k domain vectors (shape
(k, d)) and ``A`` the k operator indices. Engines supply an objective that
maps batches of witnesses to ratio values; this module only decides which
witnesses get evaluated.

Search phases, in order:

1. canonical witnesses supplied by the engine (standard basis choices);
2. exhaustive enumeration of multisets of dyadic-grid vectors, as long as the
   evaluation count fits ``exhaustive_budget``;
3. seeded restarts, each refined by ascent. Objectives exposing a linear
   maximization oracle for their denominator ball use fixed-point ascent
   (the numerator is a norm, hence convex, so jumping to the oracle's answer
   for the current gradient never decreases it); the rest use coordinate
   ascent over nested dyadic grids, one level at a time.

Distinct-operator assignments are searched before repeated ones and the best
distinct-only value is reported separately.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .spaces import INF, Exponent, dual_exponent, lp_norm

DEGENERATE_TOL = 1e-14
_IMPROVE_RTOL = 1e-12
_CHUNK_ENTRIES = 1 << 21
_PERM_VECTORIZE_CAP = 720


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 64
    ascent_steps: int = 20
    seed: int = 42
    grid_levels: int = 3
    max_terms: Optional[int] = None
    exhaustive_budget: int = 1 << 17

    def __post_init__(self):
        for name in ("restarts", "ascent_steps", "grid_levels", "exhaustive_budget"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_terms is not None and self.max_terms < 1:
            raise ValueError("max_terms must be positive")

    def to_dict(self) -> dict:
        return {
            "restarts": self.restarts,
            "ascent_steps": self.ascent_steps,
            "seed": self.seed,
            "grid_levels": self.grid_levels,
            "max_terms": self.max_terms,
            "exhaustive_budget": self.exhaustive_budget,
        }


def restart_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for restart ``index``; does not depend on the batch size."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def dyadic_grid(level: int) -> np.ndarray:
    """2^level + 1 equally spaced values in [-1, 1]; grids are nested in level."""
    return np.linspace(-1.0, 1.0, 2**level + 1)


def grid_vectors(d: int, level: int) -> np.ndarray:
    """Nonzero grid vectors with first nonzero entry positive."""
    g = dyadic_grid(level)
    pts = np.array(list(itertools.product(g, repeat=d)))
    nz = np.abs(pts) > 0
    has = nz.any(axis=1)
    first = np.argmax(nz, axis=1)
    lead = pts[np.arange(len(pts)), first]
    return pts[has & (lead > 0)]


def grid_vector_count(d: int, level: int) -> int:
    return ((2**level + 1) ** d - 1) // 2


# -- objectives ---------------------------------------------------------------


class Objective:
    """Batched ratio objective over witnesses.

    Subclasses set ``n_ops``, ``dim`` and implement ``parts``. A separable
    objective has numerator^2 = sum_i c(i, A_i) and implements ``contrib``.
    """

    n_ops: int = 1
    dim: int = 1
    separable: bool = True
    has_oracle: bool = False

    def parts(self, X: np.ndarray, A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contrib(self, X: np.ndarray) -> np.ndarray:
        """(B, k, N) squared numerator contributions for separable objectives."""
        raise NotImplementedError

    def num_grad(self, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def oracle(self, G: np.ndarray) -> np.ndarray:
        """Maximizer of <G, X> over the denominator's unit ball."""
        raise NotImplementedError

    # batched helpers -----------------------------------------------------

    def values(self, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        num, den = self.parts(X, A)
        out = np.zeros_like(num)
        ok = den > DEGENERATE_TOL
        out[ok] = num[ok] / den[ok]
        return out

    def best_ops(self, X: np.ndarray, distinct: bool) -> np.ndarray:
        """Optimal assignment for separable objectives."""
        C = self.contrib(X)
        B, k, N = C.shape
        if not distinct:
            return np.argmax(C, axis=2)
        if k > N:
            raise ValueError("distinct assignment needs k <= number of operators")
        n_perm = math.perm(N, k)
        if n_perm <= _PERM_VECTORIZE_CAP:
            perms = np.array(list(itertools.permutations(range(N), k)), dtype=np.intp)
            tot = C[:, np.arange(k)[None, :], perms].sum(axis=2)  # (B, P)
            return perms[np.argmax(tot, axis=1)]
        A = np.empty((B, k), dtype=np.intp)
        for b in range(B):
            rows, cols = linear_sum_assignment(C[b], maximize=True)
            A[b, rows] = cols
        return A


def _is_distinct(A: np.ndarray) -> np.ndarray:
    S = np.sort(A, axis=1)
    return ~np.any(S[:, 1:] == S[:, :-1], axis=1)


def chunked_values(obj: Objective, X: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Evaluate a large batch in memory-bounded chunks."""
    B = X.shape[0]
    per = max(1, X[0].size * 64)
    step = max(1, _CHUNK_ENTRIES // per)
    if B <= step:
        return obj.values(X, A)
    return np.concatenate([obj.values(X[s:s + step], A[s:s + step]) for s in range(0, B, step)])


def lmo_square_function_ball(G: np.ndarray, p: Exponent) -> np.ndarray:
    """argmax <G, X> over ||(sum_i |x_i|^2)^(1/2)||_p <= 1, batched over G (B, k, d).

    Column m of X is a multiple of column m of G; the column lengths solve the
    l^p / l^p' duality problem.
    """
    colnorm = np.sqrt((G * G).sum(axis=1))  # (B, d)
    safe = np.where(colnorm > 0, colnorm, 1.0)
    direction = G / safe[:, None, :]
    if p is INF:
        s = np.ones_like(colnorm)
        # a vanishing gradient column carries no information; keep a unit column anyway
        direction = np.where(colnorm[:, None, :] > 0, direction, _unit_column(G))
    elif p == 1.0:
        s = np.zeros_like(colnorm)
        s[np.arange(len(s)), np.argmax(colnorm, axis=1)] = 1.0
    else:
        q = dual_exponent(p)
        w = colnorm ** (q - 1.0)
        s = w / np.maximum(lp_norm(w, p)[:, None], 1e-300)
    return direction * s[:, None, :]


def lmo_column_l1_ball(G: np.ndarray) -> np.ndarray:
    """argmax <G, X> over max_m sum_i |x_{i,m}| <= 1."""
    B, k, d = G.shape
    idx = np.argmax(np.abs(G), axis=1)  # (B, d)
    X = np.zeros_like(G)
    bb, mm = np.meshgrid(np.arange(B), np.arange(d), indexing="ij")
    vals = G[bb, idx, mm]
    X[bb, idx, mm] = np.where(vals >= 0, 1.0, -1.0)
    return X


def _unit_column(G: np.ndarray) -> np.ndarray:
    e = np.zeros_like(G)
    e[:, 0, :] = 1.0
    return e


def norm_grad(y: np.ndarray, p: Exponent) -> np.ndarray:
    """A (sub)gradient of y -> ||y||_p along the last axis."""
    if p is INF:
        a = np.abs(y)
        idx = np.argmax(a, axis=-1)
        g = np.zeros_like(y)
        np.put_along_axis(g, idx[..., None], np.sign(np.take_along_axis(y, idx[..., None], -1)), -1)
        return g
    if p == 1.0:
        return np.sign(y)
    n = lp_norm(y, p)[..., None]
    safe = np.where(n > 0, n, 1.0)
    return np.sign(y) * (np.abs(y) / safe) ** (p - 1.0)


# -- search driver ------------------------------------------------------------


@dataclass
class SearchResult:
    value: float
    ops: np.ndarray
    vectors: np.ndarray
    distinct_value: float
    distinct_ops: np.ndarray
    distinct_vectors: np.ndarray
    evaluations: int = 0
    phases: dict = field(default_factory=dict)


class _Best:
    def __init__(self):
        self.value = -1.0
        self.ops = None
        self.vectors = None

    def offer(self, vals: np.ndarray, X: np.ndarray, A: np.ndarray) -> None:
        if len(vals) == 0:
            return
        i = int(np.argmax(vals))
        if vals[i] > self.value:
            self.value = float(vals[i])
            self.ops = np.array(A[i])
            self.vectors = np.array(X[i])


def default_terms(obj: Objective, cfg: SearchConfig, cap: int) -> int:
    if cfg.max_terms is not None:
        return cfg.max_terms
    return max(1, min(max(obj.n_ops, obj.dim), cap))


class WitnessSearch:
    """Runs the phases described in the module docstring against one objective."""

    def __init__(self, obj: Objective, cfg: SearchConfig, upper: float = math.inf,
                 terms_cap: int = 6, exhaustive_terms: int = 3):
        self.obj = obj
        self.cfg = cfg
        self.upper = upper
        self.k = default_terms(obj, cfg, terms_cap)
        self.exhaustive_terms = min(exhaustive_terms, self.k)
        self.free = _Best()
        self.dist = _Best()
        self.evaluations = 0
        self.phases = {}

    # bookkeeping ---------------------------------------------------------

    def _closed(self) -> bool:
        return math.isfinite(self.upper) and self.free.value >= self.upper * (1 - 1e-12)

    def _offer(self, X, A, distinct, phase: str) -> np.ndarray:
        """Evaluate a batch; ``distinct`` is a bool or a per-row mask of distinct assignments."""
        vals = chunked_values(self.obj, X, A)
        self.evaluations += len(vals)
        self.free.offer(vals, X, A)
        mask = np.broadcast_to(np.asarray(distinct, dtype=bool), vals.shape)
        if mask.any():
            self.dist.offer(vals[mask], X[mask], A[mask])
        if len(vals):
            self.phases[phase] = max(self.phases.get(phase, 0.0), float(vals.max()))
        return vals

    # phases ----------------------------------------------------------------

    def canonical(self, witnesses: Sequence[Tuple[Sequence[int], np.ndarray]]) -> None:
        for ops, vecs in witnesses:
            X = np.array(vecs, dtype=float)[None]
            A = np.array(ops, dtype=np.intp)[None]
            self._offer(X, A, _is_distinct(A), "canonical")
            if self.obj.separable:
                # same vectors, best operators
                A2 = self.obj.best_ops(X, False)
                self._offer(X, A2, _is_distinct(A2), "canonical")

    def exhaustive(self) -> None:
        budget = self.cfg.exhaustive_budget
        N, d = self.obj.n_ops, self.obj.dim
        for m in range(1, self.exhaustive_terms + 1):
            n_assign = 1 if self.obj.separable else N**m
            level = self._fit_level(d, m, n_assign, budget)
            if level is None:
                break
            vecs = grid_vectors(d, level)
            combos = np.array(list(itertools.combinations_with_replacement(range(len(vecs)), m)),
                              dtype=np.intp)
            X = vecs[combos]
            phase = f"exhaustive-L{level}"
            if self.obj.separable:
                self._offer(X, self.obj.best_ops(X, False), False, phase)
                if m <= N:
                    self._offer(X, self.obj.best_ops(X, True), True, phase)
            else:
                assigns = np.array(list(itertools.product(range(N), repeat=m)), dtype=np.intp)
                X = np.repeat(X, len(assigns), axis=0)
                A = np.tile(assigns, (len(combos), 1))
                self._offer(X, A, _is_distinct(A), phase)
            budget -= len(X)
            if self._closed():
                return

    def _fit_level(self, d: int, m: int, n_assign: int, budget: int) -> Optional[int]:
        best = None
        for level in range(1, self.cfg.grid_levels + 1):
            count = math.comb(grid_vector_count(d, level) + m - 1, m) * n_assign
            if count > budget:
                break
            best = level
        return best

    def seeds(self, k: int, distinct: bool, first: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
        X = np.empty((count, k, self.obj.dim))
        A = np.empty((count, k), dtype=np.intp)
        for j in range(count):
            rng = restart_rng(self.cfg.seed, 2 * (first + j) + int(distinct))
            X[j] = rng.uniform(-1.0, 1.0, size=(k, self.obj.dim))
            if distinct:
                A[j] = rng.permutation(self.obj.n_ops)[:k]
            else:
                A[j] = rng.integers(0, self.obj.n_ops, size=k)
        return X, A

    def restarts(self, extra: Sequence[Tuple[Sequence[int], np.ndarray]] = ()) -> None:
        for distinct in (True, False):
            k = min(self.k, self.obj.n_ops) if distinct else self.k
            X, A = self.seeds(k, distinct, 0, self.cfg.restarts)
            if self.obj.separable:
                A = self.obj.best_ops(X, distinct)
            X, A = self.ascend(X, A, distinct)
            self._offer(X, A, distinct, "restarts")
            if self._closed():
                return
        # canonical witnesses are refined as well; they never lose value
        for ops, vecs in extra:
            X = np.array(vecs, dtype=float)[None]
            A = np.array(ops, dtype=np.intp)[None]
            distinct = bool(_is_distinct(A)[0])
            X, A = self.ascend(X, A, distinct)
            self._offer(X, A, distinct, "restarts")

    # ascent ------------------------------------------------------------------

    def ascend(self, X, A, distinct: bool):
        if self.obj.has_oracle:
            return self._fixed_point(X, A, distinct)
        return self._grid_ascent(X, A, distinct)

    def _improve_ops(self, X, A, distinct: bool, cur: np.ndarray):
        """One sweep of per-slot operator moves (swaps in distinct mode)."""
        if self.obj.separable:
            A2 = self.obj.best_ops(X, distinct)
            return A2, self.obj.values(X, A2)
        B, k = A.shape
        N = self.obj.n_ops
        for i in range(k):
            cand = np.repeat(A[:, None, :], N, axis=1)  # (B, N, k)
            for n in range(N):
                if distinct:
                    # moving op n into slot i swaps it with its current holder
                    cand[:, n, :] = np.where(A == n, A[:, i:i + 1], A)
                cand[:, n, i] = n
            vals = self.obj.values(np.repeat(X, N, axis=0), cand.reshape(B * N, k)).reshape(B, N)
            self.evaluations += B * N
            g = np.argmax(vals, axis=1)
            top = vals[np.arange(B), g]
            better = top > cur * (1 + _IMPROVE_RTOL)
            A = np.where(better[:, None], cand[np.arange(B), g], A)
            cur = np.where(better, top, cur)
        return A, cur

    def _grid_ascent(self, X, A, distinct: bool):
        B, k, d = X.shape
        cur = self.obj.values(X, A)
        for level in range(1, self.cfg.grid_levels + 1):
            grid = dyadic_grid(level)
            G = len(grid)
            for _ in range(self.cfg.ascent_steps):
                before = cur.copy()
                for i in range(k):
                    for j in range(d):
                        cand = np.repeat(X[:, None], G, axis=1)
                        cand[:, :, i, j] = grid[None, :]
                        cand = cand.reshape(B * G, k, d)
                        if self.obj.separable:
                            Ac = self.obj.best_ops(cand, distinct)
                        else:
                            Ac = np.repeat(A, G, axis=0)
                        vals = self.obj.values(cand, Ac).reshape(B, G)
                        self.evaluations += B * G
                        g = np.argmax(vals, axis=1)
                        top = vals[np.arange(B), g]
                        better = top > cur * (1 + _IMPROVE_RTOL)
                        if better.any():
                            X = X.copy()
                            X[better, i, j] = grid[g[better]]
                            Ac = Ac.reshape(B, G, k)
                            A = np.where(better[:, None], Ac[np.arange(B), g], A)
                            cur = np.where(better, top, cur)
                A, cur = self._improve_ops(X, A, distinct, cur)
                if not np.any(cur > before * (1 + _IMPROVE_RTOL)):
                    break
        return X, A

    def _fixed_point(self, X, A, distinct: bool):
        B = X.shape[0]
        if self.obj.separable:
            A = self.obj.best_ops(X, distinct)
        cur = self.obj.values(X, A)
        active = np.ones(B, dtype=bool)
        for _ in range(self.cfg.ascent_steps * 5):
            idx = np.nonzero(active)[0]
            if len(idx) == 0:
                break
            Xa, Aa = X[idx], A[idx]
            Xn = self.obj.oracle(self.obj.num_grad(Xa, Aa))
            An = self.obj.best_ops(Xn, distinct) if self.obj.separable else Aa
            vals = self.obj.values(Xn, An)
            self.evaluations += len(idx)
            better = vals > cur[idx] * (1 + _IMPROVE_RTOL)
            upd = idx[better]
            X[upd] = Xn[better]
            A[upd] = An[better]
            cur[upd] = vals[better]
            if not self.obj.separable:
                A2, cur2 = self._improve_ops(X[idx], A[idx], distinct, cur[idx])
                moved = cur2 > cur[idx] * (1 + _IMPROVE_RTOL)
                A[idx] = A2
                cur[idx] = cur2
                better = better | moved
            active[idx[~better]] = False
        return X, A

    # driver --------------------------------------------------------------------

    def run(self, canonical: Sequence[Tuple[Sequence[int], np.ndarray]] = ()) -> SearchResult:
        self.canonical(canonical)
        if not self._closed():
            self.exhaustive()
        if not self._closed():
            self.restarts(extra=canonical)
        if self.free.ops is None:
            raise RuntimeError("search evaluated no witness")
        dist = self.dist if self.dist.ops is not None else self.free
        return SearchResult(
            value=max(self.free.value, 0.0),
            ops=self.free.ops,
            vectors=self.free.vectors,
            distinct_value=max(self.dist.value, 0.0) if self.dist.ops is not None else 0.0,
            distinct_ops=dist.ops,
            distinct_vectors=dist.vectors,
            evaluations=self.evaluations,
            phases=dict(self.phases),
        )
