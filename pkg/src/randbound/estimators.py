"""Estimator-style front end: one class per constant, scikit-learn parameter handling.

``fit`` takes an operator family (an ``OperatorFamily``, its JSON dict, or a
matrix stack) and stores the bracket in ``lower_``, ``upper_``, ``witness_``
and ``estimate_``. ``transform`` maps a list of families to an (n, 2) array of
brackets.
"""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .ell2 import ell2_bound_search
from .gaussian import McConfig, gamma_bound_search
from .rademacher import cotype2_search, r_bound_search
from .search import SearchConfig
from .spaces import BoundEstimate, OperatorFamily, check_family
from .summing import gaussian_cotype2_search, pi2_search, pi21_search

CONSTANTS = ("r", "gamma", "ell2", "pi2", "pi21", "cotype2", "cotype2gamma")


def _needs_single(fn):
    def run(family: OperatorFamily, cfg: SearchConfig, mc: McConfig) -> BoundEstimate:
        if len(family) != 1:
            family = family.stacked()
        return fn(family, cfg, mc)
    return run


_DISPATCH: Dict[str, Callable[[OperatorFamily, SearchConfig, McConfig], BoundEstimate]] = {
    "r": lambda f, cfg, mc: r_bound_search(f, cfg),
    "gamma": lambda f, cfg, mc: gamma_bound_search(f, cfg, mc),
    "ell2": lambda f, cfg, mc: ell2_bound_search(f, cfg),
    "pi2": _needs_single(lambda f, cfg, mc: pi2_search(f, cfg)),
    "pi21": _needs_single(lambda f, cfg, mc: pi21_search(f, cfg)),
    "cotype2": _needs_single(lambda f, cfg, mc: cotype2_search(f, cfg)),
    "cotype2gamma": _needs_single(lambda f, cfg, mc: gaussian_cotype2_search(f, cfg, mc)),
}


def estimate_constant(family, constant: str, cfg: SearchConfig = None, mc: McConfig = None) -> BoundEstimate:
    """Bracket ``constant`` for ``family``.

    Single-operator constants (pi2, pi21, cotype2, cotype2gamma) accept a
    multi-member family of functionals or l^inf-valued maps and use the
    stacked operator.
    """
    if constant not in _DISPATCH:
        raise ValueError(f"unknown constant {constant!r}; choose from {', '.join(CONSTANTS)}")
    family = check_family(family)
    return _DISPATCH[constant](family, cfg or SearchConfig(), mc or McConfig())


class BoundEstimator(BaseEstimator):
    """Bracket one randomized-boundedness constant of an operator family."""

    def __init__(self, constant="r", restarts=64, ascent_steps=20, grid_levels=3,
                 seed=42, samples=100_000, level=0.99):
        self.constant = constant
        self.restarts = restarts
        self.ascent_steps = ascent_steps
        self.grid_levels = grid_levels
        self.seed = seed
        self.samples = samples
        self.level = level

    def _configs(self):
        if self.constant not in CONSTANTS:
            raise ValueError(f"unknown constant {self.constant!r}")
        cfg = SearchConfig(restarts=self.restarts, ascent_steps=self.ascent_steps,
                           seed=self.seed, grid_levels=self.grid_levels)
        return cfg, McConfig(samples=self.samples, seed=self.seed, level=self.level)

    def fit(self, X, y=None):
        cfg, mc = self._configs()
        est = estimate_constant(X, self.constant, cfg, mc)
        self.estimate_ = est
        self.lower_ = est.lower
        self.upper_ = est.upper
        self.witness_ = est.certificate
        return self

    def transform(self, X):
        """Brackets for a list of families, shape (n, 2); columns are lower and upper."""
        cfg, mc = self._configs()
        rows = [estimate_constant(f, self.constant, cfg, mc) for f in X]
        return np.array([[e.lower, e.upper] for e in rows], dtype=float).reshape(-1, 2)

    def bracket(self):
        check_is_fitted(self, "estimate_")
        return self.lower_, self.upper_
