import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randbound.rademacher import (
    batch_rademacher_moment,
    cotype2_search,
    diag_c0_rbound,
    r_bound_search,
    r_ratio,
    rademacher_moment,
    randomized_uppers,
)
from randbound.search import SearchConfig
from randbound.spaces import (
    INF,
    BudgetError,
    ContractError,
    DegenerateWitnessError,
    SeqSpace,
    Witness,
    coordinate_family,
    diagonal_c0_family,
    lp_norm,
    make_family,
)

EXPONENTS = [1.0, 1.5, 2.0, 3.0, INF]
FAST = SearchConfig(restarts=8)


def naive_moment(space, V, q=2.0):
    """Direct loop over all 2^k patterns, independent of the engine."""
    k = len(V)
    total = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=k):
        s = sum(e * v for e, v in zip(signs, V))
        total += float(lp_norm(np.asarray(s), space.p)) ** q
    return (total / 2**k) ** (1 / q)


class TestMoment:
    def test_examples(self):
        s = SeqSpace(2, INF)
        assert rademacher_moment(s, [(5, 0)]) == 5.0
        assert rademacher_moment(s, [(1, 0), (0, 1)]) == 1.0
        assert rademacher_moment(s, [(2, 1), (1, 2)]) == pytest.approx(math.sqrt(5), rel=1e-14)

    @given(st.integers(1, 12), st.integers(1, 4), st.sampled_from(EXPONENTS), st.sampled_from([1.0, 2.0, 3.0]),
           st.integers(0, 2**32 - 1))
    def test_matches_naive(self, k, d, p, q, seed):
        V = np.random.default_rng(seed).standard_normal((k, d))
        s = SeqSpace(d, p)
        assert rademacher_moment(s, V, q) == pytest.approx(naive_moment(s, V, q), rel=1e-12)

    def test_disjoint_closed_form(self):
        s = SeqSpace(40, 2.0)
        V = np.diag(np.arange(1.0, 41.0))
        # 40 vectors exceed the enumeration cap, but disjoint supports need none
        assert rademacher_moment(s, V) == pytest.approx(np.linalg.norm(np.arange(1.0, 41.0)))

    def test_budget_error(self):
        with pytest.raises(BudgetError, match="Monte Carlo"):
            rademacher_moment(SeqSpace(2, INF), np.ones((25, 2)))

    def test_batch_agrees(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((5, 4, 3))
        b = batch_rademacher_moment(X, INF)
        for i in range(5):
            assert b[i] == pytest.approx(rademacher_moment(SeqSpace(3, INF), X[i]), rel=1e-12)


class TestRatio:
    def test_identity(self):
        F = make_family(np.eye(2))
        assert r_ratio(F, Witness((0,), [[0.3, -2.0]])) == pytest.approx(1.0)

    def test_diagonal_basis_witness(self):
        F = diagonal_c0_family([1, 1])
        assert r_ratio(F, Witness((0, 1), np.eye(2))) == pytest.approx(math.sqrt(2))

    @given(st.floats(-50, 50).filter(lambda x: abs(x) > 1e-3), st.integers(0, 2**32 - 1))
    def test_homogeneity_and_scale_invariance(self, lam, seed):
        rng = np.random.default_rng(seed)
        F = make_family(rng.standard_normal((2, 2, 3)))
        w = Witness((0, 1, 0), rng.standard_normal((3, 3)))
        r = r_ratio(F, w)
        assert r_ratio(F.scaled(lam), w) == pytest.approx(abs(lam) * r, rel=1e-12)
        assert r_ratio(F, w.scaled(lam)) == pytest.approx(r, rel=1e-12)

    def test_degenerate(self):
        F = make_family(np.eye(2))
        with pytest.raises(DegenerateWitnessError):
            r_ratio(F, Witness((0,), np.zeros((1, 2))))


class TestSearch:
    def test_diag_exact(self):
        est = r_bound_search(diagonal_c0_family([3, 4]))
        assert abs(est.lower - 5.0) <= 1e-6
        assert est.upper == 5.0

    @pytest.mark.parametrize("a,expected", [((3, 4), 5.0), ((1,), 1.0), ((1, 1, 1, 1), 2.0)])
    def test_formula(self, a, expected):
        assert diag_c0_rbound(a) == expected

    def test_zero_family(self):
        est = r_bound_search(make_family(np.zeros((2, 2, 2))))
        assert (est.lower, est.upper) == (0.0, 0.0)
        assert est.degenerate

    @pytest.mark.parametrize("N", [1, 2, 3, 5, 8])
    def test_coordinate_family(self, N):
        est = r_bound_search(coordinate_family(N), FAST)
        assert est.lower == pytest.approx(math.sqrt(N), rel=1e-9)

    def test_certificate_reproduces_lower(self):
        rng = np.random.default_rng(11)
        F = make_family(rng.standard_normal((3, 2, 2)))
        est = r_bound_search(F, FAST)
        assert r_ratio(F, est.certificate) == pytest.approx(est.lower, rel=1e-9)
        assert math.isfinite(est.upper) and est.lower <= est.upper

    def test_deterministic(self):
        F = make_family(np.random.default_rng(2).standard_normal((2, 2, 3)))
        a, b = r_bound_search(F, FAST), r_bound_search(F, FAST)
        assert a.lower == b.lower
        assert np.array_equal(a.certificate.vectors, b.certificate.vectors)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=6), st.integers(0, 1000))
    def test_diag_lower_never_exceeds_formula(self, a, seed):
        est = r_bound_search(diagonal_c0_family(a), SearchConfig(restarts=2, seed=seed))
        assert est.lower <= diag_c0_rbound(a) + 1e-9

    def test_monotone_in_budget(self):
        rng = np.random.default_rng(5)
        F = make_family(rng.standard_normal((3, 2, 3)))
        lows = [r_bound_search(F, SearchConfig(restarts=r, grid_levels=g, exhaustive_budget=64)).lower
                for r, g in [(1, 1), (4, 1), (4, 2), (16, 3)]]
        assert all(b >= a for a, b in zip(lows, lows[1:]))

    def test_uppers_valid_on_random_witnesses(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            F = make_family(rng.standard_normal((3, 1, 3)), INF, 1.0)
            up = min(v for v, _ in randomized_uppers(F))
            for _ in range(20):
                k = int(rng.integers(1, 5))
                w = Witness(tuple(rng.integers(0, 3, k)), rng.standard_normal((k, 3)))
                assert r_ratio(F, w) <= up * (1 + 1e-9)


class TestCotype:
    def test_examples(self):
        for N in (1, 2, 3, 4):
            assert cotype2_search(coordinate_family(N).stacked(), FAST).lower == pytest.approx(math.sqrt(N))
        assert cotype2_search(make_family(np.zeros((2, 2)))).lower == 0.0
        assert cotype2_search(make_family([[1.0]])).lower == pytest.approx(1.0)

    def test_multi_member_rejected(self):
        with pytest.raises(ContractError):
            cotype2_search(coordinate_family(2))
