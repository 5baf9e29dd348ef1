import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randbound import oracles
from randbound.gaussian import (
    SUDAKOV_K,
    McConfig,
    coord_gamma_bracket,
    coordinate_scale,
    expected_sup_mc,
    expsup_check,
    expsup_gamma_sq_bound,
    gamma_bound_search,
    gamma_ratio_mc,
    gamma_uppers,
    gap_ratio_floor,
    gaussian_moment_mc,
    komatsu_lower_tail,
    sudakov_check,
    sudakov_lhs,
    theta,
    theta_floor,
)
from randbound.rademacher import rademacher_moment
from randbound.spaces import (
    INF,
    DegenerateWitnessError,
    DomainError,
    SeqSpace,
    Witness,
    coordinate_family,
    diagonal_c0_family,
    make_family,
)

# Reference values from the adaptive-quadrature oracles (see test_oracles.py).
E_MAX_SQ_2 = 1 + 2 / math.pi  # E max(g1^2, g2^2)
E_MAX_ABS_4 = 1.4647279814586374  # int_0^inf 1 - (2 Phi(t) - 1)^4 dt
E_MAX_SQ_1024 = 11.958263329233667

MC = McConfig(samples=50_000)


def inside(est, value, widen=1.0):
    return abs(est.mean - value) <= widen * est.half_width


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            McConfig(samples=1)
        with pytest.raises(ValueError):
            McConfig(level=1.0)
        assert McConfig().z == pytest.approx(2.5758293035489)


class TestMoment:
    def test_single_vector(self):
        est = gaussian_moment_mc(SeqSpace(2, INF), [(5, 0)], 2, MC)
        assert inside(est, 5.0)

    def test_hilbert(self):
        assert inside(gaussian_moment_mc(SeqSpace(2, 2.0), np.eye(2), 2, MC), math.sqrt(2))

    def test_linf_against_quadrature(self):
        assert inside(gaussian_moment_mc(SeqSpace(2, INF), np.eye(2), 2, MC), math.sqrt(E_MAX_SQ_2))

    def test_dense_path(self):
        V = np.array([[1.0, 1.0], [1.0, -1.0]])
        # ||g1 (1,1) + g2 (1,-1)||_2^2 = 2 (g1^2 + g2^2)
        assert inside(gaussian_moment_mc(SeqSpace(2, 2.0), V, 2, MC), 2.0)

    def test_deterministic(self):
        V = np.random.default_rng(0).standard_normal((3, 4))
        a = gaussian_moment_mc(SeqSpace(4, 3.0), V, 2, MC)
        b = gaussian_moment_mc(SeqSpace(4, 3.0), V, 2, MC)
        assert a == b

    def test_thread_count_does_not_change_result(self, monkeypatch):
        V = np.random.default_rng(1).standard_normal((3, 600))
        cfg = McConfig(samples=20_000)
        monkeypatch.setenv("RANDBOUND_THREADS", "1")
        a = gaussian_moment_mc(SeqSpace(600, 2.0), V, 2, cfg)
        monkeypatch.setenv("RANDBOUND_THREADS", "4")
        b = gaussian_moment_mc(SeqSpace(600, 2.0), V, 2, cfg)
        assert a == b

    def test_seed_sensitivity(self):
        V = np.random.default_rng(2).standard_normal((3, 3))
        a = gaussian_moment_mc(SeqSpace(3, INF), V, 2, McConfig(samples=50_000, seed=1))
        b = gaussian_moment_mc(SeqSpace(3, INF), V, 2, McConfig(samples=50_000, seed=2))
        assert a.mean != b.mean
        assert abs(a.mean - b.mean) <= a.half_width + b.half_width


class TestSup:
    def test_half_normal(self):
        assert inside(expected_sup_mc([1.0], MC), math.sqrt(2 / math.pi))

    def test_zeros_drop_out(self):
        assert inside(expected_sup_mc([0.0, 0.0, 7.0], MC), 7 * math.sqrt(2 / math.pi))

    def test_four_ones(self):
        assert inside(expected_sup_mc(np.ones(4), MC), E_MAX_ABS_4)

    @pytest.mark.parametrize("n", [500, 5000])
    def test_tabulated_path(self, n):
        x = np.random.default_rng(n).standard_normal(n)
        assert inside(expected_sup_mc(x, MC), oracles.expected_max_abs(x))

    def test_empty(self):
        with pytest.raises(DomainError):
            expected_sup_mc([], MC)


class TestSudakov:
    def test_n1(self):
        chk = sudakov_check([3.0], MC)
        assert chk.lhs == 0.0 and chk.holds

    def test_n2(self):
        chk = sudakov_check([1.0, 1.0], MC)
        assert chk.lhs == pytest.approx(math.sqrt(math.log(2)))
        assert inside(chk.rhs, 2 / math.sqrt(math.pi))
        assert chk.holds

    def test_n1000(self):
        chk = sudakov_check(np.ones(1000), MC)
        assert chk.lhs == pytest.approx(math.sqrt(math.log(1000)), rel=1e-12)
        assert chk.holds

    def test_lhs_formula(self):
        assert sudakov_lhs([3.0, 4.0]) == pytest.approx(math.sqrt(math.log(2) / 2 * 25))


class TestKomatsu:
    def test_examples(self):
        assert komatsu_lower_tail(0.0) == 1.0
        assert oracles.gaussian_tail_integral(0.0) == pytest.approx(math.sqrt(2 * math.pi) / 2)
        assert komatsu_lower_tail(3.0) == pytest.approx(0.0033635, abs=5e-8)
        assert oracles.gaussian_tail_integral(3.0) >= komatsu_lower_tail(3.0)

    @given(st.floats(-8, 8))
    def test_below_tail(self, s):
        assert oracles.gaussian_tail_integral(s) - komatsu_lower_tail(s) >= -1e-12

    def test_theta(self):
        assert theta(1.0) == pytest.approx(0.60653066, rel=1e-8)
        assert theta_floor(1.0) == pytest.approx(0.36787944, rel=1e-8)
        assert theta(2.0) <= 0.5 * (theta(1.0) + theta(3.0))
        with pytest.raises(DomainError):
            theta(0.0)
        with pytest.raises(DomainError):
            theta_floor(-1.0)
        assert SUDAKOV_K == pytest.approx(2.905, abs=1e-3)

    @given(st.floats(1e-3, 1e3))
    def test_theta_dominates_floor(self, y):
        assert theta(y) >= theta_floor(y)


class TestExpSup:
    def test_bound_values(self):
        assert expsup_gamma_sq_bound(1) == pytest.approx(1.3862944)
        assert expsup_gamma_sq_bound(2) == pytest.approx(2.7725887)
        assert expsup_gamma_sq_bound(1024) == pytest.approx(15.249238, rel=1e-7)
        with pytest.raises(DomainError):
            expsup_gamma_sq_bound(0)

    @pytest.mark.parametrize("n,exact", [(1, 1.0), (2, E_MAX_SQ_2), (1024, E_MAX_SQ_1024)])
    def test_checks(self, n, exact):
        chk = expsup_check(n, MC)
        assert chk.holds
        assert inside(chk.estimate, exact, widen=1.5)


class TestGammaRatio:
    def test_identity(self):
        F = make_family(np.eye(2))
        est = gamma_ratio_mc(F, Witness((0,), [[1.0, 0.5]]), MC)
        assert abs(est.mean - 1.0) <= 1e-12

    @pytest.mark.parametrize("N", [2, 8, 64])
    def test_coordinate_basis_witness(self, N):
        F = coordinate_family(N)
        est = gamma_ratio_mc(F, Witness(tuple(range(N)), np.eye(N)), MC)
        exact = math.sqrt(N / oracles.expected_max_sq(N))
        assert inside(est, exact)
        lo, hi = coord_gamma_bracket(N)
        assert lo <= est.mean + est.half_width and est.mean - est.half_width <= hi

    def test_homogeneity(self):
        rng = np.random.default_rng(4)
        F = make_family(rng.standard_normal((2, 2, 2)))
        w = Witness((0, 1), rng.standard_normal((2, 2)))
        a, b = gamma_ratio_mc(F, w, MC), gamma_ratio_mc(F.scaled(-3.0), w, MC)
        assert b.mean == pytest.approx(3 * a.mean, rel=1e-12)

    def test_degenerate(self):
        F = make_family(np.eye(2))
        with pytest.raises(DegenerateWitnessError):
            gamma_ratio_mc(F, Witness((0,), np.zeros((1, 2))), MC)


class TestBracket:
    def test_values(self):
        assert coord_gamma_bracket(2) == pytest.approx((0.8493218, 6.7945744))
        assert coord_gamma_bracket(1024) == pytest.approx((8.1945651, 48.618017))
        with pytest.raises(DomainError):
            coord_gamma_bracket(1)

    def test_ordering(self):
        for N in list(range(2, 200)) + [10**3, 10**4, 10**5, 10**6]:
            lo, hi = coord_gamma_bracket(N)
            assert lo < hi

    @pytest.mark.parametrize("N", [2, 16, 256, 4096])
    def test_basis_witness_inside_bracket(self, N):
        est = gamma_ratio_mc(coordinate_family(N), Witness(tuple(range(N)), np.eye(N)), McConfig(samples=20_000))
        lo, hi = coord_gamma_bracket(N)
        assert est.low >= 0 and est.low <= hi
        assert est.mean >= lo / 1.05

    def test_gap_floor_increasing(self):
        floors = [gap_ratio_floor(N) for N in (2, 4, 8, 64, 1024, 10**6)]
        assert all(b > a for a, b in zip(floors, floors[1:]))
        assert gap_ratio_floor(1024) == pytest.approx(math.sqrt(math.log(1024)) / 4)

    def test_structural_detection(self):
        assert coordinate_scale(coordinate_family(4)) == 1.0
        assert coordinate_scale(coordinate_family(4).scaled(2.0)) == 2.0
        assert coordinate_scale(diagonal_c0_family([1, 2])) is None
        assert coordinate_scale(coordinate_family(1)) is None


class TestGammaSearch:
    def test_coordinate_family(self):
        est = gamma_bound_search(coordinate_family(16), mc=MC)
        lo, hi = coord_gamma_bracket(16)
        assert est.upper <= hi
        assert est.lower >= lo * 0.99
        assert est.ci is not None

    def test_lemma_upper_registered(self):
        cands = dict((src, v) for v, src in gamma_uppers(coordinate_family(1024)))
        assert cands["coordinate-gamma-lemma"] == pytest.approx(coord_gamma_bracket(1024)[1])
        # sqrt(N) from the functional bound is smaller still
        assert cands["functional-l2"] == pytest.approx(32.0)
        est = gamma_bound_search(coordinate_family(1024), mc=McConfig(samples=5000))
        assert est.upper == pytest.approx(32.0)

    def test_zero(self):
        est = gamma_bound_search(make_family(np.zeros((1, 2, 2))), mc=MC)
        assert (est.lower, est.upper) == (0.0, 0.0)


def test_comparison_constant_random():
    rng = np.random.default_rng(9)
    c = math.sqrt(math.pi / 2)
    for _ in range(20):
        k, d = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        s = SeqSpace(d, [1.0, 2.0, 3.0, INF][int(rng.integers(4))])
        V = rng.standard_normal((k, d))
        g = gaussian_moment_mc(s, V, 2, MC)
        assert rademacher_moment(s, V) <= c * (g.mean + g.half_width)
