import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from randbound.ell2 import KG
from randbound.estimators import CONSTANTS, BoundEstimator, estimate_constant
from randbound.gaussian import McConfig
from randbound.search import SearchConfig
from randbound.spaces import diagonal_c0_family, family_to_dict, make_family


def test_params_roundtrip():
    est = BoundEstimator(constant="ell2", restarts=8)
    assert est.get_params()["constant"] == "ell2"
    est.set_params(seed=7)
    assert clone(est).get_params()["seed"] == 7


def test_fit_identity_ell2():
    est = BoundEstimator(constant="ell2", restarts=8).fit(np.eye(2))
    assert est.lower_ >= 1.0 - 1e-12
    assert est.upper_ == pytest.approx(KG)
    assert est.bracket() == (est.lower_, est.upper_)
    assert est.witness_ is not None


def test_fit_accepts_dict():
    est = BoundEstimator(constant="r", restarts=8).fit(family_to_dict(diagonal_c0_family([1, 1, 1, 1])))
    assert est.bracket() == pytest.approx((2.0, 2.0))


def test_transform_shape():
    out = BoundEstimator(constant="pi2", restarts=4).transform([np.eye(2), np.array([[1.0]])])
    assert out.shape == (2, 2)
    np.testing.assert_allclose(out[1], [1.0, 1.0])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        BoundEstimator().bracket()


def test_unknown_constant():
    with pytest.raises(ValueError):
        BoundEstimator(constant="nope").fit(np.eye(2))
    with pytest.raises(ValueError):
        estimate_constant(np.eye(2), "nope")


@pytest.mark.parametrize("constant", CONSTANTS)
def test_zero_family(constant):
    est = estimate_constant(make_family(np.zeros((2, 2))), constant, SearchConfig(restarts=4),
                            McConfig(samples=2000))
    assert (est.lower, est.upper) == (0.0, 0.0)
