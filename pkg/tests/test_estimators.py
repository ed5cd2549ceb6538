import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from context_fuse.estimators import (
    ContextEstimator,
    ContextualFusion,
    CooccurrenceNetwork,
    HyperpriorFusion,
)
from context_fuse.exceptions import DimensionMismatch, InvalidInput, NoContexts
from context_fuse.hbm import posterior_class_probabilities
from context_fuse.mcmc import SamplerConfig
from context_fuse.scenarios import toy_contexts, toy_scene
from context_fuse.scene import make_context
from context_fuse.validation import check_corpus, check_readings

FAST = dict(iterations=20_000, burn_in=4_000, thin=10)
X_TOY = np.array([[0.99, 0.005, 0.005], [1 / 3, 1 / 3, 1 / 3]])
U_TOY = [0.01, 0.3]
IMAGES = [["cat", "dog"], ["cat", "dog", "person"], ["cat", "car"]]


class TestValidation:
    def test_readings_ok(self):
        X, u = check_readings(X_TOY, 0.1, 3)
        assert u.tolist() == [0.1, 0.1]

    def test_readings_rejects(self):
        with pytest.raises(DimensionMismatch):
            check_readings(X_TOY, 0.1, 4)
        with pytest.raises(InvalidInput):
            check_readings([[0.5, 0.6]], 0.1)
        with pytest.raises(InvalidInput):
            check_readings(X_TOY, [0.1, -1])
        with pytest.raises(DimensionMismatch):
            check_readings(X_TOY, [0.1, 0.1, 0.1])
        with pytest.raises(ValueError):
            check_readings([[np.nan, 1]], 0.1)

    def test_corpus_rejects_string(self):
        with pytest.raises(InvalidInput):
            check_corpus("cat dog")


class TestContextEstimator:
    def test_fit(self):
        est = ContextEstimator(name="home").fit(IMAGES)
        assert est.classes_.tolist() == ["car", "cat", "dog", "person"]
        np.testing.assert_allclose(est.mu_, [1 / 7, 3 / 7, 2 / 7, 1 / 7])
        assert est.context_.name == "home"
        assert est.n_images_ == 3

    def test_transform(self):
        est = ContextEstimator().fit(IMAGES)
        np.testing.assert_array_equal(est.transform([["dog", "dog"]]), [[0, 0, 2, 0]])

    def test_params_and_clone(self):
        est = ContextEstimator(name="x", classes=["a"])
        assert est.get_params() == {"name": "x", "classes": ["a"]}
        assert clone(est).get_params() == est.get_params()

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            ContextEstimator().transform(IMAGES)


class TestContextualFusion:
    def test_matches_functional_api(self):
        ctx = toy_contexts()["Ohio"]
        est = ContextualFusion(context=ctx, random_state=5, **FAST).fit()
        got = est.predict_proba(X_TOY, U_TOY, query=(1, "TRIOZAP"))
        want, _ = posterior_class_probabilities(
            toy_scene(), ctx, SamplerConfig(seed=5, **FAST), query=(2, 1))
        np.testing.assert_array_equal(got, want.T)
        assert est.diagnostics_.tracked == "TRIOZAP[object 1]"

    def test_predict(self):
        est = ContextualFusion(context=toy_contexts()["Ohio"], **FAST).fit()
        assert est.predict(X_TOY, U_TOY).tolist() == ["ACME", "TRIOZAP"]

    def test_fit_from_corpus(self):
        est = ContextualFusion(**FAST).fit(IMAGES)
        assert est.classes_.tolist() == ["car", "cat", "dog", "person"]
        probs = est.predict_proba([[0.25, 0.25, 0.25, 0.25]], 0.3)
        assert probs.shape == (1, 4)

    def test_needs_context(self):
        with pytest.raises(InvalidInput):
            ContextualFusion().fit()

    def test_get_params(self):
        params = ContextualFusion().get_params()
        assert params["iterations"] == 100_000 and params["geweke_threshold"] == 0.01


class TestHyperpriorFusion:
    def test_weights_and_proba(self):
        ctxs = list(toy_contexts().values())
        est = HyperpriorFusion(contexts=ctxs, mc_samples=5000, **FAST).fit()
        probs = est.predict_proba(X_TOY, U_TOY)
        assert probs.shape == (2, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1, atol=1e-6)
        assert est.context_weights_.sum() == pytest.approx(1)
        assert len(est.components_) == 3

    def test_rejects(self):
        with pytest.raises(NoContexts):
            HyperpriorFusion().fit()
        other = make_context("x", ("a", "b", "c"), [1 / 3] * 3, np.eye(3))
        with pytest.raises(InvalidInput):
            HyperpriorFusion(contexts=[toy_contexts()["Iowa"], other]).fit()


class TestCooccurrenceNetwork:
    def test_predict_proba(self):
        net = CooccurrenceNetwork().fit(IMAGES)
        p = net.predict_proba("cat")
        np.testing.assert_allclose(p, [[1 / 3, 1.0, 2 / 3, 1 / 3]])

    def test_rank(self):
        net = CooccurrenceNetwork(tau=1).fit(IMAGES)
        assert net.rank("cat") == [("dog", 2 / 3), ("car", 0.0), ("person", 0.0)]
