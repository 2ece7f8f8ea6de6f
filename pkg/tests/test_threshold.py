import numpy as np
import pytest

from confidence.threshold import ThresholdState, effective_tau_c, update_adaptive_threshold
from diffcore.model import PredictionBatch


def constant_confidence(kappa, n_classes=3, rows=4):
    rest = (1.0 - kappa) / (n_classes - 1)
    q = np.full((rows, n_classes), rest)
    q[:, 0] = kappa
    return PredictionBatch.from_probabilities(q)


class TestAdaptive:

    def test_initial(self):
        state = ThresholdState.initial('adaptive', 4, decay=0.999)
        assert state.tau_global == 0.25
        np.testing.assert_allclose(state.class_thresholds(), 0.25)

    def test_global_threshold_closed_form(self):
        kappa, m = 0.8, 0.999
        state = ThresholdState.initial('adaptive', 3, decay=m)
        tau0 = state.tau_global
        preds = constant_confidence(kappa)
        for t in range(1, 10_001):
            state = update_adaptive_threshold(state, preds)
            if t in (1, 10, 100, 1000, 5000, 10_000):
                assert state.tau_global == pytest.approx(kappa + m ** t * (tau0 - kappa), abs=1e-6)

    def test_class_thresholds_by_hand(self):
        state = ThresholdState.initial('adaptive', 3, decay=0.5)
        preds = PredictionBatch.from_probabilities([[0.7, 0.2, 0.1], [0.6, 0.3, 0.1]])
        state = update_adaptive_threshold(state, preds)
        # tau = 0.5/3 + 0.5*0.65, p = 0.5/3 + 0.5*[0.65, 0.25, 0.1]
        assert state.tau_global == pytest.approx(0.4916666666666667, abs=1e-12)
        np.testing.assert_allclose(
            state.class_expectation, [0.4916666666666667, 0.2916666666666667, 0.2166666666666667],
        )
        np.testing.assert_allclose(
            state.class_thresholds(), [0.4916666666666667, 0.2916666666666667, 0.2166666666666667],
        )
        assert effective_tau_c(state, 2) == pytest.approx(0.2166666666666667)

    def test_most_expected_class_gets_global_threshold(self):
        state = ThresholdState('adaptive', 0.95, 0.6, np.array([0.2, 0.5, 0.3]), 0.9)
        np.testing.assert_allclose(state.class_thresholds(), [0.24, 0.6, 0.36])

    def test_update_keeps_float64(self):
        state = ThresholdState.initial('adaptive', 3, decay=0.9)
        preds = PredictionBatch.from_probabilities(np.full((2, 3), 1.0 / 3.0, np.float32))
        state = update_adaptive_threshold(state, preds)
        assert state.class_expectation.dtype == np.float64

    def test_empty_batch(self):
        state = ThresholdState.initial('adaptive', 3, decay=0.9)
        with pytest.raises(ValueError):
            update_adaptive_threshold(state, PredictionBatch.from_probabilities(np.zeros((0, 3))))

    def test_class_count_mismatch(self):
        state = ThresholdState.initial('adaptive', 3, decay=0.9)
        with pytest.raises(ValueError):
            update_adaptive_threshold(state, constant_confidence(0.9, n_classes=4))


class TestFixed:

    def test_every_class_uses_tau_fixed(self):
        state = ThresholdState.initial('fixed', 5, decay=0.999, tau_fixed=0.9)
        np.testing.assert_array_equal(state.class_thresholds(), np.full(5, 0.9))

    def test_no_update(self):
        state = ThresholdState.initial('fixed', 3, decay=0.999)
        with pytest.raises(ValueError):
            update_adaptive_threshold(state, constant_confidence(0.9))
