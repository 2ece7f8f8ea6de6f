import numpy as np
import pytest

from trainer import evaluation
from trainer.config import with_overrides
from trainer.evaluation import evaluate, predict
from trainer.sources import load_splits


class TestEvaluate:

    def test_chunks_do_not_change_predictions(self, small_params, glyphs):
        np.testing.assert_allclose(
            predict(small_params, glyphs.images, chunk=5),
            predict(small_params, glyphs.images),
            rtol=1e-5, atol=1e-7,
        )

    def test_error_is_one_minus_top1(self, small_params, glyphs):
        result = evaluate(small_params, glyphs, ks=(1, 2, 3))
        assert result.error_rate == pytest.approx(1.0 - result.top1)
        assert result.topk[3] == 1.0

    def test_skips_k_above_class_count(self, small_params, glyphs):
        assert sorted(evaluate(small_params, glyphs, ks=(1, 5)).topk) == [1]

    def test_perfect_predictions(self, small_params, glyphs, monkeypatch):
        monkeypatch.setattr(evaluation, 'predict', lambda params, images: np.eye(3)[glyphs.labels])
        assert evaluate(small_params, glyphs).error_rate == 0.0

    def test_empty_test_set(self, small_params, glyphs):
        with pytest.raises(ValueError):
            evaluate(small_params, glyphs.subset(np.array([], dtype=np.int64)))


class TestSources:

    def test_synthetic(self, tiny_config):
        train, test = load_splits(tiny_config)
        assert len(train) == 24 and len(test) == 12
        assert train.image_shape == (16, 16, 3)
        assert not np.array_equal(train.images[:12], test.images)

    def test_cifar_without_batches(self, tiny_config, tmp_path):
        config = with_overrides(tiny_config, {'dataset': 'cifar', 'data_path': str(tmp_path)})
        with pytest.raises(FileNotFoundError):
            load_splits(config)
