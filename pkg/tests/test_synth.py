"""
Tests for procedural rendering, patchify and the dataset file format.
"""

import numpy as np
import pytest

from src.pipeline.errors import ConfigError, DatasetFormatError, ShapeError
from src.synth.config import DataConfig
from src.synth.dataset_io import dataset_roundtrip, read_dataset, write_dataset
from src.synth.patchify import patchify, unpatchify
from src.synth.render import ImageSet, render_dataset, render_image
from src.synth.shape_factory import ShapeFactory


@pytest.fixture
def data_config():
    return DataConfig(grid=4, patch=4, n_classes=4, n_images=12, seed=3)


class TestDataConfig:
    def test_derived_sizes(self):
        cfg = DataConfig(grid=4, patch=4)
        assert (cfg.side, cfg.n_tokens, cfg.d_patch) == (16, 16, 16)

    @pytest.mark.parametrize("kwargs", [{"grid": 1}, {"patch": 1}, {"n_classes": 5}, {"n_images": 0}, {"seed": -1}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            DataConfig(**kwargs)


class TestShapeFactory:
    def test_registry_order_defines_class_ids(self):
        factory = ShapeFactory()
        assert factory.class_names() == ["disk", "square", "cross", "hstripes"]
        assert factory.for_class(2).name == "cross"

    def test_unknown(self):
        with pytest.raises(ConfigError):
            ShapeFactory().create_shape("triangle")
        with pytest.raises(ConfigError):
            ShapeFactory().for_class(4)


# =============================================================================
# Rendering
# =============================================================================

class TestRender:
    def test_pure_function_of_seed_and_index(self, data_config):
        a, b = render_image(data_config, 5), render_image(data_config, 5)
        np.testing.assert_array_equal(a.pixels, b.pixels)
        assert a.label == b.label

    def test_modular_labels(self, data_config):
        assert render_image(data_config, 0).label == render_image(data_config, 4).label == 0
        assert render_image(data_config, 7).label == 3

    def test_value_range_and_dtype(self, data_config):
        image = render_image(data_config, 1)
        assert image.pixels.dtype == np.float32
        assert image.pixels.min() >= -1.0 and image.pixels.max() <= 1.0
        assert image.tokens.shape == (16, 16)

    def test_index_out_of_range(self, data_config):
        with pytest.raises(ShapeError):
            render_image(data_config, 12)

    def test_seed_changes_images(self, data_config):
        other = DataConfig(grid=4, patch=4, n_classes=4, n_images=12, seed=4)
        assert not np.array_equal(render_image(data_config, 0).pixels, render_image(other, 0).pixels)

    def test_thread_pool_matches_serial(self, data_config):
        serial = render_dataset(data_config)
        pooled = render_dataset(data_config, workers=3)
        np.testing.assert_array_equal(serial.pixels, pooled.pixels)
        np.testing.assert_array_equal(serial.labels, pooled.labels)

    def test_classes_differ_on_average(self):
        images = render_dataset(DataConfig(grid=4, patch=4, n_classes=4, n_images=64, seed=0))
        means = [images.pixels[images.labels == k].mean(axis=0) for k in range(4)]
        for a in range(4):
            for b in range(a + 1, 4):
                assert np.abs(means[a] - means[b]).max() > 0.05

    def test_image_set_accessors(self, data_config):
        images = render_dataset(data_config)
        assert len(images) == 12
        assert images.tokens().shape == (12, 16, 16)
        assert images.image(3).label == 3
        assert len(images.subset([0, 2])) == 2
        with pytest.raises(ShapeError):
            images.image(12)


# =============================================================================
# Patchify
# =============================================================================

class TestPatchify:
    def test_inverse(self, rng):
        pixels = rng.standard_normal((3, 8, 8))
        np.testing.assert_array_equal(unpatchify(patchify(pixels, 2, 4), 2, 4), pixels)

    def test_token_layout(self):
        pixels = np.arange(16.0).reshape(4, 4)
        tokens = patchify(pixels, 2, 2)
        np.testing.assert_array_equal(tokens[0], [0, 1, 4, 5])
        np.testing.assert_array_equal(tokens[1], [2, 3, 6, 7])
        np.testing.assert_array_equal(tokens[2], [8, 9, 12, 13])

    def test_constant_image(self):
        tokens = patchify(np.full((6, 6), 0.25), 3, 2)
        assert np.all(tokens == 0.25)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            patchify(np.zeros((5, 5)), 2, 2)
        with pytest.raises(ShapeError):
            unpatchify(np.zeros((4, 3)), 2, 2)


# =============================================================================
# Dataset files
# =============================================================================

class TestDatasetFile:
    def test_roundtrip_is_bit_identical(self, tmp_path):
        images = render_dataset(DataConfig(grid=4, patch=4, n_images=10, seed=1))
        back = dataset_roundtrip(images, tmp_path / "d.srpd")
        np.testing.assert_array_equal(back.pixels, images.pixels)
        np.testing.assert_array_equal(back.labels, images.labels)
        assert (back.grid, back.patch, back.n_classes) == (4, 4, 4)

    def test_file_size(self, tmp_path):
        images = render_dataset(DataConfig(grid=2, patch=2, n_images=3, seed=1))
        path = write_dataset(images, tmp_path / "d.srpd")
        assert path.stat().st_size == 24 + 3 * (4 + 16 * 4)

    def test_truncated(self, tmp_path):
        path = write_dataset(render_dataset(DataConfig(grid=2, patch=2, n_images=3)), tmp_path / "d.srpd")
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(DatasetFormatError, match="length mismatch"):
            read_dataset(path)

    def test_bad_magic(self, tmp_path):
        path = write_dataset(render_dataset(DataConfig(grid=2, patch=2, n_images=3)), tmp_path / "d.srpd")
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(DatasetFormatError, match="offset 0"):
            read_dataset(path)

    def test_bad_label(self, tmp_path):
        images = ImageSet(2, 2, 2, np.zeros((2, 4, 4), dtype=np.float32), np.array([0, 5]))
        path = write_dataset(images, tmp_path / "d.srpd")
        with pytest.raises(DatasetFormatError, match="label 5"):
            read_dataset(path)

    def test_short_header(self, tmp_path):
        path = tmp_path / "d.srpd"
        path.write_bytes(b"SRPD")
        with pytest.raises(DatasetFormatError):
            read_dataset(path)
