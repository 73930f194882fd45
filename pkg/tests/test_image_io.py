import numpy as np
import pytest
from PIL import Image

from src.core.errors import ImageIOError
from src.services.image_io import load_image, save_grayscale, save_image, to_bytes


class TestToBytes:
    def test_rounding_and_clamp(self):
        values = np.array([0.0, 1.0, 0.5, -0.2, 1.7, 1 / 255]).reshape(1, 6, 1)
        assert to_bytes(values)[0, :, 0].tolist() == [0, 255, 128, 0, 255, 1]


class TestLoadSave:
    def test_byte_values_map_to_unit_range(self, tmp_path):
        data = np.zeros((2, 2, 3), dtype=np.uint8)
        data[0, 0] = 255
        data[1, 1] = (51, 102, 204)
        Image.fromarray(data).save(tmp_path / "in.png")

        img = load_image(tmp_path / "in.png")
        assert img.dtype == np.float32 and img.shape == (2, 2, 3)
        assert img[0, 0].tolist() == [1.0, 1.0, 1.0]
        np.testing.assert_allclose(img[1, 1], [0.2, 0.4, 0.8], rtol=1e-6)

    def test_eight_bit_round_trip(self, tmp_path, rng):
        data = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
        Image.fromarray(data).save(tmp_path / "a.png")
        save_image(load_image(tmp_path / "a.png"), tmp_path / "b.png")
        assert np.array_equal(np.asarray(Image.open(tmp_path / "b.png")), data)

    def test_grayscale_source_becomes_rgb(self, tmp_path):
        Image.fromarray(np.full((3, 4), 128, dtype=np.uint8)).save(tmp_path / "g.png")
        img = load_image(tmp_path / "g.png", dtype=np.float64)
        assert img.shape == (3, 4, 3)
        assert np.all(img == 128 / 255)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageIOError, match="not found"):
            load_image(tmp_path / "missing.png")

    def test_not_an_image(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"definitely not a png")
        with pytest.raises(ImageIOError):
            load_image(path)

    def test_float_mode_rejected(self, tmp_path):
        Image.fromarray(np.zeros((4, 4), dtype=np.float32)).save(tmp_path / "f.tiff")
        with pytest.raises(ImageIOError, match="unsupported image mode"):
            load_image(tmp_path / "f.tiff")

    def test_save_needs_three_channels(self, tmp_path):
        with pytest.raises(ImageIOError):
            save_image(np.zeros((4, 4, 1)), tmp_path / "x.png")

    def test_unknown_extension(self, tmp_path):
        with pytest.raises(ImageIOError):
            save_image(np.zeros((4, 4, 3)), tmp_path / "x.notanext")

    def test_save_creates_parent_dirs(self, tmp_path):
        path = save_image(np.full((2, 2, 3), 0.5), tmp_path / "deep" / "dir" / "out.png")
        assert path.exists()


class TestGrayscale:
    def test_writes_single_channel(self, tmp_path):
        occ = np.array([[0.0, 0.5], [1.0, 0.25]]).reshape(2, 2, 1)
        path = save_grayscale(occ, tmp_path / "occ.png")
        with Image.open(path) as img:
            assert img.mode == "L"
            assert np.asarray(img).tolist() == [[0, 128], [255, 64]]

    def test_rejects_rgb(self, tmp_path):
        with pytest.raises(ImageIOError):
            save_grayscale(np.zeros((2, 2, 3)), tmp_path / "occ.png")
