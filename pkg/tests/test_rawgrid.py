import numpy as np
import pytest

from t1forge.errors import FormatError
from t1forge.imaging import ImageGrid, LabelMask
from t1forge.rawgrid import read_array, read_grid, read_mask, write_grid, write_mask


def grid(vals, sx=0.9, sy=1.1):
    return ImageGrid(values=np.asarray(vals, dtype=np.float64), spacing_x=sx, spacing_y=sy)


class TestRoundTrips:
    def test_float64_base64(self, tmp_path):
        rng = np.random.default_rng(1)
        g = grid(rng.normal(900, 60, (6, 5)))
        p = tmp_path / "g.rawgrid"
        write_grid(p, g, dtype="float64")
        back = read_grid(p)
        assert back.values.tobytes() == g.values.tobytes()
        assert (back.spacing_x, back.spacing_y) == (0.9, 1.1)

    def test_float32_base64(self, tmp_path):
        vals = np.random.default_rng(2).random((4, 4)).astype(np.float32)
        g = grid(vals)
        p = tmp_path / "g.rawgrid"
        write_grid(p, g, dtype="float32")
        back, header = read_array(p)
        assert header["dtype"] == "float32"
        assert back.tobytes() == vals.astype("<f4").tobytes()

    def test_float64_csv(self, tmp_path):
        g = grid([[1.25, -3.5e-4], [900.125, 0.1]])
        p = tmp_path / "g.rawgrid"
        write_grid(p, g, dtype="float64", encoding="csv")
        back = read_grid(p)
        assert np.array_equal(back.values, g.values)

    def test_mask_base64_and_csv(self, tmp_path):
        labels = np.random.default_rng(3).integers(0, 4, (8, 8)).astype(np.uint8)
        mask = LabelMask(labels=labels)
        for enc in ("base64", "csv"):
            p = tmp_path / f"m_{enc}.rawgrid"
            write_mask(p, mask, encoding=enc)
            back = read_mask(p)
            assert np.array_equal(back.labels, labels)


class TestErrors:
    def test_missing_body(self, tmp_path):
        p = tmp_path / "bad.rawgrid"
        p.write_text('{"width": 2, "height": 2, "dtype": "uint8", "encoding": "base64"}')
        with pytest.raises(FormatError):
            read_array(p)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.rawgrid"
        p.write_text("not json\nAAAA\n")
        with pytest.raises(FormatError):
            read_array(p)

    def test_wrong_body_size(self, tmp_path):
        p = tmp_path / "bad.rawgrid"
        p.write_text('{"width": 3, "height": 3, "dtype": "uint8", "encoding": "base64"}\nAAAA\n')
        with pytest.raises(FormatError):
            read_array(p)

    def test_missing_header_key(self, tmp_path):
        p = tmp_path / "bad.rawgrid"
        p.write_text('{"width": 2, "height": 2, "dtype": "uint8"}\nAAAA\n')
        with pytest.raises(FormatError):
            read_array(p)

    def test_unknown_dtype(self, tmp_path):
        p = tmp_path / "bad.rawgrid"
        p.write_text('{"width": 2, "height": 2, "dtype": "int64", "encoding": "base64"}\nAAAA\n')
        with pytest.raises(FormatError):
            read_array(p)

    def test_csv_row_count_mismatch(self, tmp_path):
        p = tmp_path / "bad.rawgrid"
        p.write_text('{"width": 2, "height": 3, "dtype": "uint8", "encoding": "csv"}\n1,2\n3,4\n')
        with pytest.raises(FormatError):
            read_array(p)
