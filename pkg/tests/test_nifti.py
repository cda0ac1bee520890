import numpy as np
import pytest

from t1forge.errors import (
    BadMagic,
    GzipUnsupported,
    SliceOutOfRange,
    TruncatedFile,
    UnsupportedDatatype,
)
from t1forge.nifti import read_nifti
from t1forge.rawgrid import read_grid, write_grid

from oracles import build_nifti


def write(tmp_path, blob, name="img.nii"):
    p = tmp_path / name
    p.write_bytes(blob)
    return p


def body_f32(values):
    return np.asarray(values, dtype="<f4").tobytes()


class TestHeaderFields:
    def test_identity_scaling(self, tmp_path):
        vals = np.arange(16, dtype=np.float32).reshape(4, 4)
        p = write(tmp_path, build_nifti((4, 4), 16, body_f32(vals)))
        grid, meta = read_nifti(p)
        assert np.array_equal(grid.values, vals.astype(np.float64))
        assert meta["datatype"] == 16
        assert meta["magic"] == "n+1\x00"

    def test_slope_and_intercept_applied(self, tmp_path):
        # stored 0..15 with slope 2, inter 10 -> 10, 12, ..., 40
        # (frozen from an independent decode of the same header bytes)
        vals = np.arange(16, dtype=np.float32).reshape(4, 4)
        p = write(tmp_path, build_nifti((4, 4), 16, body_f32(vals),
                                        scl_slope=2.0, scl_inter=10.0))
        grid, _ = read_nifti(p)
        assert np.array_equal(grid.values, np.arange(10.0, 41.0, 2.0).reshape(4, 4))

    def test_zero_slope_means_raw_values(self, tmp_path):
        vals = np.arange(4, dtype=np.float32).reshape(2, 2)
        p = write(tmp_path, build_nifti((2, 2), 16, body_f32(vals), scl_slope=0.0,
                                        scl_inter=99.0))
        grid, _ = read_nifti(p)
        assert np.array_equal(grid.values, vals.astype(np.float64))

    def test_pixdim_becomes_spacing(self, tmp_path):
        p = write(tmp_path, build_nifti((2, 2), 16, body_f32(np.zeros((2, 2))),
                                        pixdim=(0.9, 1.1)))
        grid, _ = read_nifti(p)
        assert grid.spacing_x == pytest.approx(0.9, abs=1e-7)
        assert grid.spacing_y == pytest.approx(1.1, abs=1e-7)

    def test_vox_offset_honoured(self, tmp_path):
        vals = np.full((2, 2), 7, dtype=np.float32)
        p = write(tmp_path, build_nifti((2, 2), 16, body_f32(vals), vox_offset=352.0))
        grid, _ = read_nifti(p)
        assert np.array_equal(grid.values, vals.astype(np.float64))

    def test_big_endian_file(self, tmp_path):
        vals = np.arange(4, dtype=">f4").reshape(2, 2)
        p = write(tmp_path, build_nifti((2, 2), 16, vals.tobytes(), byte_order=">"))
        grid, meta = read_nifti(p)
        assert meta["byte_order"] == ">"
        assert np.array_equal(grid.values, vals.astype(np.float64))

    def test_int16_and_uint16_and_float64(self, tmp_path):
        for code, dtype in ((4, "<i2"), (512, "<u2"), (64, "<f8")):
            vals = np.arange(6).reshape(2, 3).astype(dtype)
            p = write(tmp_path, build_nifti((3, 2), code, vals.tobytes()),
                      name=f"d{code}.nii")
            grid, _ = read_nifti(p)
            assert np.array_equal(grid.values, vals.astype(np.float64))

    def test_row_column_layout(self, tmp_path):
        # nx=3 (fastest), ny=2 -> values reshape to 2 rows x 3 cols
        vals = np.arange(6, dtype=np.float32)
        p = write(tmp_path, build_nifti((3, 2), 16, body_f32(vals)))
        grid, _ = read_nifti(p)
        assert grid.values.shape == (2, 3)
        assert list(grid.values[0]) == [0.0, 1.0, 2.0]


class TestSlices:
    def test_3d_slice_selection(self, tmp_path):
        vol = np.stack([np.full((2, 2), k, dtype=np.float32) for k in range(3)])
        p = write(tmp_path, build_nifti((2, 2, 3), 16, vol.tobytes()))
        for k in range(3):
            grid, _ = read_nifti(p, slice_index=k)
            assert np.all(grid.values == k)

    def test_slice_out_of_range(self, tmp_path):
        vol = np.zeros((2, 2, 2), dtype=np.float32)
        p = write(tmp_path, build_nifti((2, 2, 2), 16, vol.tobytes()))
        with pytest.raises(SliceOutOfRange):
            read_nifti(p, slice_index=2)


class TestRejections:
    def test_two_file_magic_rejected(self, tmp_path):
        p = write(tmp_path, build_nifti((2, 2), 16, body_f32(np.zeros((2, 2))),
                                        magic=b"ni1\x00"))
        with pytest.raises(BadMagic):
            read_nifti(p)

    def test_garbage_magic_rejected(self, tmp_path):
        p = write(tmp_path, build_nifti((2, 2), 16, body_f32(np.zeros((2, 2))),
                                        magic=b"abcd"))
        with pytest.raises(BadMagic):
            read_nifti(p)

    def test_gzip_stream_rejected(self, tmp_path):
        import gzip
        blob = gzip.compress(build_nifti((2, 2), 16, body_f32(np.zeros((2, 2)))))
        with pytest.raises(GzipUnsupported):
            read_nifti(write(tmp_path, blob, name="img.nii"))

    def test_truncated_header(self, tmp_path):
        with pytest.raises(TruncatedFile):
            read_nifti(write(tmp_path, b"\x00" * 100))

    def test_truncated_body(self, tmp_path):
        blob = build_nifti((4, 4), 16, body_f32(np.zeros(8)))  # half the voxels
        with pytest.raises(TruncatedFile):
            read_nifti(write(tmp_path, blob))

    def test_unsupported_datatype(self, tmp_path):
        blob = build_nifti((2, 2), 2, np.zeros(4, dtype=np.uint8).tobytes())
        with pytest.raises(UnsupportedDatatype):
            read_nifti(write(tmp_path, blob))

    def test_unsupported_dimensionality(self, tmp_path):
        vol = np.zeros((2, 2, 2, 2), dtype=np.float32)
        blob = build_nifti((2, 2, 2, 2), 16, vol.tobytes())
        with pytest.raises(UnsupportedDatatype):
            read_nifti(write(tmp_path, blob))


class TestRoundTrip:
    def test_float32_bit_exact_through_raw_writer(self, tmp_path):
        rng = np.random.default_rng(0)
        vals = rng.random((5, 7)).astype(np.float32)
        p = write(tmp_path, build_nifti((7, 5), 16, vals.astype("<f4").tobytes(),
                                        pixdim=(0.9, 0.9)))
        grid, _ = read_nifti(p)
        raw = tmp_path / "grid.rawgrid"
        write_grid(raw, grid, dtype="float32")
        back = read_grid(raw)
        assert back.values.astype(np.float32).tobytes() == vals.tobytes()
        assert back.spacing_x == grid.spacing_x
