import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harpia.errors import CorruptInputError, ParameterError, UnsupportedFormatError
from harpia.ledger import LEDGER
from harpia.volume import (
    Volume,
    VolumeMeta,
    crop_z,
    default_window,
    load_volume,
    read_slice,
    save_volume,
)


def roundtrip(tmp_path, volume, name="vol"):
    path = tmp_path / f"{name}.vol"
    save_volume(volume, path)
    return load_volume(path)


class TestIO:
    def test_identity_read(self, tmp_path):
        path = tmp_path / "tiny.vol"
        path.write_bytes(bytes(range(8)))
        (tmp_path / "tiny.vol.meta").write_text(
            VolumeMeta(dtype="uint8", shape=(2, 2, 2), spacing=(1, 1, 1)).to_text()
        )
        v = load_volume(path)
        assert v.data.ravel().tolist() == list(range(8))

    def test_size_mismatch_is_corrupt(self, tmp_path):
        path = tmp_path / "bad.vol"
        path.write_bytes(b"\x00" * 100)
        (tmp_path / "bad.vol.meta").write_text(
            VolumeMeta(dtype="float32", shape=(4, 4, 4), spacing=(1, 1, 1)).to_text()
        )
        with pytest.raises(CorruptInputError):
            load_volume(path)

    def test_unknown_dtype(self, tmp_path):
        path = tmp_path / "bad.vol"
        path.write_bytes(b"\x00" * 8)
        (tmp_path / "bad.vol.meta").write_text("dtype: int64\nshape: 2 2 2\nspacing: 1 1 1\n")
        with pytest.raises(UnsupportedFormatError):
            load_volume(path)

    def test_roundtrip_random_uint16(self, tmp_path, rng):
        data = rng.integers(0, 65536, size=(16, 16, 16), dtype=np.uint16)
        v = Volume(data, spacing=(0.5, 0.5, 2.0))
        back = roundtrip(tmp_path, v)
        assert np.array_equal(back.data, data)
        assert back.dtype == np.uint16
        assert back.spacing == (0.5, 0.5, 2.0)

    def test_roundtrip_zeros(self, tmp_path):
        v = Volume(np.zeros((8, 8, 8), dtype=np.uint8))
        back = roundtrip(tmp_path, v)
        assert np.array_equal(back.data, v.data)

    def test_roundtrip_float32(self, tmp_path, rng):
        v = Volume(rng.random((4, 5, 6)).astype(np.float32))
        back = roundtrip(tmp_path, v)
        assert np.array_equal(back.data, v.data)
        assert back.shape == (4, 5, 6)

    def test_save_to_unwritable_path(self, tmp_path):
        v = Volume(np.zeros((2, 2, 2), dtype=np.uint8))
        with pytest.raises(OSError):
            save_volume(v, tmp_path / "missing-dir" / "x.vol")

    def test_meta_text_roundtrip(self):
        meta = VolumeMeta(
            dtype="uint16", shape=(3, 4, 5), spacing=(0.25, 1.5, 2.0), description="test scan"
        )
        back = VolumeMeta.from_text(meta.to_text())
        assert back == meta


class TestInvariants:
    def test_spacing_must_be_positive(self):
        with pytest.raises(ParameterError):
            Volume(np.zeros((2, 2, 2), dtype=np.uint8), spacing=(1.0, 0.0, 1.0))

    def test_unsupported_array_dtype(self):
        with pytest.raises(UnsupportedFormatError):
            Volume(np.zeros((2, 2, 2), dtype=np.int64))


class TestReadSlice:
    def test_lower_clamp(self):
        v = Volume(np.full((4, 4, 4), 10, dtype=np.uint8))
        assert (read_slice(v, "z", 0, (10, 200)) == 0).all()

    def test_upper_clamp(self):
        v = Volume(np.full((4, 4, 4), 200, dtype=np.uint8))
        assert (read_slice(v, "z", 1, (10, 200)) == 255).all()

    def test_pointwise_oracle(self, rng):
        data = rng.random((8, 8, 8)).astype(np.float32)
        v = Volume(data)
        for axis, ax in (("z", 0), ("y", 1), ("x", 2)):
            got = read_slice(v, axis, 3, (0.0, 1.0))
            plane = np.take(data, 3, axis=ax).astype(np.float64)
            expected = np.clip(np.rint(255.0 * plane), 0, 255).astype(np.uint8)
            assert np.array_equal(got, expected)

    def test_out_of_range_index(self):
        v = Volume(np.zeros((4, 4, 4), dtype=np.uint8))
        with pytest.raises(IndexError):
            read_slice(v, "z", 4, (0, 1))

    @given(st.integers(0, 255), st.integers(0, 255))
    @settings(max_examples=30, deadline=None)
    def test_windowing_monotone(self, a, b):
        lo, hi = 20.0, 200.0
        va = Volume(np.full((1, 1, 1), a, dtype=np.uint8))
        vb = Volume(np.full((1, 1, 1), b, dtype=np.uint8))
        pa = read_slice(va, "z", 0, (lo, hi))[0, 0]
        pb = read_slice(vb, "z", 0, (lo, hi))[0, 0]
        if a <= b:
            assert pa <= pb
        else:
            assert pa >= pb

    def test_default_window_constant(self):
        v = Volume(np.full((4, 4, 4), 7, dtype=np.uint8))
        lo, hi = default_window(v)
        assert lo == 7 and hi > lo


class TestLedger:
    def test_charge_release_conserves(self):
        LEDGER.job_start()
        base = LEDGER.snapshot().baseline_bytes
        LEDGER.charge(1 << 20)
        snap = LEDGER.snapshot()
        assert snap.peak_bytes >= base + (1 << 20)
        LEDGER.release(1 << 20)
        snap = LEDGER.snapshot()
        assert snap.current_bytes == base
        assert snap.peak_bytes >= snap.current_bytes

    def test_peak_monotone_within_job(self):
        LEDGER.job_start()
        peaks = []
        for n in (100, 50, 200, 10):
            LEDGER.charge(n)
            peaks.append(LEDGER.snapshot().peak_bytes)
            LEDGER.release(n)
        assert peaks == sorted(peaks)


class TestCrop:
    def test_full_range_is_copy(self, small_volume):
        v = Volume(small_volume)
        c = crop_z(v, 0, v.shape[0])
        assert np.array_equal(c.data, v.data)

    def test_first_slice(self, small_volume):
        v = Volume(small_volume)
        c = crop_z(v, 0, 1)
        assert np.array_equal(c.data[0], v.data[0])
        assert c.shape == (1, 24, 24)

    def test_crop_composition(self, small_volume):
        v = Volume(small_volume)
        a = crop_z(crop_z(v, 4, 20), 2, 10)
        b = crop_z(v, 6, 14)
        assert np.array_equal(a.data, b.data)
