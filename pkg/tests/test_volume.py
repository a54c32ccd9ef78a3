import numpy as np
import pytest

from cardiomr.volume import (
    LabelSchema,
    LabelVolume,
    ScalarVolume,
    VolumeFormatError,
    VolumeSizeError,
    crop_patch,
    load_volume,
    normalize_slicewise,
    pad_or_center_crop,
    save_volume,
)


def write_raw(path, ndims, dims, spacing, etype, payload: bytes):
    header = (
        f"NDims = {ndims}\n"
        f"DimSize = {' '.join(str(d) for d in dims)}\n"
        f"ElementSpacing = {' '.join(str(s) for s in spacing)}\n"
        f"ElementType = {etype}\n"
        "ElementDataFile = LOCAL\n\n"
    )
    path.write_bytes(header.encode() + payload)


class TestLoadSave:
    def test_small_file_x_fastest_order(self, tmp_path):
        payload = np.array([0, 1, 2, 3], dtype="<f4").tobytes()
        f = tmp_path / "v.vol"
        write_raw(f, 4, (2, 2, 1, 1), (1, 1, 1, 1), "FLOAT32", payload)
        vol = load_volume(f, "scalar")
        assert vol.data[0, 0, 0, 0] == 0
        assert vol.data[1, 0, 0, 0] == 1
        assert vol.data[0, 1, 0, 0] == 2
        assert vol.data[1, 1, 0, 0] == 3

    def test_payload_size_mismatch(self, tmp_path):
        payload = np.zeros(100, dtype="<f4").tobytes()
        f = tmp_path / "v.vol"
        write_raw(f, 4, (4, 3, 2, 5), (1, 1, 1, 1), "FLOAT32", payload)
        with pytest.raises(VolumeSizeError, match="400 bytes, expected 480"):
            load_volume(f, "scalar")

    def test_roundtrip_random_volume_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.random((16, 16, 8, 20)).astype(np.float32)
        vol = ScalarVolume(data=data, spacing=(1.5, 1.5, 8.0, 1.0))
        f = tmp_path / "v.vol"
        save_volume(vol, f)
        back = load_volume(f, "scalar")
        assert np.array_equal(back.data, data)
        assert back.spacing == vol.spacing

    def test_save_load_save_reproduces_payload_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.random((5, 4, 3, 2)).astype(np.float32)
        f1, f2 = tmp_path / "a.vol", tmp_path / "b.vol"
        save_volume(ScalarVolume(data=data), f1)
        save_volume(load_volume(f1, "scalar"), f2)
        payload1 = f1.read_bytes().split(b"\n\n", 1)[1]
        payload2 = f2.read_bytes().split(b"\n\n", 1)[1]
        assert payload1 == payload2

    def test_label_roundtrip_with_3d_dims(self, tmp_path):
        rng = np.random.default_rng(2)
        data = rng.integers(0, 4, (6, 5, 4)).astype(np.uint8)
        f = tmp_path / "l.vol"
        save_volume(LabelVolume(data=data, spacing=(1.0, 1.0, 5.0)), f)
        back = load_volume(f, "label")
        assert np.array_equal(back.data, data)

    def test_missing_or_misordered_key_names_offender(self, tmp_path):
        f = tmp_path / "bad.vol"
        f.write_bytes(b"NDims = 3\nDimSize = 1 1 1\nElementType = UINT8\n"
                      b"ElementSpacing = 1 1 1\nElementDataFile = LOCAL\n\n\x00")
        with pytest.raises(VolumeFormatError, match="ElementSpacing|ElementType"):
            load_volume(f, "label")

    def test_bad_element_type(self, tmp_path):
        f = tmp_path / "bad.vol"
        write_raw(f, 3, (1, 1, 1), (1, 1, 1), "INT16", b"\x00\x00")
        with pytest.raises(VolumeFormatError, match="ElementType"):
            load_volume(f, "label")

    def test_missing_blank_line(self, tmp_path):
        f = tmp_path / "bad.vol"
        f.write_bytes(b"NDims = 3\nDimSize = 1 1 1\n")
        with pytest.raises(VolumeFormatError, match="blank line"):
            load_volume(f, "scalar")

    def test_kind_dtype_mismatch(self, tmp_path):
        f = tmp_path / "v.vol"
        write_raw(f, 3, (1, 1, 1), (1, 1, 1), "UINT8", b"\x01")
        with pytest.raises(VolumeFormatError, match="FLOAT32"):
            load_volume(f, "scalar")


class TestTypes:
    def test_scalar_requires_positive_spacing(self):
        with pytest.raises(ValueError, match="spacing"):
            ScalarVolume(data=np.zeros((2, 2, 1, 1)), spacing=(1, 0, 1, 1))

    def test_scalar_rejects_non_finite(self):
        data = np.zeros((2, 2, 1, 1))
        data[0, 0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            ScalarVolume(data=data)

    def test_label_rejects_out_of_schema_values(self):
        with pytest.raises(ValueError, match="not in the schema"):
            LabelVolume(data=np.full((2, 2, 1), 7, dtype=np.uint8))

    def test_schema_requires_background_and_unique_ids(self):
        with pytest.raises(ValueError):
            LabelSchema(entries=((1, "A"), (1, "B")))
        with pytest.raises(ValueError):
            LabelSchema(entries=((1, "A"), (2, "B")))

    def test_volumes_are_immutable(self):
        vol = ScalarVolume(data=np.zeros((2, 2, 1, 1)))
        with pytest.raises(ValueError):
            vol.data[0, 0, 0, 0] = 1.0


class TestNormalize:
    def test_direct_evaluation(self):
        data = np.array([2.0, 4.0, 6.0]).reshape(3, 1, 1, 1)
        out = normalize_slicewise(ScalarVolume(data=data))
        assert np.allclose(out.data[:, 0, 0, 0], [0.0, 0.5, 1.0])

    def test_constant_slice_goes_to_zero(self):
        out = normalize_slicewise(ScalarVolume(data=np.full((3, 2, 1, 1), 5.0)))
        assert np.all(out.data == 0.0)

    def test_unit_range_slice_is_fixed_point(self):
        data = np.array([0.0, 1.0]).reshape(2, 1, 1, 1)
        out = normalize_slicewise(ScalarVolume(data=data))
        assert np.array_equal(out.data, data.astype(np.float32))

    def test_slices_normalized_independently(self):
        rng = np.random.default_rng(3)
        data = rng.random((6, 6, 3, 4)).astype(np.float32) * 50 + 7
        out = normalize_slicewise(ScalarVolume(data=data))
        for z in range(3):
            for t in range(4):
                sl = out.data[:, :, z, t]
                assert sl.min() == 0.0 and sl.max() == 1.0

    def test_idempotent_on_normalized_slices(self):
        rng = np.random.default_rng(4)
        data = rng.random((5, 5, 2, 2)).astype(np.float32)
        once = normalize_slicewise(ScalarVolume(data=data))
        twice = normalize_slicewise(once)
        assert np.allclose(once.data, twice.data, atol=1e-7)


class TestCropPatch:
    def _vol(self):
        data = np.arange(16, dtype=np.float32).reshape(4, 4, order="F")
        return ScalarVolume(data=data[:, :, np.newaxis, np.newaxis])

    def test_interior_window(self):
        patch = crop_patch(self._vol(), center=(1, 1), size=(2, 2))
        assert np.array_equal(patch.data[:, :, 0, 0], self._vol().data[0:2, 0:2, 0, 0])

    def test_corner_center_pads_three_quadrants(self):
        patch = crop_patch(self._vol(), center=(0, 0), size=(4, 4))
        out = patch.data[:, :, 0, 0]
        assert np.all(out[:2, :] == 0)
        assert np.all(out[:, :2] == 0)
        assert np.array_equal(out[2:, 2:], self._vol().data[0:2, 0:2, 0, 0])

    def test_full_size_center_is_identity(self):
        patch = crop_patch(self._vol(), center=(2, 2), size=(4, 4))
        assert np.array_equal(patch.data, self._vol().data)

    def test_center_outside_grid_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            crop_patch(self._vol(), center=(4, 0), size=(2, 2))

    def test_label_patch_pads_with_background(self):
        lbl = LabelVolume(data=np.full((3, 3, 1), 2, dtype=np.uint8))
        patch = crop_patch(lbl, center=(0, 0), size=(3, 3))
        assert patch.data[0, 0, 0] == 0
        assert patch.data[2, 2, 0] == 2

    def test_reembedding_reproduces_window(self):
        rng = np.random.default_rng(5)
        vol = ScalarVolume(data=rng.random((12, 12, 1, 1)).astype(np.float32))
        patch = crop_patch(vol, center=(6, 5), size=(4, 4))
        x0, y0 = 6 - 2, 5 - 2
        assert np.array_equal(
            patch.data[:, :, 0, 0], vol.data[x0:x0 + 4, y0:y0 + 4, 0, 0]
        )


class TestPadOrCenterCrop:
    def test_pad_small_to_large(self):
        vol = ScalarVolume(data=np.ones((128, 128, 1, 1), dtype=np.float32))
        out = pad_or_center_crop(vol, (256, 256))
        assert out.dims[:2] == (256, 256)
        assert np.all(out.data[64:192, 64:192] == 1)
        assert out.data[:64].sum() == 0 and out.data[192:].sum() == 0

    def test_crop_large_to_small(self):
        data = np.zeros((300, 300, 1, 1), dtype=np.float32)
        data[22:278, 22:278] = 1
        out = pad_or_center_crop(ScalarVolume(data=data), (256, 256))
        assert out.dims[:2] == (256, 256)
        assert np.all(out.data == 1)

    def test_identity_when_target_matches(self):
        rng = np.random.default_rng(6)
        vol = ScalarVolume(data=rng.random((10, 12, 1, 1)).astype(np.float32))
        out = pad_or_center_crop(vol, (10, 12))
        assert np.array_equal(out.data, vol.data)

    def test_crop_inverts_pad(self):
        rng = np.random.default_rng(7)
        vol = ScalarVolume(data=rng.random((9, 11, 2, 1)).astype(np.float32))
        big = pad_or_center_crop(vol, (20, 23))
        back = pad_or_center_crop(big, (9, 11))
        assert np.array_equal(back.data, vol.data)
