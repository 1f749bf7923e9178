import gzip
import struct

import numpy as np
import pytest

from colonpipe import nifti
from colonpipe.errors import (
    InvalidLabelValue,
    MissingOrientation,
    UnreadableFile,
    UnsupportedFormat,
)
from colonpipe.volume import LabelMap, Volume


def make_header(
    shape,
    datatype,
    bitpix,
    pixdim=(1.0, 1.0, 1.0),
    srow=None,
    qform=None,
    scl=(1.0, 0.0),
    magic=b"n+1\x00",
    endian="<",
    ndim=3,
    extra_dim=1,
):
    """Craft raw NIfTI-1 header bytes field by field (test-side oracle)."""
    hdr = bytearray(348)
    struct.pack_into(f"{endian}i", hdr, 0, 348)
    dims = [ndim, *shape] + [1] * (7 - len(shape))
    if ndim > 3:
        dims[4] = extra_dim
    struct.pack_into(f"{endian}8h", hdr, 40, *dims)
    struct.pack_into(f"{endian}h", hdr, 70, datatype)
    struct.pack_into(f"{endian}h", hdr, 72, bitpix)
    struct.pack_into(f"{endian}8f", hdr, 76, 1.0, *pixdim, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into(f"{endian}f", hdr, 108, 352.0)
    struct.pack_into(f"{endian}2f", hdr, 112, *scl)
    qform_code = 1 if qform is not None else 0
    sform_code = 1 if srow is not None else 0
    struct.pack_into(f"{endian}2h", hdr, 252, qform_code, sform_code)
    if qform is not None:
        struct.pack_into(f"{endian}3f", hdr, 256, *qform)
    if srow is not None:
        for r in range(3):
            struct.pack_into(f"{endian}4f", hdr, 280 + 16 * r, *srow[r])
    hdr[344:348] = magic
    return bytes(hdr)


def make_file(path, arr, srow=None, qform=None, pixdim=(1.0, 1.0, 1.0),
              datatype=4, scl=(1.0, 0.0), endian="<", compress=False, **kwargs):
    dt = np.dtype({2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32,
                   64: np.float64, 256: np.int8, 512: np.uint16,
                   768: np.uint32}[datatype]).newbyteorder(endian)
    header = make_header(arr.shape, datatype, dt.itemsize * 8, pixdim=pixdim,
                         srow=srow, qform=qform, scl=scl, endian=endian, **kwargs)
    body = np.asfortranarray(arr.astype(dt)).tobytes(order="F")
    payload = header + b"\x00" * 4 + body
    if compress:
        payload = gzip.compress(payload)
    path.write_bytes(payload)
    return path


CANONICAL_SROW = [(1.0, 0, 0, 0), (0, -1.0, 0, 0), (0, 0, 1.0, 0)]


def test_volume_round_trip_identity(tmp_path, rng):
    values = rng.integers(-1000, 1000, size=(7, 6, 5)).astype(np.int16)
    v = Volume(values, (0.5, 0.75, 1.25))  # float32-exact spacings
    path = tmp_path / "v.nii.gz"
    nifti.write_volume(path, v)
    back = nifti.read_volume(path)
    assert back.shape == v.shape
    assert back.spacing == v.spacing
    assert np.array_equal(back.values, v.values)


def test_labelmap_round_trip_identity(tmp_path, rng):
    labels = rng.integers(0, 3, size=(6, 5, 4)).astype(np.uint8)
    lm = LabelMap(labels, (1.0, 1.0, 2.0))
    path = tmp_path / "l.nii.gz"
    nifti.write_labels(path, lm)
    back = nifti.read_labels(path)
    assert np.array_equal(back.labels, lm.labels)
    assert back.spacing == lm.spacing


def test_all_zero_labelmap_round_trip(tmp_path):
    lm = LabelMap(np.zeros((4, 4, 4), dtype=np.uint8), (1, 1, 1))
    path = tmp_path / "z.nii"
    nifti.write_labels(path, lm)
    assert nifti.read_labels(path).labels.sum() == 0


def test_gzip_detected_by_content_not_extension(tmp_path, rng):
    values = rng.integers(-100, 100, size=(3, 3, 3)).astype(np.int16)
    path = make_file(tmp_path / "misnamed.nii", values, srow=CANONICAL_SROW,
                     compress=True)
    assert np.array_equal(nifti.read_volume(path).values, values)


def test_plain_file_with_gz_name_reads(tmp_path, rng):
    values = rng.integers(-100, 100, size=(3, 3, 3)).astype(np.int16)
    path = make_file(tmp_path / "plain.nii.gz", values, srow=CANONICAL_SROW)
    assert np.array_equal(nifti.read_volume(path).values, values)


def test_flipped_z_storage_restored_to_ascending(tmp_path, rng):
    """Files stored superior-to-inferior must come back inferior-to-superior."""
    canonical = rng.integers(-1000, 400, size=(4, 5, 6)).astype(np.int16)
    stored = canonical[:, :, ::-1]
    # explicit index-remapping oracle: stored[x, y, k] sits at z = nz-1-k,
    # which the affine encodes with a negative z column
    srow = [(1.0, 0, 0, 0), (0, -1.0, 0, 0), (0, 0, -1.0, 5.0)]
    path = make_file(tmp_path / "flip.nii", stored, srow=srow)
    back = nifti.read_volume(path)
    assert np.array_equal(back.values, canonical)
    assert sorted(back.values.ravel()) == sorted(stored.ravel())


def test_permuted_axes_restored(tmp_path, rng):
    canonical = rng.integers(-50, 50, size=(4, 5, 6)).astype(np.int16)
    stored = np.transpose(canonical, (2, 1, 0))  # file stores (z, y, x)
    srow = [(0.0, 0, 1.0, 0), (0, -1.0, 0, 0), (1.0, 0, 0.0, 0)]
    path = make_file(tmp_path / "perm.nii", stored, srow=srow,
                     pixdim=(1.0, 1.0, 1.0))
    back = nifti.read_volume(path)
    assert np.array_equal(back.values, canonical)


def test_spacing_read_from_affine_columns(tmp_path, rng):
    values = rng.integers(0, 10, size=(3, 3, 3)).astype(np.int16)
    srow = [(0.5, 0, 0, 0), (0, -0.75, 0, 0), (0, 0, 1.25, 0)]
    path = make_file(tmp_path / "sp.nii", values, srow=srow)
    assert nifti.read_volume(path).spacing == (0.5, 0.75, 1.25)


def test_qform_fallback_identity_rotation(tmp_path, rng):
    values = rng.integers(0, 10, size=(3, 4, 5)).astype(np.int16)
    # b=c=d=0 means no rotation: +x, +y, +z columns; +y flips to canonical -y
    path = make_file(tmp_path / "q.nii", values[:, ::-1, :],
                     qform=(0.0, 0.0, 0.0), pixdim=(1.0, 1.0, 1.0))
    back = nifti.read_volume(path)
    assert np.array_equal(back.values, values)


def test_missing_orientation_raises(tmp_path, rng):
    values = rng.integers(0, 10, size=(3, 3, 3)).astype(np.int16)
    path = make_file(tmp_path / "no.nii", values)
    with pytest.raises(MissingOrientation):
        nifti.read_volume(path)


def test_oblique_orientation_rejected(tmp_path, rng):
    values = rng.integers(0, 10, size=(3, 3, 3)).astype(np.int16)
    s = 2 ** -0.5
    srow = [(s, s, 0, 0), (-s, s, 0, 0), (0, 0, 1.0, 0)]  # 45° in-plane
    path = make_file(tmp_path / "ob.nii", values, srow=srow)
    with pytest.raises(UnsupportedFormat):
        nifti.read_volume(path)


def test_truncated_file_unreadable(tmp_path, rng):
    values = rng.integers(0, 10, size=(6, 6, 6)).astype(np.int16)
    path = make_file(tmp_path / "t.nii", values, srow=CANONICAL_SROW)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(UnreadableFile):
        nifti.read_volume(path)
    path.write_bytes(data[:100])
    with pytest.raises(UnreadableFile):
        nifti.read_volume(path)


def test_corrupt_gzip_unreadable(tmp_path):
    path = tmp_path / "bad.nii.gz"
    path.write_bytes(b"\x1f\x8b" + b"garbage" * 10)
    with pytest.raises(UnreadableFile):
        nifti.read_volume(path)


def test_missing_file_unreadable(tmp_path):
    with pytest.raises(UnreadableFile):
        nifti.read_volume(tmp_path / "absent.nii")


def test_not_nifti_rejected(tmp_path):
    path = tmp_path / "x.nii"
    path.write_bytes(b"\x00" * 400)
    with pytest.raises(UnsupportedFormat):
        nifti.read_volume(path)


def test_two_file_pairs_rejected(tmp_path, rng):
    values = rng.integers(0, 10, size=(3, 3, 3)).astype(np.int16)
    path = make_file(tmp_path / "pair.nii", values, srow=CANONICAL_SROW,
                     magic=b"ni1\x00")
    with pytest.raises(UnsupportedFormat):
        nifti.read_volume(path)


def test_multi_volume_rejected(tmp_path, rng):
    values = rng.integers(0, 10, size=(3, 3, 3)).astype(np.int16)
    path = make_file(tmp_path / "4d.nii", values, srow=CANONICAL_SROW,
                     ndim=4, extra_dim=2)
    with pytest.raises(UnsupportedFormat):
        nifti.read_volume(path)


def test_unknown_datatype_rejected(tmp_path):
    hdr = make_header((2, 2, 2), datatype=1, bitpix=1, srow=CANONICAL_SROW)
    path = tmp_path / "dt.nii"
    path.write_bytes(hdr + b"\x00" * 4 + b"\x00" * 8)
    with pytest.raises(UnsupportedFormat):
        nifti.read_volume(path)


def test_big_endian_file_reads(tmp_path, rng):
    values = rng.integers(-300, 300, size=(3, 4, 5)).astype(np.int16)
    path = make_file(tmp_path / "be.nii", values, srow=CANONICAL_SROW, endian=">")
    assert np.array_equal(nifti.read_volume(path).values, values)


def test_scale_slope_intercept_applied(tmp_path):
    raw = np.arange(8, dtype=np.int16).reshape(2, 2, 2)
    path = make_file(tmp_path / "sc.nii", raw, srow=CANONICAL_SROW,
                     scl=(2.0, -5.0))
    back = nifti.read_volume(path)
    assert np.array_equal(back.values, raw * 2 - 5)


@pytest.mark.parametrize("datatype", [2, 8, 16, 64, 256, 512, 768])
def test_alternate_datatypes_read(tmp_path, rng, datatype):
    values = rng.integers(0, 100, size=(3, 3, 3))
    path = make_file(tmp_path / f"d{datatype}.nii", values, srow=CANONICAL_SROW,
                     datatype=datatype)
    assert np.array_equal(nifti.read_volume(path).values, values.astype(np.int16))


def test_read_labels_rejects_out_of_range_value(tmp_path):
    arr = np.full((2, 2, 2), 3, dtype=np.uint8)
    path = make_file(tmp_path / "l3.nii", arr, srow=CANONICAL_SROW, datatype=2)
    with pytest.raises(InvalidLabelValue):
        nifti.read_labels(path)


def test_write_volume_uses_int16_and_labels_uint8(tmp_path, rng):
    v = Volume(rng.integers(-10, 10, size=(3, 3, 3)).astype(np.int16), (1, 1, 1))
    lm = LabelMap(rng.integers(0, 3, size=(3, 3, 3)).astype(np.uint8), (1, 1, 1))
    vp, lp = tmp_path / "v.nii", tmp_path / "l.nii"
    nifti.write_volume(vp, v)
    nifti.write_labels(lp, lm)
    assert struct.unpack_from("<h", vp.read_bytes(), 70)[0] == 4
    assert struct.unpack_from("<h", lp.read_bytes(), 70)[0] == 2


def test_written_gz_output_is_deterministic(tmp_path, rng):
    v = Volume(rng.integers(-10, 10, size=(4, 4, 4)).astype(np.int16), (1, 1, 1))
    p1, p2 = tmp_path / "a.nii.gz", tmp_path / "b.nii.gz"
    nifti.write_volume(p1, v)
    nifti.write_volume(p2, v)
    assert p1.read_bytes() == p2.read_bytes()
