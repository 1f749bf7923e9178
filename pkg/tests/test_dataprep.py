import json

import numpy as np
import pytest
from PIL import Image

from colonpipe.config import PipelineConfig
from colonpipe.dataprep import (
    MASK_FILL_HU,
    TEST,
    TRAIN,
    export_annotation_slices,
    export_training_layout,
    load_split,
    prepare_masked_image,
    save_split,
    stratified_split,
)
from colonpipe.errors import DimsMismatch, MissingLabel, NoAirSlices
from colonpipe.nifti import read_array, write_array, write_labels, write_volume
from colonpipe.records import ExclusionReason, Gender, Position, ScanRecord, ScanStatus
from colonpipe.volume import LabelMap, Mask, Volume
from oracles import brute_dilate

CFG = PipelineConfig()
SP = (1.0, 1.0, 1.0)


# ------------------------------------------------------------- masked volumes

def test_masked_image_keeps_dilated_region_exactly(rng):
    values = rng.integers(-1000, 400, size=(20, 20, 20)).astype(np.int16)
    volume = Volume(values, SP)
    coarse = np.zeros((20, 20, 20), dtype=bool)
    coarse[10, 10, 10] = True
    cfg = CFG.replace(mask_dilation_voxels=3.0)
    out = prepare_masked_image(volume, Mask(coarse, SP), cfg)
    keep = brute_dilate(coarse, 3.0)
    assert (out.values[keep] == values[keep]).all()
    assert (out.values[~keep] == MASK_FILL_HU).all()
    assert out.spacing == volume.spacing


def test_masked_image_empty_mask_blanks_everything():
    volume = Volume(np.full((6, 6, 6), 100, dtype=np.int16), SP)
    empty = Mask(np.zeros((6, 6, 6), dtype=bool), SP)
    out = prepare_masked_image(volume, empty, CFG)
    assert (out.values == MASK_FILL_HU).all()


def test_masked_image_shape_mismatch():
    volume = Volume(np.zeros((4, 4, 4), dtype=np.int16), SP)
    coarse = Mask(np.zeros((4, 4, 5), dtype=bool), SP)
    with pytest.raises(DimsMismatch):
        prepare_masked_image(volume, coarse, CFG)


# ---------------------------------------------------------- annotation slices

def slice_scene(air_z, shape=(16, 12, 20)):
    values = np.zeros(shape, dtype=np.int16)
    air = np.zeros(shape, dtype=bool)
    for z in air_z:
        air[4:8, 4:8, z] = True
        values[4:8, 4:8, z] = -1000
    return Volume(values, SP), Mask(air, SP)


def export_cfg(per_scan=3, size=32):
    return CFG.replace(slices_per_scan=per_scan, export_size_px=size)


def test_slice_export_picks_only_air_bearing_slices(tmp_path):
    volume, air = slice_scene([2, 5, 7, 9, 13, 17])
    cfg = export_cfg()
    out = export_annotation_slices(volume, air, cfg, 7, tmp_path, "scanA")
    assert len(out.z_indices) == 3
    assert out.z_indices == sorted(out.z_indices)
    assert set(out.z_indices) <= {2, 5, 7, 9, 13, 17}
    assert out.warning is None
    for z, path in zip(out.z_indices, out.paths):
        assert path.name == f"scanA_z{z}.png"
        with Image.open(path) as img:
            assert img.size == (32, 32) and img.mode == "L"


def test_slice_export_seed_determinism(tmp_path):
    volume, air = slice_scene([2, 5, 7, 9, 13, 17])
    cfg = export_cfg()
    a = export_annotation_slices(volume, air, cfg, 11, tmp_path / "a", "s")
    b = export_annotation_slices(volume, air, cfg, 11, tmp_path / "b", "s")
    assert a.z_indices == b.z_indices


def test_slice_export_warns_when_short(tmp_path):
    volume, air = slice_scene([4, 9])
    out = export_annotation_slices(volume, air, export_cfg(5), 3, tmp_path, "s")
    assert out.z_indices == [4, 9]
    assert "only 2" in out.warning


def test_slice_export_no_air_slices(tmp_path):
    volume, air = slice_scene([])
    with pytest.raises(NoAirSlices):
        export_annotation_slices(volume, air, export_cfg(), 3, tmp_path, "s")


def test_slice_export_shape_mismatch(tmp_path):
    volume, _ = slice_scene([3])
    air = Mask(np.zeros((16, 12, 21), dtype=bool), SP)
    with pytest.raises(DimsMismatch):
        export_annotation_slices(volume, air, export_cfg(), 3, tmp_path, "s")


# ------------------------------------------------------------------- splitting

def make_records(rows):
    """rows: list of (scan_id, gender, position, status)."""
    records = []
    for scan_id, gender, position, status in rows:
        rec = ScanRecord(scan_id, position=position, gender=gender)
        if status is ScanStatus.INCLUDED:
            rec.mark_included()
        elif status is ScanStatus.EXCLUDED:
            rec.mark_excluded(ExclusionReason.SEED_NOT_FOUND)
        records.append(rec)
    return records


def included(n, gender=Gender.FEMALE, position=Position.SUPINE, prefix="s"):
    return make_records(
        [(f"{prefix}{i:04d}", gender, position, ScanStatus.INCLUDED) for i in range(n)]
    )


def test_split_two_to_one_among_three():
    records = included(3)
    split = stratified_split(records, CFG, 5)
    assert sorted(split.values()).count(TRAIN) == 2
    assert sorted(split.values()).count(TEST) == 1
    assert set(split) == {r.scan_id for r in records}


def test_split_roster_290_145():
    records = included(435)
    split = stratified_split(records, CFG, 99)
    counts = list(split.values())
    assert counts.count(TRAIN) == 290 and counts.count(TEST) == 145


def test_split_per_stratum_within_half_scan_of_fraction(rng):
    for seed in range(5):
        strata = [
            (Gender.FEMALE, Position.SUPINE, int(rng.integers(1, 40))),
            (Gender.FEMALE, Position.PRONE, int(rng.integers(1, 40))),
            (Gender.MALE, Position.SUPINE, int(rng.integers(1, 40))),
            (Gender.MALE, None, int(rng.integers(1, 40))),
        ]
        records = []
        for i, (gender, position, n) in enumerate(strata):
            records += included(n, gender, position, prefix=f"g{i}x")
        split = stratified_split(records, CFG, seed)
        for i, (gender, position, n) in enumerate(strata):
            ids = [r.scan_id for r in records if r.scan_id.startswith(f"g{i}x")]
            n_train = sum(split[s] == TRAIN for s in ids)
            assert abs(n_train - n * CFG.train_fraction) <= 0.5 + 1e-9


def test_split_ignores_non_included():
    records = included(4)
    records[1].mark_excluded(None)
    pending = ScanRecord("p1", gender=Gender.MALE)
    split = stratified_split(records + [pending], CFG, 1)
    assert records[1].scan_id not in split
    assert "p1" not in split


def test_split_deterministic_and_seed_sensitive():
    records = included(30)
    a = stratified_split(records, CFG, 42)
    b = stratified_split(records, CFG, 42)
    assert a == b


def test_split_empty_records():
    assert stratified_split([], CFG, 0) == {}


def test_split_save_load_round_trip(tmp_path):
    split = {"b": TEST, "a": TRAIN}
    path = tmp_path / "split.json"
    save_split(split, path)
    assert load_split(path) == split
    assert json.loads(path.read_text()) == {"a": TRAIN, "b": TEST}


# ------------------------------------------------------------ training layout

def write_scan(tmp_path, scan_id, with_labels=True):
    shape = (8, 8, 10)
    values = np.full(shape, 40, dtype=np.int16)
    values[2:6, 2:6, 2:8] = -1000
    labels = np.zeros(shape, dtype=np.uint8)
    labels[2:6, 2:6, 2:8] = 1
    labels[3:5, 3:5, 3:5] = 2
    image_path = tmp_path / f"{scan_id}.nii.gz"
    write_volume(image_path, Volume(values, SP))
    rec = ScanRecord(scan_id, gender=Gender.FEMALE, position=Position.SUPINE)
    rec.mark_included()
    rec.paths["image"] = str(image_path)
    if with_labels:
        labels_path = tmp_path / f"{scan_id}_labels.nii.gz"
        write_labels(labels_path, LabelMap(labels, SP))
        rec.paths["labels"] = str(labels_path)
    return rec, labels


def test_training_layout_files_and_descriptor(tmp_path):
    rec_a, labels_a = write_scan(tmp_path, "a")
    rec_b, _ = write_scan(tmp_path, "b")
    out = tmp_path / "layout"
    layout = export_training_layout(
        [rec_a, rec_b], {"a": TRAIN, "b": TEST}, out, target="air"
    )
    assert layout.n_train == 1 and layout.n_test == 1
    assert (out / "imagesTr" / "a_0000.nii.gz").exists()
    assert (out / "labelsTr" / "a.nii.gz").exists()
    assert (out / "imagesTs" / "b_0000.nii.gz").exists()
    descriptor = json.loads((out / "dataset.json").read_text())
    assert descriptor["numTraining"] == 1
    assert descriptor["labels"] == {"background": 0, "air": 1}
    assert descriptor["channel_names"] == {"0": "CT"}
    assert descriptor["file_ending"] == ".nii.gz"
    written, _ = read_array(out / "labelsTr" / "a.nii.gz")
    assert set(np.unique(written)) <= {0, 1}
    assert np.array_equal(written == 1, labels_a == 1)  # fluid dropped


def test_training_layout_full_merged_and_separate(tmp_path):
    rec, labels = write_scan(tmp_path, "a")
    merged_dir = tmp_path / "merged"
    export_training_layout([rec], {"a": TRAIN}, merged_dir, target="full")
    written, _ = read_array(merged_dir / "labelsTr" / "a.nii.gz")
    assert np.array_equal(written != 0, labels != 0)
    assert set(np.unique(written)) <= {0, 1}
    descriptor = json.loads((merged_dir / "dataset.json").read_text())
    assert descriptor["labels"] == {"background": 0, "colon": 1}

    sep_dir = tmp_path / "separate"
    export_training_layout(
        [rec], {"a": TRAIN}, sep_dir, target="full", separate_classes=True
    )
    written, _ = read_array(sep_dir / "labelsTr" / "a.nii.gz")
    assert np.array_equal(written, labels)
    descriptor = json.loads((sep_dir / "dataset.json").read_text())
    assert descriptor["labels"] == {"background": 0, "air": 1, "fluid": 2}


def test_training_layout_missing_label_raises(tmp_path):
    rec, _ = write_scan(tmp_path, "a", with_labels=False)
    with pytest.raises(MissingLabel):
        export_training_layout([rec], {"a": TRAIN}, tmp_path / "out")
    # test-side scans need no labels
    layout = export_training_layout([rec], {"a": TEST}, tmp_path / "out2")
    assert layout.n_test == 1


def test_training_layout_skips_rejected_scans(tmp_path):
    rec_a, _ = write_scan(tmp_path, "a")
    rec_b, _ = write_scan(tmp_path, "b")
    rec_b.mark_excluded(None)
    out = tmp_path / "layout"
    layout = export_training_layout(
        [rec_a, rec_b], {"a": TRAIN, "b": TRAIN}, out
    )
    assert layout.n_train == 1
    assert not (out / "imagesTr" / "b_0000.nii.gz").exists()
