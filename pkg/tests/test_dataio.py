from __future__ import annotations

import gzip
import json

import numpy as np
import pytest

from gazeseg.dataio import (
    CaseRecord,
    builtin_corpus,
    corpus_from_records,
    decompose_structures,
    load_corpus_config,
    load_corpus_dir,
    load_manifest,
    slice_and_window,
    write_corpus_dir,
)
from gazeseg.errors import CorpusError, InvalidParam, InvalidWindow, ShapeMismatch
from gazeseg.nifti import Volume, parse_nifti, write_nifti
from test_nifti import build_fixture


def volume_from(arr_hwd: np.ndarray, dtype="int16") -> Volume:
    h, w, d = arr_hwd.shape
    return Volume(
        dims=(h, w, d),
        pixdim=(1.0, 1.0, 1.0),
        voxels=arr_hwd.astype(dtype),
        rescale=(0.0, 0.0),
        datatype=dtype,
    )


class TestWindowing:
    def test_center_maps_to_half(self):
        vol = volume_from(np.full((2, 2, 1), 40))
        (sl,) = slice_and_window(vol)
        assert (sl.intensities == 0.5).all()

    def test_clamping(self):
        vol = volume_from(np.array([[[-200], [240]], [[-160, ], [500]]]).reshape(2, 2, 1))
        (sl,) = slice_and_window(vol)
        assert sl.intensities[0, 0] == 0.0
        assert sl.intensities[0, 1] == 1.0
        assert sl.intensities[1, 0] == 0.0  # exactly at the lower edge
        assert sl.intensities[1, 1] == 1.0

    def test_two_slices_indexed(self):
        vol = volume_from(np.zeros((3, 3, 2)))
        slices = slice_and_window(vol, case_id="k")
        assert [s.slice_index for s in slices] == [0, 1]
        assert all(s.case_id == "k" for s in slices)

    def test_invalid_window(self):
        vol = volume_from(np.zeros((2, 2, 1)))
        with pytest.raises(InvalidWindow):
            slice_and_window(vol, window_width=0)

    def test_monotone_in_raw_value(self):
        raws = np.arange(-300, 400, 7)
        vol = volume_from(raws.reshape(1, -1, 1))
        (sl,) = slice_and_window(vol)
        vals = sl.intensities[0]
        assert (np.diff(vals) >= 0).all()

    def test_rescale_applied(self):
        vol = Volume(
            dims=(1, 1, 1), pixdim=(1, 1, 1),
            voxels=np.array([[[20]]], dtype="int16"),
            rescale=(2.0, 0.0), datatype="int16",
        )
        (sl,) = slice_and_window(vol)  # raw 20 * 2 = 40 = window center
        assert sl.intensities[0, 0] == 0.5


class TestDecompose:
    def test_two_separated_blobs(self):
        arr = np.zeros((30, 30), dtype=np.int32)
        arr[2:10, 2:10] = 5
        arr[18:28, 18:28] = 5
        masks = decompose_structures(arr, 5, min_area=10)
        assert len(masks) == 2
        assert masks[0].structure_label == "stomach"
        assert masks[0].bits[2, 2] == 1  # raster order: top-left first
        assert masks[1].bits[18, 18] == 1
        assert not (masks[0].bits & masks[1].bits).any()

    def test_single_blob_matches_threshold(self):
        arr = np.zeros((20, 20), dtype=np.int32)
        arr[4:12, 4:12] = 3
        (mask,) = decompose_structures(arr, 3, min_area=10)
        assert np.array_equal(mask.bits, (arr == 3).astype(np.uint8))

    def test_absent_organ(self):
        assert decompose_structures(np.zeros((5, 5), dtype=np.int32), 7) == []

    def test_min_area_filter(self):
        arr = np.zeros((20, 20), dtype=np.int32)
        arr[0, 0] = 2
        arr[5:15, 5:15] = 2
        masks = decompose_structures(arr, 2, min_area=50)
        assert len(masks) == 1
        assert masks[0].area() == 100

    def test_diagonal_neck_stays_whole(self):
        arr = np.zeros((10, 10), dtype=np.int32)
        arr[0:3, 0:3] = 1
        arr[3, 3] = 1  # touches only diagonally
        arr[4:7, 4:7] = 1
        masks = decompose_structures(arr, 1, min_area=1)
        assert len(masks) == 1  # 8-connected

    def test_organ_id_validated(self):
        with pytest.raises(InvalidParam):
            decompose_structures(np.zeros((4, 4), dtype=np.int32), 0)


class TestManifest:
    def make_volume_files(self, tmp_path):
        rng = np.random.default_rng(0)
        image = rng.integers(-100, 300, size=(3, 16, 16)).astype(np.int16)  # (nz, ny, nx)
        labels = np.zeros((3, 16, 16), dtype=np.int16)
        labels[1, 4:12, 4:12] = 1
        image_blob = build_fixture(dims=(16, 16, 3), payload=image.ravel())
        labels_blob = build_fixture(dims=(16, 16, 3), payload=labels.ravel())
        (tmp_path / "img.nii").write_bytes(image_blob)
        (tmp_path / "lab.nii.gz").write_bytes(gzip.compress(labels_blob))
        manifest = {"cases": [{"id": "c0", "image": "img.nii", "labels": "lab.nii.gz"}]}
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        return tmp_path / "manifest.json"

    def test_load_and_decompose(self, tmp_path):
        path = self.make_volume_files(tmp_path)
        records = load_manifest(path)
        assert len(records) == 1
        assert records[0].image.dims == (16, 16, 3)
        corpus = corpus_from_records(records, organ_ids=[1], min_area=10)
        assert len(corpus) == 1
        case = corpus[0]
        assert case.case_id == "c0_s1"
        assert case.structures[0].structure_label == "liver"
        assert case.structures[0].area() == 64

    def test_missing_file(self, tmp_path):
        (tmp_path / "manifest.json").write_text(json.dumps({"cases": [{"id": "x", "image": "nope.nii", "labels": "nope.nii"}]}))
        with pytest.raises(CorpusError):
            load_manifest(tmp_path / "manifest.json")

    def test_bad_document(self, tmp_path):
        (tmp_path / "manifest.json").write_text("[]")
        with pytest.raises(CorpusError):
            load_manifest(tmp_path / "manifest.json")

    def test_mismatched_dims_rejected(self):
        a = volume_from(np.zeros((4, 4, 2)))
        b = volume_from(np.zeros((4, 4, 3)))
        with pytest.raises(ShapeMismatch):
            CaseRecord(case_id="x", image=a, labels=b)


class TestCorpusDir:
    def test_round_trip(self, tmp_path):
        corpus = builtin_corpus("twolobe", cases=2)
        write_corpus_dir(tmp_path / "corpus", corpus)
        back = load_corpus_dir(tmp_path / "corpus")
        assert [c.case_id for c in back] == [c.case_id for c in corpus]
        for orig, loaded in zip(corpus, back):
            # masks are lossless; PNG images are 8-bit quantized
            for m0, m1 in zip(orig.structures, loaded.structures):
                assert m0.structure_label == m1.structure_label
                assert np.array_equal(m0.bits, m1.bits)
            q = np.round(orig.image.intensities * 255) / 255
            assert np.allclose(loaded.image.intensities, q, atol=1e-12)

    def test_missing_index(self, tmp_path):
        with pytest.raises(CorpusError):
            load_corpus_dir(tmp_path)


class TestCorpusConfig:
    def test_builtin(self):
        corpus = load_corpus_config({"kind": "builtin", "name": "twolobe", "cases": 3})
        assert len(corpus) == 3

    def test_builtin_is_deterministic(self):
        a = load_corpus_config({"kind": "builtin", "name": "default", "cases": 2})
        b = load_corpus_config({"kind": "builtin", "name": "default", "cases": 2})
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.image.intensities, cb.image.intensities)

    def test_phantom_specs(self):
        doc = {
            "kind": "phantoms",
            "specs": [
                {
                    "height": 40,
                    "width": 40,
                    "blobs": [{"center": [20, 20], "radii": [8, 8], "intensity": 0.7}],
                }
            ],
        }
        corpus = load_corpus_config(doc)
        assert len(corpus) == 1
        assert corpus[0].structures[0].area() > 0

    def test_unknown_kind(self):
        with pytest.raises(CorpusError):
            load_corpus_config({"kind": "nope"})
