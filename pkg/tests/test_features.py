import logging

import numpy as np
import pytest

from src.data.features import (
    annotations_path, check_dims, load_features, read_annotations, read_feature_blobs,
    write_features
)
from src.data.segment import Segment
from src.data.synthetic import SyntheticConfig, gen_dataset
from src.utils.errors import DimensionError, ParseError


@pytest.fixture
def segments():
    return gen_dataset(SyntheticConfig(grid_h=2, grid_w=2, feature_dim=8, num_verbs=3, num_nouns=2), 5)


@pytest.fixture
def feature_file(tmp_path, segments):
    return write_features(tmp_path / "data" / "train.urmf", segments)


def test_round_trip(feature_file, segments):
    assert annotations_path(feature_file).exists()
    loaded = load_features(feature_file)
    assert [s.segment_id for s in loaded] == [s.segment_id for s in segments]
    for original, restored in zip(segments, loaded):
        np.testing.assert_array_equal(restored.frames, original.frames)
        assert restored.labels == original.labels
        assert restored.t_start_s == original.t_start_s


def test_header_bytes(feature_file):
    raw = feature_file.read_bytes()
    assert raw[:4] == b"URMF"
    assert int.from_bytes(raw[4:8], "little") == 1
    assert int.from_bytes(raw[8:12], "little") == 5


def test_truncated_payload(feature_file):
    raw = feature_file.read_bytes()
    feature_file.write_bytes(raw[:-7])
    with pytest.raises(ParseError) as info:
        read_feature_blobs(feature_file)
    assert info.value.offset is not None
    assert "truncated" in str(info.value)


def test_mismatched_grid_reports_the_dims_offset(tmp_path, segments):
    odd = Segment("odd", np.zeros((16, 3, 8), np.float32), 3.5, 0, 0, 0)
    path = write_features(tmp_path / "mixed.urmf", segments + [odd])
    expected = 12 + sum(2 + len(s.segment_id) + 12 + s.frames.size * 4 for s in segments) + 2 + 3
    with pytest.raises(ParseError) as info:
        read_feature_blobs(path)
    assert info.value.offset == expected
    assert "(N, C_in)" in str(info.value)
    with pytest.raises(ParseError):
        load_features(path)


def test_bad_magic(feature_file):
    feature_file.write_bytes(b"XXXX" + feature_file.read_bytes()[4:])
    with pytest.raises(ParseError) as info:
        read_feature_blobs(feature_file)
    assert info.value.offset == 0


def test_trailing_bytes(feature_file):
    feature_file.write_bytes(feature_file.read_bytes() + b"\x00\x01")
    with pytest.raises(ParseError):
        read_feature_blobs(feature_file)


def test_duplicate_ids(tmp_path, segments):
    path = write_features(tmp_path / "dup.urmf", [segments[0], segments[0]])
    with pytest.raises(ParseError):
        read_feature_blobs(path)


def test_annotation_without_features(feature_file):
    csv = annotations_path(feature_file)
    csv.write_text(csv.read_text(encoding="utf-8") + "ghost,3.5,0,0,0\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        load_features(feature_file)
    assert "ghost" in str(info.value)


def test_malformed_annotation_reports_the_line(tmp_path):
    csv = tmp_path / "labels.csv"
    csv.write_text("a,3.5,0,0,0\nb,3.5,zero,0,0\n", encoding="utf-8")
    with pytest.raises(ParseError) as info:
        read_annotations(csv)
    assert info.value.offset == 2
    csv.write_text("a,3.5,0,0\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_annotations(csv)


def test_unlabelled_blobs_are_ignored(feature_file, segments, caplog):
    csv = annotations_path(feature_file)
    lines = csv.read_text(encoding="utf-8").splitlines()
    csv.write_text("\n".join(lines[:3]) + "\n", encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        loaded = load_features(feature_file)
    assert len(loaded) == 3
    assert "no annotation" in caplog.text


def test_separate_annotation_table(tmp_path, segments):
    labels = tmp_path / "elsewhere" / "labels.txt"
    labels.parent.mkdir()
    path = write_features(tmp_path / "f.urmf", segments, annotations=labels)
    assert not annotations_path(path).exists()
    assert len(load_features(path, annotations=labels, fps=30.0)) == 5
    assert load_features(path, annotations=labels, fps=30.0)[0].fps == 30.0


def test_check_dims(segments):
    check_dims(segments, 4, 8)
    odd = Segment("odd", np.zeros((16, 3, 8), np.float32), 3.5, 0, 0, 0)
    with pytest.raises(DimensionError):
        check_dims(segments + [odd], 4, 8)
