#!/usr/bin/env pytest
"""
tests/test_image_files.py — PGM/CSV readers, dataset loading and normalization.
"""
from pathlib import Path

import numpy as np
import pytest

from spn_toolkit.datasets import ImageDataset, bar_world, normalize_image
from spn_toolkit.exceptions.spn_errors import InputError
from spn_toolkit.exceptions.unsupported_format import UnsupportedFormat
from spn_toolkit.parsers.image_files import load_dataset, read_csv_image, read_pgm, write_csv_image

DATA_DIR = Path(__file__).parent.parent / "spn_toolkit" / "data"


def test_sample_csv_is_normalized():
    dataset = load_dataset(DATA_DIR / "sample_2x2.csv")
    assert (dataset.width, dataset.height) == (2, 2)
    assert dataset.pixels[0] == pytest.approx([-1.3416408, -0.4472136, 0.4472136, 1.3416408])
    assert dataset.records[0].mean == pytest.approx(2.5)
    assert dataset.records[0].std == pytest.approx(np.sqrt(1.25))


def test_sample_ascii_pgm_is_scaled():
    image = read_pgm(DATA_DIR / "sample_3x2.pgm")
    assert image.shape == (2, 3)
    assert image == pytest.approx(np.array([[0.0, 0.2, 0.4], [0.6, 0.8, 1.0]]))


def test_binary_pgm_8_bit(tmp_path):
    path = tmp_path / "img.pgm"
    path.write_bytes(b"P5\n# binary\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    assert read_pgm(path) == pytest.approx(np.array([[0.0, 1.0], [128 / 255, 64 / 255]]))


def test_binary_pgm_16_bit_is_big_endian(tmp_path):
    path = tmp_path / "img.pgm"
    path.write_bytes(b"P5 2 1 65535\n" + (1000).to_bytes(2, "big") + (65535).to_bytes(2, "big"))
    assert read_pgm(path) == pytest.approx(np.array([[1000 / 65535, 1.0]]))


@pytest.mark.parametrize("content", [
    b"P3\n2 2\n255\n0 0 0 0",
    b"P2\n2 2\n255\n0 0 0",
    b"P2\n2 2\n255\n0 0 0 300",
    b"P5\n2 2\n255\n\x00\x01",
    b"P2\n2",
])
def test_malformed_pgm_raises(tmp_path, content):
    path = tmp_path / "bad.pgm"
    path.write_bytes(content)
    with pytest.raises(UnsupportedFormat) as excinfo:
        read_pgm(path)
    assert "bad.pgm" in str(excinfo.value)


def test_csv_round_trip(tmp_path):
    image = np.array([[0.1, 0.2, 0.3], [1.5, -2.25, 7.0]])
    write_csv_image(tmp_path / "img.csv", image)
    assert read_csv_image(tmp_path / "img.csv").tolist() == image.tolist()


def test_ragged_csv_raises(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(UnsupportedFormat):
        read_csv_image(path)


def test_directory_is_loaded_in_sorted_order(tmp_path):
    (tmp_path / "b.csv").write_text("4,3\n2,1\n")
    (tmp_path / "a.csv").write_text("1,2\n3,4\n")
    (tmp_path / "notes.txt").write_text("ignored")
    dataset = load_dataset(tmp_path)
    assert len(dataset) == 2
    assert dataset.names[0].endswith("a.csv")
    assert dataset.pixels[0][0] < 0 < dataset.pixels[1][0]


def test_dimension_mismatch_names_the_file(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n3,4\n")
    (tmp_path / "b.csv").write_text("1,2,3\n4,5,6\n")
    with pytest.raises(InputError) as excinfo:
        load_dataset(tmp_path)
    assert "b.csv" in str(excinfo.value)


def test_unknown_extension_and_missing_paths(tmp_path):
    (tmp_path / "img.png").write_bytes(b"")
    with pytest.raises(UnsupportedFormat):
        load_dataset(tmp_path / "img.png")
    with pytest.raises(InputError):
        load_dataset(tmp_path / "missing.csv")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(InputError):
        load_dataset(empty)


def test_constant_image_needs_flag(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("3,3\n3,3\n")
    with pytest.raises(InputError):
        load_dataset(path)
    dataset = load_dataset(path, allow_constant=True)
    assert dataset.pixels[0].tolist() == [0.0, 0.0, 0.0, 0.0]
    assert dataset.restore(0, dataset.images[0]).tolist() == [[3.0, 3.0], [3.0, 3.0]]


def test_normalization_invariants():
    rng = np.random.default_rng(0)
    for _ in range(5):
        raw = rng.uniform(0, 255, size=(8, 8))
        image, record = normalize_image(raw)
        assert abs(image.mean()) < 1e-9
        assert abs(image.var() - 1.0) < 1e-9
        assert record.restore(image) == pytest.approx(raw)


def test_bar_world_images():
    dataset = bar_world(8)
    assert len(dataset) == 16
    assert dataset.names[0] == "row0" and dataset.names[8] == "col0"
    for image in dataset.images:
        assert abs(image.mean()) < 1e-9
        assert abs(image.var() - 1.0) < 1e-9
    assert np.argmax(dataset.images[3][:, 0]) == 3


def test_to_evidence_marginalizes_the_mask():
    dataset = bar_world(4, columns=False)
    mask = np.zeros((4, 4), dtype=bool)
    mask[:, :2] = True
    x = dataset.to_evidence(mask)
    assert x.shape == (4, 16)
    assert np.isnan(x).sum() == 4 * 8
    assert np.isnan(x[0, 0]) and not np.isnan(x[0, 2])
    with pytest.raises(InputError):
        dataset.to_evidence(np.zeros((2, 2), dtype=bool))


def test_dataset_requires_matching_records():
    with pytest.raises(InputError):
        ImageDataset(np.zeros((2, 2, 2)), ())
