#!/usr/bin/env python3
"""
image_files.py — Read PGM (P2/P5) and CSV images into intensity grids, or raise UnsupportedFormat.

PGM intensities are scaled to [0, 1] by the header's maxval; 16-bit binary
samples are big-endian. A CSV file holds one image, one comma-separated row
per image row.
"""
from __future__ import annotations

import re
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from spn_toolkit.datasets import ImageDataset
from spn_toolkit.exceptions.spn_errors import InputError
from spn_toolkit.exceptions.unsupported_format import UnsupportedFormat

PathLike = Union[str, Path]

# Header tokens of a PGM file: magic, width, height, maxval (comments allowed)
PGM_TOKEN = re.compile(rb"(#[^\n]*\n?)|(\S+)")


class ImageFormat(str, Enum):
    PGM = "pgm"
    CSV = "csv"


def detect_format(path: PathLike) -> ImageFormat:
    suffix = Path(path).suffix.lower().lstrip(".")
    try:
        return ImageFormat(suffix)
    except ValueError:
        raise UnsupportedFormat(f"{path}: unknown image format '{suffix}' (expected .pgm or .csv)")


def _pgm_header(data: bytes, path: PathLike) -> Tuple[bytes, List[int], int]:
    """Returns the magic, [width, height, maxval] and the offset just past the header."""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        m = PGM_TOKEN.search(data, pos)
        if not m:
            raise UnsupportedFormat(f"{path}: truncated PGM header")
        pos = m.end()
        if m.group(2) is not None:
            tokens.append(m.group(2))
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormat(f"{path}: not a PGM file (magic {magic!r})")
    try:
        values = [int(t) for t in tokens[1:]]
    except ValueError:
        raise UnsupportedFormat(f"{path}: non-numeric PGM header")
    width, height, maxval = values
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise UnsupportedFormat(f"{path}: invalid PGM header {width}x{height} maxval {maxval}")
    # exactly one whitespace byte separates the header from binary data
    return magic, values, pos + 1


def read_pgm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, (width, height, maxval), offset = _pgm_header(data, path)
    count = width * height
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[offset:offset + count * dtype.itemsize]
        if len(raw) < count * dtype.itemsize:
            raise UnsupportedFormat(f"{path}: expected {count} samples, file is truncated")
        samples = np.frombuffer(raw, dtype=dtype).astype(float)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[offset - 1:]).split()
        if len(body) != count:
            raise UnsupportedFormat(f"{path}: expected {count} samples, found {len(body)}")
        try:
            samples = np.array([int(t) for t in body], dtype=float)
        except ValueError:
            raise UnsupportedFormat(f"{path}: non-integer PGM sample")
    if (samples > maxval).any():
        raise UnsupportedFormat(f"{path}: sample exceeds maxval {maxval}")
    return samples.reshape(height, width) / maxval


def read_csv_image(path: PathLike) -> np.ndarray:
    try:
        image = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as e:
        raise UnsupportedFormat(f"{path}: malformed CSV image ({e})")
    if image.size == 0:
        raise UnsupportedFormat(f"{path}: empty CSV image")
    if not np.isfinite(image).all():
        raise UnsupportedFormat(f"{path}: CSV image holds non-finite values")
    return image


def write_csv_image(path: PathLike, image: np.ndarray) -> None:
    np.savetxt(path, np.asarray(image, dtype=float), delimiter=",", fmt="%.17g")


def read_image(path: PathLike, fmt: Optional[ImageFormat] = None) -> np.ndarray:
    fmt = ImageFormat(fmt) if fmt is not None else detect_format(path)
    return read_pgm(path) if fmt is ImageFormat.PGM else read_csv_image(path)


def load_dataset(path: PathLike, fmt: Optional[ImageFormat] = None, allow_constant: bool = False) -> ImageDataset:
    """
    Load one image file, or every .pgm/.csv file of a directory in sorted
    name order, and normalize each image.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file() and p.suffix.lower() in (".pgm", ".csv"))
        if not files:
            raise InputError(f"{path}: directory holds no .pgm or .csv images")
    elif path.is_file():
        files = [path]
    else:
        raise InputError(f"{path}: no such file or directory")

    images = [read_image(f, fmt) for f in files]
    for f, image in zip(files[1:], images[1:]):
        if image.shape != images[0].shape:
            raise InputError(f"{f}: image is {image.shape[1]}x{image.shape[0]}, "
                             f"expected {images[0].shape[1]}x{images[0].shape[0]}")
    return ImageDataset.from_raw(images, [str(f) for f in files], allow_constant)
