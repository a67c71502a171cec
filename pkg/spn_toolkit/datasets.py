#!/usr/bin/env python3
"""
spn_toolkit/datasets.py — Image datasets with per-image normalization.

Every image is normalized on its own to zero mean and unit variance (the
population standard deviation); the (mean, std) record is kept so completions
can be mapped back to the original intensity scale. Pixel (x, y) of a
width-by-height image is variable y * width + x.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from spn_toolkit.exceptions.spn_errors import InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalizationRecord:
    mean: float
    std: float

    def restore(self, image: np.ndarray) -> np.ndarray:
        return np.asarray(image, dtype=float) * self.std + self.mean


def normalize_image(image: np.ndarray, allow_constant: bool = False,
                    source: str = "image") -> Tuple[np.ndarray, NormalizationRecord]:
    """
    Zero mean, unit variance. A constant image has no scale: it is an error
    unless allow_constant, in which case it becomes the zero image (std 0).
    """
    data = np.asarray(image, dtype=float)
    mean = float(data.mean())
    std = float(data.std())
    if std == 0.0:
        if not allow_constant:
            raise InputError(f"{source}: constant image cannot be normalized")
        logger.warning("%s is constant; using the zero image", source)
        return np.zeros_like(data), NormalizationRecord(mean, 0.0)
    return (data - mean) / std, NormalizationRecord(mean, std)


@dataclass
class ImageDataset:
    """
    images: normalized intensities, shape (n, height, width).
    records: one normalization record per image, in order.
    """

    images: np.ndarray
    records: Tuple[NormalizationRecord, ...]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim != 3:
            raise InputError(f"Images must be stacked as (n, height, width), got shape {self.images.shape}")
        if len(self.records) != len(self.images):
            raise InputError("One normalization record is required per image")
        if not self.names:
            self.names = tuple(str(i) for i in range(len(self.images)))

    @classmethod
    def from_raw(cls, raw_images: Sequence[np.ndarray], names: Optional[Sequence[str]] = None,
                 allow_constant: bool = False) -> "ImageDataset":
        names = tuple(names) if names is not None else tuple(str(i) for i in range(len(raw_images)))
        if not raw_images:
            raise InputError("Dataset holds no images")
        shape = np.shape(raw_images[0])
        images, records = [], []
        for name, raw in zip(names, raw_images):
            if np.shape(raw) != shape or len(shape) != 2:
                raise InputError(f"{name}: image of shape {np.shape(raw)} does not match {shape}")
            image, record = normalize_image(raw, allow_constant, source=name)
            images.append(image)
            records.append(record)
        return cls(np.stack(images), tuple(records), names)

    def __len__(self) -> int:
        return len(self.images)

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]

    @property
    def pixels(self) -> np.ndarray:
        """(n, width * height) matrix in variable order."""
        return self.images.reshape(len(self.images), -1)

    def subset(self, indices: Sequence[int]) -> "ImageDataset":
        indices = list(indices)
        return ImageDataset(self.images[indices], tuple(self.records[i] for i in indices),
                            tuple(self.names[i] for i in indices))

    def restore(self, index: int, image: np.ndarray) -> np.ndarray:
        return self.records[index].restore(image)

    def to_evidence(self, mask: np.ndarray) -> np.ndarray:
        """
        Evidence rows with the masked (occluded) pixels marginalized (NaN)
        and every other pixel observed.
        """
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.height, self.width):
            raise InputError(f"Mask of shape {mask.shape} does not match {self.height}x{self.width} images")
        x = self.pixels.copy()
        x[:, mask.reshape(-1)] = np.nan
        return x


def bar_world(size: int = 8, rows: bool = True, columns: bool = True) -> ImageDataset:
    """
    Synthetic size-by-size images, each holding a single full-row or
    full-column bar of ones on a zero background. Rows come first.
    """
    if size < 2:
        raise InputError("Bar-world images need size >= 2")
    raw, names = [], []
    if rows:
        for y in range(size):
            image = np.zeros((size, size))
            image[y, :] = 1.0
            raw.append(image)
            names.append(f"row{y}")
    if columns:
        for x in range(size):
            image = np.zeros((size, size))
            image[:, x] = 1.0
            raw.append(image)
            names.append(f"col{x}")
    return ImageDataset.from_raw(raw, names)
