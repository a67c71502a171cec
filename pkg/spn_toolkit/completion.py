#!/usr/bin/env python3
"""
spn_toolkit/completion.py — Occlusion completion with MSE scoring, and the
nearest-neighbor baseline.

Half of each image is occluded along one side. The SPN fills it by MPE
inference with the visible half observed; the baseline copies the hidden
half of the training image whose visible half is closest in Euclidean
distance. Errors are mean squared errors over the occluded pixels, in
normalized intensity units.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist

from spn_toolkit.datasets import ImageDataset
from spn_toolkit.exceptions.spn_errors import InputError
from spn_toolkit.graph import Spn
from spn_toolkit.inference import MpeMode, mpe_batch

logger = logging.getLogger(__name__)


class OcclusionSide(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"
    # occludes nothing
    NONE = "none"


@dataclass(frozen=True)
class CompletionTask:
    side: OcclusionSide = OcclusionSide.LEFT
    mode: MpeMode = MpeMode.SUM_UP_MAX_DOWN

    def __post_init__(self):
        object.__setattr__(self, "side", OcclusionSide(self.side))
        object.__setattr__(self, "mode", MpeMode(self.mode))


def occlusion_mask(width: int, height: int, side: OcclusionSide) -> np.ndarray:
    """
    Boolean (height, width) mask of occluded pixels. With an odd dimension
    the extra line stays visible.
    """
    side = OcclusionSide(side)
    mask = np.zeros((height, width), dtype=bool)
    if side is OcclusionSide.LEFT:
        mask[:, : width // 2] = True
    elif side is OcclusionSide.RIGHT:
        mask[:, width - width // 2:] = True
    elif side is OcclusionSide.TOP:
        mask[: height // 2, :] = True
    elif side is OcclusionSide.BOTTOM:
        mask[height - height // 2:, :] = True
    return mask


@dataclass(frozen=True)
class ImageCompletion:
    index: int
    completed: Optional[np.ndarray]
    mse: Optional[float]


@dataclass
class CompletionReport:
    results: List[ImageCompletion] = field(default_factory=list)

    @property
    def scored(self) -> List[float]:
        return [r.mse for r in self.results if r.mse is not None]

    @property
    def excluded(self) -> List[int]:
        return [r.index for r in self.results if r.mse is None]

    @property
    def mean_mse(self) -> float:
        scored = self.scored
        return float(np.mean(scored)) if scored else math.nan


def _mse(completed: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    return float(np.mean((completed[mask] - truth[mask]) ** 2))


def _check_model(model: Spn, dataset: ImageDataset) -> None:
    if model.variables.count != dataset.width * dataset.height:
        raise InputError(
            f"Model has {model.variables.count} variables; images have {dataset.width * dataset.height} pixels"
        )


def complete_and_score(model: Spn, dataset: ImageDataset, task: CompletionTask = CompletionTask()) -> CompletionReport:
    """
    Complete the occluded half of every image and score it. Visible pixels
    are copied from the input; images with zero probability under the model
    are reported without a score and excluded from the mean.
    """
    _check_model(model, dataset)
    mask = occlusion_mask(dataset.width, dataset.height, task.side)
    evidence = dataset.to_evidence(mask)
    flat_mask = mask.reshape(-1)
    report = CompletionReport()
    for index, result in enumerate(mpe_batch(model, evidence, task.mode)):
        truth = dataset.pixels[index]
        if result is None:
            logger.warning("Image %s has zero probability under the model; not scored", dataset.names[index])
            report.results.append(ImageCompletion(index, None, None))
            continue
        completed = truth.copy()
        assigned = np.array([np.nan if v is None else v for v in result.state], dtype=float)
        completed[flat_mask] = assigned[flat_mask]
        mse = _mse(completed, truth, flat_mask)
        logger.debug("Completed image %s: mse=%.6g", dataset.names[index], mse)
        report.results.append(ImageCompletion(index, completed.reshape(dataset.height, dataset.width), mse))
    return report


def nn_baseline_report(train: ImageDataset, test: ImageDataset,
                       task: CompletionTask = CompletionTask()) -> CompletionReport:
    if len(train) == 0:
        raise InputError("Nearest-neighbor baseline needs at least one training image")
    if (train.width, train.height) != (test.width, test.height):
        raise InputError(
            f"Training images are {train.width}x{train.height}; test images are {test.width}x{test.height}"
        )
    flat_mask = occlusion_mask(test.width, test.height, task.side).reshape(-1)
    visible = ~flat_mask
    distances = cdist(test.pixels[:, visible], train.pixels[:, visible], metric="euclidean")
    nearest = distances.argmin(axis=1)
    report = CompletionReport()
    for index, match in enumerate(nearest):
        truth = test.pixels[index]
        completed = truth.copy()
        completed[flat_mask] = train.pixels[match, flat_mask]
        report.results.append(
            ImageCompletion(index, completed.reshape(test.height, test.width), _mse(completed, truth, flat_mask))
        )
    return report


def nn_baseline(train: ImageDataset, test: ImageDataset, task: CompletionTask = CompletionTask()) -> float:
    """Mean MSE of nearest-neighbor completion (ties go to the first training image)."""
    return nn_baseline_report(train, test, task).mean_mse


def mse_report_lines(report: CompletionReport) -> List[str]:
    lines = []
    for r in report.results:
        if r.mse is None:
            lines.append(f"image={r.index} error=zero-evidence")
        else:
            lines.append(f"image={r.index} mse={r.mse:.6g}")
    lines.append(f"mean_mse={report.mean_mse:.6g}")
    return lines
