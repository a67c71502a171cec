#!/usr/bin/env python3
"""
spn_toolkit/structure.py — Dense initial architectures.

Generic scheme: every region (a set of variables) owns k sum nodes; for each
way of decomposing a region into two sub-regions and for every pair of sum
nodes (i1, i2) of the sub-regions, one product node is created and shared as a
child by all sum nodes of the region. The root region owns a single sum.
The result is complete and decomposable by construction.

Image architecture: regions are all rectangles reachable by straight-line
splits, smallest regions being pixels. With a coarse resolution m > 1, regions
larger than one m-by-m block split only on the m-grid; regions inside a block
split at every pixel line.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Generic, Hashable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy.stats import norm

from spn_toolkit.exceptions.spn_errors import CapacityError, ConfigError, InputError
from spn_toolkit.graph import Spn, SpnBuilder, VariableTable

logger = logging.getLogger(__name__)

LEAF_VARIANCE = 1.0

R = TypeVar("R", bound=Hashable)


@dataclass(frozen=True, order=True)
class Region:
    """Half-open pixel box [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ConfigError(f"Empty or negative region {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def is_pixel(self) -> bool:
        return self.area == 1


@dataclass(frozen=True)
class ImageArchConfig:
    width: int
    height: int
    m: int = 4
    k_sums: int = 20
    k_components: int = 4
    max_edges: int = 10_000_000

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("Image width and height must be >= 1")
        if self.m < 1 or self.k_sums < 1 or self.k_components < 1:
            raise ConfigError("m, k_sums and k_components must be >= 1")
        if self.multi_resolution and (self.width % self.m or self.height % self.m):
            raise ConfigError(f"Coarse resolution m={self.m} must divide {self.width}x{self.height}")

    @property
    def multi_resolution(self) -> bool:
        return self.m > 1 and (self.width > self.m or self.height > self.m)


@dataclass
class Decomposition(Generic[R]):
    parts: Tuple[R, R]
    products: Tuple[int, ...] = ()


@dataclass
class RegionGraph(Generic[R]):
    """
    Regions in creation order (sub-regions first), their decompositions and,
    once an SPN is generated, the sum-node ids owned by each region.
    """

    root: R
    regions: List[R]
    decompositions: Dict[R, List[Decomposition[R]]]
    sums: Dict[R, Tuple[int, ...]] = field(default_factory=dict)

    @property
    def num_decompositions(self) -> int:
        return sum(len(ds) for ds in self.decompositions.values())


@dataclass(frozen=True)
class ArchitectureSize:
    regions: int
    decompositions: int
    nodes: int
    edges: int


def enumerate_decompositions(region: Region, cfg: ImageArchConfig) -> List[Tuple[Region, Region]]:
    """
    All vertical then horizontal straight-line splits of a region at the
    allowed granularity, left/top part first.
    """
    m = cfg.m
    inside_block = region.x0 // m == (region.x1 - 1) // m and region.y0 // m == (region.y1 - 1) // m
    step = 1 if (not cfg.multi_resolution or inside_block) else m
    splits: List[Tuple[Region, Region]] = []
    for x in range(region.x0 + 1, region.x1):
        if x % step == 0:
            splits.append((Region(region.x0, region.y0, x, region.y1), Region(x, region.y0, region.x1, region.y1)))
    for y in range(region.y0 + 1, region.y1):
        if y % step == 0:
            splits.append((Region(region.x0, region.y0, region.x1, y), Region(region.x0, y, region.x1, region.y1)))
    return splits


def build_region_graph(cfg: ImageArchConfig) -> RegionGraph[Region]:
    root = Region(0, 0, cfg.width, cfg.height)
    decompositions: Dict[Region, List[Decomposition[Region]]] = {}
    stack = [root]
    while stack:
        region = stack.pop()
        if region in decompositions:
            continue
        splits = [] if region.is_pixel else enumerate_decompositions(region, cfg)
        if not region.is_pixel and not splits:
            raise ConfigError(f"Region {region} has no decomposition at m={cfg.m}")
        decompositions[region] = [Decomposition(parts) for parts in splits]
        for left, right in splits:
            stack.extend((left, right))
    regions = sorted(decompositions, key=lambda r: (r.area, r.y0, r.x0, r.height, r.width))
    return RegionGraph(root=root, regions=regions, decompositions=decompositions)


def _size_of(graph: RegionGraph, k_sums: int, leaves_per_base: int, base_count: int) -> ArchitectureSize:
    """
    Node and edge counts of the SPN the generic scheme would build, where each
    base region has leaves_per_base leaves that every one of its sums mixes.
    """
    nodes = base_count * leaves_per_base
    edges = 0
    for region in graph.regions:
        n_sums = 1 if region == graph.root else k_sums
        ds = graph.decompositions[region]
        if not ds:
            nodes += n_sums
            edges += n_sums * leaves_per_base
            continue
        products = len(ds) * k_sums * k_sums
        nodes += products + n_sums
        edges += 2 * products + n_sums * products
    return ArchitectureSize(len(graph.regions), graph.num_decompositions, nodes, edges)


def estimate_size(cfg: ImageArchConfig) -> ArchitectureSize:
    graph = build_region_graph(cfg)
    return _size_of(graph, cfg.k_sums, cfg.k_components, cfg.width * cfg.height)


def _assemble(builder: SpnBuilder, graph: RegionGraph, k_sums: int,
              base_leaves: Callable[[Hashable], Sequence[int]],
              weights: Callable[[int], Sequence[float]]) -> int:
    for region in graph.regions:
        n_sums = 1 if region == graph.root else k_sums
        ds = graph.decompositions[region]
        if not ds:
            leaves = list(base_leaves(region))
            graph.sums[region] = tuple(builder.sum(leaves, weights(len(leaves))) for _ in range(n_sums))
            continue
        products: List[int] = []
        for decomposition in ds:
            left, right = decomposition.parts
            grid = tuple(builder.product([s1, s2]) for s1 in graph.sums[left] for s2 in graph.sums[right])
            decomposition.products = grid
            products.extend(grid)
        graph.sums[region] = tuple(builder.sum(products, weights(len(products))) for _ in range(n_sums))
    return graph.sums[graph.root][0]


def _uniform(n: int) -> List[float]:
    return [1.0 / n] * n


def standard_normal_bin_means(k: int) -> np.ndarray:
    """Means of the k equal-probability bins of N(0, 1)."""
    edges = norm.ppf(np.linspace(0.0, 1.0, k + 1))
    return (norm.pdf(edges[:-1]) - norm.pdf(edges[1:])) * k


def init_gaussian_leaves(samples: np.ndarray, k_components: int) -> np.ndarray:
    """
    Per pixel, sort the training intensities, cut them into k equal-count
    quantiles and return the mean of each: shape (pixels, k). samples is
    (instances, pixels); a 1-D array is a single pixel.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise InputError("Quantile initialisation needs at least one sample per pixel")
    if k_components < 1:
        raise ConfigError("k_components must be >= 1")
    n = data.shape[0]
    ordered = np.sort(data, axis=0)
    bounds = (np.arange(k_components + 1) * n) // k_components
    means = np.empty((data.shape[1], k_components))
    for j in range(k_components):
        lo, hi = int(bounds[j]), int(bounds[j + 1])
        if hi <= lo:
            lo = min(lo, n - 1)
            hi = lo + 1
        means[:, j] = ordered[lo:hi].mean(axis=0)
    return means


def generate_image_architecture(cfg: ImageArchConfig,
                                leaf_means: Optional[np.ndarray] = None) -> Tuple[Spn, RegionGraph[Region]]:
    """
    Build the dense image SPN and its region graph. Variable y*width + x is
    pixel (x, y). leaf_means is (pixels, k_components); defaults to the
    standard-normal bin means for every pixel.
    """
    n_pixels = cfg.width * cfg.height
    if leaf_means is None:
        leaf_means = np.tile(standard_normal_bin_means(cfg.k_components), (n_pixels, 1))
    leaf_means = np.asarray(leaf_means, dtype=float)
    if leaf_means.shape != (n_pixels, cfg.k_components):
        raise ConfigError(f"Leaf means must have shape ({n_pixels}, {cfg.k_components}), got {leaf_means.shape}")

    graph = build_region_graph(cfg)
    size = _size_of(graph, cfg.k_sums, cfg.k_components, n_pixels)
    if size.edges > cfg.max_edges:
        raise CapacityError(f"Architecture needs {size.edges} edges (cap {cfg.max_edges})")
    logger.debug("Generating %dx%d architecture: %d regions, %d nodes, %d edges",
                 cfg.width, cfg.height, size.regions, size.nodes, size.edges)

    builder = SpnBuilder(VariableTable.continuous(n_pixels))
    leaves: Dict[int, List[int]] = {}
    for var in range(n_pixels):
        leaves[var] = [builder.gaussian(var, mean, LEAF_VARIANCE) for mean in leaf_means[var]]

    def pixel_leaves(region: Region) -> List[int]:
        return leaves[region.y0 * cfg.width + region.x0]

    root = _assemble(builder, graph, cfg.k_sums, pixel_leaves, _uniform)
    return builder.build(root), graph


def generate_image_spn(cfg: ImageArchConfig, leaf_means: Optional[np.ndarray] = None) -> Spn:
    return generate_image_architecture(cfg, leaf_means)[0]


def generate_dense_spn(variables: VariableTable, k_sums: int = 2, n_decompositions: int = 2,
                       seed: int = 0, random_weights: bool = False) -> Spn:
    """
    Generic scheme over discrete variables: each region is split into two
    random non-empty subsets n_decompositions times (duplicates merged), down
    to single variables whose sums mix the variable's value indicators.
    """
    if any(variables.is_continuous(v) for v in range(variables.count)):
        raise ConfigError("generate_dense_spn supports discrete variables only")
    if k_sums < 1 or n_decompositions < 1:
        raise ConfigError("k_sums and n_decompositions must be >= 1")
    rng = np.random.default_rng(seed)
    root = tuple(range(variables.count))
    decompositions: Dict[Tuple[int, ...], List[Decomposition[Tuple[int, ...]]]] = {}
    stack = [root]
    while stack:
        region = stack.pop()
        if region in decompositions:
            continue
        splits = set()
        if len(region) > 1:
            for _ in range(n_decompositions):
                perm = rng.permutation(region)
                cut = int(rng.integers(1, len(region)))
                a, b = tuple(sorted(int(v) for v in perm[:cut])), tuple(sorted(int(v) for v in perm[cut:]))
                splits.add((a, b) if a < b else (b, a))
        decompositions[region] = [Decomposition(parts) for parts in sorted(splits)]
        for a, b in sorted(splits):
            stack.extend((a, b))
    graph = RegionGraph(root=root, regions=sorted(decompositions, key=lambda r: (len(r), r)),
                        decompositions=decompositions)

    builder = SpnBuilder(variables)
    leaves = {var: [builder.indicator(var, t) for t in range(variables.arity(var))]
              for var in range(variables.count)}

    def weights(n: int) -> List[float]:
        if not random_weights:
            return _uniform(n)
        w = rng.uniform(0.1, 1.0, size=n)
        return (w / w.sum()).tolist()

    root_id = _assemble(builder, graph, k_sums, lambda region: leaves[region[0]], weights)
    return builder.build(root_id)
