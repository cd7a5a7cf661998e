"""Rounding LP coefficients to a discrete subset of templates.

Two strategies.  Max keeps the n largest coefficients outright.  Search
thresholds the coefficients into a feasible set, walks candidate subsets
in descending mean-coefficient order (exact rational arithmetic, so the
order is total and platform-independent), renders each candidate's
union silhouette, and keeps the subset minimizing

    score = hamming_error + lambda_search * |subset|

(``cardinality_reward`` flips the sign of the size term for comparison
against write-ups that phrase the size term as a bonus).  Rendered
errors are true union errors, so overlapping templates are never double
counted the way the LP's linear model does.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import bitpack
from .camera import CameraRig
from .errors import DimensionMismatchError, EmptyFeasibleSetError
from .geometry import TemplateLibrary, compose_scene
from .rasterizer import MeasurementVector, render_scene
from .simplex import LpSolution


@dataclass(frozen=True)
class StructureEstimate:
    """A selected template subset with its silhouette error and score."""

    template_ids: tuple[int, ...]
    error: int
    score: float


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for :func:`round_search`.

    ``alpha_threshold`` admits coefficients strictly above it into the
    feasible set; ``min_parts``/``max_parts`` bound candidate subset
    sizes; ``max_candidates`` caps how many subsets are rendered and
    scored; ``lambda_search`` weighs subset size against silhouette
    error.
    """

    alpha_threshold: float = 1e-2
    min_parts: int = 1
    max_parts: int = 20
    max_candidates: int = 5000
    lambda_search: float = 1e-2
    cardinality_reward: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha_threshold:
            raise ValueError("alpha_threshold must be nonnegative")
        if not 0 <= self.min_parts <= self.max_parts:
            raise ValueError("need 0 <= min_parts <= max_parts")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be positive")
        if self.lambda_search < 0:
            raise ValueError("lambda_search must be nonnegative")


def _coefficients(alpha) -> np.ndarray:
    if isinstance(alpha, LpSolution):
        alpha = alpha.alpha
    return np.asarray(alpha, dtype=float).ravel()


def feasible_set(alpha, threshold: float) -> list[int]:
    """Template ids (ascending) whose coefficient strictly exceeds ``threshold``.

    Coefficient i belongs to template id i + 1 (library order).
    """
    values = _coefficients(alpha)
    return [int(i) + 1 for i in np.flatnonzero(values > threshold)]


def _descending_order(values: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Indices sorting (value desc, id asc); deterministic under ties."""
    return np.lexsort((ids, -values))


class _MaskCache:
    """Per-template packed silhouettes, rendered on first use."""

    def __init__(self, library: TemplateLibrary, rig: CameraRig):
        self.library = library
        self.rig = rig
        self.masks: dict[int, np.ndarray] = {}

    def get(self, template_id: int) -> np.ndarray:
        mask = self.masks.get(template_id)
        if mask is None:
            mask = render_scene([self.library[template_id]], self.rig).packed
            self.masks[template_id] = mask
        return mask


def union_error(template_ids, target: MeasurementVector, library: TemplateLibrary, rig: CameraRig) -> int:
    """Hamming error of the union silhouette of ``template_ids``."""
    rendered = render_scene(compose_scene(template_ids, library), rig)
    if rendered.n_bits != target.n_bits:
        raise DimensionMismatchError(
            f"rendered {rendered.n_bits} bits, target has {target.n_bits}"
        )
    return bitpack.popcount_xor(rendered.packed, target.packed)


def _check_target(target: MeasurementVector, rig: CameraRig) -> None:
    if target.n_bits != rig.n_bits:
        raise DimensionMismatchError(
            f"target has {target.n_bits} bits, rig renders {rig.n_bits}"
        )


def round_max(
    alpha,
    n: int,
    target: MeasurementVector,
    library: TemplateLibrary,
    rig: CameraRig,
    lambda_search: float = 1e-2,
) -> StructureEstimate:
    """Keep the ``n`` largest coefficients (ties to the lower id)."""
    _check_target(target, rig)
    values = _coefficients(alpha)
    if values.size != len(library):
        raise DimensionMismatchError(
            f"{values.size} coefficients for a library of {len(library)}"
        )
    if not 1 <= n <= values.size:
        raise ValueError(f"n must be in 1..{values.size}, got {n}")
    ids = np.arange(1, values.size + 1)
    order = _descending_order(values, ids)
    chosen = tuple(sorted(int(ids[i]) for i in order[:n]))
    error = union_error(chosen, target, library, rig)
    return StructureEstimate(chosen, error, error + lambda_search * n)


def _stream_candidates(n_feasible: int, min_parts: int, max_parts: int, means: list[Fraction]):
    """Yield position tuples into the descending-coefficient order, best
    mean first; exact ties break toward lexicographically smaller tuples."""
    heap = []
    visited = set()

    def push(positions: tuple[int, ...]):
        if positions in visited:
            return
        visited.add(positions)
        if positions:
            total = sum((means[p] for p in positions), Fraction(0))
            key = -total / len(positions)
        else:
            key = Fraction(0)
        heapq.heappush(heap, (key, positions))

    for size in range(min_parts, max_parts + 1):
        push(tuple(range(size)))
    while heap:
        _, positions = heapq.heappop(heap)
        yield positions
        for idx in range(len(positions)):
            advanced = positions[idx] + 1
            if advanced >= n_feasible:
                continue
            if idx + 1 < len(positions) and advanced >= positions[idx + 1]:
                continue
            push(positions[:idx] + (advanced,) + positions[idx + 1 :])


def round_search(
    alpha,
    config: SearchConfig,
    target: MeasurementVector,
    library: TemplateLibrary,
    rig: CameraRig,
) -> StructureEstimate:
    """Search thresholded subsets for the best rendered silhouette score.

    Candidates are drawn in descending mean-coefficient order until
    ``max_candidates`` have been scored (or the candidate space is
    exhausted, whichever comes first); when the whole space fits in the
    budget it is enumerated outright.  The winner is re-rendered from
    scratch as a self-consistency check.
    """
    _check_target(target, rig)
    values = _coefficients(alpha)
    if values.size != len(library):
        raise DimensionMismatchError(
            f"{values.size} coefficients for a library of {len(library)}"
        )
    feasible = np.asarray(feasible_set(values, config.alpha_threshold), dtype=int)
    if feasible.size == 0:
        raise EmptyFeasibleSetError(
            f"no coefficient exceeds threshold {config.alpha_threshold}"
        )
    if config.min_parts > feasible.size:
        raise EmptyFeasibleSetError(
            f"feasible set has {feasible.size} templates, need min_parts "
            f"<= {config.min_parts}"
        )
    feas_values = values[feasible - 1]
    order = _descending_order(feas_values, feasible)
    sorted_ids = feasible[order]
    sorted_values = feas_values[order]
    max_parts = min(config.max_parts, int(feasible.size))

    total_candidates = sum(
        math.comb(int(feasible.size), size)
        for size in range(config.min_parts, max_parts + 1)
    )
    if total_candidates <= config.max_candidates:
        candidates = itertools.chain.from_iterable(
            itertools.combinations(range(int(feasible.size)), size)
            for size in range(config.min_parts, max_parts + 1)
        )
    else:
        means = [Fraction(float(v)) for v in sorted_values]
        candidates = itertools.islice(
            _stream_candidates(int(feasible.size), config.min_parts, max_parts, means),
            config.max_candidates,
        )

    cache = _MaskCache(library, rig)
    sign = -1.0 if config.cardinality_reward else 1.0
    best: tuple[float, tuple[int, ...], int] | None = None
    scratch = np.empty_like(target.packed)
    for positions in candidates:
        scratch[:] = 0
        for p in positions:
            np.bitwise_or(scratch, cache.get(int(sorted_ids[p])), out=scratch)
        error = bitpack.popcount_xor(scratch, target.packed)
        score = error + sign * config.lambda_search * len(positions)
        ids = tuple(sorted(int(sorted_ids[p]) for p in positions))
        key = (score, ids)
        if best is None or key < (best[0], best[1]):
            best = (score, ids, error)
    assert best is not None
    score, ids, error = best
    rerendered = union_error(ids, target, library, rig)
    if rerendered != error:
        raise RuntimeError(
            f"self-consistency failure: cached union error {error}, "
            f"re-rendered {rerendered}"
        )
    return StructureEstimate(ids, error, score)
