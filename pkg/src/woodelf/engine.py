"""The attribution pipeline: frequencies, contribution matrices, score vectors,
and batched gathers, generic over any per-cube metric that is linear in the
cube weight.

Per tree: (1) a frequency vector per leaf over baseline patterns, from a
background dataset or from node covers; (2) sparse per-feature-subset
contribution matrices over pattern pairs, built once per canonical dictionary
and metric; (3) dense score vectors, leaf weight times matrix times
frequencies; (4) per-row gathers indexed by consumer patterns. Per-row
results are summed across trees in a fixed order (tree, then leaf), so output
is reproducible bit for bit regardless of threading.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .cube_mapping import CubeDictionary, DictionaryCache
from .errors import DimensionError, ModeError
from .formula_core import (
    AttributionResult,
    Cube,
    MetricKind,
    cube_banzhaf,
    cube_banzhaf_iv,
    cube_shapley,
    cube_shapley_iv,
    pair_count,
    pair_index,
)
from .patterns import LeafPatternTable, calc_decision_patterns, sibling_last_bit_pairs
from .tree_model import Tree, TreeEnsemble, as_matrix


@dataclass(frozen=True, eq=False)
class Metric:
    """A per-cube attribution rule.

    ``apply`` maps a cube to (feature subset, value) pairs, with subsets of
    size one or two, and must be linear in the cube weight and empty on
    contradictory cubes. Subsets reference the variable ids used inside the
    cube (the pipeline renames canonical ordinals to feature ids afterwards).
    """

    apply: Callable[[Cube], Sequence[tuple[tuple[int, ...], float]]]
    pairwise: bool
    kind: MetricKind | None = None


def shapley_metric() -> Metric:
    return Metric(lambda c: [((i,), v) for i, v in cube_shapley(c)],
                  pairwise=False, kind=MetricKind.SHAPLEY)


def banzhaf_metric() -> Metric:
    return Metric(lambda c: [((i,), v) for i, v in cube_banzhaf(c)],
                  pairwise=False, kind=MetricKind.BANZHAF)


def shapley_iv_metric() -> Metric:
    return Metric(cube_shapley_iv, pairwise=True, kind=MetricKind.SHAPLEY_IV)


def banzhaf_iv_metric() -> Metric:
    return Metric(cube_banzhaf_iv, pairwise=True, kind=MetricKind.BANZHAF_IV)


_METRIC_FACTORIES = {
    MetricKind.SHAPLEY: shapley_metric,
    MetricKind.BANZHAF: banzhaf_metric,
    MetricKind.SHAPLEY_IV: shapley_iv_metric,
    MetricKind.BANZHAF_IV: banzhaf_iv_metric,
}


def resolve_metric(metric: "Metric | MetricKind | str") -> Metric:
    if isinstance(metric, Metric):
        return metric
    if isinstance(metric, str):
        metric = MetricKind(metric)
    return _METRIC_FACTORIES[metric]()


# ---------------------------------------------------------------------------
# Stage 1: frequency vectors

def background_frequencies(tree: Tree, background) -> dict[int, np.ndarray]:
    """Per-leaf relative frequencies of baseline patterns over the background.

    Histograms are shared across sibling leaves: the right sibling's counts
    are the left's with even/odd entries swapped (patterns differ only in the
    last bit), halving the histogram work.
    """
    B = as_matrix(background)
    m = B.shape[0]
    if m == 0:
        raise ModeError("background mode requires a non-empty background dataset")
    table = calc_decision_patterns(tree, B)
    left_sibling = {right: left for left, right in sibling_last_bit_pairs(tree)}
    counts: dict[int, np.ndarray] = {}
    for lf in table.patterns:
        mate = left_sibling.get(lf)
        if mate is not None and mate in counts:
            counts[lf] = counts[mate].reshape(-1, 2)[:, ::-1].ravel()
        else:
            counts[lf] = np.bincount(
                table.patterns[lf].astype(np.int64),
                minlength=1 << table.lengths[lf],
            )
    return {lf: c / m for lf, c in counts.items()}


def path_dependent_frequencies(tree: Tree) -> dict[int, np.ndarray]:
    """Per-leaf pattern frequencies from node covers, in one traversal.

    Walking down a path, pattern bit 1 (agreeing with the path) carries
    probability cover(child)/cover(parent), bit 0 the complement; a leaf's
    vector is the product measure over its path bits. Every vector sums to 1.
    """
    out: dict[int, np.ndarray] = {}

    def descend(idx: int, vec: np.ndarray) -> None:
        node = tree.nodes[idx]
        if node.is_leaf:
            out[idx] = vec
            return
        if node.cover is None or node.cover <= 0:
            raise ModeError(
                f"path-dependent mode requires positive covers; node {idx} "
                f"has {node.cover!r}"
            )
        for child in (node.left, node.right):
            child_cover = tree.nodes[child].cover
            if child_cover is None or child_cover <= 0:
                raise ModeError(
                    f"path-dependent mode requires positive covers; node "
                    f"{child} has {child_cover!r}"
                )
            ratio = child_cover / node.cover
            if ratio > 1.0:
                raise ModeError(
                    f"cover of node {child} exceeds its parent's: ratio {ratio}"
                )
            grown = np.empty(2 * vec.shape[0])
            grown[0::2] = vec * (1.0 - ratio)
            grown[1::2] = vec * ratio
            descend(child, grown)

    descend(tree.root, np.ones(1))
    return out


# ---------------------------------------------------------------------------
# Stage 2: sparse contribution matrices

def build_contribution_matrices(dictionary: CubeDictionary,
                                metric: Metric) -> dict[tuple[int, ...], sparse.csr_matrix]:
    """One sparse (consumer pattern, baseline pattern) matrix per feature subset.

    Each dictionary entry scatters its metric values at its own key, so a
    subset's matrix has at most 3^depth nonzeros in a 2^depth-square shape.
    Leaf weights are deliberately not applied here, keeping the matrices
    shareable across all leaves with the same path structure.
    """
    if not dictionary.path_features:
        return {}
    size = 1 << dictionary.depth
    triplets: dict[tuple[int, ...], tuple[list, list, list]] = {}
    for (pc, pb), cube in dictionary.entries.items():
        for subset, value in metric.apply(cube):
            rows, cols, vals = triplets.setdefault(subset, ([], [], []))
            rows.append(pc)
            cols.append(pb)
            vals.append(value)
    return {
        subset: sparse.csr_matrix(
            (np.asarray(vals), (np.asarray(rows), np.asarray(cols))),
            shape=(size, size),
        )
        for subset, (rows, cols, vals) in triplets.items()
    }


# ---------------------------------------------------------------------------
# Stage 3: score vectors

def build_score_vectors(matrices: Mapping[tuple[int, ...], sparse.csr_matrix],
                        frequencies: np.ndarray,
                        leaf_weight: float) -> dict[tuple[int, ...], np.ndarray]:
    """Dense per-subset score vectors: leaf weight times matrix times
    frequencies, touching nonzeros only."""
    out = {}
    for subset, matrix in matrices.items():
        if matrix.shape[1] != frequencies.shape[0]:
            raise DimensionError(
                f"matrix is {matrix.shape} but the frequency vector has "
                f"length {frequencies.shape[0]}"
            )
        out[subset] = leaf_weight * (matrix @ frequencies)
    return out


# ---------------------------------------------------------------------------
# Stage 4: gathers

def gather_attributions(score_vectors: Mapping[int, Mapping[tuple[int, ...], np.ndarray]],
                        consumer_patterns: LeafPatternTable,
                        num_features: int,
                        pairwise: bool,
                        out: np.ndarray | None = None) -> np.ndarray:
    """Accumulate per-row values: every leaf's score vectors indexed by that
    leaf's consumer patterns, summed feature-subset-wise.

    Subsets here are actual feature ids; pairs land in the packed
    upper-triangular column layout.
    """
    width = pair_count(num_features) if pairwise else num_features
    if out is None:
        out = np.zeros((consumer_patterns.num_rows, width))
    for lf, per_subset in score_vectors.items():
        pats = consumer_patterns.patterns[lf]
        for subset, vec in per_subset.items():
            col = subset[0] if len(subset) == 1 \
                else pair_index(subset[0], subset[1], num_features)
            out[:, col] += vec[pats]
    return out


# ---------------------------------------------------------------------------
# The full pipeline

@dataclass
class BatchAttribution:
    """Per-row attribution values for one metric over one consumer matrix.

    ``values`` is (rows, num_features) for single-variable metrics and
    (rows, num_features*(num_features-1)/2) packed upper-triangular for
    interaction metrics.
    """

    metric: MetricKind | None
    num_features: int
    pairwise: bool
    values: np.ndarray
    timings: dict[str, float] | None = None

    def row(self, idx: int) -> AttributionResult:
        kind = self.metric if self.metric is not None else MetricKind.SHAPLEY
        if self.pairwise:
            return AttributionResult(kind, self.num_features, pairs=self.values[idx])
        return AttributionResult(kind, self.num_features, singles=self.values[idx])

    def pair_values(self, i: int, j: int) -> np.ndarray:
        if not self.pairwise:
            raise ValueError("this result holds single-variable values")
        return self.values[:, pair_index(i, j, self.num_features)]


def _rename_subset(subset: tuple[int, ...], rename: tuple[int, ...]) -> tuple[int, ...]:
    if len(subset) == 1:
        return (rename[subset[0]],)
    a, b = rename[subset[0]], rename[subset[1]]
    return (a, b) if a < b else (b, a)


def woodelf(ensemble: TreeEnsemble,
            consumers,
            background=None,
            metric: "Metric | MetricKind | str" = MetricKind.SHAPLEY,
            threads: int = 1,
            block_size: int | None = None) -> BatchAttribution:
    """Attributions of every consumer row under the requested metric.

    A present, non-empty ``background`` selects background mode; otherwise
    the ensemble's covers drive path-dependent mode. Interaction metrics
    fill unordered pairs only. Stage wall times are reported in ``timings``.
    """
    metric = resolve_metric(metric)
    C = as_matrix(consumers)
    h = ensemble.num_features
    if C.shape[1] != h:
        raise DimensionError(f"consumers have {C.shape[1]} columns, expected {h}")
    B = None
    if background is not None:
        B = as_matrix(background)
        if B.shape[1] != h:
            raise DimensionError(f"background has {B.shape[1]} columns, expected {h}")
        if B.shape[0] == 0:
            B = None  # empty background falls back to path-dependent mode
    timings = {"frequencies": 0.0, "matrices": 0.0, "scores": 0.0, "gather": 0.0}

    cache = DictionaryCache()
    matrix_cache: dict = {}
    plan: list[tuple[Tree, dict[int, list[tuple[int, np.ndarray]]]]] = []
    width = pair_count(h) if metric.pairwise else h

    for tree in ensemble.trees:
        t0 = time.perf_counter()
        freqs = background_frequencies(tree, B) if B is not None \
            else path_dependent_frequencies(tree)
        t1 = time.perf_counter()
        timings["frequencies"] += t1 - t0

        leaf_scores: dict[int, list[tuple[int, np.ndarray]]] = {}
        for lf in tree.leaf_indices():
            t1 = time.perf_counter()
            dictionary, rename = cache.get(tree.path_features(lf))
            mkey = (dictionary.path_features, metric)
            matrices = matrix_cache.get(mkey)
            if matrices is None:
                matrices = build_contribution_matrices(dictionary, metric)
                matrix_cache[mkey] = matrices
            t2 = time.perf_counter()
            scores = build_score_vectors(matrices, freqs[lf],
                                         tree.nodes[lf].leaf_weight)
            columns = []
            for subset, vec in scores.items():
                if (len(subset) == 2) != metric.pairwise:
                    raise DimensionError(
                        "metric returned a subset size that contradicts its "
                        "pairwise flag"
                    )
                actual = _rename_subset(subset, rename)
                col = actual[0] if not metric.pairwise \
                    else pair_index(actual[0], actual[1], h)
                columns.append((col, vec))
            leaf_scores[lf] = columns
            t3 = time.perf_counter()
            timings["matrices"] += t2 - t1
            timings["scores"] += t3 - t2
        plan.append((tree, leaf_scores))

    out = np.zeros((C.shape[0], width))

    def run_block(start: int, stop: int) -> None:
        rows = C[start:stop]
        for tree, leaf_scores in plan:
            kwargs = {} if block_size is None else {"block_size": block_size}
            table = calc_decision_patterns(tree, rows, **kwargs)
            for lf, columns in leaf_scores.items():
                pats = table.patterns[lf]
                for col, vec in columns:
                    out[start:stop, col] += vec[pats]

    t0 = time.perf_counter()
    n = C.shape[0]
    if threads <= 1 or n == 0:
        run_block(0, n)
    else:
        bounds = np.linspace(0, n, threads + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run_block, int(bounds[k]), int(bounds[k + 1]))
                for k in range(threads)
            ]
            for f in futures:
                f.result()
    timings["gather"] += time.perf_counter() - t0

    return BatchAttribution(metric.kind, h, metric.pairwise, out, timings)


def baseline_attributions(ensemble: TreeEnsemble,
                          consumers,
                          baseline_row,
                          metric: "Metric | MetricKind | str" = MetricKind.SHAPLEY,
                          threads: int = 1) -> BatchAttribution:
    """Attributions against a single fixed baseline row: background mode with
    a one-row background."""
    row = np.asarray(baseline_row, dtype=np.float64).reshape(1, -1)
    return woodelf(ensemble, consumers, background=row, metric=metric,
                   threads=threads)
