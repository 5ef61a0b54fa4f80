"""Decision patterns: per-leaf bit sequences recording path agreement of rows.

For a leaf with path (root=n1, ..., nk, leaf), bit i of the pattern says
whether the row would follow the path's edge out of ni (1) or branch off (0).
Bits accumulate most-significant-first via left shifts, so the root's edge
occupies the highest populated bit. Patterns for a whole data matrix are
computed level by level with one split evaluation per inner node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelSchemaError
from .tree_model import HARD_DEPTH_CAP, Tree, as_matrix

_WIDTHS = ((8, np.uint8), (16, np.uint16), (32, np.uint32))

DEFAULT_BLOCK_SIZE = 4096


def pattern_width_for_depth(depth: int) -> int:
    """Smallest unsigned-integer width in {8, 16, 32} holding ``depth`` bits."""
    if depth > HARD_DEPTH_CAP:
        raise ModelSchemaError(
            f"depth {depth} exceeds the hard cap of {HARD_DEPTH_CAP}"
        )
    for width, _ in _WIDTHS:
        if depth <= width:
            return width
    raise AssertionError("unreachable: cap is below the widest type")


def pattern_dtype_for_depth(depth: int) -> np.dtype:
    width = pattern_width_for_depth(depth)
    return np.dtype(dict(_WIDTHS)[width])


@dataclass(frozen=True)
class DecisionPattern:
    """One packed agreement bit-sequence: ``length`` bits stored in ``bits``."""

    bits: int
    length: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << self.length if self.length else 1):
            raise ValueError(f"bits {self.bits} do not fit in {self.length} bits")

    def bit(self, i: int) -> int:
        """Agreement bit of path position i (0 = root's edge)."""
        return self.bits >> (self.length - 1 - i) & 1


@dataclass(frozen=True)
class LeafPatternTable:
    """Per-leaf pattern vectors, one entry per data row.

    ``patterns[leaf]`` is an unsigned array of packed bit sequences whose
    width is chosen from the tree depth; ``lengths[leaf]`` is the leaf's path
    length (its bit count).
    """

    patterns: dict[int, np.ndarray]
    lengths: dict[int, int]
    num_rows: int


def calc_decision_patterns(tree: Tree, data,
                           block_size: int = DEFAULT_BLOCK_SIZE) -> LeafPatternTable:
    """Patterns of every data row at every leaf of the tree.

    Walks the tree breadth-first once per row block: the root starts at
    pattern 0, a left child appends the split outcome, and the right sibling
    is the left child with the last bit flipped. Inner-node patterns are
    transient; only leaf vectors are kept. O(rows * leaves) overall.
    """
    X = as_matrix(data)
    n = X.shape[0]
    dtype = pattern_dtype_for_depth(tree.depth())
    one = dtype.type(1)

    order = tree.bfs_order()
    lengths: dict[int, int] = {tree.root: 0}
    for idx in order:
        node = tree.nodes[idx]
        if not node.is_leaf:
            lengths[node.left] = lengths[idx] + 1
            lengths[node.right] = lengths[idx] + 1

    leaf_order = [i for i in order if tree.nodes[i].is_leaf]
    out = {i: np.empty(n, dtype=dtype) for i in leaf_order}

    for start in range(0, max(n, 1), block_size):
        stop = min(start + block_size, n)
        block = X[start:stop]
        live = {tree.root: np.zeros(stop - start, dtype=dtype)}
        for idx in order:
            node = tree.nodes[idx]
            pattern = live.pop(idx)
            if node.is_leaf:
                out[idx][start:stop] = pattern
            else:
                goes_left = block[:, node.feature] < node.threshold
                left = (pattern << one) | goes_left.astype(dtype)
                live[node.left] = left
                live[node.right] = left ^ one

    return LeafPatternTable(out, {i: lengths[i] for i in leaf_order}, n)


def decision_pattern_single(tree: Tree, leaf_index: int, row) -> DecisionPattern:
    """Pattern of one row at one leaf by walking the path directly.

    Reference implementation of the per-position definition; the batch
    routine is checked against it in the tests.
    """
    path = tree.path_to(leaf_index)
    bits = 0
    for position in range(len(path) - 1):
        node = tree.nodes[path[position]]
        goes_left = row[node.feature] < node.threshold
        on_path = (node.left == path[position + 1] and goes_left) or \
                  (node.right == path[position + 1] and not goes_left)
        bits = (bits << 1) | int(on_path)
    return DecisionPattern(bits, len(path) - 1)


def sibling_last_bit_pairs(tree: Tree) -> list[tuple[int, int]]:
    """All (left leaf, right leaf) pairs sharing a parent.

    For any row, the two patterns differ only in the last bit, so the right
    sibling's pattern vector (and its histogram) can be derived from the
    left's instead of recomputed.
    """
    pairs = []
    for idx in tree.bfs_order():
        node = tree.nodes[idx]
        if node.is_leaf:
            continue
        if tree.nodes[node.left].is_leaf and tree.nodes[node.right].is_leaf:
            pairs.append((node.left, node.right))
    return pairs
