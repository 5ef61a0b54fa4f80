"""Mapping (consumer pattern, baseline pattern) pairs to cubes, per path.

For one root-to-leaf path, every reachable pattern pair maps to the cube over
path features that is satisfied exactly by the participation sets steering a
mixed consumer/baseline row to that leaf. The mapping depends only on the
path's repeat structure and length, so structurally identical paths share one
canonical dictionary plus a per-path feature rename.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .formula_core import Cube


@dataclass(frozen=True)
class CubeDictionary:
    """Sparse map from (consumer pattern, baseline pattern) to a unit cube.

    Holds exactly 3^depth entries: each path level turns one entry into the
    three reachable child keys (consumer-only, baseline-only, both), and the
    both-miss key is never inserted. Cube weights stay 1; the leaf weight is
    applied downstream so dictionaries can be shared across leaves.
    Repeat-feature paths can make entries contradictory; those stay in the
    dictionary, flagged, and are skipped when metrics are applied.
    """

    path_features: tuple[int, ...]
    entries: dict[tuple[int, int], Cube]

    @property
    def depth(self) -> int:
        return len(self.path_features)


def map_patterns_to_cube(path_features: Sequence[int]) -> CubeDictionary:
    """Build the pattern-pair dictionary for a path's feature sequence.

    Starting from {(0, 0): empty cube}, each feature f triples the entries:
    key (2pc+1, 2pb) adds f positively (consumer must participate to stay on
    the path), (2pc, 2pb+1) adds f negated (f must be missing), and
    (2pc+1, 2pb+1) copies the cube (the row stays on the path either way).
    """
    path_features = tuple(int(f) for f in path_features)
    entries: dict[tuple[int, int], tuple[tuple[int, ...], tuple[int, ...]]] = {
        (0, 0): ((), ())
    }
    for f in path_features:
        grown: dict[tuple[int, int], tuple[tuple[int, ...], tuple[int, ...]]] = {}
        for (pc, pb), (pos, neg) in entries.items():
            grown[(2 * pc + 1, 2 * pb)] = (pos + (f,), neg)
            grown[(2 * pc, 2 * pb + 1)] = (pos, neg + (f,))
            grown[(2 * pc + 1, 2 * pb + 1)] = (pos, neg)
        entries = grown
    cubes = {key: Cube(pos, neg, 1.0) for key, (pos, neg) in entries.items()}
    return CubeDictionary(path_features, cubes)


def canonical_path(path_features: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Rewrite a feature sequence as first-occurrence ordinals plus a rename.

    Two paths share a canonical form iff they have the same length and repeat
    structure; ``rename[ordinal]`` recovers the original feature id.
    """
    ordinal_of: dict[int, int] = {}
    canon = []
    for f in path_features:
        canon.append(ordinal_of.setdefault(int(f), len(ordinal_of)))
    rename = tuple(ordinal_of)
    return tuple(canon), rename


class CachedDictionary(NamedTuple):
    dictionary: CubeDictionary       # canonical: cubes speak in ordinals
    rename: tuple[int, ...]          # ordinal -> actual feature id


class DictionaryCache:
    """Per-run cache of canonical dictionaries, keyed by repeat structure.

    Unbounded by design: at the depth cap the number of distinct canonical
    forms stays small. Inserts are serialized; completed entries are read
    without locking.
    """

    def __init__(self) -> None:
        self._dicts: dict[tuple[int, ...], CubeDictionary] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._dicts)

    def get(self, path_features: Sequence[int]) -> CachedDictionary:
        canon, rename = canonical_path(path_features)
        dictionary = self._dicts.get(canon)
        if dictionary is None:
            with self._lock:
                dictionary = self._dicts.get(canon)
                if dictionary is None:
                    dictionary = map_patterns_to_cube(canon)
                    self._dicts[canon] = dictionary
        return CachedDictionary(dictionary, rename)


def cached_dictionary(cache: DictionaryCache,
                      path_features: Sequence[int]) -> CachedDictionary:
    """Fetch (or build and insert) the canonical dictionary for a path."""
    return cache.get(path_features)
