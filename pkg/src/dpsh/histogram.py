"""Histogram data model: building counts from user records, sparsity and
monotone-neighbor checks, top-k preprocessing, and the JSON formats.

A histogram maps item keys to positive counts; absent keys mean zero, so the
conceptual domain may be unbounded while storage stays sparse. All types are
immutable values and all operations are pure functions.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

__all__ = [
    "SparseHistogram",
    "Dataset",
    "NoisyHistogram",
    "build_histogram",
    "topk_preprocess",
    "is_k_sparse_monotonic_pair",
    "generate_neighbor",
    "histogram_to_json",
    "histogram_from_json",
    "dataset_from_json",
    "dataset_to_json",
    "noisy_histogram_to_json",
]

_MAX_COUNT = 2**64 - 1


@dataclass(frozen=True)
class SparseHistogram:
    """Map from item key to positive count; zero counts are never stored."""

    counts: Mapping[str, int]

    def __post_init__(self) -> None:
        clean: dict[str, int] = {}
        for key, value in self.counts.items():
            if not isinstance(key, str):
                raise TypeError(f"item keys must be strings, got {type(key).__name__}")
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError(f"count for {key!r} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"count for {key!r} must be >= 1, got {value}")
            if value > _MAX_COUNT:
                raise OverflowError(f"count for {key!r} exceeds the 64-bit range")
            clean[key] = value
        object.__setattr__(self, "counts", MappingProxyType(clean))

    def sparsity(self) -> int:
        """Number of non-zero coordinates."""
        return len(self.counts)

    def get(self, key: str) -> int:
        return self.counts.get(key, 0)

    def sorted_keys(self) -> list[str]:
        return sorted(self.counts)


@dataclass(frozen=True)
class Dataset:
    """Sequence of user records; each record is the set of items a user holds."""

    users: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(frozenset(u) for u in self.users))


@dataclass(frozen=True)
class NoisyHistogram:
    """Released noisy counts plus the metadata needed to audit the release.

    ``params`` records the mechanism configuration that produced the release
    (k / sigma / tau as applicable); ``half_integers`` marks the discrete
    mechanisms whose values are integer multiples of one half and are
    serialized as exact decimal strings.
    """

    counts: Mapping[str, float]
    mechanism: str
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int | None = None
    half_integers: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", MappingProxyType(dict(self.counts)))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))


def build_histogram(dataset: Dataset) -> SparseHistogram:
    """Count, per item key, the number of users whose record contains it."""
    counts: Counter[str] = Counter()
    for user in dataset.users:
        counts.update(user)
    return SparseHistogram(dict(counts))


def topk_preprocess(hist: SparseHistogram, k: int) -> SparseHistogram:
    """Subtract the (k+1)-th largest count and clamp at zero.

    Absent keys count as zero, so with fewer than k+1 stored keys the offset
    is 0 and preprocessing is the identity. The result never has more than k
    non-zero coordinates: at most k counts can strictly exceed the (k+1)-th
    largest.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    values = hist.counts.values()
    if len(values) >= k + 1:
        offset = heapq.nlargest(k + 1, values)[-1]
    else:
        offset = 0
    kept = {key: c - offset for key, c in hist.counts.items() if c > offset}
    return SparseHistogram(kept)


def is_k_sparse_monotonic_pair(h1: SparseHistogram, h2: SparseHistogram, k: int) -> bool:
    """True iff both histograms are k-sparse and their difference lies
    entirely in {0, 1} or entirely in {0, -1} coordinate-wise."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if h1.sparsity() > k or h2.sparsity() > k:
        return False
    diffs = set()
    for key in set(h1.counts) | set(h2.counts):
        d = h1.get(key) - h2.get(key)
        if d:
            diffs.add(d)
    return diffs <= {1} or diffs <= {-1}


def generate_neighbor(hist: SparseHistogram, direction: str, user_items: Iterable[str]) -> SparseHistogram:
    """Histogram after adding or removing one user holding ``user_items``."""
    if direction not in ("add", "remove"):
        raise ValueError(f"direction must be 'add' or 'remove', got {direction!r}")
    counts = dict(hist.counts)
    for item in set(user_items):
        if direction == "add":
            counts[item] = counts.get(item, 0) + 1
        else:
            current = counts.get(item, 0)
            if current < 1:
                raise ValueError(f"cannot remove item {item!r} with count 0")
            if current == 1:
                del counts[item]
            else:
                counts[item] = current - 1
    return SparseHistogram(counts)


# --------------------------------------------------------------------------
# JSON formats. Keys are written in sorted order so serialized artifacts are
# byte-stable for a fixed input.
# --------------------------------------------------------------------------


def histogram_to_json(hist: SparseHistogram) -> str:
    return json.dumps({"counts": {key: hist.counts[key] for key in hist.sorted_keys()}})


def histogram_from_json(text: str) -> SparseHistogram:
    data = json.loads(text)
    if not isinstance(data, dict) or not isinstance(data.get("counts"), dict):
        raise ValueError('histogram JSON must be an object {"counts": {...}}')
    return SparseHistogram(data["counts"])


def dataset_from_json(text: str) -> Dataset:
    data = json.loads(text)
    if not isinstance(data, dict) or not isinstance(data.get("users"), list):
        raise ValueError('dataset JSON must be an object {"users": [[...], ...]}')
    records = []
    for record in data["users"]:
        if not isinstance(record, list) or not all(isinstance(item, str) for item in record):
            raise ValueError("each user record must be a list of item-key strings")
        if len(set(record)) != len(record):
            raise ValueError(f"duplicate item key in user record {record!r}")
        records.append(frozenset(record))
    return Dataset(tuple(records))


def dataset_to_json(dataset: Dataset) -> str:
    return json.dumps({"users": [sorted(user) for user in dataset.users]})


def _format_half_integer(value: float) -> str:
    twice = round(2 * value)
    sign = "-" if twice < 0 else ""
    magnitude = abs(twice)
    return f"{sign}{magnitude // 2}.{'5' if magnitude % 2 else '0'}"


def noisy_histogram_to_json(noisy: NoisyHistogram) -> str:
    """Serialize a release; half-integer values become exact decimal strings."""
    if noisy.half_integers:
        counts = {key: _format_half_integer(noisy.counts[key]) for key in sorted(noisy.counts)}
    else:
        counts = {key: noisy.counts[key] for key in sorted(noisy.counts)}
    return json.dumps(
        {
            "counts": counts,
            "mechanism": noisy.mechanism,
            "params": dict(noisy.params),
            "seed": noisy.seed,
        }
    )
