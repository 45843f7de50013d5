"""Ablated-context construction, ablation-vector sampling, and prompt rendering.

Sampling is backed by a SplitMix64-style counter generator: word ``c`` of the
stream keyed by ``seed`` is ``mix64(seed + (c + 1) * GOLDEN)`` where ``mix64``
is the SplitMix64 finalizer. Vector ``i`` draws its bits from words
``i * ceil(d / 64) .. ``, so any vector can be generated independently of the
others (random access), which keeps parallel generation deterministic.
Separate uses (surrogate fitting vs metric evaluation) run on disjoint
streams: an FNV-1a hash of the stream label is folded into the seed and the
label is recorded in the sample's ``sampler_id``.
"""

from __future__ import annotations

from dataclasses import dataclass
import re

import numpy as np

from .errors import BadTemplate, DimensionMismatch
from .segmentation import SourceGroup, SourcePartition, SourceSpan

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
SAMPLER_ALGORITHM = "splitmix64-bernoulli-half/v1"


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _counter_word(seed: int, counter: int) -> int:
    return _mix64((seed + (counter + 1) * _GOLDEN) & _MASK64)


def derive_stream_seed(seed: int, label: str) -> int:
    """Fold a stream label into a seed so labeled streams never overlap."""
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK64
    return _mix64((seed & _MASK64) ^ h)


@dataclass(frozen=True)
class AblationVector:
    """Inclusion mask over the partition's sources (1 = keep, 0 = drop)."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits:
            raise ValueError("ablation vector must have at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def d(self) -> int:
        return len(self.bits)

    @property
    def size(self) -> int:
        """Number of included sources, |v|."""
        return sum(self.bits)

    def included_indices(self) -> list[int]:
        return [i for i, b in enumerate(self.bits) if b]

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    @classmethod
    def ones(cls, d: int) -> "AblationVector":
        return cls(tuple([1] * d))

    @classmethod
    def zeros(cls, d: int) -> "AblationVector":
        return cls(tuple([0] * d))

    @classmethod
    def from_included(cls, d: int, indices) -> "AblationVector":
        bits = [0] * d
        for i in indices:
            bits[i] = 1
        return cls(tuple(bits))

    @classmethod
    def excluding(cls, d: int, indices) -> "AblationVector":
        bits = [1] * d
        for i in indices:
            bits[i] = 0
        return cls(tuple(bits))


@dataclass(frozen=True)
class AblationSample:
    """A reproducible batch of ablation vectors."""

    vectors: tuple[AblationVector, ...]
    seed: int
    sampler_id: str

    @property
    def n(self) -> int:
        return len(self.vectors)

    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, 0), dtype=np.uint8)
        return np.stack([v.as_array() for v in self.vectors])


def sample_ablations(d: int, n: int, seed: int, stream: str = "fit") -> AblationSample:
    """Draw n vectors with i.i.d. Bernoulli(1/2) bits, uniform over {0,1}^d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    stream_seed = derive_stream_seed(seed, stream)
    words_per_vector = (d + 63) // 64
    vectors = []
    for i in range(n):
        bits: list[int] = []
        for w in range(words_per_vector):
            word = _counter_word(stream_seed, i * words_per_vector + w)
            take = min(64, d - w * 64)
            bits.extend((word >> t) & 1 for t in range(take))
        vectors.append(AblationVector(tuple(bits)))
    return AblationSample(tuple(vectors), seed, f"{SAMPLER_ALGORITHM}:{stream}")


def ablate(partition: SourcePartition, vector: AblationVector) -> str:
    """Render the context with excluded sources removed.

    Included sources keep their original order and are joined by single
    spaces (removal makes the original separators ill-defined). The identity
    ablation of an ungrouped partition short-circuits to the untouched
    context text. A group's header is emitted once, immediately before its
    first included member, and only if at least one member is included.
    """
    if vector.d != partition.d:
        raise DimensionMismatch(
            f"vector has {vector.d} bits but partition has {partition.d} sources"
        )
    if not partition.groups and all(vector.bits):
        return partition.context_text
    group_of: dict[int, SourceGroup] = {}
    for group in partition.groups:
        for m in group.member_indices:
            group_of[m] = group
    pieces: list[str] = []
    emitted: set[int] = set()
    for idx, span in enumerate(partition.sources):
        if not vector.bits[idx]:
            continue
        group = group_of.get(idx)
        if group is not None and id(group) not in emitted:
            emitted.add(id(group))
            pieces.append(group.header)
        pieces.append(span.text)
    return " ".join(pieces)


def restrict(partition: SourcePartition, vector: AblationVector) -> SourcePartition:
    """A new partition containing only the included sources, re-indexed.

    Group headers survive for groups that keep at least one member; the new
    context text matches ``ablate(partition, vector)`` rendered without
    headers (headers stay metadata, as in the parent partition).
    """
    if vector.d != partition.d:
        raise DimensionMismatch(
            f"vector has {vector.d} bits but partition has {partition.d} sources"
        )
    kept = vector.included_indices()
    if not kept:
        raise ValueError("cannot restrict to an empty partition")
    new_index = {old: new for new, old in enumerate(kept)}
    spans = []
    pos = 0
    for new, old in enumerate(kept):
        text = partition.sources[old].text
        sep = " " if new + 1 < len(kept) else ""
        spans.append(SourceSpan(new, pos, pos + len(text), text, sep))
        pos += len(text) + len(sep)
    groups = []
    for group in partition.groups:
        members = tuple(new_index[m] for m in group.member_indices if m in new_index)
        if members:
            groups.append(SourceGroup(group.header, members))
    context = " ".join(partition.sources[old].text for old in kept)
    return SourcePartition(context, tuple(spans), partition.granularity, tuple(groups))


_PLACEHOLDER = re.compile(r"\{context\}|\{query\}")


def render_prompt(template: str, ablated_context: str, query: str) -> str:
    """Substitute {context} and {query} literally, in a single pass."""
    if template.count("{context}") != 1 or template.count("{query}") != 1:
        raise BadTemplate("template must contain {context} and {query} exactly once")
    return _PLACEHOLDER.sub(
        lambda m: ablated_context if m.group() == "{context}" else query,
        template,
    )
