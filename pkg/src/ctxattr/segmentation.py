"""Partition context text into sources and map statement selections to token spans.

The sentence splitter is a fixed rule set rather than a wrapper around an
external tokenizer, so partitions are reproducible bit-for-bit:

* split after a terminator (``.``, ``!``, ``?``, optionally followed by
  closing quotes) when it is followed by whitespace and an uppercase letter
  or digit;
* a built-in abbreviation list suppresses splits after ``.``;
* a whitespace run containing two or more newlines (a blank line) always
  splits, terminator or not.

Every character of the input belongs to exactly one span or one trailing
separator; leading whitespace binds to the first span (there is no separator
slot before it). Rejoining ``span.text + span.trailing_separator`` in order
reproduces the input exactly.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import EmptyText, OutOfBounds

_TERMINATORS = ".!?"
_CLOSING_QUOTES = "\"'”’"
# Compared case-insensitively against the word preceding a "." (final dot stripped).
_ABBREVIATIONS = frozenset({"mr", "dr", "e.g", "i.e", "u.s", "no", "st"})


class Granularity(str, Enum):
    SENTENCE = "sentence"
    WORD = "word"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SourceSpan:
    """One source: a contiguous slice of the context plus its separator."""

    index: int
    char_start: int
    char_end: int
    text: str
    trailing_separator: str = ""

    def __post_init__(self):
        if self.char_start >= self.char_end:
            raise ValueError(f"empty span at index {self.index}")


@dataclass(frozen=True)
class SourceGroup:
    """Sources that share a header line (e.g. a document title)."""

    header: str
    member_indices: tuple[int, ...]

    def __post_init__(self):
        if not self.member_indices:
            raise ValueError("group must have at least one member")


@dataclass(frozen=True)
class SourcePartition:
    """The context split into ordered, non-overlapping sources."""

    context_text: str
    sources: tuple[SourceSpan, ...]
    granularity: Granularity = Granularity.CUSTOM
    groups: tuple[SourceGroup, ...] = ()

    def __post_init__(self):
        if not self.sources:
            raise ValueError("partition needs at least one source")
        pos = 0
        rebuilt = []
        for span in self.sources:
            if span.char_start < pos:
                raise ValueError(f"span {span.index} overlaps its predecessor")
            if span.text != self.context_text[span.char_start:span.char_end]:
                raise ValueError(f"span {span.index} text does not match its offsets")
            rebuilt.append(span.text)
            rebuilt.append(span.trailing_separator)
            pos = span.char_end
        if "".join(rebuilt) != self.context_text:
            raise ValueError("spans plus separators do not reproduce the context")
        seen: set[int] = set()
        for group in self.groups:
            for m in group.member_indices:
                if m in seen:
                    raise ValueError(f"source {m} belongs to more than one group")
                if not 0 <= m < len(self.sources):
                    raise ValueError(f"group member {m} out of range")
                seen.add(m)

    @property
    def d(self) -> int:
        return len(self.sources)

    def source_texts(self) -> list[str]:
        return [s.text for s in self.sources]

    @classmethod
    def from_sentences(cls, text: str) -> "SourcePartition":
        return cls(text, tuple(segment_sentences(text)), Granularity.SENTENCE)

    @classmethod
    def from_words(cls, text: str) -> "SourcePartition":
        return cls(text, tuple(segment_words(text)), Granularity.WORD)

    @classmethod
    def from_texts(cls, texts: Sequence[str], separator: str = " ") -> "SourcePartition":
        """Build a custom partition from pre-split source strings."""
        if not texts:
            raise EmptyText("no source texts given")
        spans = []
        pos = 0
        for i, t in enumerate(texts):
            if not t:
                raise EmptyText(f"source {i} is empty")
            sep = separator if i + 1 < len(texts) else ""
            spans.append(SourceSpan(i, pos, pos + len(t), t, sep))
            pos += len(t) + len(sep)
        return cls(separator.join(texts), tuple(spans), Granularity.CUSTOM)

    @classmethod
    def from_documents(cls, documents: Iterable[tuple[str, str]]) -> "SourcePartition":
        """Build a grouped partition from (header, body) pairs.

        Bodies are sentence-split; each document becomes one group whose
        header is emitted by the ablation renderer when at least one member
        survives. Headers are group metadata, not part of the context text.
        """
        spans: list[SourceSpan] = []
        groups: list[SourceGroup] = []
        parts: list[str] = []
        pos = 0
        docs = list(documents)
        if not docs:
            raise EmptyText("no documents given")
        for di, (header, body) in enumerate(docs):
            doc_spans = segment_sentences(body)
            members = []
            last_doc = di + 1 == len(docs)
            for si, span in enumerate(doc_spans):
                sep = span.trailing_separator
                if si + 1 == len(doc_spans) and not last_doc:
                    sep = sep + "\n\n"
                idx = len(spans)
                spans.append(SourceSpan(idx, pos, pos + len(span.text), span.text, sep))
                parts.append(span.text)
                parts.append(sep)
                pos += len(span.text) + len(sep)
                members.append(idx)
            groups.append(SourceGroup(header, tuple(members)))
        return cls("".join(parts), tuple(spans), Granularity.SENTENCE, tuple(groups))


@dataclass(frozen=True)
class StatementSpan:
    """A token-aligned selection of the response to attribute."""

    response_text: str
    token_start: int
    token_end: int
    char_start: int
    char_end: int

    def __post_init__(self):
        if not 0 <= self.token_start < self.token_end:
            raise ValueError("need 0 <= token_start < token_end")
        if self.char_start >= self.char_end:
            raise ValueError("empty statement span")

    @property
    def text(self) -> str:
        return self.response_text[self.char_start:self.char_end]


def _is_abbreviation(text: str, dot_index: int) -> bool:
    start = dot_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:dot_index].lstrip("\"'([{“‘")
    return word.lower() in _ABBREVIATIONS


def _spans_from_cuts(text: str, cuts: list[tuple[int, int]]) -> list[SourceSpan]:
    """Build spans from (text_end, separator_end) cut positions."""
    spans = []
    start = 0
    for text_end, sep_end in cuts:
        spans.append(SourceSpan(
            index=len(spans),
            char_start=start,
            char_end=text_end,
            text=text[start:text_end],
            trailing_separator=text[text_end:sep_end],
        ))
        start = sep_end
    return spans


def segment_sentences(text: str) -> list[SourceSpan]:
    """Split text into sentence spans using the fixed rule set above."""
    if not text.strip():
        raise EmptyText("cannot segment whitespace-only text")
    n = len(text)
    cuts: list[tuple[int, int]] = []
    start = 0
    i = 0
    while i < n:
        ch = text[i]
        if ch in _TERMINATORS:
            j = i + 1
            while j < n and text[j] in _CLOSING_QUOTES:
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            boundary = (
                k > j
                and k < n
                and (text[k].isupper() or text[k].isdigit())
                and not (ch == "." and _is_abbreviation(text, i))
            )
            if boundary:
                cuts.append((j, k))
                start = k
                i = k
            else:
                i = j
            continue
        if ch.isspace():
            k = i
            newlines = 0
            while k < n and text[k].isspace():
                newlines += text[k] == "\n"
                k += 1
            if newlines >= 2 and k < n and i > start:
                cuts.append((i, k))
                start = k
            i = k
            continue
        i += 1
    if start < n:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start:
            cuts.append((end, n))
        elif cuts:
            # pure-whitespace tail: extend the previous separator
            text_end, _ = cuts[-1]
            cuts[-1] = (text_end, n)
    return _spans_from_cuts(text, cuts)


def segment_words(text: str) -> list[SourceSpan]:
    """Split text on maximal whitespace runs; each run becomes a separator."""
    if not text.strip():
        raise EmptyText("cannot segment whitespace-only text")
    n = len(text)
    cuts: list[tuple[int, int]] = []
    i = 0
    while i < n and text[i].isspace():
        i += 1
    while i < n:
        j = i
        while j < n and not text[j].isspace():
            j += 1
        k = j
        while k < n and text[k].isspace():
            k += 1
        cuts.append((j, k))
        i = k
    return _spans_from_cuts(text, cuts)


def token_spans(response_text: str, tokens: Sequence[str]) -> list[tuple[int, int]]:
    """Character spans of a token list that concatenates to the response."""
    if "".join(tokens) != response_text:
        raise OutOfBounds("tokens do not concatenate to the response text")
    spans = []
    pos = 0
    for tok in tokens:
        spans.append((pos, pos + len(tok)))
        pos += len(tok)
    return spans


def select_statement(
    response_text: str,
    tokenization: Sequence[tuple[int, int]],
    char_start: int,
    char_end: int,
) -> StatementSpan:
    """Snap a character selection outward to the smallest covering token span.

    The snap never moves inward: probabilities are defined over whole tokens,
    so a selection landing mid-token widens to include that token.
    """
    if not tokenization:
        raise OutOfBounds("empty tokenization")
    if tokenization[0][0] != 0 or tokenization[-1][1] != len(response_text):
        raise OutOfBounds("tokenization does not cover the response")
    if not (0 <= char_start < char_end <= len(response_text)):
        raise OutOfBounds(
            f"selection [{char_start}, {char_end}) outside response of length {len(response_text)}"
        )
    starts = [s for s, _ in tokenization]
    ends = [e for _, e in tokenization]
    i = bisect_right(starts, char_start) - 1
    j = bisect_left(ends, char_end)
    return StatementSpan(
        response_text=response_text,
        token_start=i,
        token_end=j + 1,
        char_start=starts[i],
        char_end=ends[j],
    )


def whole_response_statement(response_text: str, tokens: Sequence[str]) -> StatementSpan:
    """The statement covering the entire response."""
    spans = token_spans(response_text, tokens)
    return select_statement(response_text, spans, 0, len(response_text))
