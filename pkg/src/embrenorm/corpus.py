"""Corpus preparation: segmentation, filtering, seeded sampling.

The segmenter is deliberately dumb and rule based (no regex, no
language model): split at sentence terminators followed by whitespace
and at newlines.  What matters downstream is not linguistic quality
but that the same input always yields the same sample, captured by a
fingerprint that the leakage guard can compare against.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidEncoding, SchemaError
from .rng import stream

_TERMINATORS = ".!?"

# Length bounds are inclusive and counted in Unicode scalar values.
DEFAULT_MIN_LEN = 64
DEFAULT_MAX_LEN = 512


def segment(text: str) -> list[str]:
    """Split text into sentence-ish fragments.

    Cuts after '.', '!' or '?' when the next character is whitespace,
    and at every newline.  Fragments are stripped; empties dropped.
    """
    sentences: list[str] = []
    start = 0
    n = len(text)
    for i in range(n):
        ch = text[i]
        if ch == "\n":
            piece = text[start:i].strip()
            if piece:
                sentences.append(piece)
            start = i + 1
        elif ch in _TERMINATORS and i + 1 < n and text[i + 1].isspace():
            piece = text[start : i + 1].strip()
            if piece:
                sentences.append(piece)
            start = i + 1
    piece = text[start:].strip()
    if piece:
        sentences.append(piece)
    return sentences


def text_fingerprint(sentences) -> str:
    """Hash of the sentence *set*: order independent, content sensitive."""
    canonical = "\n".join(sorted(sentences))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CorpusSample:
    sentences: tuple[str, ...]
    fingerprint: str
    raw_count: int
    filtered_count: int
    deduped_count: int
    seed: int
    source: str = ""

    def manifest(self) -> dict:
        return {
            "source": self.source,
            "seed": self.seed,
            "rawCount": self.raw_count,
            "filteredCount": self.filtered_count,
            "dedupedCount": self.deduped_count,
            "sampledCount": len(self.sentences),
            "fingerprint": self.fingerprint,
        }


def sample(
    sentences,
    size: int,
    min_len: int = DEFAULT_MIN_LEN,
    max_len: int = DEFAULT_MAX_LEN,
    seed: int = 0,
    source: str = "",
) -> CorpusSample:
    """Filter by length, dedup, then reservoir-sample `size` sentences.

    Duplicates keep their first occurrence.  When fewer than `size`
    sentences survive filtering, all survivors are returned.  Output
    preserves original corpus order regardless of the sampling path.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    sentences = list(sentences)
    eligible = [s for s in sentences if min_len <= len(s) <= max_len]
    seen: set[str] = set()
    survivors: list[str] = []
    for s in eligible:
        if s not in seen:
            seen.add(s)
            survivors.append(s)

    if len(survivors) <= size:
        chosen = list(range(len(survivors)))
    else:
        rng = stream(seed, 0)
        reservoir = list(range(size))
        for i in range(size, len(survivors)):
            j = int(rng.integers(0, i + 1))
            if j < size:
                reservoir[j] = i
        chosen = sorted(reservoir)

    picked = tuple(survivors[i] for i in chosen)
    return CorpusSample(
        sentences=picked,
        fingerprint=text_fingerprint(picked),
        raw_count=len(sentences),
        filtered_count=len(eligible),
        deduped_count=len(survivors),
        seed=seed,
        source=source,
    )


def read_documents(path: str | Path) -> list[str]:
    """Read an input file as a list of documents to segment.

    Plain text gives one document.  A .jsonl file gives one document
    per line, each an object with a "text" field.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"{path} is not valid UTF-8: {exc}") from None
    if path.suffix != ".jsonl":
        return [raw]
    docs = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise SchemaError(f'{path}:{lineno}: expected an object with a string "text" field')
        docs.append(obj["text"])
    return docs
