"""Corpus loading, vocabulary construction, encoding, and split statistics.

Corpus format is UTF-8 JSON Lines: one object per line with exactly the keys
``id`` (integer), ``text`` (non-empty string), ``label`` (one of the 31 intent
names). A corpus directory holds ``train.jsonl``, ``dev.jsonl``, ``test.jsonl``.

Tokenization is character-level: every unicode character of the text is one
token. This keeps the pipeline free of a word segmenter and robust to the
short, noisy, typo-ridden utterances the taxonomy targets.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import CorpusError

SPLITS = ("train", "dev", "test")

LABELS: tuple[str, ...] = (
    "app", "bus", "calc", "chat", "cinemas", "contacts", "cookbook",
    "datetime", "email", "epg", "flight", "health", "lottery", "map",
    "match", "message", "music", "news", "novel", "poetry", "radio",
    "riddle", "schedule", "stock", "telephone", "train", "translation",
    "tvchannel", "video", "weather", "website",
)
LABEL_SET = frozenset(LABELS)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

# Padding floor: every encoded utterance is at least this long so that a
# width-3 convolution always has one full window.
MIN_ENCODED_LEN = 3

# Published per-label split counts for the reference corpus, keyed
# label -> (train, dev, test). The split totals are published as
# 2583/729/688 (4000 overall); note the test-column cells below add up to
# 667, so the reference table cannot be satisfied cell-by-cell and in total
# at once. `compare_to_reference` checks both and reports every mismatch.
REFERENCE_COUNTS: dict[str, tuple[int, int, int]] = {
    "app": (36, 18, 18), "bus": (24, 8, 8), "calc": (24, 8, 8),
    "chat": (456, 114, 50), "cinemas": (24, 10, 8), "contacts": (30, 10, 10),
    "cookbook": (269, 88, 90), "datetime": (18, 6, 6), "email": (24, 8, 8),
    "epg": (107, 36, 36), "flight": (62, 21, 21), "health": (55, 19, 18),
    "lottery": (24, 8, 8), "map": (68, 23, 24), "match": (24, 8, 8),
    "message": (63, 21, 21), "music": (66, 22, 22), "news": (58, 19, 19),
    "novel": (24, 8, 8), "poetry": (402, 34, 34), "radio": (24, 8, 8),
    "riddle": (34, 11, 11), "schedule": (29, 9, 10), "stock": (71, 24, 24),
    "telephone": (63, 21, 21), "train": (70, 23, 23),
    "translation": (61, 21, 20), "tvchannel": (71, 23, 24),
    "video": (182, 60, 61), "weather": (66, 22, 22), "website": (54, 18, 18),
}
REFERENCE_TOTALS: dict[str, int] = {"train": 2583, "dev": 729, "test": 688}


@dataclass(frozen=True)
class Utterance:
    id: int
    text: str
    label: str


class Vocab:
    """token -> index map with PAD=0 and UNK=1 reserved."""

    def __init__(self, tokens: Sequence[str]):
        if tokens[PAD_INDEX] != PAD_TOKEN or tokens[UNK_INDEX] != UNK_TOKEN:
            raise ValueError("vocab must start with the PAD and UNK tokens")
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocab")

    def __len__(self) -> int:
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK_INDEX)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.tokens == other.tokens


def tokenize(text: str) -> list[str]:
    """Character-level tokens: every unicode character, whitespace included."""
    return list(text)


def _parse_line(raw: str, line_no: int, path) -> Utterance:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}:{line_no}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict) or set(obj) != {"id", "text", "label"}:
        raise CorpusError(f"{path}:{line_no}: expected exactly the keys id, text, label")
    if not isinstance(obj["id"], int) or isinstance(obj["id"], bool):
        raise CorpusError(f"{path}:{line_no}: id must be an integer")
    if not isinstance(obj["text"], str) or not obj["text"]:
        raise CorpusError(f"{path}:{line_no}: text must be a non-empty string")
    label = obj["label"]
    if not isinstance(label, str) or label not in LABEL_SET:
        raise CorpusError(f"{path}:{line_no}: unknown label {label!r}")
    return Utterance(id=obj["id"], text=obj["text"], label=label)


def load_corpus(corpus_dir, split: str) -> list[Utterance]:
    """Load one split (``train`` | ``dev`` | ``test``) from a corpus directory."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    path = Path(corpus_dir) / f"{split}.jsonl"
    if not path.is_file():
        raise CorpusError(f"missing corpus file: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            records.append(_parse_line(raw, line_no, path))
    return records


def write_corpus(corpus_dir, split: str, records: Iterable[Utterance]) -> Path:
    """Write one split as JSON Lines; used by tools and test fixtures."""
    path = Path(corpus_dir) / f"{split}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for utt in records:
            fh.write(json.dumps({"id": utt.id, "text": utt.text, "label": utt.label},
                                ensure_ascii=False) + "\n")
    return path


def build_vocab(train: Sequence[Utterance], min_count: int = 1) -> Vocab:
    """Vocabulary from the training split only.

    Tokens seen at least ``min_count`` times are kept, ordered by descending
    frequency with ties broken by codepoint order, after the reserved PAD and
    UNK entries. The result is a pure function of the split's multiset of
    tokens, so reruns and record permutations produce identical vocabs.
    """
    if not train:
        raise CorpusError("cannot build a vocabulary from an empty training split")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts = Counter()
    for utt in train:
        counts.update(tokenize(utt.text))
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocab([PAD_TOKEN, UNK_TOKEN, *kept])


def encode(text: str, vocab: Vocab, max_len: int) -> tuple[list[int], int]:
    """Index sequence of length ``max_len`` plus the effective length.

    Out-of-vocabulary characters map to UNK; the sequence is truncated at
    ``max_len`` and right-padded with PAD. The effective length is floored at
    MIN_ENCODED_LEN so downstream convolution windows always exist: those
    floor positions are PAD and stay inside the effective length on purpose.
    """
    if max_len < MIN_ENCODED_LEN:
        raise ValueError(f"max_len must be >= {MIN_ENCODED_LEN}")
    if not text:
        raise ValueError("cannot encode empty text")
    tokens = tokenize(text)[:max_len]
    true_len = max(len(tokens), MIN_ENCODED_LEN)
    indices = [vocab.lookup(tok) for tok in tokens]
    indices.extend([PAD_INDEX] * (max_len - len(indices)))
    return indices, true_len


def decode(indices: Sequence[int], vocab: Vocab) -> str:
    """Inverse of `encode` for in-vocabulary text (padding dropped)."""
    return "".join(vocab.tokens[i] for i in indices if i != PAD_INDEX)


@dataclass
class CorpusStats:
    """Per-label counts for each split, plus split totals."""

    counts: dict[str, dict[str, int]] = field(default_factory=dict)  # label -> split -> n

    def total(self, split: str) -> int:
        return sum(per_split.get(split, 0) for per_split in self.counts.values())

    @property
    def grand_total(self) -> int:
        return sum(self.total(split) for split in SPLITS)


def compute_stats(splits: Mapping[str, Sequence[Utterance]]) -> CorpusStats:
    stats = CorpusStats(counts={label: {s: 0 for s in SPLITS} for label in LABELS})
    for split, records in splits.items():
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        for utt in records:
            stats.counts[utt.label][split] += 1
    return stats


def compare_to_reference(stats: CorpusStats) -> list[str]:
    """All cells that differ from the published reference table.

    Compares every label x split count and each split total; returns
    human-readable mismatch descriptions, empty when everything agrees.
    """
    mismatches = []
    for label in LABELS:
        expected = REFERENCE_COUNTS[label]
        for split, want in zip(SPLITS, expected):
            got = stats.counts.get(label, {}).get(split, 0)
            if got != want:
                mismatches.append(f"{label}/{split}: expected {want}, found {got}")
    for split in SPLITS:
        want = REFERENCE_TOTALS[split]
        got = stats.total(split)
        if got != want:
            mismatches.append(f"total/{split}: expected {want}, found {got}")
    return mismatches
