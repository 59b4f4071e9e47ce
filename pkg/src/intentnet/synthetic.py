"""Synthetic corpora for self-contained training and ladder checks.

Each class owns a disjoint set of indicative characters; utterances are
random strings over those plus shared label-neutral noise characters, so
the task is separable by construction while still exercising variable
lengths and out-of-class noise.
"""

from __future__ import annotations

from .data import LABELS, Utterance
from .tensor import Rng

NOISE_CHARS = "0123456789"
_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
_CHARS_PER_CLASS = 3


def _class_chars(class_idx: int) -> str:
    start = class_idx * _CHARS_PER_CLASS
    if start + _CHARS_PER_CLASS > len(_ALPHABET):
        raise ValueError("too many classes for disjoint character sets")
    return _ALPHABET[start:start + _CHARS_PER_CLASS]


def make_utterance(rng: Rng, class_idx: int, uid: int, min_len: int, max_len: int,
                   noise_frac: float) -> Utterance:
    chars = _class_chars(class_idx)
    length = min_len + rng.integer(max_len - min_len + 1)
    text = "".join(
        NOISE_CHARS[rng.integer(len(NOISE_CHARS))]
        if rng.random() < noise_frac else chars[rng.integer(len(chars))]
        for _ in range(length)
    )
    return Utterance(id=uid, text=text, label=LABELS[class_idx])


def separable_corpus(n_classes: int = 8, per_class: int = 8, seed: int = 0,
                     min_len: int = 5, max_len: int = 10) -> list[Utterance]:
    """Noise-free corpus where any single character identifies the class."""
    rng = Rng(seed).spawn(11)
    records = []
    uid = 0
    for class_idx in range(n_classes):
        for _ in range(per_class):
            records.append(make_utterance(rng, class_idx, uid, min_len, max_len,
                                          noise_frac=0.0))
            uid += 1
    return records


def noisy_splits(n_total: int = 500, n_classes: int = 10, seed: int = 0,
                 noise_frac: float = 0.2, min_len: int = 8, max_len: int = 16
                 ) -> dict[str, list[Utterance]]:
    """Train/dev/test splits (70/15/15) with label-neutral noise characters."""
    rng = Rng(seed).spawn(13)
    records = [
        make_utterance(rng, uid % n_classes, uid, min_len, max_len, noise_frac)
        for uid in range(n_total)
    ]
    n_train = int(n_total * 0.7)
    n_dev = int(n_total * 0.15)
    return {
        "train": records[:n_train],
        "dev": records[n_train:n_train + n_dev],
        "test": records[n_train + n_dev:],
    }
