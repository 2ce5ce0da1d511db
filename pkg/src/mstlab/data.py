"""Text ingestion, tokenization, batching, and a synthetic corpus generator.

Corpora are flat token-id streams with a train/validation split point.
Char mode builds a vocabulary of the distinct characters in the file (sorted,
so ingestion is deterministic); byte mode uses the 256 byte values directly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np


@dataclass
class TokenizedCorpus:
    mode: str            # char | byte
    vocab: list          # token id -> piece (single-char strings)
    ids: np.ndarray      # uint16 stream over the whole corpus
    n_train: int         # ids[:n_train] train, ids[n_train:] validation

    @property
    def vocab_size(self):
        return len(self.vocab)


def ingest(path, mode="char", train_frac=0.9):
    """Tokenize a text file and split it front/back into train/validation."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must be in (0,1)")
    if mode == "byte":
        raw = np.fromfile(path, dtype=np.uint8)
        vocab = [chr(i) for i in range(256)]
        ids = raw.astype(np.uint16)
    elif mode == "char":
        with open(path, encoding="utf-8") as f:
            text = f.read()
        vocab = sorted(set(text))
        lut = {ch: i for i, ch in enumerate(vocab)}
        ids = np.fromiter((lut[ch] for ch in text), dtype=np.uint16, count=len(text))
    else:
        raise ValueError(f"unknown data mode {mode!r}")
    n_train = int(len(ids) * train_frac)
    return TokenizedCorpus(mode, vocab, ids, n_train)


def encode(corpus, text):
    lut = {ch: i for i, ch in enumerate(corpus.vocab)}
    try:
        return np.fromiter((lut[ch] for ch in text), dtype=np.uint16, count=len(text))
    except KeyError as e:
        raise ValueError(f"character {e.args[0]!r} not in vocabulary") from None


def decode(corpus, ids):
    return "".join(corpus.vocab[i] for i in ids)


def save_cache(corpus, path):
    np.savez(path, mode=corpus.mode, vocab=json.dumps(corpus.vocab),
             ids=corpus.ids, n_train=corpus.n_train)


def load_cache(path):
    z = np.load(path, allow_pickle=False)
    return TokenizedCorpus(str(z["mode"]), json.loads(str(z["vocab"])),
                           z["ids"].astype(np.uint16), int(z["n_train"]))


def sample_batch(corpus, split, batch, block, rng):
    """Random contiguous (x, y) windows from one split; y is x shifted by 1."""
    if split == "train":
        lo, hi = 0, corpus.n_train - block - 1
    elif split == "val":
        lo, hi = corpus.n_train, len(corpus.ids) - block - 1
    else:
        raise ValueError(f"unknown split {split!r}")
    if hi <= lo:
        raise ValueError(f"split {split!r} too small for block size {block}")
    off = rng.integers(lo, hi, size=batch)
    x = np.stack([corpus.ids[o:o + block] for o in off]).astype(np.int64)
    y = np.stack([corpus.ids[o + 1:o + block + 1] for o in off]).astype(np.int64)
    return x, y


def eval_batches(corpus, batch, block, max_batches):
    """Fixed non-overlapping validation windows, batched; rng-free.

    The same corpus, block size and max_batches always yield the same
    windows, which keeps evaluation deterministic and resume-safe.
    """
    lo, hi = corpus.n_train, len(corpus.ids) - 1
    starts = list(range(lo, hi - block, block))[:batch * max_batches]
    out = []
    for i in range(0, len(starts) - batch + 1, batch):
        grp = starts[i:i + batch]
        x = np.stack([corpus.ids[o:o + block] for o in grp]).astype(np.int64)
        y = np.stack([corpus.ids[o + 1:o + block + 1] for o in grp]).astype(np.int64)
        out.append((x, y))
    if not out:
        raise ValueError("validation split smaller than one evaluation batch")
    return out


# ---------------------------------------------------------------------------
# Synthetic corpus

_ONSETS = ["b", "br", "c", "ch", "d", "dr", "f", "fl", "g", "gr", "h", "k",
           "l", "m", "n", "p", "pl", "pr", "r", "s", "sh", "sl", "st", "t",
           "th", "tr", "v", "w"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "ou"]
_CODAS = ["", "", "l", "m", "n", "nd", "r", "rn", "s", "st", "t", "th"]
_FUNCTION = ["the", "of", "and", "to", "in", "a", "is", "was", "that", "for",
             "it", "with", "as", "on", "be", "at", "by", "this", "had", "not",
             "are", "but", "from", "or", "have", "an", "they", "which"]


def _make_words(rng, n_words):
    words = set(_FUNCTION)
    out = []
    while len(out) < n_words:
        n_syll = 1 + int(rng.random() * 3)
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))]
                    + _VOWELS[rng.integers(len(_VOWELS))]
                    + _CODAS[rng.integers(len(_CODAS))]
                    for _ in range(n_syll))
        if w not in words and len(w) <= 14:
            words.add(w)
            out.append(w)
    return out


def generate_corpus(n_chars, seed=0, n_words=3000, n_topics=12):
    """Deterministic English-like text with word, bigram and topic structure.

    Content words follow a Zipf law; each word prefers a fixed set of
    successors (sampled 55% of the time) and paragraphs draw most content
    words from one of n_topics overlapping topic pools, so there is local
    and mid-range statistical structure for a language model to exploit.
    """
    rng = np.random.default_rng(seed)
    words = _make_words(rng, n_words)
    ranks = np.arange(1, n_words + 1, dtype=np.float64)
    base_p = 1.0 / (ranks + 2.7) ** 1.05
    base_p /= base_p.sum()
    successors = rng.integers(0, n_words, size=(n_words, 40))
    topics = rng.integers(0, n_words, size=(n_topics, 400))

    pieces = []
    total = 0
    prev = 0
    while total < n_chars:
        topic = topics[rng.integers(n_topics)]
        n_sent = 4 + int(rng.random() * 6)
        para = []
        for _ in range(n_sent):
            n_w = 5 + int(rng.random() * 10)
            sent = []
            for wi in range(n_w):
                r = rng.random()
                if r < 0.30:
                    w = _FUNCTION[rng.integers(len(_FUNCTION))]
                else:
                    if r < 0.55:
                        idx = successors[prev][rng.integers(40)]
                    elif r < 0.85:
                        idx = topic[rng.integers(400)]
                    else:
                        idx = rng.choice(n_words, p=base_p)
                    prev = idx
                    w = words[idx]
                    if rng.random() < 0.02:
                        w = str(rng.integers(1, 2000))
                if wi == 0:
                    w = w[0].upper() + w[1:]
                elif rng.random() < 0.10 and wi < n_w - 1:
                    w = w + ","
                sent.append(w)
            end = "." if rng.random() < 0.88 else ("?" if rng.random() < 0.6 else "!")
            para.append(" ".join(sent) + end)
        block = " ".join(para)
        pieces.append(block)
        total += len(block) + 2
    return "\n\n".join(pieces)[:n_chars]


def write_corpus(path, n_chars, seed=0):
    text = generate_corpus(n_chars, seed)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return len(text)
