"""Templated sentence-pair corpus with unambiguous token-level rationales.

Every premise carries one keyword and every hypothesis one keyword, each drawn
from a small inventory of antonym concepts with two synonyms per pole. The
label is a function of the keyword pair alone:

* same concept, same pole      -> entails
* same concept, opposite pole  -> contradicts
* different concepts           -> neutral

Gold highlights are the keyword positions, except that neutral premises are
left unhighlighted. Everything else in the sentences (shared subject, place
phrase, filler) carries no label signal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import SentencePairInstance, build_vocab

CONCEPTS = (
    (("happy", "glad"), ("sad", "unhappy")),
    (("awake", "alert"), ("asleep", "sleeping")),
    (("hot", "warm"), ("cold", "chilly")),
    (("wet", "soaked"), ("dry", "parched")),
    (("loud", "noisy"), ("quiet", "silent")),
    (("fast", "quick"), ("slow", "sluggish")),
    (("clean", "tidy"), ("dirty", "messy")),
    (("calm", "relaxed"), ("angry", "furious")),
)

SUBJECTS = ("man", "woman", "dog", "child", "girl", "boy", "cat", "worker",
            "teenager", "musician", "cyclist", "farmer")
PLACES = ("park", "street", "beach", "house", "kitchen", "field", "store",
          "river", "garden", "office", "market", "station")
PREPOSITIONS = ("in", "at", "near", "by")
DETERMINERS = ("a", "the")
VERBS = ("is", "looks", "seems", "appears", "stays")
ACTIVITIES = ("sitting", "standing", "walking", "waiting", "working",
              "resting", "smiling", "talking", "reading", "running")
MODIFIERS = ("very", "rather", "quite", "really", "still")
TAILS = ("today", "outside", "again", "now", "there")


@dataclass
class SynthConfig:
    n_train: int = 2000
    n_dev: int = 300
    n_test: int = 500
    seed: int = 0
    embed_dim: int = 50
    synonym_noise: float = 0.3
    n_concepts: int = len(CONCEPTS)  # use only the first n concepts
    templates: str = "full"  # "short": "<det> <subject> is <keyword>" on both sides

    def __post_init__(self):
        if self.templates not in ("full", "short"):
            raise ValueError(f"unknown template set {self.templates!r}")
        if not 2 <= self.n_concepts <= len(CONCEPTS):
            raise ValueError(f"n_concepts must lie in [2, {len(CONCEPTS)}]")


def _keyword(rng, k):
    c = int(rng.integers(k))
    pole = int(rng.integers(2))
    word = CONCEPTS[c][pole][int(rng.integers(2))]
    return c, pole, word


def _label_pair(rng, k):
    label = ("entails", "contradicts", "neutral")[int(rng.integers(3))]
    c, pole, kw_p = _keyword(rng, k)
    if label == "entails":
        kw_h = CONCEPTS[c][pole][int(rng.integers(2))]
    elif label == "contradicts":
        kw_h = CONCEPTS[c][1 - pole][int(rng.integers(2))]
    else:
        other = (c + 1 + int(rng.integers(k - 1))) % k
        kw_h = CONCEPTS[other][int(rng.integers(2))][int(rng.integers(2))]
    return label, kw_p, kw_h


def _choice(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _premise(rng, subj, kw):
    det = _choice(rng, DETERMINERS)
    place = [_choice(rng, PREPOSITIONS), "the", _choice(rng, PLACES)]
    act = [_choice(rng, ACTIVITIES)] if rng.random() < 0.6 else []
    mod = [_choice(rng, MODIFIERS)] if rng.random() < 0.3 else []
    form = int(rng.integers(3))
    if form == 0:   # a man sitting in the park is happy
        toks = [det, subj] + act + place + [_choice(rng, VERBS)] + mod + [kw]
    elif form == 1:  # the happy man is sitting in the park
        toks = [det, kw, subj] + (["is"] + act if act else []) + place
    else:           # a man is happy while sitting in the park
        toks = [det, subj, _choice(rng, VERBS)] + mod + [kw] + (["while"] + act if act else []) + place
    return toks, toks.index(kw)


def _hypothesis(rng, subj, kw):
    det = _choice(rng, DETERMINERS)
    mod = [_choice(rng, MODIFIERS)] if rng.random() < 0.3 else []
    tail = [_choice(rng, TAILS)] if rng.random() < 0.5 else []
    if rng.random() < 0.5:
        toks = [det, subj, _choice(rng, VERBS)] + mod + [kw] + tail
    else:
        toks = [det, kw, subj, "is", _choice(rng, ACTIVITIES)] + tail
    return toks, toks.index(kw)


def _short(rng, subj, kw):
    return [_choice(rng, DETERMINERS), subj, "is", kw], 3


def make_instance(rng, n_concepts=len(CONCEPTS), templates="full"):
    label, kw_p, kw_h = _label_pair(rng, n_concepts)
    subj = _choice(rng, SUBJECTS)
    if templates == "short":
        (p, ip), (h, ih) = _short(rng, subj, kw_p), _short(rng, subj, kw_h)
    else:
        p, ip = _premise(rng, subj, kw_p)
        h, ih = _hypothesis(rng, subj, kw_h)
    return SentencePairInstance(p, h, label,
                                () if label == "neutral" else (ip,), (ih,))


def generate(config=None):
    """Return ``{"train": [...], "dev": [...], "test": [...]}``."""
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    sizes = {"train": config.n_train, "dev": config.n_dev, "test": config.n_test}
    return {name: [make_instance(rng, config.n_concepts, config.templates) for _ in range(n)] for name, n in sizes.items()}


def vocabulary_words():
    words = []
    for group in (DETERMINERS, SUBJECTS, PLACES, PREPOSITIONS, VERBS, ACTIVITIES,
                  MODIFIERS, TAILS, ("the", "is", "while")):
        words.extend(group)
    for pos, neg in CONCEPTS:
        words.extend(pos + neg)
    return list(dict.fromkeys(words))


def embeddings(config=None):
    """Stand-in for pretrained vectors: synonyms cluster, everything else is random.

    Returns ``(words, matrix)`` suitable for ``corpus.write_embeddings``.
    """
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed + 7919)
    d = config.embed_dim
    vecs = {}
    for pos, neg in CONCEPTS:
        for pole in (pos, neg):
            centre = rng.normal(0.0, 1.0, d) / np.sqrt(d)
            for w in pole:
                vecs[w] = centre + rng.normal(0.0, config.synonym_noise, d) / np.sqrt(d)
    words = vocabulary_words()
    for w in words:
        if w not in vecs:
            vecs[w] = rng.normal(0.0, 1.0, d) / np.sqrt(d)
    return words, np.stack([vecs[w] for w in words])


def embedding_table(vocab, config=None):
    """Frozen |V| x d table for ``vocab`` built from :func:`embeddings`.

    Equivalent to writing the vectors out and reading them back with
    ``corpus.load_embeddings``; every synthetic word has a vector.
    """
    words, matrix = embeddings(config)
    row = {w: i for i, w in enumerate(words)}
    table = np.zeros((len(vocab), matrix.shape[1]))
    for i, tok in enumerate(vocab.tokens[2:], start=2):
        if tok not in row:
            raise KeyError(f"token {tok!r} is not a synthetic word")
        table[i] = matrix[row[tok]]
    table.flags.writeable = False
    return table


def bundle(config=None):
    """Splits, vocabulary and embedding table for a synthetic run."""
    config = config or SynthConfig()
    data = generate(config)
    vocab = build_vocab(data["train"] + data["dev"] + data["test"])
    return data, vocab, embedding_table(vocab, config)
