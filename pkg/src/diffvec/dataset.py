"""Relation triples, difference-vector instances, splits, and synthetic samples.

A triple file is UTF-8 TSV with three columns ``relation<TAB>word1<TAB>word2``;
lines starting with ``#`` are comments.  Frequency lists are ``word<TAB>count``
TSV, and the annotation supplement for open-world scoring uses the triple
format for human-validated random pairs.

Every randomized operation here is a pure function of its inputs and a seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .linalg import Prng

log = logging.getLogger(__name__)

# the 15-relation inventory; order doubles as the default priority when one
# word pair shows up under several relations
DEFAULT_RELATIONS = (
    "LexSemHyper",
    "LexSemMero",
    "LexSemAttr",
    "LexSemCause",
    "LexSemSpace",
    "LexSemRef",
    "LexSemEvent",
    "NounSP",
    "Verb_3",
    "VerbPast",
    "Verb_3Past",
    "LVC",
    "VerbNoun",
    "Prefix",
    "NounColl",
)

# the 9-relation subset used for supervised classification
CLOSED_WORLD_RELATIONS = (
    "LexSemHyper",
    "LexSemMero",
    "LexSemEvent",
    "NounSP",
    "Verb_3",
    "VerbPast",
    "Verb_3Past",
    "Prefix",
    "NounColl",
)

RESERVED_LABELS = ("random", "negative")

PROVENANCES = ("gold", "opposite", "shuffled", "random")


@dataclass(frozen=True)
class RelationTriple:
    relation: str
    word1: str
    word2: str

    @property
    def pair(self) -> tuple[str, str]:
        return (self.word1, self.word2)


@dataclass(frozen=True, eq=False)
class DiffVecInstance:
    """A labeled difference vector with provenance back to its word pair."""

    vector: np.ndarray
    label: str
    provenance: str
    pair: tuple[str, str]

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        self.vector.setflags(write=False)

    @property
    def uid(self) -> str:
        return f"{self.provenance}:{self.label}:{self.pair[0]}:{self.pair[1]}"


def load_triples(path: str, inventory: Sequence[str] | None = None) -> list[RelationTriple]:
    """Read relation triples, validating labels against the inventory."""
    allowed = set(inventory if inventory is not None else DEFAULT_RELATIONS)
    allowed.update(RESERVED_LABELS)
    triples: list[RelationTriple] = []
    self_pairs = 0
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            columns = stripped.split("\t")
            if len(columns) != 3:
                raise ValueError(
                    f"{path}: line {lineno}: expected 3 tab-separated columns, found {len(columns)}"
                )
            relation, word1, word2 = (c.strip() for c in columns)
            if relation not in allowed:
                raise ValueError(f"{path}: line {lineno}: unknown relation label {relation!r}")
            if not word1 or not word2:
                raise ValueError(f"{path}: line {lineno}: empty word")
            if word1.lower() == word2.lower():
                self_pairs += 1
            triples.append(RelationTriple(relation, word1, word2))
    if self_pairs:
        log.warning("%s: %d triples have identical words after case folding (kept)", path, self_pairs)
    return triples


def load_frequencies(path: str) -> dict[str, int]:
    """Read a ``word<TAB>count`` frequency list."""
    freqs: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            columns = stripped.split("\t")
            if len(columns) != 2:
                raise ValueError(f"{path}: line {lineno}: expected word<TAB>count")
            word, count_str = columns
            try:
                count = int(count_str)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer count {count_str!r}") from None
            if count <= 0:
                raise ValueError(f"{path}: line {lineno}: frequency must be positive")
            if word in freqs:
                raise ValueError(f"{path}: line {lineno}: duplicate word {word!r}")
            freqs[word] = count
    if not freqs:
        raise ValueError(f"{path}: empty frequency list")
    return freqs


def dedupe_and_filter(triples: Iterable[RelationTriple], vocab: set[str],
                      relation_priority: Sequence[str] | None = None) -> list[RelationTriple]:
    """Drop out-of-vocabulary triples, exact duplicates, and repeated pairs.

    A pair appearing under several relations keeps only one label: the
    first-seen occurrence, or the highest-priority relation when
    ``relation_priority`` is given.
    """
    all_triples = list(triples)
    in_vocab = [t for t in all_triples if t.word1 in vocab and t.word2 in vocab]
    oov_dropped = len(all_triples) - len(in_vocab)
    if relation_priority is not None:
        rank = {rel: i for i, rel in enumerate(relation_priority)}
        best: dict[tuple[str, str], RelationTriple] = {}
        order: list[tuple[str, str]] = []
        for t in in_vocab:
            if t.pair not in best:
                best[t.pair] = t
                order.append(t.pair)
            elif rank.get(t.relation, len(rank)) < rank.get(best[t.pair].relation, len(rank)):
                best[t.pair] = t
        kept = [best[p] for p in order]
    else:
        seen_pairs: set[tuple[str, str]] = set()
        kept = []
        for t in in_vocab:
            if t.pair in seen_pairs:
                continue
            seen_pairs.add(t.pair)
            kept.append(t)
    log.info("dedupe_and_filter: kept %d triples (%d OOV, %d duplicate-pair rows dropped)",
             len(kept), oov_dropped, len(in_vocab) - len(kept))
    return kept


def make_diffvecs(triples: Iterable[RelationTriple], table: EmbeddingTable,
                  provenance: str = "gold") -> list[DiffVecInstance]:
    """One v(word2) - v(word1) instance per triple."""
    instances = []
    for t in triples:
        if t.word1 not in table or t.word2 not in table:
            missing = t.word1 if t.word1 not in table else t.word2
            raise ValueError(f"word {missing!r} not in embedding table; filter triples first")
        vec = table.vector(t.word2) - table.vector(t.word1)
        instances.append(DiffVecInstance(vec, t.relation, provenance, t.pair))
    return instances


def _holdout_count(n: int, fraction: float) -> int:
    return min(n, int(n * fraction + 0.5))


def split_holdout(instances: Sequence, dev_fraction: float, seed: int,
                  stratified: bool = True, label_of=lambda inst: inst.label) -> tuple[list, list]:
    """Disjoint (main, dev) partition, optionally stratified by label.

    Stratification keeps per-label proportions within one instance of the
    requested fraction; labels with fewer than 2 instances go wholly to
    main with a warning.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError("dev_fraction must be in (0, 1)")
    rng = Prng(seed).split("holdout").generator
    items = list(instances)
    if not stratified:
        order = rng.permutation(len(items))
        n_dev = _holdout_count(len(items), dev_fraction)
        dev_idx = set(order[:n_dev].tolist())
        main = [items[i] for i in range(len(items)) if i not in dev_idx]
        dev = [items[i] for i in sorted(dev_idx)]
        return main, dev
    groups: dict[str, list[int]] = {}
    for i, inst in enumerate(items):
        groups.setdefault(label_of(inst), []).append(i)
    dev_indices: set[int] = set()
    for label in sorted(groups):
        idx = groups[label]
        if len(idx) < 2:
            log.warning("label %r has %d instance(s); kept wholly in main", label, len(idx))
            continue
        order = rng.permutation(len(idx))
        take = _holdout_count(len(idx), dev_fraction)
        dev_indices.update(idx[j] for j in order[:take])
    main = [items[i] for i in range(len(items)) if i not in dev_indices]
    dev = [items[i] for i in range(len(items)) if i in dev_indices]
    return main, dev


def lexical_split(triples: Sequence[RelationTriple], test_fraction: float,
                  seed: int) -> tuple[list[RelationTriple], list[RelationTriple], int]:
    """Split so that training and test vocabularies do not overlap.

    The word vocabulary is partitioned at random; a triple survives only if
    both its words fall on the same side, and straddling triples are
    dropped (their count is returned).
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    words = sorted({w for t in triples for w in (t.word1, t.word2)})
    rng = Prng(seed).split("lexical-split").generator
    order = rng.permutation(len(words))
    n_test = _holdout_count(len(words), test_fraction)
    test_words = {words[i] for i in order[:n_test]}
    train: list[RelationTriple] = []
    test: list[RelationTriple] = []
    dropped = 0
    for t in triples:
        w1_test = t.word1 in test_words
        w2_test = t.word2 in test_words
        if w1_test and w2_test:
            test.append(t)
        elif not w1_test and not w2_test:
            train.append(t)
        else:
            dropped += 1
    if not train or not test:
        raise ValueError(
            "lexical split left one side empty; try another seed or fraction"
        )
    return train, test, dropped


def gen_random_pairs(freq: Mapping[str, int], lexicon_size: int, n: int,
                     exclude: set[tuple[str, str]], seed: int) -> list[RelationTriple]:
    """Random word pairs labeled "random", drawn per the open-world recipe.

    A seed lexicon of ``lexicon_size`` words is sampled without replacement
    with probability proportional to frequency, then ``n`` ordered pairs are
    drawn uniformly without replacement from the lexicon's Cartesian
    product, excluding self-pairs and the ``exclude`` set.
    """
    if lexicon_size < 1 or lexicon_size > len(freq):
        raise ValueError(f"lexicon_size={lexicon_size} out of range for {len(freq)} words")
    rng = Prng(seed).split("random-pairs").generator
    words = sorted(freq)
    weights = np.array([freq[w] for w in words], dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("frequencies must be positive")
    # exponential race: smallest Exp(1)/weight wins, giving weighted
    # sampling without replacement
    keys = rng.exponential(1.0, size=len(words)) / weights
    lexicon = [words[i] for i in np.argsort(keys, kind="stable")[:lexicon_size]]
    lexicon.sort()
    candidates = [
        (a, b)
        for a in lexicon
        for b in lexicon
        if a != b and (a, b) not in exclude
    ]
    if n > len(candidates):
        raise ValueError(f"requested {n} pairs but only {len(candidates)} are available")
    chosen = rng.choice(len(candidates), size=n, replace=False)
    return [RelationTriple("random", *candidates[i]) for i in chosen]


def synth_negatives(train_instances: Sequence[DiffVecInstance], table: EmbeddingTable,
                    seed: int) -> list[DiffVecInstance]:
    """Opposite and shuffled negative samples for each gold training instance.

    The opposite sample negates the difference vector (reversed pair
    direction); the shuffled sample re-pairs word1 with another word2 drawn
    uniformly from the same relation's word2 inventory.  Relations with a
    single distinct word2 skip the shuffled sample with a warning, so the
    2x balance is then approximate.
    """
    rng = Prng(seed).split("synth-negatives").generator
    word2_inventory: dict[str, list[str]] = {}
    for inst in train_instances:
        values = word2_inventory.setdefault(inst.label, [])
        if inst.pair[1] not in values:
            values.append(inst.pair[1])
    negatives: list[DiffVecInstance] = []
    skipped = 0
    for inst in train_instances:
        w1, w2 = inst.pair
        negatives.append(DiffVecInstance(-inst.vector, "negative", "opposite", (w1, w2)))
        choices = [w for w in word2_inventory[inst.label] if w != w2]
        if not choices:
            skipped += 1
            continue
        w2_prime = choices[rng.integers(len(choices))]
        vec = table.vector(w2_prime) - table.vector(w1)
        negatives.append(DiffVecInstance(vec, "negative", "shuffled", (w1, w2_prime)))
    if skipped:
        log.warning("synth_negatives: %d shuffled samples skipped (single word2 value); "
                    "balance is approximate", skipped)
    return negatives
