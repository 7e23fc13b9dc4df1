"""End-to-end experiment protocols over difference vectors.

Five runners mirror the evaluation settings: unsupervised clustering with a
dev-tuned configuration and a cluster-count sweep, closed-world multiclass
classification under cross-validation, a cluster-then-majority-label
baseline, open-world per-relation binary classification with synthesized
negative samples, and the split-vocabulary sweep that probes lexical
memorisation.  Each returns an EvalReport whose micro averages are
recomputable from the pooled counts it carries.

Open-world recall is relative recall: the correct positives that at least
one compared model variant actually found form the pool, which stands in
for exhaustive annotation of the random pairs.  Both the plain and the
negative-sample variants are always trained so the pool is shared.
"""

from __future__ import annotations

import logging
from collections import Counter
from typing import Mapping, Sequence

import numpy as np

from .clustering import (
    ClusterConfig,
    cluster,
    default_grid,
    relation_entropy,
    sweep_k,
    tune,
    v_measure,
)
from .dataset import (
    DiffVecInstance,
    RelationTriple,
    dedupe_and_filter,
    gen_random_pairs,
    lexical_split,
    make_diffvecs,
    split_holdout,
    synth_negatives,
)
from .embeddings import EmbeddingTable, normalize_unit
from .reports import EvalReport
from .svm import (
    KernelModel,
    cross_validate,
    prf_from_counts,
    save_model,
    stratified_folds,
    train_binary_rbf,
    train_linear_multiclass,
)

log = logging.getLogger(__name__)

Pair = tuple[str, str]

VARIANTS = ("orig", "with_neg")


def relative_recall(predictions_by_model: Mapping[str, set[Pair]],
                    correct: set[Pair]) -> dict[str, float]:
    """Recall against the pooled correct positives found by any model.

    The pool is ``correct`` intersected with the union of all models'
    positive predictions; a model's recall is its share of that pool,
    defined as 1.0 when the pool is empty.
    """
    if not predictions_by_model:
        raise ValueError("at least one model is required")
    union: set[Pair] = set()
    for positives in predictions_by_model.values():
        union |= positives
    pool = correct & union
    if not pool:
        return {name: 1.0 for name in predictions_by_model}
    return {
        name: len(correct & positives) / len(pool)
        for name, positives in predictions_by_model.items()
    }


def _prepare_instances(table: EmbeddingTable, triples: Sequence[RelationTriple],
                       normalize: bool) -> tuple[EmbeddingTable, list[RelationTriple],
                                                 list[DiffVecInstance]]:
    if normalize:
        table = normalize_unit(table)
    kept = dedupe_and_filter(triples, table.vocab())
    if not kept:
        raise ValueError("no triples survive vocabulary filtering")
    return table, kept, make_diffvecs(kept, table)


def run_clustering_experiment(table: EmbeddingTable, triples: Sequence[RelationTriple],
                              k_values: Sequence[int], dev_fraction: float = 0.15,
                              seed: int = 0, subsample_cap: int = 4000,
                              normalize: bool = True,
                              config_info: dict | None = None) -> EvalReport:
    """Tune on a held-out dev split, then sweep cluster counts on the rest."""
    table, kept, instances = _prepare_instances(table, triples, normalize)
    main, dev = split_holdout(instances, dev_fraction, seed, stratified=True)
    tune_ks = [k for k in k_values if 2 <= k <= len(dev)]
    if not tune_ks:
        raise ValueError(
            f"no k in {list(k_values)} fits the dev split of {len(dev)} instances"
        )
    best = tune(dev, default_grid(tune_ks, subsample_cap=subsample_cap, seed=seed))
    sweep_ks = [k for k in k_values if 2 <= k <= len(main)]
    sweep = sweep_k(main, sweep_ks, best)
    gold = [inst.label for inst in main]
    assignment = cluster(main, best)
    homogeneity, completeness, v = v_measure(gold, assignment.labels.tolist())
    entropy = relation_entropy(gold, assignment.labels.tolist())
    relation_sizes = Counter(t.relation for t in kept)
    report = EvalReport(
        experiment="cluster",
        config={
            "seed": seed,
            "dev_fraction": dev_fraction,
            "k_values": list(k_values),
            "subsample_cap": subsample_cap,
            "normalize": normalize,
            "embedding_source": table.source_id,
            **(config_info or {}),
        },
        counts={
            "instances": len(instances),
            "main": len(main),
            "dev": len(dev),
            "relations": {rel: int(c) for rel, c in sorted(relation_sizes.items())},
        },
        per_relation={rel: {"normalized_entropy": float(e)}
                      for rel, e in sorted(entropy.items())},
        micro_average={
            "v_measure": float(v),
            "homogeneity": float(homogeneity),
            "completeness": float(completeness),
        },
        series={"k_sweep": [[int(k), float(sweep[k])] for k in sweep_ks]},
        extras={
            "chosen_config": {
                "k": best.k,
                "measure": best.measure,
                "gamma": best.gamma,
            },
        },
    )
    report.validate()
    return report


def run_closed_world(table: EmbeddingTable, triples: Sequence[RelationTriple],
                     folds: int = 10, seed: int = 0, C: float = 1.0,
                     normalize: bool = True, save_model_path: str | None = None,
                     config_info: dict | None = None) -> EvalReport:
    """Cross-validated one-vs-rest linear classification of gold instances."""
    table, kept, instances = _prepare_instances(table, triples, normalize)
    x = np.asarray([inst.vector for inst in instances])
    labels = [inst.label for inst in instances]
    result = cross_validate(
        x, labels, folds,
        trainer=lambda xt, yt: train_linear_multiclass(xt, yt, C=C, seed=seed),
        seed=seed,
    )
    extras: dict = {}
    if save_model_path:
        final = train_linear_multiclass(x, labels, C=C, seed=seed)
        save_model(final, save_model_path)
        extras["model_path"] = save_model_path
    relation_sizes = Counter(labels)
    report = EvalReport(
        experiment="closed_world",
        config={
            "seed": seed,
            "folds": folds,
            "C": C,
            "normalize": normalize,
            "embedding_source": table.source_id,
            **(config_info or {}),
        },
        counts={
            "instances": len(instances),
            "relations": {rel: int(c) for rel, c in sorted(relation_sizes.items())},
            "folds": folds,
        },
        per_relation={rel: dict(metrics) for rel, metrics in sorted(result.per_class.items())},
        micro_average=dict(result.micro_average),
        pooled={rel: dict(c) for rel, c in sorted(result.pooled.items())},
        extras=extras,
    )
    report.validate()
    return report


def _majority_labels(cluster_ids: np.ndarray, labels: Sequence[str],
                     train_idx: np.ndarray, k: int) -> dict[int, str]:
    train_counts = Counter(labels[i] for i in train_idx)
    if not train_counts:
        raise ValueError("empty training fold")
    global_best = max(sorted(train_counts), key=lambda rel: train_counts[rel])
    mapping: dict[int, str] = {}
    per_cluster: dict[int, Counter] = {}
    for i in train_idx:
        per_cluster.setdefault(int(cluster_ids[i]), Counter())[labels[i]] += 1
    for c in range(k):
        counts = per_cluster.get(c)
        if not counts:
            mapping[c] = global_best  # cluster unseen in training predicts the majority
            continue
        top = max(counts.values())
        tied = sorted(rel for rel, n in counts.items() if n == top)
        if len(tied) == 1:
            mapping[c] = tied[0]
        else:
            mapping[c] = max(tied, key=lambda rel: (train_counts[rel], ))
    return mapping


def run_baseline_cluster_majority(table: EmbeddingTable, triples: Sequence[RelationTriple],
                                  n_clusters: int = 50, seed: int = 0, folds: int = 10,
                                  measure: str = "rbf", gamma: float = 1.0,
                                  subsample_cap: int = 4000, normalize: bool = True,
                                  config_info: dict | None = None) -> EvalReport:
    """Cluster everything once, then label clusters by training majority.

    Evaluation is fold-wise: each fold in turn is held out, clusters take
    the majority relation of the remaining instances (ties fall to the
    globally most frequent relation), and held-out instances inherit their
    cluster's relation.
    """
    table, kept, instances = _prepare_instances(table, triples, normalize)
    relations = sorted({inst.label for inst in instances})
    if n_clusters < len(relations):
        raise ValueError(f"n_clusters={n_clusters} is below the {len(relations)} relations")
    labels = [inst.label for inst in instances]
    config = ClusterConfig(k=n_clusters, measure=measure, gamma=gamma,
                           subsample_cap=subsample_cap, seed=seed)
    assignment = cluster(instances, config)
    counts = {rel: {"tp": 0, "fp": 0, "fn": 0} for rel in relations}
    for test_idx in stratified_folds(labels, folds, seed):
        test_mask = np.zeros(len(labels), dtype=bool)
        test_mask[test_idx] = True
        train_idx = np.flatnonzero(~test_mask)
        mapping = _majority_labels(assignment.labels, labels, train_idx, n_clusters)
        for i in test_idx:
            predicted = mapping[int(assignment.labels[i])]
            actual = labels[i]
            if predicted == actual:
                counts[actual]["tp"] += 1
            else:
                counts[actual]["fn"] += 1
                counts[predicted]["fp"] += 1
    per_relation = {rel: prf_from_counts(**c) for rel, c in counts.items()}
    total = {key: sum(c[key] for c in counts.values()) for key in ("tp", "fp", "fn")}
    report = EvalReport(
        experiment="baseline",
        config={
            "seed": seed,
            "n_clusters": n_clusters,
            "folds": folds,
            "measure": measure,
            "gamma": gamma,
            "normalize": normalize,
            "embedding_source": table.source_id,
            **(config_info or {}),
        },
        counts={
            "instances": len(instances),
            "relations": {rel: int(c) for rel, c in sorted(Counter(labels).items())},
        },
        per_relation=dict(sorted(per_relation.items())),
        micro_average=prf_from_counts(**total),
        pooled=dict(sorted(counts.items())),
    )
    report.validate()
    return report


def _annotations_by_relation(annotations: Sequence[RelationTriple] | None) -> dict[str, set[Pair]]:
    by_rel: dict[str, set[Pair]] = {}
    for t in annotations or []:
        by_rel.setdefault(t.relation, set()).add(t.pair)
    return by_rel


def _train_variant_models(train_instances: Sequence[DiffVecInstance],
                          table: EmbeddingTable, relations: Sequence[str],
                          C: float, gamma: float,
                          seed: int) -> tuple[dict[str, dict[str, KernelModel]], int]:
    """One binary RBF model per relation per variant.

    The plain variant uses gold instances of the other relations as
    negatives; the negative-sample variant adds the opposite and shuffled
    distractors synthesized from the relation's own training pairs.
    Returns the models and the total number of synthesized negatives.
    """
    by_rel: dict[str, list[DiffVecInstance]] = {}
    for inst in train_instances:
        by_rel.setdefault(inst.label, []).append(inst)
    models: dict[str, dict[str, KernelModel]] = {v: {} for v in VARIANTS}
    synth_total = 0
    for rel in relations:
        positives = by_rel.get(rel, [])
        if len(positives) < 2:
            log.warning("relation %r has %d training instance(s); skipped", rel, len(positives))
            continue
        other_gold = [inst for r, insts in sorted(by_rel.items()) if r != rel for inst in insts]
        pos_x = [inst.vector for inst in positives]
        neg_base = [inst.vector for inst in other_gold]
        synthesized = synth_negatives(positives, table, seed)
        synth_total += len(synthesized)
        for variant in VARIANTS:
            negatives = list(neg_base)
            if variant == "with_neg":
                negatives.extend(inst.vector for inst in synthesized)
            x = np.vstack([pos_x, negatives]) if negatives else np.asarray(pos_x)
            y = np.concatenate([np.ones(len(pos_x)), -np.ones(len(negatives))])
            models[variant][rel] = train_binary_rbf(x, y, C=C, gamma=gamma, seed=seed)
    return models, synth_total


def _evaluate_variants(models: dict[str, dict[str, KernelModel]],
                       test_instances: Sequence[DiffVecInstance],
                       correct_by_rel: dict[str, set[Pair]]) -> dict[str, dict[str, dict]]:
    """Per-variant, per-relation counts and metrics with a shared recall pool."""
    test_x = np.asarray([inst.vector for inst in test_instances])
    test_pairs = [inst.pair for inst in test_instances]
    outcome: dict[str, dict[str, dict]] = {v: {} for v in models}
    relations = sorted({rel for per_rel in models.values() for rel in per_rel})
    for rel in relations:
        positives: dict[str, set[Pair]] = {}
        for variant in models:
            model = models[variant].get(rel)
            if model is None:
                continue
            decided = model.decision(test_x) >= 0.0
            positives[variant] = {pair for pair, hit in zip(test_pairs, decided) if hit}
        correct = correct_by_rel.get(rel, set())
        recalls = relative_recall(positives, correct)
        union: set[Pair] = set()
        for found in positives.values():
            union |= found
        pool = correct & union
        for variant, found in positives.items():
            tp = len(found & correct)
            fp = len(found) - tp
            fn = len(pool) - tp
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = recalls[variant]
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            outcome[variant][rel] = {
                "counts": {"tp": tp, "fp": fp, "fn": fn},
                "metrics": {"precision": precision, "recall": recall, "f1": f1},
            }
    return outcome


def _micro_from_outcome(outcome_variant: dict[str, dict]) -> tuple[dict[str, float], dict[str, int]]:
    total = {"tp": 0, "fp": 0, "fn": 0}
    for per_rel in outcome_variant.values():
        for key in total:
            total[key] += per_rel["counts"][key]
    return prf_from_counts(**total), total


def run_open_world(table: EmbeddingTable, triples: Sequence[RelationTriple],
                   freq: Mapping[str, int], with_negatives: bool,
                   annotations: Sequence[RelationTriple] | None = None,
                   seed: int = 0, C: float = 1.0, gamma: float | None = None,
                   lexicon_size: int = 500, test_fraction: float = 1.0 / 3.0,
                   stratified: bool = True, normalize: bool = True,
                   config_info: dict | None = None) -> EvalReport:
    """Per-relation binary classification over gold plus random test pairs.

    Random pairs count as correct only when listed in the annotation
    supplement; otherwise a positive on them is a false positive.  Both
    model variants are trained so recall can be pooled across them; the
    ``with_negatives`` flag selects which variant the headline metrics
    describe.
    """
    table, kept, _ = _prepare_instances(table, triples, normalize)
    train_triples, test_triples = split_holdout(
        kept, test_fraction, seed, stratified=stratified, label_of=lambda t: t.relation)
    freq_known = {w: c for w, c in freq.items() if w in table}
    if len(freq_known) < 2:
        raise ValueError("frequency list shares too few words with the embedding vocabulary")
    exclude = {t.pair for t in kept}
    random_triples = gen_random_pairs(
        freq_known, min(lexicon_size, len(freq_known)), len(test_triples), exclude, seed)
    train_instances = make_diffvecs(train_triples, table)
    test_instances = make_diffvecs(test_triples, table) + make_diffvecs(
        random_triples, table, provenance="random")
    relations = sorted({t.relation for t in train_triples})
    gamma_value = gamma if gamma is not None else 1.0 / table.dim
    models, synth_total = _train_variant_models(
        train_instances, table, relations, C, gamma_value, seed)
    annotated = _annotations_by_relation(annotations)
    correct_by_rel = {
        rel: {t.pair for t in test_triples if t.relation == rel} | annotated.get(rel, set())
        for rel in relations
    }
    outcome = _evaluate_variants(models, test_instances, correct_by_rel)
    primary = "with_neg" if with_negatives else "orig"
    micro, pooled_total = _micro_from_outcome(outcome[primary])
    series_rows = []
    for rel in sorted(outcome[primary]):
        series_rows.append([
            rel,
            float(outcome["orig"][rel]["metrics"]["f1"]),
            float(outcome["with_neg"][rel]["metrics"]["f1"]),
        ])
    report = EvalReport(
        experiment="open_world",
        config={
            "seed": seed,
            "with_negatives": with_negatives,
            "C": C,
            "gamma": gamma_value,
            "lexicon_size": lexicon_size,
            "test_fraction": test_fraction,
            "stratified": stratified,
            "normalize": normalize,
            "embedding_source": table.source_id,
            **(config_info or {}),
        },
        counts={
            "train": len(train_triples),
            "test": len(test_triples),
            "random": len(random_triples),
            "negatives": synth_total if with_negatives else 0,
            "annotated": sum(len(v) for v in annotated.values()),
        },
        per_relation={rel: dict(data["metrics"]) for rel, data in sorted(outcome[primary].items())},
        micro_average=micro,
        pooled={
            "total": pooled_total,
            "per_relation": {rel: dict(data["counts"])
                             for rel, data in sorted(outcome[primary].items())},
        },
        series={"relation_f1": series_rows},
        extras={
            "variants": {
                variant: {
                    "per_relation": {rel: dict(data["metrics"])
                                     for rel, data in sorted(outcome[variant].items())},
                    "micro_average": _micro_from_outcome(outcome[variant])[0],
                }
                for variant in VARIANTS
            },
        },
    )
    report.validate()
    return report


def run_lexical_memorisation(table: EmbeddingTable, triples: Sequence[RelationTriple],
                             freq: Mapping[str, int],
                             multipliers: Sequence[int] = (0, 1, 2, 3, 4, 5),
                             seed: int = 0, C: float = 1.0, gamma: float | None = None,
                             lexicon_size: int = 500, test_fraction: float = 1.0 / 3.0,
                             normalize: bool = True,
                             config_info: dict | None = None) -> EvalReport:
    """Split-vocabulary evaluation under growing random-pair contamination.

    The vocabulary split keeps training and test words disjoint.  For each
    multiplier m the gold test set is augmented with the first m * |test|
    pairs of one fixed random pool, so the contamination sets are nested
    and precision cannot rise as m grows.
    """
    multipliers = sorted(set(int(m) for m in multipliers))
    if not multipliers or multipliers[0] < 0:
        raise ValueError("multipliers must be non-negative integers")
    table, kept, _ = _prepare_instances(table, triples, normalize)
    train_triples, test_triples, dropped = lexical_split(kept, test_fraction, seed)
    freq_known = {w: c for w, c in freq.items() if w in table}
    if len(freq_known) < 2:
        raise ValueError("frequency list shares too few words with the embedding vocabulary")
    exclude = {t.pair for t in kept}
    max_random = multipliers[-1] * len(test_triples)
    random_pool: list[RelationTriple] = []
    if max_random:
        random_pool = gen_random_pairs(
            freq_known, min(lexicon_size, len(freq_known)), max_random, exclude, seed)
    train_instances = make_diffvecs(train_triples, table)
    relations = sorted({t.relation for t in train_triples})
    gamma_value = gamma if gamma is not None else 1.0 / table.dim
    models, _ = _train_variant_models(train_instances, table, relations, C, gamma_value, seed)
    correct_by_rel = {
        rel: {t.pair for t in test_triples if t.relation == rel} for rel in relations
    }
    gold_test_instances = make_diffvecs(test_triples, table)
    series_rows = []
    outcome_at_max = None
    for m in multipliers:
        random_slice = random_pool[: m * len(test_triples)]
        test_instances = gold_test_instances + make_diffvecs(
            random_slice, table, provenance="random")
        outcome = _evaluate_variants(models, test_instances, correct_by_rel)
        for variant in VARIANTS:
            micro, _ = _micro_from_outcome(outcome[variant])
            series_rows.append([
                int(m), variant,
                float(micro["precision"]), float(micro["recall"]), float(micro["f1"]),
            ])
        outcome_at_max = outcome
    assert outcome_at_max is not None
    per_relation = {}
    for rel in sorted({r for v in outcome_at_max.values() for r in v}):
        per_relation[rel] = {
            "orig_f1": float(outcome_at_max["orig"][rel]["metrics"]["f1"]),
            "with_neg_f1": float(outcome_at_max["with_neg"][rel]["metrics"]["f1"]),
        }
    micro_orig, _ = _micro_from_outcome(outcome_at_max["orig"])
    micro_neg, pooled_total = _micro_from_outcome(outcome_at_max["with_neg"])
    report = EvalReport(
        experiment="lexical_memorisation",
        config={
            "seed": seed,
            "multipliers": multipliers,
            "C": C,
            "gamma": gamma_value,
            "lexicon_size": lexicon_size,
            "test_fraction": test_fraction,
            "normalize": normalize,
            "embedding_source": table.source_id,
            **(config_info or {}),
        },
        counts={
            "train": len(train_triples),
            "test": len(test_triples),
            "straddling_dropped": dropped,
            "random_pool": len(random_pool),
        },
        per_relation=per_relation,
        micro_average={
            "orig_precision": micro_orig["precision"],
            "orig_recall": micro_orig["recall"],
            "orig_f1": micro_orig["f1"],
            "with_neg_precision": micro_neg["precision"],
            "with_neg_recall": micro_neg["recall"],
            "with_neg_f1": micro_neg["f1"],
        },
        pooled={"with_neg_total_at_max": pooled_total},
        series={"multiplier_sweep": series_rows},
    )
    report.validate()
    return report
