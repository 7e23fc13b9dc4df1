"""FastAPI application wrapping the experiment runners.

Embedding tables are the expensive input, so the app keeps a small cache of
loaded tables keyed by (path, format, lowercase); tables are immutable, so
sharing them across requests is safe.  Input paths are resolved on the
machine running the service.
"""

from __future__ import annotations

import logging
from collections import OrderedDict

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataset import load_frequencies, load_triples, make_diffvecs, RelationTriple
from ..embeddings import EmbeddingTable, load_embeddings, normalize_unit, write_embeddings
from ..experiments import (
    run_baseline_cluster_majority,
    run_closed_world,
    run_clustering_experiment,
    run_lexical_memorisation,
    run_open_world,
)
from ..ppmi import build_cooccurrence, compute_ppmi, preprocess_corpus, truncated_svd_embed
from ..svm import LinearModel, load_model
from .schemas import (
    BaselineRequest,
    BuildSvdRequest,
    BuildSvdResponse,
    ClosedWorldRequest,
    ClusterRequest,
    HealthResponse,
    InspectRequest,
    InspectResponse,
    LexicalSplitRequest,
    OpenWorldRequest,
    PairPrediction,
    PredictRequest,
    PredictResponse,
    parse_k_sweep,
)

log = logging.getLogger(__name__)

_CACHE_SIZE = 4


class _TableCache:
    def __init__(self, max_size: int = _CACHE_SIZE):
        self.max_size = max_size
        self._entries: OrderedDict[tuple, EmbeddingTable] = OrderedDict()

    def load(self, path: str, format: str, lowercase: bool) -> EmbeddingTable:
        key = (path, format, lowercase)
        if key in self._entries:
            self._entries.move_to_end(key)
            return self._entries[key]
        table = load_embeddings(path, format=format, lowercase=lowercase)
        self._entries[key] = table
        if len(self._entries) > self.max_size:
            self._entries.popitem(last=False)
        return table


def _http_errors(fn):
    try:
        return fn()
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (ValueError, KeyError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _read_pairs_file(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip("\n")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            columns = stripped.split("\t")
            if len(columns) == 2:
                pairs.append((columns[0].strip(), columns[1].strip()))
            elif len(columns) == 3:  # triple file: ignore the label column
                pairs.append((columns[1].strip(), columns[2].strip()))
            else:
                raise ValueError(f"{path}: line {lineno}: expected 2 or 3 columns")
    if not pairs:
        raise ValueError(f"{path}: no word pairs")
    return pairs


def create_app() -> FastAPI:
    app = FastAPI(
        title="diffvec",
        version=__version__,
        description="Lexical relation learning over word-embedding difference vectors",
    )
    cache = _TableCache()
    app.state.table_cache = cache

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/embeddings/inspect", response_model=InspectResponse)
    def inspect(request: InspectRequest) -> InspectResponse:
        def work():
            table = cache.load(request.path, request.format, request.lowercase)
            stats = table.norm_stats()
            return InspectResponse(
                path=request.path,
                dim=table.dim,
                count=len(table),
                normalized=table.normalized,
                duplicates_dropped=table.duplicates_dropped,
                norm_min=stats["min"],
                norm_mean=stats["mean"],
                norm_max=stats["max"],
            )

        return _http_errors(work)

    @app.post("/embeddings/build-svd", response_model=BuildSvdResponse)
    def build_svd(request: BuildSvdRequest) -> BuildSvdResponse:
        def work():
            with open(request.corpus, encoding="utf-8") as handle:
                text = handle.read()
            segments, _ = preprocess_corpus(text, request.min_count)
            counts = build_cooccurrence(segments, request.window)
            matrix = compute_ppmi(counts, cds=request.cds, shift=request.shift)
            dim = min(request.dim, len(counts.vocab))
            table = truncated_svd_embed(matrix, counts.vocab, dim,
                                        eig_weight=request.eig_weight,
                                        source_id=request.out)
            write_embeddings(table, request.out, format="text")
            return BuildSvdResponse(out=request.out, dim=dim, vocab_size=len(counts.vocab))

        return _http_errors(work)

    def _load_inputs(request) -> tuple[EmbeddingTable, list[RelationTriple], dict]:
        table = cache.load(request.embeddings, request.format, request.lowercase)
        triples = load_triples(request.triples)
        info = {"embeddings_path": request.embeddings, "triples_path": request.triples}
        return table, triples, info

    @app.post("/experiments/cluster")
    def cluster_experiment(request: ClusterRequest) -> dict:
        def work():
            table, triples, info = _load_inputs(request)
            report = run_clustering_experiment(
                table, triples,
                k_values=parse_k_sweep(request.k_sweep),
                dev_fraction=request.dev_fraction,
                seed=request.seed,
                subsample_cap=request.subsample_cap,
                normalize=request.normalize,
                config_info=info,
            )
            return report.to_dict()

        return _http_errors(work)

    @app.post("/experiments/closed-world")
    def closed_world(request: ClosedWorldRequest) -> dict:
        def work():
            table, triples, info = _load_inputs(request)
            report = run_closed_world(
                table, triples,
                folds=request.folds,
                seed=request.seed,
                C=request.C,
                normalize=request.normalize,
                save_model_path=request.save_model,
                config_info=info,
            )
            return report.to_dict()

        return _http_errors(work)

    @app.post("/experiments/baseline")
    def baseline(request: BaselineRequest) -> dict:
        def work():
            table, triples, info = _load_inputs(request)
            report = run_baseline_cluster_majority(
                table, triples,
                n_clusters=request.clusters,
                seed=request.seed,
                folds=request.folds,
                measure=request.measure,
                gamma=request.gamma,
                subsample_cap=request.subsample_cap,
                normalize=request.normalize,
                config_info=info,
            )
            return report.to_dict()

        return _http_errors(work)

    @app.post("/experiments/open-world")
    def open_world(request: OpenWorldRequest) -> dict:
        def work():
            table, triples, info = _load_inputs(request)
            freq = load_frequencies(request.freq)
            annotations = load_triples(request.annotations) if request.annotations else None
            info["freq_path"] = request.freq
            report = run_open_world(
                table, triples, freq,
                with_negatives=request.with_negatives,
                annotations=annotations,
                seed=request.seed,
                C=request.C,
                gamma=request.gamma,
                lexicon_size=request.lexicon_size,
                test_fraction=request.test_fraction,
                normalize=request.normalize,
                config_info=info,
            )
            return report.to_dict()

        return _http_errors(work)

    @app.post("/experiments/lexical-split")
    def lexical_split_sweep(request: LexicalSplitRequest) -> dict:
        def work():
            table, triples, info = _load_inputs(request)
            freq = load_frequencies(request.freq)
            info["freq_path"] = request.freq
            report = run_lexical_memorisation(
                table, triples, freq,
                multipliers=request.multipliers,
                seed=request.seed,
                C=request.C,
                gamma=request.gamma,
                lexicon_size=request.lexicon_size,
                test_fraction=request.test_fraction,
                normalize=request.normalize,
                config_info=info,
            )
            return report.to_dict()

        return _http_errors(work)

    @app.post("/models/predict", response_model=PredictResponse)
    def predict(request: PredictRequest) -> PredictResponse:
        def work():
            model = load_model(request.model_path)
            if not isinstance(model, LinearModel):
                raise ValueError("predict requires a linear_multiclass model")
            table = cache.load(request.embeddings, request.format, request.lowercase)
            if request.normalize:
                table = normalize_unit(table)
            pairs = _read_pairs_file(request.pairs)
            triples = [RelationTriple("random", w1, w2) for w1, w2 in pairs]
            instances = make_diffvecs(triples, table, provenance="random")
            labels = model.predict([inst.vector for inst in instances])
            return PredictResponse(
                model_path=request.model_path,
                predictions=[
                    PairPrediction(word1=w1, word2=w2, label=label)
                    for (w1, w2), label in zip(pairs, labels)
                ],
            )

        return _http_errors(work)

    return app


app = create_app()
