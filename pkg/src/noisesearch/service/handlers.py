"""Shared execution layer behind the HTTP endpoints and the CLI.

Both surfaces build the same request models and call these functions, so
running locally and running against a server give identical results.
"""

from __future__ import annotations

from pathlib import Path

from ..harness import (
    DEFAULT_SHAPE,
    ExperimentSpec,
    build_pipeline,
    run_experiment,
    run_similarity_diagnostics,
    run_space_comparison,
)
from ..noise import TensorShape
from ..search import SearchConfig, run_search
from . import models


def _shape(dims: list[int], batched_view: list[int] | None) -> TensorShape:
    view = tuple(batched_view) if batched_view else None
    return TensorShape(tuple(dims), batched_view=view)


def _search_config(settings: models.SearchSettings) -> SearchConfig:
    return SearchConfig(**settings.model_dump())


def _experiment_spec(name: str, configs: list[models.SearchSettings],
                     seeds: list[int], out_dir: str,
                     pipeline: models.PipelineSettings) -> ExperimentSpec:
    return ExperimentSpec(
        name=name,
        configs=[_search_config(c) for c in configs],
        seeds=list(seeds),
        out_dir=out_dir,
        shape=_shape(pipeline.dims, pipeline.batched_view),
        mixture_file=pipeline.mixture_file,
        steps=pipeline.steps,
        beta=pipeline.beta,
        condition=pipeline.condition,
        verifier=pipeline.verifier,
        context=pipeline.context,
    )


def handle_search_run(req: models.SearchRunRequest) -> models.SearchRunResponse:
    cfg = _search_config(req.search)
    spec = _experiment_spec("adhoc", [req.search], [req.search.seed],
                            out_dir=".", pipeline=req.pipeline)
    externals: list = []
    try:
        pipeline = build_pipeline(spec, externals)
        trace = run_search(cfg, pipeline, spec.shape)
    finally:
        for ext in externals:
            ext.close()
    trace_path = None
    if req.out:
        Path(req.out).parent.mkdir(parents=True, exist_ok=True)
        trace.save(req.out)
        trace_path = req.out
    return models.SearchRunResponse(
        best_score=trace.best_score,
        nfe=pipeline.nfe_counter.count,
        n_records=len(trace.records),
        n_resets=sum(1 for r in trace.records if r["reset"]),
        trace_path=trace_path,
    )


def handle_similarity(req: models.SimilarityRequest) -> models.SimilarityResponse:
    rows = run_similarity_diagnostics(
        c_s=req.c_s, n_s=req.n_s, lambdas=req.lambdas,
        pairs_per_lambda=req.pairs_per_lambda, seed=req.seed, out_csv=req.out)
    return models.SimilarityResponse(
        rows=[models.SimilarityRow(**row) for row in rows])


def handle_space_comparison(
        req: models.SpaceComparisonRequest) -> models.SpaceComparisonResponse:
    shape = _shape(req.dims, req.batched_view) if req.dims else DEFAULT_SHAPE
    report = run_space_comparison(
        radii=req.radii, n_pivots=req.n_pivots, n_candidates=req.n_candidates,
        seed=req.seed, shape=shape, steps=req.steps, beta=req.beta,
        condition=req.condition, out_dir=req.out)
    return models.SpaceComparisonResponse(
        per_radius=[models.RadiusResult(**r) for r in report["per_radius"]],
        radii_won=report["radii_won"],
        n_pivots=report["n_pivots"],
        n_candidates=report["n_candidates"],
        seed=report["seed"],
    )


def handle_experiment(req: models.ExperimentRequest) -> models.ExperimentResponse:
    spec = _experiment_spec(req.name, req.configs, req.seeds, req.out_dir,
                            req.pipeline)
    report = run_experiment(spec, jobs=req.jobs)
    data = report.to_dict()
    return models.ExperimentResponse(
        per_config=[models.ConfigSummary(**c) for c in data["per_config"]],
        win_rates=data["win_rates"],
        curves_csv=data["curves_csv"],
        trace_files=data["trace_files"],
        failures=data["failures"],
    )
