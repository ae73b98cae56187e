"""FastAPI service wrapping the search engine."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..errors import ConfigError, NoiseSearchError
from . import handlers, models

app = FastAPI(title="noisesearch", version="0.1.0")


def _run(handler, req):
    try:
        return handler(req)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    except NoiseSearchError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/search/run", response_model=models.SearchRunResponse)
def search_run(req: models.SearchRunRequest) -> models.SearchRunResponse:
    return _run(handlers.handle_search_run, req)


@app.post("/diagnostics/similarity", response_model=models.SimilarityResponse)
def similarity(req: models.SimilarityRequest) -> models.SimilarityResponse:
    return _run(handlers.handle_similarity, req)


@app.post("/diagnostics/space-comparison",
          response_model=models.SpaceComparisonResponse)
def space_comparison(
        req: models.SpaceComparisonRequest) -> models.SpaceComparisonResponse:
    return _run(handlers.handle_space_comparison, req)


@app.post("/experiments/run", response_model=models.ExperimentResponse)
def experiment(req: models.ExperimentRequest) -> models.ExperimentResponse:
    return _run(handlers.handle_experiment, req)
