"""Request/response schemas for the HTTP service and the CLI client."""

from __future__ import annotations

from pydantic import BaseModel, Field


class SearchSettings(BaseModel):
    algorithm: str = "zero_order"
    candidates: int | None = None
    iterations: int | None = None
    lam: float = Field(default=2.0, alias="lambda")
    eta: float = 3.0
    zeta: float = 0.001
    beta0: float = 1.0
    gamma: float = 0.00001
    alpha: float = 0.97
    use_gn: bool = True
    use_css: bool = True
    use_ssr: bool = True
    elitism: bool = True
    seed: int = 0
    nfe_budget: int | None = None

    model_config = {"populate_by_name": True}


class PipelineSettings(BaseModel):
    dims: list[int] = [4, 16, 16]
    batched_view: list[int] | None = None
    steps: int = 20
    beta: float = 0.7
    condition: str | None = "class0"
    verifier: str = "synthetic"
    context: str = "a reference prompt"
    mixture_file: str | None = None


class SearchRunRequest(BaseModel):
    search: SearchSettings = SearchSettings()
    pipeline: PipelineSettings = PipelineSettings()
    out: str | None = None


class SearchRunResponse(BaseModel):
    best_score: float
    nfe: int
    n_records: int
    n_resets: int
    trace_path: str | None = None


class SimilarityRequest(BaseModel):
    c_s: int = 8
    n_s: int = 64
    lambdas: list[float] = [0.1, 1.0, 2.0]
    pairs_per_lambda: int = 100
    seed: int = 0
    out: str | None = None


class SimilarityRow(BaseModel):
    lam: float = Field(alias="lambda")
    mean_abs_cos: float
    std_abs_cos: float
    n_pairs: int

    model_config = {"populate_by_name": True}


class SimilarityResponse(BaseModel):
    rows: list[SimilarityRow]


class SpaceComparisonRequest(BaseModel):
    radii: list[float] = [0.01, 1.0, 2.0, 3.0]
    n_pivots: int = 10
    n_candidates: int = 10
    seed: int = 0
    dims: list[int] = [4, 16, 16]
    batched_view: list[int] | None = None
    steps: int = 20
    beta: float = 0.7
    condition: str | None = "class0"
    out: str | None = None


class RadiusResult(BaseModel):
    radius: float
    vanilla_mean_best: float
    compressed_mean_best: float
    compressed_wins: bool


class SpaceComparisonResponse(BaseModel):
    per_radius: list[RadiusResult]
    radii_won: int
    n_pivots: int
    n_candidates: int
    seed: int


class ExperimentRequest(BaseModel):
    name: str
    configs: list[SearchSettings]
    seeds: list[int]
    out_dir: str
    pipeline: PipelineSettings = PipelineSettings()
    jobs: int = 1


class ConfigSummary(BaseModel):
    config: int
    algorithm: str
    final_scores: dict[str, float]
    median_final: float | None
    mean_final: float | None
    std_final: float
    reset_count: int


class ExperimentResponse(BaseModel):
    per_config: list[ConfigSummary]
    win_rates: dict[str, float]
    curves_csv: str
    trace_files: list[str]
    failures: list[dict]
