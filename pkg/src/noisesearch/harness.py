"""Experiment orchestration, ablation grids, diagnostics, and result files.

Outputs are plain files: one JSON-lines trace per (config, seed) cell, a
scaling-curves CSV, diagnostics CSVs, and a summary report JSON whose every
number is recomputable from the raw files.
"""

from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .flow import FlowSchedule, GuidanceConfig, MixtureModel, sample
from .noise import NoiseTensor, TensorShape, gaussian_normalize, sample_standard_noise
from .pipeline import IdentityPipeline, ToyFlowPipeline
from .search import SearchConfig, SearchTrace, run_search
from .singular import SigmaCandidate, decompose, reconstruct, singular_vector_similarity
from .verifiers import (
    ExternalVerifier,
    FkVerifier,
    MultiModalLandscape,
    ScoreRequest,
    landscape_from_context,
)

DEFAULT_SHAPE = TensorShape((4, 16, 16))  # d = 1024, batched (4, 16, 16)


def default_mixture(dim: int, n_components: int = 4, seed: int = 0,
                    separation: float = 3.0) -> MixtureModel:
    """Deterministic well-separated diagonal mixture for the toy pipeline."""
    rng = np.random.default_rng(seed)
    means = separation * rng.standard_normal((n_components, dim))
    # keep per-coordinate offsets modest at high dimension
    means /= max(1.0, np.sqrt(dim) / 4.0)
    variances = np.full((n_components, dim), 0.25)
    weights = np.full(n_components, 1.0 / n_components)
    labels = tuple(f"class{i}" for i in range(n_components))
    return MixtureModel(means, variances, weights, labels)


def load_mixture(path: str | Path) -> MixtureModel:
    """Read a mixture definition file (JSON list of components)."""
    with open(path) as fh:
        data = json.load(fh)
    comps = data["components"] if isinstance(data, dict) else data
    means = np.array([c["mean"] for c in comps], dtype=np.float64)
    variances = np.array([c["variance"] for c in comps], dtype=np.float64)
    weights = np.array([c["weight"] for c in comps], dtype=np.float64)
    labels = tuple(str(c["label"]) for c in comps)
    return MixtureModel(means, variances, weights, labels)


def save_mixture(model: MixtureModel, path: str | Path) -> None:
    comps = [
        {
            "mean": model.means[i].tolist(),
            "variance": model.variances[i].tolist(),
            "weight": float(model.weights[i]),
            "label": model.labels[i],
        }
        for i in range(len(model.labels))
    ]
    with open(path, "w") as fh:
        json.dump({"components": comps}, fh, indent=2)


def multimodal_from_mixture(model: MixtureModel, sharpness: float | None = None,
                            height_gap: float = 0.5,
                            target_seed: int = 1234) -> MultiModalLandscape:
    """Bowls at typical samples of each component, with decreasing heights.

    Each bowl sits at mean_k + std_k * z_k for a fixed unit draw z_k, i.e.
    at an on-distribution point of that component rather than its mean.
    Putting targets at means would make the all-zero noise globally optimal
    and reward norm collapse; typical-sample targets keep the optimum at a
    realistic generator output. The first component hosts the global
    optimum; the rest are local optima iterative searches must escape.
    """
    k = len(model.labels)
    sharp = sharpness if sharpness else 1.0 / model.dimension
    heights = -height_gap * np.arange(k, dtype=np.float64)
    rng = np.random.default_rng(target_seed)
    offsets = np.sqrt(model.variances) * rng.standard_normal(model.means.shape)
    return MultiModalLandscape(
        centers=model.means + offsets,
        sharpnesses=np.full(k, sharp),
        heights=heights,
    )


@dataclass
class ExperimentSpec:
    name: str
    configs: list[SearchConfig]
    seeds: list[int]
    out_dir: str
    shape: TensorShape = DEFAULT_SHAPE
    mixture: MixtureModel | None = None
    mixture_file: str | None = None
    steps: int = 20
    beta: float = 0.7
    condition: str | None = "class0"
    verifier: str = "synthetic"   # synthetic | multimodal | fk | external:<command>
    context: str = "a reference prompt"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed required")
        if not self.configs:
            raise ConfigError("at least one search config required")
        if self.mixture is None:
            if self.mixture_file:
                self.mixture = load_mixture(self.mixture_file)
            else:
                self.mixture = default_mixture(self.shape.size)
        if self.mixture.dimension != self.shape.size:
            raise ConfigError(
                f"mixture dimension {self.mixture.dimension} != shape size "
                f"{self.shape.size}")


@dataclass
class SummaryReport:
    per_config: list[dict]
    win_rates: dict[str, float]
    curves_csv: str
    trace_files: list[str]
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_config": self.per_config,
            "win_rates": self.win_rates,
            "curves_csv": self.curves_csv,
            "trace_files": self.trace_files,
            "failures": self.failures,
        }


def build_pipeline(spec: ExperimentSpec, external_holder: list | None = None):
    """Construct the generation+scoring pipeline named by the spec."""
    schedule = FlowSchedule(steps=spec.steps)
    guidance = GuidanceConfig(beta=spec.beta, condition=spec.condition)
    if spec.verifier == "synthetic":
        verifier = landscape_from_context(spec.context, spec.shape.size)
    elif spec.verifier == "multimodal":
        verifier = multimodal_from_mixture(spec.mixture)
    elif spec.verifier == "fk":
        verifier = FkVerifier(spec.mixture, schedule, guidance)
    elif spec.verifier.startswith("external:"):
        command = spec.verifier.split(":", 1)[1].split()
        verifier = ExternalVerifier(command, dim=spec.shape.size)
        if external_holder is not None:
            external_holder.append(verifier)
    else:
        raise ConfigError(f"unknown verifier {spec.verifier!r}")
    return ToyFlowPipeline(spec.mixture, schedule, guidance, verifier, spec.context)


def _run_cell(spec: ExperimentSpec, cfg_idx: int, seed: int) -> tuple[str, SearchTrace]:
    cfg = SearchConfig.from_dict({**spec.configs[cfg_idx].to_dict(), "seed": seed})
    externals: list = []
    try:
        pipeline = build_pipeline(spec, externals)
        trace = run_search(cfg, pipeline, spec.shape)
    finally:
        for ext in externals:
            ext.close()
    out = Path(spec.out_dir) / f"{spec.name}_c{cfg_idx}_s{seed}.jsonl"
    trace.save(out)
    return str(out), trace


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> SummaryReport:
    """Run every (config x seed) cell and emit traces, curves, and a summary."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [(ci, seed) for ci in range(len(spec.configs)) for seed in spec.seeds]
    results: dict[tuple[int, int], tuple[str, SearchTrace]] = {}
    failures: list[dict] = []

    def work(cell):
        ci, seed = cell
        try:
            return cell, _run_cell(spec, ci, seed), None
        except Exception as exc:  # cell failure recorded, run continues
            return cell, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, cells))
    else:
        outcomes = [work(cell) for cell in cells]
    for cell, res, err in outcomes:
        if err is None:
            results[cell] = res
        else:
            failures.append({"config": cell[0], "seed": cell[1], "error": err})

    curves_path = out_dir / f"{spec.name}_curves.csv"
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "seed", "nfe", "best_score"])
        for (ci, seed), (_, trace) in sorted(results.items()):
            for rec in trace.records:
                writer.writerow([ci, seed, rec["nfe"], repr(rec["best_score"])])

    per_config = []
    finals: dict[int, dict[int, float]] = {}
    for ci in range(len(spec.configs)):
        cfg_finals = {}
        resets = 0
        for seed in spec.seeds:
            if (ci, seed) in results:
                trace = results[(ci, seed)][1]
                cfg_finals[seed] = trace.best_score
                resets += sum(1 for r in trace.records if r["reset"])
        finals[ci] = cfg_finals
        vals = list(cfg_finals.values())
        per_config.append({
            "config": ci,
            "algorithm": spec.configs[ci].algorithm,
            "final_scores": {str(s): v for s, v in cfg_finals.items()},
            "median_final": statistics.median(vals) if vals else None,
            "mean_final": statistics.fmean(vals) if vals else None,
            "std_final": statistics.pstdev(vals) if len(vals) > 1 else 0.0,
            "reset_count": resets,
        })

    win_rates = {}
    for a in range(len(spec.configs)):
        for b in range(len(spec.configs)):
            if a == b:
                continue
            shared = [s for s in spec.seeds if s in finals[a] and s in finals[b]]
            if shared:
                wins = sum(1 for s in shared if finals[a][s] >= finals[b][s])
                win_rates[f"{a}_vs_{b}"] = wins / len(shared)

    report = SummaryReport(
        per_config=per_config,
        win_rates=win_rates,
        curves_csv=str(curves_path),
        trace_files=[results[c][0] for c in sorted(results)],
        failures=failures,
    )
    with open(out_dir / f"{spec.name}_summary.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    return report


def run_similarity_diagnostics(c_s: int, n_s: int, lambdas: list[float],
                               pairs_per_lambda: int = 100, seed: int = 0,
                               out_csv: str | Path | None = None) -> list[dict]:
    """Singular-vector similarity under singular-value perturbation.

    For each lambda: draw a fresh standard noise, perturb its singular
    values by lambda-scaled Gaussians, reconstruct, re-decompose, and
    measure the mean absolute cosine between index-matched singular
    vectors. Returns one row per lambda.
    """
    if any(lam <= 0 for lam in lambdas):
        raise ConfigError("lambda values must be positive")
    shape = TensorShape((c_s, n_s, n_s), batched_view=(c_s, n_s))
    rng = np.random.default_rng(seed)
    rows = []
    for lam in lambdas:
        sims = []
        for _ in range(pairs_per_lambda):
            source = sample_standard_noise(shape, rng)
            a = decompose(source)
            sigma = a.sigma_init + lam * rng.standard_normal(a.sigma_init.shape)
            target = reconstruct(a, SigmaCandidate(sigma))
            b = decompose(target)
            sims.append(singular_vector_similarity(a, b))
        rows.append({
            "lambda": lam,
            "mean_abs_cos": float(np.mean(sims)),
            "std_abs_cos": float(np.std(sims)),
            "n_pairs": pairs_per_lambda,
        })
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["lambda", "mean_abs_cos", "std_abs_cos", "n_pairs"])
            writer.writeheader()
            writer.writerows(rows)
    return rows


def run_space_comparison(radii: list[float], n_pivots: int = 10,
                         n_candidates: int = 10, seed: int = 0,
                         shape: TensorShape = DEFAULT_SHAPE,
                         mixture: MixtureModel | None = None,
                         steps: int = 20, beta: float = 0.7,
                         condition: str | None = "class0",
                         out_dir: str | Path | None = None) -> dict:
    """Best-of-N perturbation quality: compressed vs vanilla search space.

    For each pivot and radius, N candidates are drawn either by perturbing
    the full tensor (vanilla) or only its singular values (compressed),
    then generated and scored on the multi-modal landscape. Reports the
    mean over pivots of the per-pivot best score for each space.
    """
    mixture = mixture or default_mixture(shape.size)
    landscape = multimodal_from_mixture(mixture)
    schedule = FlowSchedule(steps=steps)
    guidance = GuidanceConfig(beta=beta, condition=condition)
    rng = np.random.default_rng(seed)
    pivots = [sample_standard_noise(shape, rng) for _ in range(n_pivots)]
    spaces = [decompose(p) for p in pivots]

    def gen_score(noise: NoiseTensor) -> float:
        out = sample(mixture, schedule, guidance, noise.values)
        return landscape.score(ScoreRequest(out)).value

    rows = []
    per_radius = []
    for eps in radii:
        best_vanilla = []
        best_compressed = []
        for pi, (pivot, space) in enumerate(zip(pivots, spaces)):
            v_scores, c_scores = [], []
            for ci in range(n_candidates):
                # same nominal radius in each space, no normalization: the
                # comparison measures how well each space preserves the
                # noise distribution, so candidates are fed to the
                # generator raw
                z = rng.standard_normal(pivot.values.shape)
                cand = NoiseTensor(shape, pivot.values + eps * z)
                v_scores.append(gen_score(cand))
                zs = rng.standard_normal(space.sigma_init.shape)
                sigma = space.sigma_init + eps * zs
                cand_c = reconstruct(space, SigmaCandidate(sigma), normalize=False)
                c_scores.append(gen_score(cand_c))
                rows.append({"radius": eps, "pivot": pi, "candidate": ci,
                             "vanilla_score": v_scores[-1],
                             "compressed_score": c_scores[-1]})
            best_vanilla.append(max(v_scores))
            best_compressed.append(max(c_scores))
        per_radius.append({
            "radius": eps,
            "vanilla_mean_best": float(np.mean(best_vanilla)),
            "compressed_mean_best": float(np.mean(best_compressed)),
            "compressed_wins": bool(np.mean(best_compressed) >= np.mean(best_vanilla)),
        })

    report = {
        "per_radius": per_radius,
        "n_pivots": n_pivots,
        "n_candidates": n_candidates,
        "seed": seed,
        "radii_won": sum(1 for r in per_radius if r["compressed_wins"]),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "space_comparison_candidates.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        with open(out_dir / "space_comparison_report.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    report["rows"] = rows
    return report
