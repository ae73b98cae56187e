"""Random, zero-order, and firefly searches over initial noise.

Each algorithm runs in two forms: vanilla (positions are full noise
tensors) and improved (Gaussian normalization + compressed singular-value
space + singular space reset). The three improvements are independently
toggleable so ablations can isolate each one.

Conventions shared by all runs:

* all randomness flows through a single generator seeded from the config,
  so identical (config, seed) produce byte-identical traces;
* the global best (noise actually fed to the generator, plus its score) is
  tracked over every evaluation ever made, making the best-so-far sequence
  non-decreasing;
* the NFE budget is checked before each generation and counts denoising
  steps only.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError
from .noise import NoiseTensor, TensorShape, gaussian_normalize, sample_standard_noise
from .singular import (
    SigmaCandidate,
    SingularSpace,
    decompose,
    reconstruct,
    sample_candidates,
    should_reset,
)

ALGORITHMS = ("random", "zero_order", "firefly")

# default parameter sets; candidate counts and iteration counts are sized
# so a default run spends about 1000 evaluations
_DEFAULTS = {
    "random": {"candidates": 1000, "iterations": 1},
    "zero_order": {"candidates": 5, "iterations": 200},
    "firefly": {"candidates": 10, "iterations": 100},
}


@dataclass
class SearchConfig:
    algorithm: str = "zero_order"
    candidates: int | None = None     # N
    iterations: int | None = None     # K
    lam: float = 2.0                  # zero-order perturbation scale
    eta: float = 3.0                  # singular-value sampling scale
    zeta: float = 0.001               # reset threshold on score variance
    beta0: float = 1.0                # firefly initial attractiveness
    gamma: float = 0.00001            # firefly light absorption
    alpha: float = 0.97               # firefly randomization strength
    use_gn: bool = True
    use_css: bool = True
    use_ssr: bool = True
    elitism: bool = True              # zero-order: pivot competes with candidates
    seed: int = 0
    nfe_budget: int | None = None
    record_timing: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        defaults = _DEFAULTS[self.algorithm]
        if self.candidates is None:
            self.candidates = defaults["candidates"]
        if self.iterations is None:
            self.iterations = defaults["iterations"]
        if self.candidates < 1 or self.iterations < 1:
            raise ConfigError("candidates and iterations must be >= 1")
        if self.lam < 0 or self.eta < 0:
            raise ConfigError("lam and eta must be >= 0")
        if self.zeta <= 0:
            raise ConfigError("zeta must be positive")
        if self.nfe_budget is not None and self.nfe_budget < 1:
            raise ConfigError("nfe_budget must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class SearchTrace:
    config: SearchConfig
    records: list[dict] = field(default_factory=list)
    best_noise: NoiseTensor | None = None
    best_score: float = float("-inf")

    def add_record(self, iteration: int, nfe: int, score_var: float,
                   reset: bool, pivot_std: float, population_std: float,
                   elapsed_ms: float) -> None:
        rec = {
            "iter": iteration,
            "best_score": self.best_score,
            "nfe": nfe,
            "score_var": score_var,
            "reset": bool(reset),
            "pivot_std": pivot_std,
            "population_std": population_std,
        }
        if self.config.record_timing:
            rec["elapsed_ms"] = elapsed_ms
        self.records.append(rec)

    def to_jsonl(self, include_noise: bool = True) -> str:
        lines = [json.dumps({"header": {"config": self.config.to_dict(),
                                        "seed": self.config.seed}},
                            sort_keys=True)]
        lines += [json.dumps(rec, sort_keys=True) for rec in self.records]
        final = {"best_score": self.best_score}
        if include_noise and self.best_noise is not None:
            final["noise_dims"] = list(self.best_noise.shape.dims)
            final["noise_batched_view"] = (
                list(self.best_noise.shape.batched_view)
                if self.best_noise.shape.batched_view else None)
            final["noise_values"] = self.best_noise.values.tolist()
        lines.append(json.dumps({"final": final}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path, include_noise: bool = True) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl(include_noise=include_noise))


def select_best(candidates: list[tuple]) -> tuple:
    """Argmax over (noise, score) pairs; ties break to the lowest index."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    best = candidates[0]
    for cand in candidates[1:]:
        if cand[1] > best[1]:
            best = cand
    return best


class _BudgetExhausted(Exception):
    pass


class _Run:
    """Shared bookkeeping for one search run."""

    def __init__(self, cfg: SearchConfig, pipeline, shape: TensorShape):
        self.cfg = cfg
        self.pipeline = pipeline
        self.shape = shape
        self.rng = np.random.default_rng(cfg.seed)
        self.trace = SearchTrace(config=cfg)
        self.t0 = time.monotonic()

    def evaluate(self, noise: NoiseTensor) -> float:
        budget = self.cfg.nfe_budget
        if budget is not None and (
                self.pipeline.nfe_counter.count + self.pipeline.nfe_per_eval > budget):
            raise _BudgetExhausted()
        score = self.pipeline.evaluate(noise)
        if score > self.trace.best_score:
            self.trace.best_score = score
            self.trace.best_noise = noise
        return score

    def record(self, iteration: int, scores: list[float], reset: bool,
               pivot_values: np.ndarray,
               population: list[np.ndarray] | None = None) -> None:
        var = float(np.var(np.asarray(scores))) if scores else 0.0
        if population:
            pop_std = float(np.std(np.concatenate(
                [np.asarray(p).ravel() for p in population])))
        else:
            pop_std = float(np.std(pivot_values))
        self.trace.add_record(
            iteration=iteration,
            nfe=self.pipeline.nfe_counter.count,
            score_var=var,
            reset=reset,
            pivot_std=float(np.std(pivot_values)),
            population_std=pop_std,
            elapsed_ms=(time.monotonic() - self.t0) * 1e3,
        )

    def fresh_noise(self) -> NoiseTensor:
        return sample_standard_noise(self.shape, self.rng)

    def prep(self, noise: NoiseTensor) -> NoiseTensor:
        """Apply the normalization layer to a generator input."""
        return gaussian_normalize(noise) if self.cfg.use_gn else noise

    def rebuild(self, space: SingularSpace, sigma: np.ndarray) -> NoiseTensor:
        return reconstruct(space, SigmaCandidate(sigma), normalize=self.cfg.use_gn)


def run_random(cfg: SearchConfig, pipeline, shape: TensorShape) -> SearchTrace:
    """Random search: vanilla best-of-N, or per-candidate singular sampling.

    In compressed mode each step draws one sigma candidate around the
    current pivot; with SSR on, every new best re-anchors the space at the
    freshly decomposed best noise.
    """
    run = _Run(cfg, pipeline, shape)
    total = cfg.candidates * cfg.iterations
    try:
        if not cfg.use_css:
            scores: list[float] = []
            for i in range(total):
                noise = run.prep(run.fresh_noise())
                scores.append(run.evaluate(noise))
                run.record(i, scores, reset=False, pivot_values=noise.values)
            return run.trace

        pivot = run.fresh_noise()
        space = decompose(pivot)
        pivot_in = run.prep(pivot)
        score = run.evaluate(pivot_in)
        scores = [score]
        run.record(0, scores, reset=False, pivot_values=pivot.values)
        for i in range(1, total):
            sigma = space.sigma_init + cfg.eta * run.rng.standard_normal(
                space.sigma_init.shape)
            cand = run.rebuild(space, sigma)
            prev_best = run.trace.best_score
            s = run.evaluate(cand)
            scores.append(s)
            reset = False
            if cfg.use_ssr and s > prev_best:
                space = decompose(cand)
                reset = True
            run.record(i, scores, reset=reset, pivot_values=cand.values)
    except _BudgetExhausted:
        pass
    return run.trace


def run_zero_order(cfg: SearchConfig, pipeline, shape: TensorShape) -> SearchTrace:
    """Zero-order search: N Gaussian perturbations of the pivot per iteration.

    The perturbation "radius" lam is realized as a per-coordinate Gaussian
    scale. With elitism on (default) the pivot competes in the argmax, so
    its score never decreases.
    """
    run = _Run(cfg, pipeline, shape)
    try:
        if cfg.use_css:
            pivot_noise = run.fresh_noise()
            space = decompose(pivot_noise)
            sigma = space.sigma_init.copy()
            # the pivot starts unscored so K iterations of N candidates
            # cost exactly K*N generations
            pivot_score = float("-inf")
            for t in range(cfg.iterations):
                cands = []
                for _ in range(cfg.candidates):
                    s = sigma + cfg.lam * run.rng.standard_normal(sigma.shape)
                    noise = run.rebuild(space, s)
                    cands.append((s, run.evaluate(noise)))
                scores = [c[1] for c in cands]
                pool = cands + [(sigma, pivot_score)] if cfg.elitism else cands
                sigma, pivot_score = select_best(pool)
                reset = False
                if cfg.use_ssr and should_reset(scores, cfg.zeta):
                    space = decompose(run.trace.best_noise)
                    sigma = space.sigma_init.copy()
                    pivot_score = run.trace.best_score
                    reset = True
                pivot_vals = reconstruct(space, SigmaCandidate(sigma)).values
                run.record(t, scores, reset=reset, pivot_values=pivot_vals)
        else:
            pivot = run.fresh_noise()
            pivot_score = float("-inf")
            for t in range(cfg.iterations):
                cands = []
                for _ in range(cfg.candidates):
                    vals = pivot.values + cfg.lam * run.rng.standard_normal(
                        pivot.values.shape)
                    cand = NoiseTensor(shape, vals)
                    cands.append((cand, run.evaluate(run.prep(cand))))
                scores = [c[1] for c in cands]
                pool = cands + [(pivot, pivot_score)] if cfg.elitism else cands
                pivot, pivot_score = select_best(pool)
                run.record(t, scores, reset=False, pivot_values=pivot.values,
                           population=[c[0].values for c in cands])
    except _BudgetExhausted:
        pass
    return run.trace


def run_firefly(cfg: SearchConfig, pipeline, shape: TensorShape) -> SearchTrace:
    """Firefly search: brightness-driven pairwise attraction with jitter.

    Pairs are visited sequentially in ascending (i, j) order with immediate
    position and brightness updates, so traces are reproducible. On an SSR
    trigger the space is re-anchored at the global best and the swarm is
    resampled around the new pivot values.
    """
    run = _Run(cfg, pipeline, shape)
    n = cfg.candidates
    space: SingularSpace | None = None

    def make_noise(pos: np.ndarray) -> NoiseTensor:
        if cfg.use_css:
            return run.rebuild(space, pos)
        return run.prep(NoiseTensor(shape, pos))

    try:
        if cfg.use_css:
            pivot = run.fresh_noise()
            space = decompose(pivot)
            positions = [
                space.sigma_init + cfg.eta * run.rng.standard_normal(
                    space.sigma_init.shape)
                for _ in range(n)
            ]
        else:
            positions = [run.fresh_noise().values.copy() for _ in range(n)]
        brightness = [run.evaluate(make_noise(p)) for p in positions]

        for t in range(cfg.iterations):
            for i in range(n):
                for j in range(n):
                    if j == i or brightness[j] <= brightness[i]:
                        continue
                    diff = positions[j] - positions[i]
                    r2 = float(np.sum(diff * diff))
                    beta = cfg.beta0 * np.exp(-cfg.gamma * r2)
                    eps = run.rng.standard_normal(positions[i].shape)
                    positions[i] = positions[i] + beta * diff + cfg.alpha * eps
                    brightness[i] = run.evaluate(make_noise(positions[i]))
            reset = False
            if cfg.use_css and cfg.use_ssr and should_reset(brightness, cfg.zeta):
                space = decompose(run.trace.best_noise)
                positions = [
                    space.sigma_init + cfg.eta * run.rng.standard_normal(
                        space.sigma_init.shape)
                    for _ in range(n)
                ]
                brightness = [run.evaluate(make_noise(p)) for p in positions]
                reset = True
            best_idx = int(np.argmax(brightness))
            if cfg.use_css:
                pivot_vals = reconstruct(
                    space, SigmaCandidate(positions[best_idx])).values
            else:
                pivot_vals = positions[best_idx]
            run.record(t, list(brightness), reset=reset, pivot_values=pivot_vals,
                       population=None if cfg.use_css else positions)
    except _BudgetExhausted:
        pass
    return run.trace


def run_search(cfg: SearchConfig, pipeline, shape: TensorShape) -> SearchTrace:
    """Dispatch to the configured algorithm with budget enforcement."""
    if cfg.algorithm == "random":
        return run_random(cfg, pipeline, shape)
    if cfg.algorithm == "zero_order":
        return run_zero_order(cfg, pipeline, shape)
    if cfg.algorithm == "firefly":
        return run_firefly(cfg, pipeline, shape)
    raise ConfigError(f"unknown algorithm {cfg.algorithm!r}")
