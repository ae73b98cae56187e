"""Acceptance battery: one test and one printed PASS/FAIL line per criterion.

Each criterion computes its result first, prints a single summary line, and
only then asserts, so the verdict line appears even when the criterion
fails.
"""

import json
import subprocess
import sys

import numpy as np

from noisesearch.flow import (
    FlowSchedule,
    GuidanceConfig,
    fk_log_weight,
    log_density,
    score,
    velocity,
)
from noisesearch.harness import (
    ExperimentSpec,
    build_pipeline,
    run_similarity_diagnostics,
    run_space_comparison,
)
from noisesearch.noise import NoiseTensor, TensorShape, gaussian_normalize, \
    sample_standard_noise
from noisesearch.pipeline import IdentityPipeline
from noisesearch.search import SearchConfig, run_search, select_best
from noisesearch.singular import SigmaCandidate, decompose, reconstruct
from noisesearch.verifiers import ExternalVerifier, ScoreRequest, \
    SyntheticLandscape

SEEDS = list(range(10))


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"{criterion}: {detail}"


def toy_run(algo, seed, budget, verifier="synthetic", **kw):
    cfg = SearchConfig(algorithm=algo, seed=seed, nfe_budget=budget, **kw)
    spec = ExperimentSpec(name="acc", configs=[cfg], seeds=[seed],
                          out_dir="/tmp/acc", verifier=verifier)
    return run_search(cfg, build_pipeline(spec), spec.shape)


def test_a1_singular_vector_local_similarity():
    rows = run_similarity_diagnostics(c_s=8, n_s=64, lambdas=[0.1, 1.0, 2.0],
                                      pairs_per_lambda=100, seed=0)
    means = [r["mean_abs_cos"] for r in rows]
    bands = [(0.87, 0.97), (0.61, 0.75), (0.59, 0.73)]
    in_band = [lo <= m <= hi for m, (lo, hi) in zip(means, bands)]
    monotone = means[0] >= means[1] >= means[2]
    ok = all(in_band) and monotone
    report("A1", ok,
           f"mean |cos| at lambda 0.1/1.0/2.0 = "
           f"{means[0]:.4f}/{means[1]:.4f}/{means[2]:.4f}, "
           f"bands hit {in_band}, monotone {monotone}")


def test_a2_compressed_vs_vanilla_space_ordering():
    rep = run_space_comparison(radii=[0.01, 1.0, 2.0, 3.0], n_pivots=10,
                               n_candidates=10, seed=0)
    won = rep["radii_won"]
    pairs = [(r["radius"], round(r["compressed_mean_best"]
                                 - r["vanilla_mean_best"], 4))
             for r in rep["per_radius"]]
    report("A2", won >= 3,
           f"compressed wins at {won}/4 radii (radius, margin): {pairs}")


def test_a3_scaling_law_shape():
    vanilla = {s: toy_run("random", s, 10000, use_gn=False, use_css=False,
                          use_ssr=False) for s in SEEDS}
    details = []
    ok = True
    for algo in ("random", "zero_order", "firefly"):
        improved = {s: toy_run(algo, s, 10000) for s in SEEDS}
        scale_ok = 0
        for s in SEEDS:
            recs = improved[s].records
            at_2k = max((r["best_score"] for r in recs if r["nfe"] <= 2000),
                        default=float("-inf"))
            scale_ok += recs[-1]["best_score"] >= at_2k
        wins = sum(improved[s].best_score >= vanilla[s].best_score
                   for s in SEEDS)
        details.append(f"{algo}: scale {scale_ok}/10, wins {wins}/10")
        ok = ok and scale_ok >= 9 and wins >= 7
    report("A3", ok, "; ".join(details))


def test_a4_gaussian_normalization_ablation():
    details = []
    ok = True
    for algo, kw in (("zero_order", dict(elitism=False, lam=2.0)),
                     ("firefly", dict(alpha=3.0))):
        on = {s: toy_run(algo, s, 10000, verifier="multimodal", use_css=False,
                         use_ssr=False, use_gn=True, **kw) for s in SEEDS}
        off = {s: toy_run(algo, s, 10000, verifier="multimodal",
                          use_css=False, use_ssr=False, use_gn=False, **kw)
               for s in SEEDS}
        m_on = float(np.median([t.best_score for t in on.values()]))
        m_off = float(np.median([t.best_score for t in off.values()]))
        drifts = [abs(t.records[-1]["population_std"] - 1.0)
                  for t in off.values()]
        drift_ok = all(d > 0.2 for d in drifts)
        details.append(f"{algo}: median on {m_on:.4f} vs off {m_off:.4f}, "
                       f"min drift {min(drifts):.2f}")
        ok = ok and m_on >= m_off and drift_ok
    report("A4", ok, "; ".join(details))


def test_a5_singular_space_reset_ablation():
    details = []
    ok = True
    for algo, kw in (("random", dict()), ("zero_order", dict(lam=0.5))):
        on = {s: toy_run(algo, s, 10000, verifier="multimodal", use_ssr=True,
                         **kw) for s in SEEDS}
        off = {s: toy_run(algo, s, 10000, verifier="multimodal",
                          use_ssr=False, **kw) for s in SEEDS}
        m_on = float(np.median([t.best_score for t in on.values()]))
        m_off = float(np.median([t.best_score for t in off.values()]))
        resets = 0
        valid = True
        for t in on.values():
            recs = t.records
            for prev, cur in zip([None] + recs[:-1], recs):
                if not cur["reset"]:
                    continue
                resets += 1
                if algo == "random":
                    improved = prev is None or \
                        cur["best_score"] > prev["best_score"]
                    valid = valid and improved
                else:
                    valid = valid and cur["score_var"] < 0.001
        details.append(f"{algo}: median on {m_on:.4f} vs off {m_off:.4f}, "
                       f"{resets} resets all valid {valid}")
        ok = ok and m_on >= m_off and resets > 0 and valid
    report("A5", ok, "; ".join(details))


def test_a6_fk_verifier_correctness(mixture2, mixture1):
    sched = FlowSchedule(steps=10)

    # (i) exact zeros
    x = np.array([0.3, -0.2, 0.7, 0.1])
    zeros = [fk_log_weight(mixture2, sched, GuidanceConfig(beta=b,
                                                           condition="a"), x)
             for b in (0.0, 1.0)]
    zeros.append(fk_log_weight(mixture1, sched,
                               GuidanceConfig(beta=0.7, condition="only"),
                               np.array([0.5, 0.1, -0.3])))
    zero_ok = all(abs(w) < 1e-12 for w in zeros)

    # (ii) non-negativity on 1000 random trajectories
    rng = np.random.default_rng(0)
    g = GuidanceConfig(beta=0.7, condition="a")
    nonneg_ok = all(
        fk_log_weight(mixture2, sched, g, rng.standard_normal(4)) >= 0.0
        for _ in range(1000))

    # (iii) step refinement on the smooth 2-component model
    worst_rel = 0.0
    for seed in range(20):
        xi = np.random.default_rng(seed).standard_normal(4)
        w500 = fk_log_weight(mixture2, FlowSchedule(steps=500), g, xi)
        w50 = fk_log_weight(mixture2, FlowSchedule(steps=50), g, xi)
        worst_rel = max(worst_rel, abs(w500 - w50) / max(w500, 1e-9))
    refine_ok = worst_rel < 0.1

    # (iv) score-velocity consistency at 100 random points
    worst_identity = 0.0
    worst_fd = 0.0
    for _ in range(100):
        xp = 2.0 * rng.standard_normal(4)
        t = rng.uniform(0.05, 0.95)
        v = velocity(mixture2, xp, t)
        s = score(mixture2, xp, t)
        worst_identity = max(worst_identity,
                             float(np.max(np.abs(s + ((1 - t) * v + xp) / t))))
        h = 1e-6
        fd = np.array([
            (log_density(mixture2, xp + h * e, t)
             - log_density(mixture2, xp - h * e, t)) / (2 * h)
            for e in np.eye(4)
        ])
        worst_fd = max(worst_fd, float(np.max(np.abs(s - fd))))
    identity_ok = worst_identity < 1e-6 and worst_fd < 1e-4

    ok = zero_ok and nonneg_ok and refine_ok and identity_ok
    report("A6", ok,
           f"zero cases {zero_ok}, w>=0 on 1000 {nonneg_ok}, "
           f"refinement worst rel {worst_rel:.3f}, "
           f"identity worst {worst_identity:.2e}, fd worst {worst_fd:.2e}")


def test_a7_unit_invariants():
    rng = np.random.default_rng(1)
    checks = {}

    t = NoiseTensor(TensorShape((256,)), 3.0 * rng.standard_normal(256) + 2.0)
    n = gaussian_normalize(t)
    n2 = gaussian_normalize(n)
    checks["gn"] = (abs(n.values.mean()) < 1e-9
                    and abs(n.values.std() - 1.0) < 1e-9
                    and np.allclose(n.values, n2.values, atol=1e-9))

    shape = TensorShape((8, 64, 64))
    worst_resid = 0.0
    worst_orth = 0.0
    for _ in range(100):
        x = sample_standard_noise(shape, rng)
        space = decompose(x)
        back = reconstruct(space, SigmaCandidate(space.sigma_init))
        worst_resid = max(worst_resid,
                          float(np.linalg.norm(back.values - x.values)
                                / np.linalg.norm(x.values)))
        eye = np.eye(64)
        worst_orth = max(
            worst_orth,
            float(max(np.max(np.abs(space.U[c].T @ space.U[c] - eye))
                      for c in range(8))),
            float(max(np.max(np.abs(space.V[c].T @ space.V[c] - eye))
                      for c in range(8))))
    checks["svd"] = worst_resid < 1e-6 and worst_orth < 1e-6

    space = decompose(sample_standard_noise(shape, rng))
    sigma = np.sort(rng.uniform(1.0, 10.0, space.sigma_init.shape),
                    axis=1)[:, ::-1]
    again = decompose(reconstruct(space, SigmaCandidate(sigma)))
    cos_u = np.abs(np.einsum("cik,cik->ck", space.U, again.U))
    cos_v = np.abs(np.einsum("cik,cik->ck", space.V, again.V))
    checks["recovery"] = bool(np.all(cos_u > 1 - 1e-8)
                              and np.all(cos_v > 1 - 1e-8))

    ok_select = True
    for _ in range(50):
        scores = rng.integers(-4, 4, size=rng.integers(1, 10)).astype(float)
        cands = [(i, s) for i, s in enumerate(scores)]
        top = max(s for _, s in cands)
        ok_select = ok_select and (
            select_best(cands) == next(c for c in cands if c[1] == top))
    checks["select_best"] = ok_select

    land = SyntheticLandscape(np.zeros(16))
    pipe = IdentityPipeline(land)

    class Twenty:
        nfe_per_eval = 20

        def __init__(self, inner):
            self.inner = inner
            self.nfe_counter = inner.nfe_counter

        def evaluate(self, noise):
            self.inner.nfe_counter.add(19)  # inner adds 1 itself
            return self.inner.evaluate(noise)

    small = TensorShape((1, 4, 4))
    cfg = SearchConfig(algorithm="zero_order", candidates=5, iterations=10,
                       use_css=False, use_gn=False, use_ssr=False, seed=0)
    trace = run_search(cfg, Twenty(pipe), small)
    checks["nfe"] = trace.records[-1]["nfe"] == 1000

    cfg = SearchConfig(algorithm="firefly", candidates=4, iterations=5, seed=2)
    t1 = run_search(cfg, IdentityPipeline(land), small)
    t2 = run_search(cfg, IdentityPipeline(land), small)
    checks["trace_bytes"] = t1.to_jsonl() == t2.to_jsonl()

    ok = all(checks.values())
    report("A7", ok, ", ".join(f"{k}={v}" for k, v in checks.items()))


def test_a8_zero_order_grid_oracle():
    land = SyntheticLandscape(np.array([8.0]), sharpness=1.0)
    grid = np.linspace(-50.0, 50.0, 10000)
    grid_opt = grid[np.argmax(-(grid - 8.0) ** 2)]
    hits = 0
    gaps = []
    for seed in SEEDS:
        cfg = SearchConfig(algorithm="zero_order", candidates=5,
                           iterations=100, lam=2.0, use_gn=False,
                           use_css=False, use_ssr=False, seed=seed)
        trace = run_search(cfg, IdentityPipeline(land), TensorShape((1,)))
        gap = abs(float(trace.best_noise.values[0]) - grid_opt)
        gaps.append(gap)
        hits += gap <= 0.5
    report("A8", hits == 10,
           f"{hits}/10 seeds within 0.5 of grid optimum {grid_opt:.4f} "
           f"(max gap {max(gaps):.4f})")


def test_a9_bridge_equivalence(tmp_path):
    rng = np.random.default_rng(5)
    target = rng.standard_normal(8)
    target_file = tmp_path / "target.json"
    target_file.write_text(json.dumps(target.tolist()))
    land = SyntheticLandscape(target, sharpness=1.0)

    cmd = [sys.executable, "-m", "bridge_verifier.server", "--scorer",
           "distance", "--target", str(target_file)]
    worst = 0.0
    with ExternalVerifier(cmd, dim=8) as ver:
        for i in range(100):
            sample = rng.standard_normal(8)
            external = ver.score(ScoreRequest(sample, "ctx", i)).value
            local = land.score(ScoreRequest(sample)).value
            worst = max(worst, abs(external - local))
    equal_ok = worst < 1e-9

    echo_cmd = [sys.executable, "-m", "bridge_verifier.server",
                "--scorer", "echo"]
    with ExternalVerifier(echo_cmd, dim=3) as ver:
        vals = [0.125, -7.5, 3.0]
        echo_ok = all(
            ver.score(ScoreRequest(np.array([v, 0.0, 0.0]), "", i)).value == v
            for i, v in enumerate(vals))

    # raw protocol robustness: malformed line, then ordered ids still work
    proc = subprocess.Popen(echo_cmd, stdin=subprocess.PIPE,
                            stdout=subprocess.PIPE, text=True, bufsize=1)
    send = lambda s: (proc.stdin.write(s + "\n"), proc.stdin.flush())
    recv = lambda: json.loads(proc.stdout.readline())
    send(json.dumps({"hello": {"version": 1, "dim": 1}}))
    recv()
    send("{this is not json")
    robust_ok = "error" in recv()
    order_ok = True
    for i in range(20):
        send(json.dumps({"id": i, "context": "", "sample": [float(i)]}))
        reply = recv()
        order_ok = order_ok and reply == {"id": i, "score": float(i)}
    send(json.dumps({"bye": True}))
    robust_ok = robust_ok and proc.wait(timeout=5) == 0

    ok = equal_ok and echo_ok and robust_ok and order_ok
    report("A9", ok,
           f"distance max |delta| {worst:.2e}, echo exact {echo_ok}, "
           f"malformed survived {robust_ok}, ordered ids {order_ok}")
