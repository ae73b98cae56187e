"""Command-line client.

Thin layer over the service handlers: every subcommand builds the same
request model the HTTP API accepts and either executes it in-process
(default) or posts it to a running server via ``--server URL``.

Exit codes: 0 success, 2 config error, 3 runtime failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import urllib.request

import click
from pydantic import ValidationError

from .errors import ConfigError, NoiseSearchError
from .service import handlers, models

log = logging.getLogger("noisesearch")

_ENDPOINTS = {
    models.SearchRunRequest: "/search/run",
    models.SimilarityRequest: "/diagnostics/similarity",
    models.SpaceComparisonRequest: "/diagnostics/space-comparison",
    models.ExperimentRequest: "/experiments/run",
}

_HANDLERS = {
    models.SearchRunRequest: handlers.handle_search_run,
    models.SimilarityRequest: handlers.handle_similarity,
    models.SpaceComparisonRequest: handlers.handle_space_comparison,
    models.ExperimentRequest: handlers.handle_experiment,
}


def _execute(req, server: str | None):
    if server is None:
        return _HANDLERS[type(req)](req).model_dump(by_alias=True)
    url = server.rstrip("/") + _ENDPOINTS[type(req)]
    data = req.model_dump_json(by_alias=True).encode("utf-8")
    http_req = urllib.request.Request(
        url, data=data, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(http_req) as resp:
        return json.loads(resp.read().decode("utf-8"))


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _fail_config(msg: str):
    click.echo(f"config error: {msg}", err=True)
    raise SystemExit(2)


def _fail_runtime(msg: str):
    click.echo(f"runtime failure: {msg}", err=True)
    raise SystemExit(3)


def _load_flat_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail_config(f"cannot read config file {path}: {exc}")
    if not isinstance(data, dict):
        _fail_config(f"config file {path} must hold a flat JSON object")
    return data


@click.group()
def main():
    """Search the initial noise of a toy rectified-flow sampler."""
    level = os.environ.get("ITS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


_SEARCH_KEYS = ("algorithm", "candidates", "iterations", "lambda", "eta",
                "zeta", "beta0", "gamma", "alpha", "use_gn", "use_css",
                "use_ssr", "elitism", "seed", "nfe_budget")
_PIPELINE_KEYS = ("dims", "batched_view", "steps", "beta", "condition",
                  "verifier", "context", "mixture_file")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Flat JSON key-value file; flags override file values.")
@click.option("--algorithm", type=click.Choice(["random", "zero_order", "firefly"]),
              default=None)
@click.option("--candidates", type=int, default=None)
@click.option("--iterations", type=int, default=None)
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--eta", type=float, default=None)
@click.option("--zeta", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--verifier", default=None,
              help="synthetic | multimodal | fk | external:<command>")
@click.option("--nfe-budget", type=int, default=None)
@click.option("--out", default=None, help="Trace file path (JSON lines).")
@click.option("--no-gn", is_flag=True, default=False)
@click.option("--no-css", is_flag=True, default=False)
@click.option("--no-ssr", is_flag=True, default=False)
@click.option("--mixture", "mixture_file", type=click.Path(), default=None)
@click.option("--context", default=None)
@click.option("--server", default=None, help="Run against a service URL.")
def run(config_path, server, out, no_gn, no_css, no_ssr, **flags):
    """Run one search and print its summary."""
    file_cfg = _load_flat_config(config_path)
    merged = dict(file_cfg)
    merged.update({k: v for k, v in flags.items() if v is not None})
    if no_gn:
        merged["use_gn"] = False
    if no_css:
        merged["use_css"] = False
    if no_ssr:
        merged["use_ssr"] = False
    if "lam" in merged:
        merged["lambda"] = merged.pop("lam")
    search = {k: merged[k] for k in _SEARCH_KEYS if k in merged}
    pipeline = {k: merged[k] for k in _PIPELINE_KEYS if k in merged}
    out = merged.pop("out", None) if out is None else out
    try:
        req = models.SearchRunRequest(
            search=models.SearchSettings(**search),
            pipeline=models.PipelineSettings(**pipeline),
            out=out,
        )
    except ValidationError as exc:
        _fail_config(str(exc))
    _dispatch(req, server)


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True,
              help="Experiment spec JSON (name, configs, seeds, out_dir, pipeline).")
@click.option("--jobs", type=int, default=1)
@click.option("--server", default=None)
def experiment(spec_path, jobs, server):
    """Run a (config x seed) grid and emit traces, curves, and a summary."""
    with open(spec_path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            _fail_config(f"invalid spec file: {exc}")
    data.setdefault("jobs", jobs)
    try:
        req = models.ExperimentRequest(**data)
    except ValidationError as exc:
        _fail_config(str(exc))
    payload = _dispatch(req, server, emit=False)
    _emit(payload)
    if payload.get("failures"):
        raise SystemExit(3)


@main.command()
@click.option("--cs", "c_s", type=int, default=8)
@click.option("--ns", "n_s", type=int, default=64)
@click.option("--lambdas", default="0.1,1.0,2.0", help="Comma-separated values.")
@click.option("--pairs", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None, help="CSV output path.")
@click.option("--server", default=None)
def similarity(c_s, n_s, lambdas, pairs, seed, out, server):
    """Singular-vector similarity under singular-value perturbation."""
    try:
        lams = [float(v) for v in lambdas.split(",") if v.strip()]
        req = models.SimilarityRequest(c_s=c_s, n_s=n_s, lambdas=lams,
                                       pairs_per_lambda=pairs, seed=seed, out=out)
    except (ValueError, ValidationError) as exc:
        _fail_config(str(exc))
    _dispatch(req, server)


@main.command("space-compare")
@click.option("--radii", default="0.01,1,2,3", help="Comma-separated radii.")
@click.option("--pivots", type=int, default=10)
@click.option("--candidates", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None, help="Output directory for CSV + report.")
@click.option("--server", default=None)
def space_compare(radii, pivots, candidates, seed, out, server):
    """Compare compressed vs vanilla perturbation spaces at several radii."""
    try:
        rads = [float(v) for v in radii.split(",") if v.strip()]
        req = models.SpaceComparisonRequest(radii=rads, n_pivots=pivots,
                                            n_candidates=candidates, seed=seed,
                                            out=out)
    except (ValueError, ValidationError) as exc:
        _fail_config(str(exc))
    _dispatch(req, server)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


def _dispatch(req, server, emit=True):
    try:
        payload = _execute(req, server)
    except ConfigError as exc:
        _fail_config(str(exc))
    except NoiseSearchError as exc:
        _fail_runtime(str(exc))
    except OSError as exc:
        _fail_runtime(str(exc))
    if emit:
        _emit(payload)
    return payload


if __name__ == "__main__":
    sys.exit(main())
