"""Scoring contract and the three verifier implementations.

All verifiers map a generated sample (plus free-form context) to a scalar
where higher is better, and are deterministic given fixed configuration.
The synthetic verifier is an in-process stand-in for external preference
models; the FK verifier derives a self-supervised score from the flow
model itself; the external verifier talks the newline-delimited JSON
protocol to an out-of-process scorer (see ``ExternalVerifier`` for the
wire format).
"""

from __future__ import annotations

import hashlib
import json
import select
import subprocess
from dataclasses import dataclass, field

import numpy as np

from .errors import TransportError
from .flow import FlowSchedule, GuidanceConfig, MixtureModel, NfeCounter, sample_with_fk
from .noise import NoiseTensor

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class ScoreRequest:
    sample: np.ndarray
    context: str = ""
    request_id: int = 0

    def __post_init__(self):
        sample = np.asarray(self.sample, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(sample)):
            raise ValueError("sample contains non-finite values")
        object.__setattr__(self, "sample", sample)


@dataclass(frozen=True)
class VerifierScore:
    value: float
    verifier_name: str

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("verifier score must be finite")


@dataclass(frozen=True)
class SyntheticLandscape:
    """Smooth single-optimum score: -sharpness * ||sample - target||^2."""

    target_point: np.ndarray
    sharpness: float = 1.0
    name: str = "synthetic"

    def __post_init__(self):
        target = np.asarray(self.target_point, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "target_point", target)
        if self.sharpness <= 0:
            raise ValueError("sharpness must be positive")

    def score(self, req: ScoreRequest) -> VerifierScore:
        if req.sample.shape != self.target_point.shape:
            raise ValueError(
                f"sample dim {req.sample.shape[0]} != target dim "
                f"{self.target_point.shape[0]}"
            )
        d = req.sample - self.target_point
        return VerifierScore(float(-self.sharpness * (d @ d)), self.name)


@dataclass(frozen=True)
class MultiModalLandscape:
    """Max over several bowls with distinct heights; tests escape from local optima.

    score(x) = max_i (height_i - sharpness_i * ||x - center_i||^2)
    """

    centers: np.ndarray      # (M, d)
    sharpnesses: np.ndarray  # (M,)
    heights: np.ndarray      # (M,)
    name: str = "multimodal"

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        sharp = np.asarray(self.sharpnesses, dtype=np.float64)
        heights = np.asarray(self.heights, dtype=np.float64)
        if sharp.shape != (centers.shape[0],) or heights.shape != (centers.shape[0],):
            raise ValueError("need one sharpness and height per center")
        if np.any(sharp <= 0):
            raise ValueError("sharpnesses must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sharpnesses", sharp)
        object.__setattr__(self, "heights", heights)

    def score(self, req: ScoreRequest) -> VerifierScore:
        if req.sample.shape[0] != self.centers.shape[1]:
            raise ValueError("sample dimension mismatch")
        d2 = np.sum((self.centers - req.sample[None, :]) ** 2, axis=1)
        return VerifierScore(float(np.max(self.heights - self.sharpnesses * d2)), self.name)


def landscape_from_context(context: str, dim: int,
                           sharpness: float | None = None) -> SyntheticLandscape:
    """Deterministic synthetic landscape keyed off a hash of the context.

    Distinct prompts exercise distinct targets without any shared RNG state.
    Sharpness defaults to 1/dim so scores stay O(1) at any dimension.
    """
    digest = hashlib.sha256(context.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.default_rng(seed)
    target = rng.standard_normal(dim)
    return SyntheticLandscape(target, sharpness if sharpness else 1.0 / dim)


class FkVerifier:
    """Self-supervised score from the accumulated CFG divergence.

    Lower accumulated divergence between conditional and unconditional
    velocity fields means the conditional model agrees with the
    unconditional manifold, so the default score is the negated log-weight.
    ``higher_weight_better=True`` flips the sign for the other reading.
    """

    name = "fk"

    def __init__(self, model: MixtureModel, schedule: FlowSchedule,
                 guidance: GuidanceConfig, higher_weight_better: bool = False):
        if guidance.condition is None:
            raise ValueError("FK verifier requires a condition label")
        self.model = model
        self.schedule = schedule
        self.guidance = guidance
        self.sign = 1.0 if higher_weight_better else -1.0

    def score_noise(self, x_init: NoiseTensor | np.ndarray,
                    nfe_counter: NfeCounter | None = None) -> tuple[np.ndarray, VerifierScore]:
        """Generate from the noise and score it in a single Euler pass."""
        values = x_init.values if isinstance(x_init, NoiseTensor) else np.asarray(x_init)
        out, w = sample_with_fk(self.model, self.schedule, self.guidance,
                                values, nfe_counter)
        return out, VerifierScore(self.sign * w, self.name)


def score_synthetic(landscape: SyntheticLandscape, req: ScoreRequest) -> VerifierScore:
    return landscape.score(req)


def score_fk(model: MixtureModel, schedule: FlowSchedule, g: GuidanceConfig,
             x_init: NoiseTensor | np.ndarray) -> VerifierScore:
    _, s = FkVerifier(model, schedule, g).score_noise(x_init)
    return s


class ExternalVerifier:
    """Client for out-of-process scorers over stdin/stdout pipes.

    Wire format (newline-delimited JSON, one object per line):

    1. parent -> child   {"hello": {"version": 1, "dim": <d>}}
       child -> parent   {"hello": {"version": 1, "name": "<id>", "parallel": <bool>}}
    2. request           {"id": <int>, "context": "<str>", "sample": [<d floats>]}
    3. response          {"id": <int>, "score": <float>}
                      or {"id": <int>, "error": "<message>"}
    4. shutdown          {"bye": true}, then wait <= 5 s for exit.

    One connection is a serial channel: requests are answered in order.
    """

    def __init__(self, command: list[str], dim: int, timeout: float = 60.0):
        self.dim = dim
        self.timeout = timeout
        self.name = "external"
        self.parallel = False
        self._proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1,
        )
        self._handshake()

    def _send(self, obj: dict) -> None:
        if self._proc.stdin is None or self._proc.poll() is not None:
            raise TransportError("verifier process is not running")
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise TransportError(f"write to verifier failed: {exc}") from exc

    def _read_line(self) -> str:
        stdout = self._proc.stdout
        assert stdout is not None
        ready, _, _ = select.select([stdout], [], [], self.timeout)
        if not ready:
            raise TransportError(f"verifier response timed out after {self.timeout}s")
        line = stdout.readline()
        if line == "":
            raise TransportError("verifier process closed its output")
        return line

    def _read_json(self) -> dict:
        line = self._read_line()
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"malformed response: {exc}", payload=line) from exc
        if not isinstance(obj, dict):
            raise TransportError("response is not a JSON object", payload=line)
        return obj

    def _handshake(self) -> None:
        self._send({"hello": {"version": PROTOCOL_VERSION, "dim": self.dim}})
        reply = self._read_json()
        hello = reply.get("hello")
        if not isinstance(hello, dict) or hello.get("version") != PROTOCOL_VERSION:
            raise TransportError("handshake failed", payload=json.dumps(reply))
        self.name = str(hello.get("name", "external"))
        self.parallel = bool(hello.get("parallel", False))

    def score(self, req: ScoreRequest) -> VerifierScore:
        self._send({
            "id": req.request_id,
            "context": req.context,
            "sample": [float(v) for v in req.sample],
        })
        reply = self._read_json()
        if reply.get("id") != req.request_id:
            raise TransportError(
                f"response id {reply.get('id')} does not match request "
                f"id {req.request_id}", payload=json.dumps(reply))
        if "error" in reply:
            raise TransportError(f"verifier error: {reply['error']}",
                                 payload=json.dumps(reply))
        if "score" not in reply:
            raise TransportError("response missing score", payload=json.dumps(reply))
        return VerifierScore(float(reply["score"]), self.name)

    def close(self) -> None:
        if self._proc.poll() is not None:
            return
        try:
            self._send({"bye": True})
        except TransportError:
            pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
