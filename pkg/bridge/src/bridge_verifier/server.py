"""Reference out-of-process verifier.

Speaks protocol version 1 over stdin/stdout: newline-delimited JSON, one
object per line, strictly serial (the handshake advertises
``parallel: false``). Scorers are stateless; a request never influences a
later score.

Scorers:

* ``echo``     - returns the first sample element; useful for wiring tests.
* ``distance`` - negative squared Euclidean distance to a configured
                 target point.
* ``stub``     - placeholder showing where a real reward model would plug
                 in. A real integration would load its model lazily inside
                 ``StubScorer.__call__`` (never at import time) and return
                 the model's scalar preference score; heavy dependencies
                 stay out of this package on purpose.
"""

from __future__ import annotations

import argparse
import json
import sys

PROTOCOL_VERSION = 1
EXIT_VERSION_MISMATCH = 4


class EchoScorer:
    name = "echo"

    def __call__(self, sample: list[float], context: str) -> float:
        if not sample:
            raise ValueError("empty sample")
        return float(sample[0])


class DistanceScorer:
    """score = -||sample - target||^2, matching the in-process synthetic verifier."""

    name = "distance"

    def __init__(self, target: list[float]):
        self.target = [float(v) for v in target]

    def __call__(self, sample: list[float], context: str) -> float:
        if len(sample) != len(self.target):
            raise ValueError(
                f"sample dim {len(sample)} != target dim {len(self.target)}")
        return -sum((s - t) ** 2 for s, t in zip(sample, self.target))


class StubScorer:
    name = "stub"

    def __call__(self, sample: list[float], context: str) -> float:
        # Plug a real reward model in here: load it lazily on first call,
        # score (sample, context), and return the scalar.
        raise ValueError("stub scorer is a placeholder; configure a real model")


def _reply(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def serve(scorer, name: str, stdin=None) -> int:
    stdin = stdin or sys.stdin
    hello_line = stdin.readline()
    if hello_line == "":
        return 1
    try:
        hello = json.loads(hello_line).get("hello", {})
    except (json.JSONDecodeError, AttributeError):
        _reply({"error": "malformed handshake"})
        return EXIT_VERSION_MISMATCH
    if hello.get("version") != PROTOCOL_VERSION:
        _reply({"error": f"unsupported protocol version {hello.get('version')}"})
        return EXIT_VERSION_MISMATCH
    _reply({"hello": {"version": PROTOCOL_VERSION, "name": name, "parallel": False}})

    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            _reply({"id": None, "error": "malformed request: invalid JSON"})
            continue
        if not isinstance(req, dict):
            _reply({"id": None, "error": "malformed request: not an object"})
            continue
        if req.get("bye"):
            return 0
        req_id = req.get("id")
        try:
            sample = req["sample"]
            if not isinstance(sample, list):
                raise KeyError("sample")
            score = scorer(sample, str(req.get("context", "")))
            _reply({"id": req_id, "score": score})
        except KeyError as exc:
            _reply({"id": req_id, "error": f"malformed request: missing {exc}"})
        except (ValueError, TypeError) as exc:
            _reply({"id": req_id, "error": str(exc)})
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scorer", choices=["echo", "distance", "stub"],
                        default="echo")
    parser.add_argument("--target", default=None,
                        help="JSON file holding the distance target vector")
    parser.add_argument("--name", default=None,
                        help="Identifier reported in the handshake")
    args = parser.parse_args(argv)

    if args.scorer == "echo":
        scorer = EchoScorer()
    elif args.scorer == "distance":
        if not args.target:
            parser.error("--scorer distance requires --target")
        with open(args.target) as fh:
            target = json.load(fh)
        if not isinstance(target, list):
            parser.error("target file must hold a JSON array")
        scorer = DistanceScorer(target)
    else:
        scorer = StubScorer()
    return serve(scorer, args.name or scorer.name)


if __name__ == "__main__":
    sys.exit(main())
