from .server import DistanceScorer, EchoScorer, StubScorer, serve

__all__ = ["DistanceScorer", "EchoScorer", "StubScorer", "serve"]
