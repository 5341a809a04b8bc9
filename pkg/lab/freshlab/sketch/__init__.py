"""Per-key read/write estimators: exact, count-min and top-k."""

from .base_estimator import EstimateSource, Estimator, EwEstimate, SketchError
from .countmin import CountMinEstimator, CountMinSketch
from .exact import ExactEwTracker
from .topk import TopKEstimator
from .accuracy import BenchRow, benchmark_estimators, decision_accuracy, replay
from ..discovery import PluginDiscovery

estimator_discovery: PluginDiscovery[Estimator] = PluginDiscovery(__name__, Estimator, SketchError)


def make_estimator(descriptor: str, seed: int = 0) -> Estimator:
    """Build an estimator from ``exact``, ``cms:d=4,w=4096`` or ``topk:k=1000,d=4,w=4096``."""
    return estimator_discovery.create(descriptor, seed=seed)


__all__ = [
    "BenchRow",
    "CountMinEstimator",
    "CountMinSketch",
    "EstimateSource",
    "Estimator",
    "EwEstimate",
    "ExactEwTracker",
    "SketchError",
    "TopKEstimator",
    "benchmark_estimators",
    "decision_accuracy",
    "estimator_discovery",
    "make_estimator",
    "replay",
]
