from .base import Oracle
from .cache import ResponseCache, request_digest
from .exact import ExactOracle, NoiseSpec, NoisyOracle
from .lm import LmOracle, LmOracleConfig, label_distribution, parse_thought

__all__ = [
    "ExactOracle",
    "LmOracle",
    "LmOracleConfig",
    "NoiseSpec",
    "NoisyOracle",
    "Oracle",
    "ResponseCache",
    "label_distribution",
    "parse_thought",
    "request_digest",
]
