from .base import (
    BackendError,
    BackendUnavailable,
    JudgeScores,
    MalformedBackendReply,
    OutOfRangeScore,
    SemanticBackend,
)
from .gateway import GatewayBackend, PromptTemplate, load_templates
from .mock import MockBackend

__all__ = [
    "BackendError",
    "BackendUnavailable",
    "GatewayBackend",
    "JudgeScores",
    "MalformedBackendReply",
    "MockBackend",
    "OutOfRangeScore",
    "PromptTemplate",
    "SemanticBackend",
    "load_templates",
]
