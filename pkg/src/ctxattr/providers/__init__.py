from .base import Prompt, ScoredContinuation, ScoredGenerationProvider
from .synthetic import (
    CannedScoreOracle,
    DistractorQAOracle,
    InteractionOracle,
    PlantedCase,
    PlantedLinearOracle,
    make_planted_case,
    make_poison_case,
)
from .remote import FieldAdapter, RemoteConfig, RemoteProvider

__all__ = [
    "Prompt",
    "ScoredContinuation",
    "ScoredGenerationProvider",
    "PlantedLinearOracle",
    "InteractionOracle",
    "CannedScoreOracle",
    "DistractorQAOracle",
    "PlantedCase",
    "make_planted_case",
    "make_poison_case",
    "FieldAdapter",
    "RemoteConfig",
    "RemoteProvider",
]
