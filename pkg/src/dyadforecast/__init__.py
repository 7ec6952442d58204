"""Forecast a person's 2-D face/body/hand landmarks from their own and their partner's recent motion."""
from .errors import (
    CheckpointError, ContractError, CorruptCheckpointError, DataError, DimensionError, DyadError, NumericError,
    ParseError, TrainingError, UsageError,
)
from .numkernel import BACKEND

__version__ = "0.1.0"
