"""Instances, labels, losses and the Euclidean metric."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class LossKind(enum.Enum):
    SQUARE = "square"
    ABSOLUTE = "absolute"

    @classmethod
    def parse(cls, value: "LossKind | str") -> "LossKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown loss kind {value!r}") from None


def check_label(kind: LossKind, y: float) -> float:
    """Reject labels outside the label space of `kind` (never clip)."""
    y = float(y)
    if kind is LossKind.SQUARE:
        if not 0.0 <= y <= 1.0:
            raise DomainError(f"label {y} outside [0, 1]")
    elif y not in (0.0, 1.0):
        raise DomainError(f"label {y} not in {{0, 1}}")
    return y


def loss(kind: LossKind, prediction: float, label: float) -> float:
    """Square loss ``(y - p)^2 / 2`` or absolute loss ``|y - p|``."""
    y = check_label(kind, label)
    p = float(prediction)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"prediction {p} outside [0, 1]")
    if kind is LossKind.SQUARE:
        return 0.5 * (y - p) ** 2
    return abs(y - p)


def loss_vec(kind: LossKind, predictions: np.ndarray, label: float) -> np.ndarray:
    """Vectorised `loss` over many predictions for the same label (no checks)."""
    predictions = np.asarray(predictions, dtype=float)
    if kind is LossKind.SQUARE:
        return 0.5 * (label - predictions) ** 2
    return np.abs(label - predictions)


def distance(a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(math.sqrt(float(np.dot(a - b, a - b))))


def check_instance(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if float(np.linalg.norm(x)) > 1.0 + NORM_TOL:
        raise DomainError(f"instance norm {np.linalg.norm(x):.6g} exceeds 1")
    return x


@dataclass(frozen=True)
class Example:
    x: np.ndarray
    y: float
    t: int

    def validate(self, kind: LossKind) -> "Example":
        check_instance(self.x)
        check_label(kind, self.y)
        if self.t < 1:
            raise DomainError(f"round index {self.t} must be positive")
        return self
