"""Numeric primitives, seeded randomness and run telemetry."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from typing import Iterator

import numpy as np

GENERATOR_NAME = "numpy.PCG64"

TRACE_COLUMNS = (
    "step",
    "loss",
    "grad_norm_sq",
    "effective_lr",
    "alpha",
    "beta",
    "lambda",
    "c",
    "dist_x0_sq",
)


class UsageError(ValueError):
    """Raised when an operation is called outside its preconditions."""


class NonFiniteError(FloatingPointError):
    """Raised when an optimizer state or gradient stops being finite."""

    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step
        self.what = what


def as_vector(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise UsageError(f"length mismatch: {a.shape} vs {b.shape}")


def dot(a, b) -> float:
    """Inner product accumulated in float64."""
    a = as_vector(a)
    b = as_vector(b)
    _check_same_length(a, b)
    return float(np.dot(a, b))


def axpy(alpha: float, x, y) -> np.ndarray:
    """Return ``alpha * x + y`` as a new array."""
    x = as_vector(x)
    y = as_vector(y)
    _check_same_length(x, y)
    return alpha * x + y


def all_finite(x: np.ndarray) -> bool:
    return bool(np.isfinite(x).all())


class RngStream:
    """Seeded random stream.

    Streams built from the same ``(seed, index)`` pair replay identical samples;
    distinct indices are spawned through :class:`numpy.random.SeedSequence` and
    do not share state.
    """

    def __init__(self, seed: int, index: int = 0):
        if seed < 0 or index < 0:
            raise UsageError("seed and stream index must be non-negative")
        self.seed = int(seed)
        self.index = int(index)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, self.index])))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def clone(self) -> "RngStream":
        """Copy of this stream positioned at the same point."""
        other = copy.copy(self)
        other._gen = copy.deepcopy(self._gen)
        return other

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def choice(self, n: int, size: int) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=False)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, index={self.index})"


def gaussian_vector(rng: RngStream, n: int, sigma: float) -> np.ndarray:
    """``n`` i.i.d. draws from Normal(0, sigma**2)."""
    if n < 1:
        raise UsageError("n must be >= 1")
    if sigma < 0:
        raise UsageError("sigma must be >= 0")
    if sigma == 0:
        return np.zeros(n)
    return rng.normal(n, sigma)


@dataclass(frozen=True)
class TraceRow:
    step: int
    loss: float
    grad_norm_sq: float
    effective_lr: float
    alpha: float
    beta: float
    lam: float
    c: float
    dist_x0_sq: float

    def values(self) -> tuple:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass
class RunTrace:
    """Per-step telemetry of one run, stored column-wise.

    Row ``k`` describes the iterate ``x_k`` *before* step ``k`` is applied,
    together with the schedule values used by that step.
    """

    meta: dict
    columns: dict = field(default_factory=lambda: {name: [] for name in TRACE_COLUMNS})
    x_final: np.ndarray | None = None
    x_average: np.ndarray | None = None
    final_loss: float = math.nan
    final_grad_norm_sq: float = math.nan
    abort_step: int | None = None
    abort_reason: str | None = None
    xs: np.ndarray | None = None
    zs: np.ndarray | None = None

    def append(self, row: TraceRow) -> None:
        steps = self.columns["step"]
        if steps and row.step <= steps[-1]:
            raise UsageError("trace steps must be strictly increasing")
        for name, value in zip(TRACE_COLUMNS, row.values()):
            self.columns[name].append(value)

    def __len__(self) -> int:
        return len(self.columns["step"])

    def __iter__(self) -> Iterator[TraceRow]:
        cols = [self.columns[name] for name in TRACE_COLUMNS]
        for values in zip(*cols):
            yield TraceRow(*values)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=np.float64)

    @property
    def aborted(self) -> bool:
        return self.abort_step is not None

    def returned_iterate(self, mode: str = "last_iterate") -> np.ndarray:
        if mode == "last_iterate":
            return self.x_final
        if mode == "average_iterate":
            return self.x_average
        raise UsageError(f"unknown return mode {mode!r}")
