from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import DimensionMismatch, ValidationError

SMOOTHNESS = ("none", "continuous", "mixed-partials-continuous")


@dataclass(frozen=True, eq=False)
class FunctionHandle:
    """Black-box real function on ``[0,1]^arity``.

    ``evaluator`` receives an ``(n, arity)`` array and returns ``n`` values when
    ``vectorized`` is true; otherwise it is called once per point.
    ``meta`` carries optional structure (for example the signed measure a
    function was built from) that callers may exploit for exact expectations.
    """

    arity: int
    evaluator: Callable[[np.ndarray], Any]
    smoothness: str = "none"
    vectorized: bool = True
    name: str = "anonymous"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.arity < 1:
            raise ValidationError("arity must be >= 1")
        if self.smoothness not in SMOOTHNESS:
            raise ValidationError(f"smoothness must be one of {SMOOTHNESS}")

    def __call__(self, t) -> np.ndarray | float:
        T = np.asarray(t, dtype=np.float64)
        single = T.ndim == 1
        T = np.atleast_2d(T)
        if T.shape[1] != self.arity:
            raise DimensionMismatch(f"function of arity {self.arity} got points of dimension {T.shape[1]}")
        if self.vectorized:
            out = np.asarray(self.evaluator(T), dtype=np.float64).reshape(len(T))
        else:
            out = np.array([float(self.evaluator(row)) for row in T], dtype=np.float64)
        return float(out[0]) if single else out
