"""Discrete chaotic maps that generate the reservoir weight streams.

The workhorse is a quadratic two-dimensional map of Henon type,

    x' = y
    y' = x + a1*x^2 + a2*y^2 - a3*x*y - a4,

iterated in 64-bit floats.  An optional guard replaces any y-iterate whose
magnitude exceeds 10 with 1, which keeps otherwise divergent coefficient
choices usable.  A plain logistic map is included for baseline comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# |y| above this triggers the guard when clamping is enabled
CLAMP_LIMIT = 10.0
CLAMP_REPLACEMENT = 1.0

# transient length used by the filling methods that discard a warm-up
TRANSIENT_ITERATIONS = 10_000


class MapOverflowError(ArithmeticError):
    """A map iterate became non-finite with clamping disabled.

    ``iteration`` is the 1-based index of the offending step, counted from
    the initial condition (warm-up steps included).
    """

    def __init__(self, iteration: int, value: float = float("nan")):
        self.iteration = iteration
        self.value = value
        super().__init__(f"map iterate {iteration} is non-finite ({value!r})")


class MapState(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class MapParams:
    """Coefficients and initial-condition constants for one map configuration.

    ``a1``..``a4`` are the quadratic-map coefficients, ``A`` and ``B`` feed
    the initial conditions (directly for constant-init filling, through the
    sine formula for sine-init filling).  ``preliminary_iterations`` steps
    are discarded before any value is recorded; the shipped filling methods
    use either 0 or ``TRANSIENT_ITERATIONS``.
    """

    a1: float
    a2: float
    a3: float
    a4: float
    A: float
    B: float
    clamp_enabled: bool = False
    preliminary_iterations: int = 0

    def __post_init__(self):
        for name in ("a1", "a2", "a3", "a4", "A", "B"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"map parameter {name} must be finite, got {value!r}")
        if self.preliminary_iterations < 0:
            raise ValueError(
                f"preliminary_iterations must be >= 0, got {self.preliminary_iterations}"
            )

    def replace(self, **changes) -> "MapParams":
        from dataclasses import replace as _replace

        return _replace(self, **changes)


def henon_step(state: MapState | tuple[float, float], params: MapParams) -> MapState:
    """Advance the quadratic map one step.

    The guard applies to the new y only; x is never clamped.  With clamping
    disabled a non-finite result raises :class:`MapOverflowError`.
    """
    x, y = state
    y_next = x + params.a1 * x * x + params.a2 * y * y - params.a3 * x * y - params.a4
    if params.clamp_enabled:
        # `not <=` rather than `>` so a NaN produced from extreme inputs is
        # also replaced instead of silently propagating
        if not (abs(y_next) <= CLAMP_LIMIT):
            y_next = CLAMP_REPLACEMENT
    elif not math.isfinite(y_next):
        raise MapOverflowError(1, y_next)
    return MapState(y, y_next)


def iterate_series(
    params: MapParams, x0: float, y0: float, count: int
) -> np.ndarray:
    """Record ``count`` consecutive y-iterates starting from ``(x0, y0)``.

    ``params.preliminary_iterations`` warm-up steps run first and are not
    recorded; the first recorded value is the y produced by the step after
    the warm-up.  Deterministic for identical arguments.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    a1, a2, a3, a4 = params.a1, params.a2, params.a3, params.a4
    clamp = params.clamp_enabled
    x, y = float(x0), float(y0)
    out = np.empty(count, dtype=np.float64)

    step = 0
    for _ in range(params.preliminary_iterations):
        step += 1
        x, y = y, x + a1 * x * x + a2 * y * y - a3 * x * y - a4
        if clamp:
            if not (abs(y) <= CLAMP_LIMIT):
                y = CLAMP_REPLACEMENT
        elif not math.isfinite(y):
            raise MapOverflowError(step, y)

    for i in range(count):
        step += 1
        x, y = y, x + a1 * x * x + a2 * y * y - a3 * x * y - a4
        if clamp:
            if not (abs(y) <= CLAMP_LIMIT):
                y = CLAMP_REPLACEMENT
        elif not math.isfinite(y):
            raise MapOverflowError(step, y)
        out[i] = y
    return out


def logistic_step(x: float, r: float) -> float:
    """One iterate of the logistic map r*x*(1-x)."""
    return r * x * (1.0 - x)
