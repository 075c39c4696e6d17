"""Complexity analysis of the weight-generating map.

Approximate entropy of the iterate stream that fills the weight matrix,
Poincare pair extraction, and one-parameter bifurcation sweeps.  The
entropy-accuracy table pairs the map's ApEn with classifier accuracy so
the two can be rank-correlated across a parameter sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from chaosnet.maps import (
    CLAMP_LIMIT,
    CLAMP_REPLACEMENT,
    MapOverflowError,
    MapParams,
    iterate_series,
)
from chaosnet.reservoir import FillMethod, ReservoirConfig, build_matrix

DEFAULT_M = 2
DEFAULT_R = 0.025
DEFAULT_SERIES_LENGTH = 5000

# grid reported by the entropy-accuracy table
TABLE_M_VALUES = (1, 2, 3)
TABLE_R_VALUES = (0.025, 0.05, 0.1)


@dataclass(frozen=True)
class ApEnConfig:
    m: int = DEFAULT_M
    r: float = DEFAULT_R

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"embedding dimension m must be >= 1, got {self.m}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"tolerance r must be a positive real, got {self.r}")


def _phi(series: np.ndarray, m: int, r: float) -> float:
    """Mean log of the regular Chebyshev correlation sums at window size m."""
    count = series.size - m + 1
    windows = sliding_window_view(series, m)  # (count, m), a view
    matches = np.zeros(count, dtype=np.int64)
    # block over query windows so the pairwise distance slab stays bounded
    block = max(1, 8_000_000 // count)
    for start in range(0, count, block):
        q = windows[start : start + block]
        d = np.abs(q[:, 0, None] - windows[None, :, 0])
        for k in range(1, m):
            np.maximum(d, np.abs(q[:, k, None] - windows[None, :, k]), out=d)
        matches[start : start + block] = (d <= r).sum(axis=1)
    return float(np.log(matches / count).mean())


def approximate_entropy(series: Sequence[float], config: ApEnConfig = ApEnConfig()) -> float:
    """ApEn(m, r) = phi_m(r) - phi_{m+1}(r), self-matches included.

    Window distance is the max norm; r is an absolute tolerance on the raw
    series.  Identical windows always match themselves, so every
    correlation sum is strictly positive and the result is finite.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d series, got shape {x.shape}")
    if x.size <= config.m + 1:
        raise ValueError(f"series length {x.size} must exceed m + 1 = {config.m + 1}")
    if not np.isfinite(x).all():
        raise ValueError("series contains non-finite values")
    return _phi(x, config.m, config.r) - _phi(x, config.m + 1, config.r)


def weight_series(
    method: FillMethod, params: MapParams, length: int = DEFAULT_SERIES_LENGTH, input_dim: int = 785
) -> np.ndarray:
    """First ``length`` values of the iterate stream that fills the matrix.

    Constant-init methods emit the single recorded orbit; sine-init methods
    emit the matrix rows in row-major order (one y-iterate per column per
    row), truncated to ``length``.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    effective = method.effective_params(params)
    if method.init_kind == "constant":
        return iterate_series(effective, effective.A, effective.B, length)
    rows = -(-length // input_dim)  # ceil
    config = ReservoirConfig(method=method, params=params, reservoir_size=rows, input_dim=input_dim)
    return build_matrix(config).reshape(-1)[:length].copy()


def poincare_pairs(
    params: MapParams, count: int, x0: float | None = None, y0: float | None = None
) -> np.ndarray:
    """(x, y) states of ``count`` successive iterates after the warm-up.

    The initial condition defaults to (A, B); ``params.preliminary_iterations``
    steps are discarded first.  Returned as a (count, 2) array.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    x = params.A if x0 is None else float(x0)
    y = params.B if y0 is None else float(y0)
    a1, a2, a3, a4 = params.a1, params.a2, params.a3, params.a4
    pairs = np.empty((count, 2), dtype=np.float64)
    step = 0
    total_warm = params.preliminary_iterations
    for i in range(total_warm + count):
        step += 1
        x, y = y, x + a1 * x * x + a2 * y * y - a3 * x * y - a4
        if params.clamp_enabled:
            if not (abs(y) <= CLAMP_LIMIT):
                y = CLAMP_REPLACEMENT
        elif not math.isfinite(y):
            raise MapOverflowError(step, y)
        if i >= total_warm:
            pairs[i - total_warm] = (x, y)
    return pairs


@dataclass(frozen=True)
class SweepConfig:
    """One-parameter grid over the map, everything else held fixed."""

    parameter: str
    lo: float
    hi: float
    step: float
    fixed: MapParams
    method: FillMethod
    series_length: int = DEFAULT_SERIES_LENGTH
    transient: int = 1000  # discarded before bifurcation recording
    record_count: int = 100  # y-iterates kept per swept value

    def __post_init__(self):
        if self.parameter not in ("A", "B", "a1", "a2", "a3", "a4"):
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if not self.lo < self.hi:
            raise ValueError(f"sweep needs lo < hi, got [{self.lo}, {self.hi}]")
        if not self.step > 0:
            raise ValueError(f"sweep step must be > 0, got {self.step}")
        if self.series_length < 1 or self.record_count < 1 or self.transient < 0:
            raise ValueError("series_length and record_count must be >= 1, transient >= 0")

    @property
    def values(self) -> np.ndarray:
        n = int(math.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        return self.lo + self.step * np.arange(n)

    def params_at(self, value: float) -> MapParams:
        return self.fixed.replace(**{self.parameter: float(value)})


@dataclass
class BifurcationRow:
    value: float
    iterates: np.ndarray
    overflowed: bool = False
    error_iteration: int | None = None


def bifurcation_sweep(config: SweepConfig) -> list[BifurcationRow]:
    """Post-transient y-iterates for every grid value of the swept parameter.

    A value whose orbit overflows is flagged and carries the failing
    iteration index; the sweep continues with the next value.
    """
    rows: list[BifurcationRow] = []
    for value in config.values:
        params = config.params_at(value).replace(
            clamp_enabled=config.method.uses_clamp,
            preliminary_iterations=config.transient,
        )
        try:
            iterates = iterate_series(params, params.A, params.B, config.record_count)
            rows.append(BifurcationRow(float(value), iterates))
        except MapOverflowError as exc:
            rows.append(
                BifurcationRow(
                    float(value),
                    np.empty(0, dtype=np.float64),
                    overflowed=True,
                    error_iteration=exc.iteration,
                )
            )
    return rows


@dataclass
class EntropyAccuracyRow:
    value: float
    apen: dict[tuple[int, float], float] = field(default_factory=dict)
    accuracy: float = math.nan
    overflowed: bool = False


def entropy_accuracy_table(
    config: SweepConfig,
    accuracy_fn: Callable[[MapParams], float] | None = None,
    m_values: Sequence[int] = TABLE_M_VALUES,
    r_values: Sequence[float] = TABLE_R_VALUES,
) -> list[EntropyAccuracyRow]:
    """Per sweep value: ApEn over the (m, r) grid plus classifier accuracy.

    ``accuracy_fn`` maps the swept MapParams to a test accuracy (the train
    and evaluate pipeline supplies one); when omitted the accuracy column
    stays NaN.  Overflowing values are flagged with NaN entries.
    """
    rows: list[EntropyAccuracyRow] = []
    for value in config.values:
        params = config.params_at(value)
        row = EntropyAccuracyRow(float(value))
        try:
            series = weight_series(config.method, params, config.series_length)
            for m in m_values:
                for r in r_values:
                    row.apen[(m, r)] = approximate_entropy(series, ApEnConfig(m=m, r=r))
        except MapOverflowError:
            row.overflowed = True
            for m in m_values:
                for r in r_values:
                    row.apen[(m, r)] = math.nan
        if accuracy_fn is not None and not row.overflowed:
            row.accuracy = float(accuracy_fn(params))
        rows.append(row)
    return rows


def spearman_correlation(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation between two equal-length sequences."""
    from scipy.stats import spearmanr

    rho = spearmanr(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)).statistic
    return float(rho)


# -- CSV emission ------------------------------------------------------------


def write_bifurcation_csv(rows: list[BifurcationRow], path, comment: str | None = None) -> None:
    """Long format (param, iterate_index, y); an overflowed value emits a
    single row with the failing iteration index and a NaN y."""
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("param,iterate_index,y\n")
        for row in rows:
            if row.overflowed:
                fh.write(f"{row.value:.17g},{row.error_iteration},nan\n")
                continue
            for idx, y in enumerate(row.iterates):
                fh.write(f"{row.value:.17g},{idx},{y:.17g}\n")


def write_entropy_accuracy_csv(
    rows: list[EntropyAccuracyRow],
    path,
    m_values: Sequence[int] = TABLE_M_VALUES,
    r_values: Sequence[float] = TABLE_R_VALUES,
    comment: str | None = None,
) -> None:
    header = ["param"]
    header += [f"apen_m{m}_r{r:g}" for m in m_values for r in r_values]
    header.append("accuracy")
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [f"{row.value:.17g}"]
            cells += [f"{row.apen[(m, r)]:.17g}" for m in m_values for r in r_values]
            cells.append(f"{row.accuracy:.17g}")
            fh.write(",".join(cells) + "\n")


def write_poincare_csv(pairs: np.ndarray, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("x,y\n")
        for x, y in np.asarray(pairs, dtype=np.float64):
            fh.write(f"{x:.17g},{y:.17g}\n")


__all__ = [
    "ApEnConfig",
    "approximate_entropy",
    "weight_series",
    "poincare_pairs",
    "SweepConfig",
    "BifurcationRow",
    "bifurcation_sweep",
    "EntropyAccuracyRow",
    "entropy_accuracy_table",
    "spearman_correlation",
    "write_bifurcation_csv",
    "write_entropy_accuracy_csv",
    "write_poincare_csv",
    "DEFAULT_M",
    "DEFAULT_R",
    "DEFAULT_SERIES_LENGTH",
    "TABLE_M_VALUES",
    "TABLE_R_VALUES",
]
