"""Weight-storage accounting for a trained model.

Counts the numeric values a deployed artifact must hold.  In streaming
mode the reservoir stage stores only the six map scalars no matter how
many neurons it has; materialized mode stores the full P x 785 matrix.
The classifier always stores its dense layers (bias columns included).
Device-level RAM (stack, buffers) is out of scope: the report compares
stored values, which is also how the map's cost is compared against a
logistic-map baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

# a1..a4 plus the two initial conditions (A, B)
HENON_PARAMETER_COUNT = 6
# rate parameter plus initial condition plus iterate
LOGISTIC_PARAMETER_COUNT = 3
DEFAULT_BYTES_PER_VALUE = 8


def map_parameter_delta() -> int:
    """Extra scalars the two-dimensional map costs over the logistic baseline."""
    return HENON_PARAMETER_COUNT - LOGISTIC_PARAMETER_COUNT


@dataclass(frozen=True)
class FootprintReport:
    reservoir_parameter_count: int
    classifier_weight_count: int
    streaming_mode: bool
    bytes_per_value: int = DEFAULT_BYTES_PER_VALUE

    @property
    def total_value_count(self) -> int:
        return self.reservoir_parameter_count + self.classifier_weight_count

    @property
    def estimated_bytes(self) -> int:
        return self.total_value_count * self.bytes_per_value


def footprint(model, mode: str = "streaming",
              bytes_per_value: int = DEFAULT_BYTES_PER_VALUE) -> FootprintReport:
    """Stored-value counts for ``model`` deployed in ``mode``."""
    if mode not in ("streaming", "materialized"):
        raise ValueError(f"unknown mode {mode!r}")
    if bytes_per_value < 1:
        raise ValueError(f"bytes_per_value must be >= 1, got {bytes_per_value}")
    config = model.reservoir.config
    if mode == "streaming":
        reservoir_count = HENON_PARAMETER_COUNT
    else:
        reservoir_count = config.reservoir_size * config.input_dim
    classifier_count = int(sum(w.size for w in model.classifier.weights))
    return FootprintReport(
        reservoir_parameter_count=reservoir_count,
        classifier_weight_count=classifier_count,
        streaming_mode=(mode == "streaming"),
        bytes_per_value=bytes_per_value,
    )


def render_text(report: FootprintReport) -> str:
    mode = "streaming" if report.streaming_mode else "materialized"
    lines = [
        f"reservoir mode:            {mode}",
        f"reservoir parameter count: {report.reservoir_parameter_count}",
        f"classifier weight count:   {report.classifier_weight_count}",
        f"total stored values:       {report.total_value_count}",
        f"bytes per value:           {report.bytes_per_value}",
        f"estimated bytes:           {report.estimated_bytes}",
    ]
    return "\n".join(lines) + "\n"


def write_csv(report: FootprintReport, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(
            "reservoir_parameter_count,classifier_weight_count,"
            "streaming_mode,bytes_per_value,estimated_bytes\n"
        )
        fh.write(
            f"{report.reservoir_parameter_count},{report.classifier_weight_count},"
            f"{int(report.streaming_mode)},{report.bytes_per_value},{report.estimated_bytes}\n"
        )


__all__ = [
    "FootprintReport",
    "footprint",
    "render_text",
    "write_csv",
    "map_parameter_delta",
    "HENON_PARAMETER_COUNT",
    "LOGISTIC_PARAMETER_COUNT",
    "DEFAULT_BYTES_PER_VALUE",
]
