"""Stored-value accounting for streaming versus materialized deployment."""

import numpy as np
import pytest

from chaosnet.footprint import (
    HENON_PARAMETER_COUNT,
    LOGISTIC_PARAMETER_COUNT,
    FootprintReport,
    footprint,
    map_parameter_delta,
    render_text,
    write_csv,
)
from chaosnet.network import Architecture, Classifier, NetworkModel
from chaosnet.reservoir import FillMethod, Reservoir, ReservoirConfig

from conftest import STABLE_PARAMS


def model_with_reservoir_size(p):
    config = ReservoirConfig(
        method=FillMethod.from_id(6), params=STABLE_PARAMS, reservoir_size=p
    )
    arch = Architecture(p)
    return NetworkModel(arch, Reservoir(config), Classifier(arch.network_config(), rng=0))


def test_streaming_footprint_counts_only_map_parameters():
    report = footprint(model_with_reservoir_size(25), mode="streaming")
    assert report.reservoir_parameter_count == 6
    assert report.classifier_weight_count == 260
    assert report.total_value_count == 266
    assert report.streaming_mode


def test_materialized_footprint_counts_the_whole_matrix():
    report = footprint(model_with_reservoir_size(25), mode="materialized")
    assert report.reservoir_parameter_count == 25 * 785
    assert report.total_value_count == 25 * 785 + 260


@pytest.mark.parametrize("p", [25, 100, 200])
def test_streaming_reservoir_count_is_size_independent(p):
    report = footprint(model_with_reservoir_size(p), mode="streaming")
    assert report.reservoir_parameter_count == 6


def test_hidden_layer_expands_classifier_count():
    config = ReservoirConfig(
        method=FillMethod.from_id(6), params=STABLE_PARAMS, reservoir_size=100
    )
    arch = Architecture(100, 60)
    model = NetworkModel(
        arch, Reservoir(config), Classifier(arch.network_config(), rng=0)
    )
    report = footprint(model)
    assert report.classifier_weight_count == 60 * 101 + 10 * 61


def test_parameter_delta_against_logistic_map():
    assert HENON_PARAMETER_COUNT == 6
    assert LOGISTIC_PARAMETER_COUNT == 3
    assert map_parameter_delta() == 3


def test_estimated_bytes_scales_with_value_width():
    report = FootprintReport(6, 260, streaming_mode=True, bytes_per_value=8)
    assert report.estimated_bytes == 266 * 8
    halved = footprint(model_with_reservoir_size(25), bytes_per_value=4)
    assert halved.estimated_bytes == 266 * 4


def test_footprint_validates_arguments():
    model = model_with_reservoir_size(5)
    with pytest.raises(ValueError):
        footprint(model, mode="compressed")
    with pytest.raises(ValueError):
        footprint(model, bytes_per_value=0)


def test_render_text_mentions_both_counts():
    text = render_text(footprint(model_with_reservoir_size(25)))
    assert "6" in text
    assert "260" in text
    assert "streaming" in text.lower()


def test_write_csv_layout(tmp_path):
    path = tmp_path / "footprint.csv"
    write_csv(footprint(model_with_reservoir_size(25)), path, comment="deploy plan")
    lines = path.read_text().splitlines()
    assert lines[0] == "# deploy plan"
    header = lines[1].split(",")
    assert "reservoir_parameter_count" in header
    assert "classifier_weight_count" in header
    row = lines[2].split(",")
    assert row[header.index("reservoir_parameter_count")] == "6"
    assert row[header.index("classifier_weight_count")] == "260"
