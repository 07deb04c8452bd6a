import numpy as np
import pytest

import python.event_model as event_model
from python.event_model import CostModel, EventRecord


def _series(*values: float) -> np.ndarray:
    return np.array(values, dtype=np.float64).reshape(-1, 1, 1)


def test_events_follow_the_reference_brightness():
    events = event_model.simulate_events(_series(0.0, 0.6, 0.1), theta=0.5)
    assert events == [EventRecord(0, 0, 1, 1), EventRecord(0, 0, 2, -1)]


def test_changes_inside_the_threshold_emit_nothing():
    assert event_model.simulate_events(_series(0.0, 0.3, 0.4), theta=0.5) == []


def test_slow_drift_fires_once_the_reference_is_left_behind():
    events = event_model.simulate_events(_series(0.0, 0.3, 0.6, 0.9), theta=0.5)
    assert events == [EventRecord(0, 0, 2, 1)]


def test_single_frame_has_no_events():
    assert event_model.simulate_events(np.zeros((1, 3, 3)), theta=0.1) == []


def test_events_are_pixel_major_and_time_ordered():
    frames = np.zeros((3, 2, 2))
    frames[1] = 1.0
    frames[2, 1, 0] = 1.0
    events = event_model.simulate_events(frames, theta=0.5)
    keys = [(e.y, e.x, e.t) for e in events]
    assert keys == sorted(keys)
    assert len(events) == 7


def test_log_intensity_thresholds_relative_changes():
    frames = _series(0.1, 0.2, 0.4, 0.8)
    events = event_model.simulate_events(frames, theta=0.6, log_intensity=True)
    assert [e.t for e in events] == [1, 2, 3]
    assert event_model.simulate_events(frames, theta=0.6) == [EventRecord(0, 0, 3, 1)]


def test_event_count_does_not_grow_with_the_threshold():
    generator = np.random.default_rng(0)
    frames = generator.uniform(0.0, 1.0, size=(30, 5, 5))
    counts = [
        len(event_model.simulate_events(frames, theta))
        for theta in [0.05, 0.1, 0.2, 0.4, 0.8]
    ]
    assert counts == sorted(counts, reverse=True)


def test_coarse_sampling_misses_events():
    frames = _series(0.0, 0.6, 0.0)
    assert len(event_model.simulate_events(frames, 0.5)) == 2
    assert len(event_model.simulate_events(frames[::2], 0.5)) == 0
    assert event_model.missed_event_count(frames, theta=0.5, stride=2) == 2


def test_sampled_events_keep_the_input_frame_index():
    frames = _series(0.0, 0.0, 0.0, 0.0, 0.8)
    assert event_model.sampled_events(frames, 0.5, stride=2) == [
        EventRecord(x=0, y=0, t=4, polarity=1)
    ]
    assert event_model.sampled_events(frames, 0.5, stride=1) == (
        event_model.simulate_events(frames, 0.5)
    )
    with pytest.raises(ValueError):
        event_model.sampled_events(frames, 0.5, stride=0)


def test_missed_events_trivial_cases():
    constant = np.full((9, 2, 2), 0.4)
    for stride in [1, 2, 3]:
        assert event_model.missed_event_count(constant, 0.1, stride) == 0
    frames = _series(0.0, 0.6, 0.0)
    assert event_model.missed_event_count(frames, 0.5, stride=1) == 0


def test_invalid_event_arguments():
    with pytest.raises(ValueError):
        event_model.simulate_events(_series(0.0, 1.0), theta=0.0)
    with pytest.raises(ValueError):
        event_model.simulate_events(np.zeros((0, 2, 2)), theta=0.5)
    with pytest.raises(ValueError):
        event_model.simulate_events(_series(0.0, np.nan), theta=0.5)
    with pytest.raises(ValueError):
        event_model.missed_event_count(_series(0.0, 1.0), theta=0.5, stride=0)


def test_events_to_frame_has_the_event_columns():
    events = event_model.simulate_events(_series(0.0, 0.6, 0.1), theta=0.5)
    table = event_model.events_to_frame(events)
    assert table.columns.tolist() == ["x", "y", "t", "polarity"]
    assert table["polarity"].tolist() == [1, -1]
    assert event_model.events_to_frame([]).empty


@pytest.mark.parametrize(
    "widths, expected",
    [((3, 4, 2), 20), ((1, 1), 1), ((60, 256, 256, 3), 81664)],
)
def test_inference_cost_sums_successive_layer_products(widths, expected):
    assert event_model.mlp_inference_cost(CostModel(widths)) == expected


def test_supervision_costs():
    model = CostModel((3, 4, 2))
    assert event_model.supervision_cost(model, 5, "event") == 100
    assert event_model.supervision_cost(model, 1, "event") == 20
    for n in [1, 5, 50]:
        assert event_model.supervision_cost(model, n, "spike") == 28


def test_event_supervision_costs_nearly_n_times_more():
    model = CostModel.parse("60,256,256,3")
    assert 4.5 <= event_model.cost_ratio(model, 5) <= 5.0


def test_cost_ratio_approaches_n_for_wide_networks():
    ratios = [
        event_model.cost_ratio(CostModel((width, width, width, 3)), 5)
        for width in [8, 64, 512]
    ]
    assert ratios == sorted(ratios)
    assert ratios[-1] == pytest.approx(5.0, rel=1e-2)


def test_cost_model_rejects_invalid_widths():
    with pytest.raises(ValueError):
        CostModel((3,))
    with pytest.raises(ValueError):
        CostModel((3, 0, 2))
    with pytest.raises(ValueError):
        CostModel.parse("3,four,2")
    with pytest.raises(ValueError):
        event_model.supervision_cost(CostModel((3, 4, 2)), 0, "event")
    with pytest.raises(ValueError):
        event_model.supervision_cost(CostModel((3, 4, 2)), 5, "frames")
