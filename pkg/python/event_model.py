# Container for the comparison event camera and the training cost model. An event pixel
# fires only when its brightness moved by at least theta since its last event, so
# slow or sub-threshold changes between sampled timestamps can be missed entirely.
# Event supervision also pays one network inference per sampled timestamp, while
# spike supervision pays one inference plus the converter layer. See the wiki page
# Event-Comparison.md

import logging
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
import pandas as pd

import python.tests as tests

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ["x", "y", "t", "polarity"]


class EventRecord(NamedTuple):
    x: int
    y: int
    t: int
    polarity: int


@dataclass(frozen=True)
class CostModel:
    """Neuron counts n_0..n_L of a fully connected network, input layer first"""

    layer_widths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.layer_widths) < 2:
            raise ValueError(
                f"A cost model needs at least 2 layers, got {len(self.layer_widths)}"
            )
        for width in self.layer_widths:
            if int(width) != width or width < 1:
                raise ValueError(f"Layer widths must be integers >= 1, not {width}")
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)

    @classmethod
    def parse(cls, text: str) -> "CostModel":
        """Build from a comma separated list such as '60,256,256,3'"""
        try:
            widths = tuple(int(part) for part in text.split(","))
        except ValueError:
            raise ValueError(f"Layer widths must be comma separated integers: '{text}'")
        return cls(widths)


def simulate_events(
    frames: np.ndarray,
    theta: float,
    log_intensity: bool = False,
    log_eps: float = 1e-3,
) -> list[EventRecord]:
    """Simulate the events an idealised event camera emits for a luminance sequence

    Every pixel keeps a reference brightness, initialised from the first frame. At each
    later frame an event with polarity sign(b - b_ref) is emitted wherever
    |b - b_ref| >= theta, and the reference resets to b. At most one event is emitted
    per pixel and timestamp.

    Args:
        frames: Luminance sequence of shape (T, H, W)
        theta: Contrast threshold, > 0
        log_intensity (optional): Threshold log(I + log_eps) instead of I. Off by
            default
        log_eps (optional): Offset keeping the logarithm finite at zero intensity

    Returns:
        Events in pixel-major order (row y, then column x), time-ordered per pixel

    Raises:
        ValueError: If theta <= 0 or the sequence is empty or invalid
    """
    brightness = _brightness(frames, theta, log_intensity, log_eps)

    reference = brightness[0].copy()
    ts, ys, xs, polarities = [], [], [], []
    for t in range(1, brightness.shape[0]):
        change = brightness[t] - reference
        fired = np.abs(change) >= theta
        y, x = np.nonzero(fired)
        ts.append(np.full(y.shape, t))
        ys.append(y)
        xs.append(x)
        polarities.append(np.sign(change[fired]).astype(int))
        reference[fired] = brightness[t][fired]

    if not ts:
        return []
    t, y, x, polarity = (np.concatenate(part) for part in (ts, ys, xs, polarities))
    order = np.lexsort((t, x, y))
    events = [
        EventRecord(int(x[i]), int(y[i]), int(t[i]), int(polarity[i])) for i in order
    ]
    logger.debug(f"Simulated {len(events)} events over {brightness.shape[0]} frames")
    return events


def sampled_events(
    frames: np.ndarray,
    theta: float,
    stride: int,
    log_intensity: bool = False,
    log_eps: float = 1e-3,
) -> list[EventRecord]:
    """Events seen when only every stride-th frame of a sequence is observed

    Timestamps index the full input sequence, so an event fired by the frame at
    position k of the subsampled sequence carries t = k * stride.

    Raises:
        ValueError: If stride < 1, or as simulate_events()
    """
    if int(stride) != stride or stride < 1:
        raise ValueError(f"Stride must be an integer >= 1, not {stride}")
    stride = int(stride)
    subsampled = np.asarray(frames)[::stride]
    events = simulate_events(subsampled, theta, log_intensity, log_eps)
    return [event._replace(t=event.t * stride) for event in events]


def missed_event_count(
    frames: np.ndarray,
    theta: float,
    stride: int,
    log_intensity: bool = False,
    log_eps: float = 1e-3,
) -> int:
    """Events seen at full temporal sampling minus events seen at every stride-th frame

    Reported as a signed difference: coarse sampling can also shift the reference
    brightness and fire events the fine sampling does not.

    Raises:
        ValueError: If stride < 1
    """
    coarse = sampled_events(frames, theta, stride, log_intensity, log_eps)
    if stride == 1:
        return 0
    fine = simulate_events(frames, theta, log_intensity, log_eps)
    return len(fine) - len(coarse)


def events_to_frame(events: list[EventRecord]) -> pd.DataFrame:
    """Event list as a table with the columns x, y, t, polarity"""
    data = pd.DataFrame(events, columns=EVENT_COLUMNS).astype("int64")
    tests.validate_data(
        "Events", data, negative={"negative_ok": ["polarity"]}, null={}
    )
    return data


def mlp_inference_cost(model: CostModel) -> int:
    """Multiplications of one forward pass: n_0*n_1 + n_1*n_2 + ... + n_(L-1)*n_L"""
    widths = model.layer_widths
    return sum(a * b for a, b in zip(widths[:-1], widths[1:]))


def supervision_cost(
    model: CostModel, sampled_timestamps: int, mode: Literal["event", "spike"]
) -> int:
    """Per-ray inference cost of event or spike supervision

    Event supervision renders every one of the N sampled timestamps independently,
    costing N * C. Spike supervision renders once and adds the converter layer,
    costing C + n_(L-1) * n_L.

    Raises:
        ValueError: If N < 1 or the mode is unknown
    """
    if int(sampled_timestamps) != sampled_timestamps or sampled_timestamps < 1:
        raise ValueError(
            f"Sampled timestamps must be an integer >= 1, not {sampled_timestamps}"
        )
    inference = mlp_inference_cost(model)
    if mode == "event":
        return int(sampled_timestamps) * inference
    elif mode == "spike":
        return inference + model.layer_widths[-2] * model.layer_widths[-1]
    else:
        raise ValueError(f"Cost mode must be one of ['event', 'spike'], not '{mode}'")


def cost_ratio(model: CostModel, sampled_timestamps: int) -> float:
    """How many times more event supervision costs than spike supervision"""
    return supervision_cost(model, sampled_timestamps, "event") / supervision_cost(
        model, sampled_timestamps, "spike"
    )


def _brightness(
    frames: np.ndarray, theta: float, log_intensity: bool, log_eps: float
) -> np.ndarray:
    if not np.isfinite(theta) or theta <= 0:
        raise ValueError(f"Event threshold 'theta' must be positive, not {theta}")
    frames = np.asarray(frames, dtype=np.float64)
    tests.validate_data(
        "Luminance sequence", frames, shape={"shape": (-1, -1, -1)}, finite={}
    )
    if frames.shape[0] == 0:
        raise ValueError("Cannot simulate events from an empty sequence")
    if log_intensity:
        if np.any(frames + log_eps <= 0):
            raise ValueError("Log intensity needs frames above -log_eps")
        return np.log(frames + log_eps)
    return frames
