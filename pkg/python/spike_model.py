# Container for the spike camera simulation. Every pixel integrates light intensity
# into an accumulator and fires a binary spike once the accumulator reaches the
# threshold omega, keeping the surplus. See the wiki page Spike-Simulation.md

import logging
from dataclasses import dataclass

import numpy as np

import python.tests as tests

logger = logging.getLogger(__name__)

DEFAULT_OMEGA = 2.0
DEFAULT_SAMPLE_RATE_HZ = 40000.0


@dataclass
class AccumulatorState:
    """Per-pixel accumulator residuals, each in [0, omega)"""

    residuals: np.ndarray
    omega: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"Threshold 'omega' must be positive, not {self.omega}")
        self.residuals = np.asarray(self.residuals, dtype=np.float64)
        tests.validate_data(
            "Accumulator residuals",
            self.residuals,
            shape={"shape": (-1, -1)},
            finite={},
            bounds={"low": 0.0, "high": self.omega, "high_inclusive": False},
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.residuals.shape

    @classmethod
    def zeros(cls, shape: tuple[int, int], omega: float) -> "AccumulatorState":
        return cls(residuals=np.zeros(shape, dtype=np.float64), omega=omega)


@dataclass
class LuminanceFrame:
    """One frame of light intensity I driving the accumulators"""

    values: np.ndarray
    timestamp_index: int = 0


@dataclass
class SpikePlane:
    """The binary spikes fired by all pixels at one sample index"""

    bits: np.ndarray
    timestamp_index: int


@dataclass
class SpikeStream:
    """An ordered sequence of spike planes plus the metadata needed to read it

    Planes are stored as one (T, H, W) uint8 volume, so timestamps are implicitly
    the contiguous indices 0..T-1.

    Attributes:
        bits: Spike volume of shape (frame_count, height, width), values in {0, 1}
        omega: The accumulator threshold the stream was recorded with
        sample_rate_hz: Spike planes per second
    """

    bits: np.ndarray
    omega: float = DEFAULT_OMEGA
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        tests.validate_data(
            "Spike stream", self.bits, shape={"shape": (-1, -1, -1)}, binary={}
        )
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"Threshold 'omega' must be positive, not {self.omega}")
        if not np.isfinite(self.sample_rate_hz) or self.sample_rate_hz <= 0:
            raise ValueError(
                f"Sample rate must be positive, not {self.sample_rate_hz}"
            )

    def __len__(self) -> int:
        return self.bits.shape[0]

    @property
    def height(self) -> int:
        return self.bits.shape[1]

    @property
    def width(self) -> int:
        return self.bits.shape[2]

    @property
    def duration_s(self) -> float:
        """Wall-clock length of the stream"""
        return len(self) / self.sample_rate_hz

    def plane(self, t: int) -> SpikePlane:
        if not 0 <= t < len(self):
            raise ValueError(f"Timestamp {t} is outside of the stream [0, {len(self)})")
        return SpikePlane(bits=self.bits[t], timestamp_index=t)

    def planes(self) -> list[SpikePlane]:
        return [self.plane(t) for t in range(len(self))]

    def spike_counts(self) -> np.ndarray:
        """Total number of spikes fired by each pixel"""
        return self.bits.sum(axis=0, dtype=np.int64)

    @classmethod
    def from_planes(
        cls,
        planes: list[SpikePlane],
        height: int,
        width: int,
        omega: float = DEFAULT_OMEGA,
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    ) -> "SpikeStream":
        """Assemble a stream from planes whose timestamps must run 0, 1, 2, ..."""
        for expected, plane in enumerate(planes):
            if plane.timestamp_index != expected:
                raise ValueError(
                    f"Spike plane timestamps must be contiguous from 0; found "
                    f"{plane.timestamp_index} at position {expected}"
                )
            tests.validate_data(
                f"Spike plane {expected}", plane.bits, shape={"shape": (height, width)}
            )
        bits = (
            np.stack([plane.bits for plane in planes])
            if planes
            else np.zeros((0, height, width), dtype=np.uint8)
        )
        return cls(bits=bits, omega=omega, sample_rate_hz=sample_rate_hz)


def random_state(shape: tuple[int, int], omega: float, seed: int) -> AccumulatorState:
    """Uniform random accumulator residuals in [0, omega), used to de-phase pixels"""
    generator = np.random.default_rng(seed)
    residuals = generator.uniform(0.0, omega, size=shape)

    # uniform() may return omega itself after floating point scaling
    residuals[residuals >= omega] = 0.0
    return AccumulatorState(residuals=residuals, omega=omega)


def accumulate_step(
    state: AccumulatorState, frame: LuminanceFrame | np.ndarray
) -> tuple[AccumulatorState, SpikePlane]:
    """Advance every pixel accumulator by one frame of light intensity

    Per pixel, the intensity is added to the residual; a spike fires when the sum
    reaches omega and the surplus is kept:
        spike = 1 if A + I >= omega else 0
        A' = A + I - spike * omega
    so that A + I == spike * omega + A' holds for every pixel. Intensities above
    omega are rejected, since a single spike per sample could not carry the flux.

    Args:
        state: The accumulator before this frame
        frame: Light intensity of shape (H, W), each value in [0, omega]

    Returns:
        The accumulator after this frame and the spike plane it fired

    Raises:
        ValueError: If the frame shape differs from the state, or any intensity is
            non-finite or outside [0, omega]
    """
    if not isinstance(frame, LuminanceFrame):
        frame = LuminanceFrame(values=frame)
    values = np.asarray(frame.values, dtype=np.float64)
    tests.validate_data(
        f"Luminance frame {frame.timestamp_index}",
        values,
        shape={"shape": state.shape},
        finite={},
        bounds={"low": 0.0, "high": state.omega},
    )

    total = state.residuals + values
    fired = total >= state.omega

    # total lies in [omega, 2 * omega) where fired, so this subtraction is exact
    residuals = np.where(fired, total - state.omega, total)

    # A + I can round up to exactly 2 * omega when A is a hair below omega
    residuals[residuals >= state.omega] = np.nextafter(state.omega, 0.0)

    return (
        AccumulatorState(residuals=residuals, omega=state.omega),
        SpikePlane(bits=fired.astype(np.uint8), timestamp_index=frame.timestamp_index),
    )


def run_accumulator(
    frames: np.ndarray | list[np.ndarray], state: AccumulatorState
) -> tuple[AccumulatorState, np.ndarray]:
    """Feed a whole luminance sequence through the accumulators

    Args:
        frames: Luminance sequence of shape (T, H, W) or a list of (H, W) frames
        state: The accumulator before the first frame

    Returns:
        The accumulator after the last frame and the (T, H, W) uint8 spike volume
    """
    frames = _as_sequence(frames)
    bits = np.zeros(frames.shape, dtype=np.uint8)
    for t in range(frames.shape[0]):
        state, plane = accumulate_step(state, LuminanceFrame(frames[t], t))
        bits[t] = plane.bits
    return state, bits


def simulate_stream(
    frames: np.ndarray | list[np.ndarray],
    omega: float = DEFAULT_OMEGA,
    init: AccumulatorState | None = None,
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
) -> SpikeStream:
    """Simulate the spike stream a spike camera records for a luminance sequence

    Args:
        frames: Luminance sequence of shape (T, H, W) or a list of (H, W) frames, every
            value in [0, omega]
        omega: The accumulator threshold
        init (optional): The starting accumulator. Defaults to all zeros; use
            random_state() for seeded de-phasing
        sample_rate_hz (optional): Spike planes per second, stored as metadata

    Returns:
        The simulated SpikeStream, one plane per input frame

    Raises:
        ValueError: If the sequence is empty, shapes are inconsistent, omega is not
            positive, or any intensity is invalid (see accumulate_step)
    """
    if not np.isfinite(omega) or omega <= 0:
        raise ValueError(f"Threshold 'omega' must be positive, not {omega}")
    frames = _as_sequence(frames)
    if frames.shape[0] == 0:
        raise ValueError("Cannot simulate a spike stream from an empty sequence")

    if init is None:
        init = AccumulatorState.zeros(frames.shape[1:], omega)
    elif init.omega != omega:
        raise ValueError(
            f"Initial accumulator threshold {init.omega} does not match omega {omega}"
        )

    _, bits = run_accumulator(frames, init)
    logger.debug(
        f"Simulated {bits.shape[0]} spike planes of {bits.shape[2]}x{bits.shape[1]} "
        f"pixels with {int(bits.sum())} spikes in total"
    )
    return SpikeStream(bits=bits, omega=omega, sample_rate_hz=sample_rate_hz)


def _as_sequence(frames: np.ndarray | list[np.ndarray]) -> np.ndarray:
    """Stack a luminance sequence into one (T, H, W) float array"""
    if isinstance(frames, list):
        if not frames:
            return np.zeros((0, 0, 0), dtype=np.float64)
        try:
            frames = np.stack([np.asarray(frame, dtype=np.float64) for frame in frames])
        except ValueError:
            raise ValueError("All luminance frames must share the same dimensions")
    frames = np.asarray(frames, dtype=np.float64)
    tests.validate_data("Luminance sequence", frames, shape={"shape": (-1, -1, -1)})
    return frames
