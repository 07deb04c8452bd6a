# Container for blur-free texture reconstruction from spike streams. Texture from
# Interval (TFI) reads intensity from the most recent inter-spike interval, Texture from
# Playback (TFP) from the spike count in a trailing window. Both feed the TfS loss. See
# the wiki page Texture-Reconstruction.md

import collections
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

import python.tests as tests
from python.spike_model import DEFAULT_OMEGA, SpikePlane, SpikeStream

logger = logging.getLogger(__name__)

DEFAULT_TFP_WINDOW = 6

TextureSource = Literal["tfi", "tfp", "spikes"]


@dataclass
class TextureImage:
    """A grayscale texture reconstructed from spikes, on the same scale as I"""

    values: np.ndarray
    source: TextureSource
    timestamp_index: int

    def __post_init__(self) -> None:
        tests.validate_data(
            f"{self.source.upper()} texture at t={self.timestamp_index}",
            self.values,
            shape={"shape": (-1, -1)},
            finite={},
            bounds={"low": 0.0, "high": np.inf},
        )


@dataclass
class TfsTargets:
    """The spike textures supervising one sub-exposure instant

    The spikes texture is the raw spike plane of the instant scaled to intensity. Only
    the raw-spike target mode needs it.
    """

    tfi: TextureImage
    tfp: TextureImage
    timestamp_index: int
    spikes: TextureImage | None = None

    def __post_init__(self) -> None:
        textures = [self.tfi, self.tfp]
        if self.spikes is not None:
            textures.append(self.spikes)
        for texture in textures:
            if texture.values.shape != self.tfi.values.shape:
                raise ValueError(
                    f"{texture.source.upper()} shape {texture.values.shape} differs "
                    f"from TFI shape {self.tfi.values.shape}"
                )
            if texture.timestamp_index != self.timestamp_index:
                raise ValueError("Spike targets must share one timestamp")


def tfi(stream: SpikeStream, t: int) -> TextureImage:
    """Texture from Interval at sample index t

    Per pixel P = omega / d, where d is the interval between the two most recent
    spikes at or before t. Pixels with fewer than two spikes so far reconstruct to 0.

    Args:
        stream: The spike stream
        t: The sample index to reconstruct, 0 <= t < len(stream)

    Returns:
        The TFI TextureImage at t

    Raises:
        ValueError: If t is outside of the stream
    """
    _check_timestamp(stream, t)

    # Scan the prefix backwards: the first spike found is the latest one
    history = stream.bits[t::-1].astype(bool)
    has_last = history.any(axis=0)
    last = t - np.argmax(history, axis=0)

    # Hide the latest spike and scan again for the one before it
    rows, cols = np.indices(has_last.shape)
    history[t - last, rows, cols] &= ~has_last
    has_previous = history.any(axis=0)
    previous = t - np.argmax(history, axis=0)

    valid = has_last & has_previous
    interval = np.where(valid, last - previous, 1)
    values = np.where(valid, stream.omega / interval, 0.0)

    return TextureImage(values=values, source="tfi", timestamp_index=t)


def tfp(
    stream: SpikeStream,
    t: int,
    window: int = DEFAULT_TFP_WINDOW,
    c: float | None = None,
) -> TextureImage:
    """Texture from Playback at sample index t

    Per pixel P = (N_w / window) * c, where N_w counts the spikes in the trailing
    window [t - window + 1, t].

    Args:
        stream: The spike stream
        t: The sample index to reconstruct, window - 1 <= t < len(stream)
        window (optional): The number of planes summed. Defaults to 6
        c (optional): The brightness scale. Defaults to the stream's omega, which
            reconstructs constant inputs to their true intensity

    Returns:
        The TFP TextureImage at t

    Raises:
        ValueError: If window < 1 or t is outside of [window - 1, len(stream))
    """
    c = _check_window(stream, t, window, c)
    count = stream.bits[t - window + 1 : t + 1].sum(axis=0, dtype=np.int64)
    return TextureImage(values=count / window * c, source="tfp", timestamp_index=t)


def spike_texture(stream: SpikeStream, t: int, c: float | None = None) -> TextureImage:
    """The raw spike plane at sample index t scaled by c, a playback over one plane"""
    values = tfp(stream, t, window=1, c=c).values
    return TextureImage(values=values, source="spikes", timestamp_index=t)


def tfs_targets(
    stream: SpikeStream,
    t: int,
    window: int = DEFAULT_TFP_WINDOW,
    c: float | None = None,
) -> TfsTargets:
    """Bundle the TFI, TFP and raw spike textures at sample index t"""
    return TfsTargets(
        tfi=tfi(stream, t),
        tfp=tfp(stream, t, window, c),
        timestamp_index=t,
        spikes=spike_texture(stream, t, c),
    )


def tfi_sequence(stream: SpikeStream) -> np.ndarray:
    """TFI textures for every sample index of the stream, shape (T, H, W)"""
    if len(stream) == 0:
        raise ValueError("Cannot reconstruct an empty spike stream")
    shape = (stream.height, stream.width)
    last = np.full(shape, -1, dtype=np.int64)
    previous = np.full(shape, -1, dtype=np.int64)
    textures = np.zeros(stream.bits.shape, dtype=np.float64)
    for t in range(len(stream)):
        fired = stream.bits[t].astype(bool)
        previous[fired] = last[fired]
        last[fired] = t
        valid = previous >= 0
        textures[t][valid] = stream.omega / (last[valid] - previous[valid])
    return textures


def tfp_sequence(
    stream: SpikeStream, window: int = DEFAULT_TFP_WINDOW, c: float | None = None
) -> np.ndarray:
    """TFP textures for every valid index t = window-1 .. T-1, shape (T-window+1, H, W)

    Window counts come from one prefix sum over time, so the cost does not grow with
    the window size.
    """
    c = _check_window(stream, len(stream) - 1, window, c)
    prefix = np.zeros((len(stream) + 1, stream.height, stream.width), dtype=np.int64)
    np.cumsum(stream.bits, axis=0, dtype=np.int64, out=prefix[1:])
    return (prefix[window:] - prefix[:-window]) / window * c


class PlaybackWindow:
    """Streaming TFP reconstruction over planes arriving one at a time

    Keeps the last 'window' planes in a ring buffer together with their running sum,
    so each new plane costs O(H * W) regardless of the window size. A single owner
    pushes planes in timestamp order.

    Attributes:
        window (int): The number of planes summed
        c (float): The brightness scale
    """

    def __init__(
        self, window: int = DEFAULT_TFP_WINDOW, c: float = DEFAULT_OMEGA
    ) -> None:
        if window < 1:
            raise ValueError(f"TFP window must be at least 1, not {window}")
        self.window = window
        self.c = c
        self._planes = collections.deque(maxlen=window)
        self._count = None
        self._next_timestamp = 0

    def push(self, plane: SpikePlane) -> TextureImage | None:
        """Add the next plane; returns the TFP texture once the window is full"""
        if plane.timestamp_index != self._next_timestamp:
            raise ValueError(
                f"Expected the plane for t={self._next_timestamp}, "
                f"got t={plane.timestamp_index}"
            )
        bits = np.asarray(plane.bits, dtype=np.int64)
        if self._count is None:
            self._count = np.zeros(bits.shape, dtype=np.int64)
        if len(self._planes) == self.window:
            self._count -= self._planes[0]
        self._planes.append(bits)
        self._count += bits
        self._next_timestamp += 1

        if len(self._planes) < self.window:
            return None
        return TextureImage(
            values=self._count / self.window * self.c,
            source="tfp",
            timestamp_index=plane.timestamp_index,
        )


def _check_timestamp(stream: SpikeStream, t: int) -> None:
    if not 0 <= t < len(stream):
        raise ValueError(f"Timestamp {t} is outside of the stream [0, {len(stream)})")


def _check_window(stream: SpikeStream, t: int, window: int, c: float | None) -> float:
    """Validate TFP arguments and resolve the default brightness scale"""
    if window < 1:
        raise ValueError(f"TFP window must be at least 1, not {window}")
    if t < window - 1:
        raise ValueError(
            f"Timestamp {t} is too early for a TFP window of {window} planes"
        )
    _check_timestamp(stream, t)
    if c is None:
        return stream.omega
    if not np.isfinite(c) or c < 0:
        raise ValueError(f"TFP scale 'c' must be finite and non-negative, not {c}")
    return float(c)
