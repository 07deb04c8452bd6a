# Container for the on-disk formats: the bit-packed .spks spike container, binary
# PGM/PPM pixmaps and the CSV/JSON text reports. See the wiki page
# Spike-Container-Format.md

import io
import logging
import pathlib
import struct
import zlib
from typing import BinaryIO, Literal

import cv2
import numpy as np
import pandas as pd

import python.tests as tests
from python.event_model import EventRecord, events_to_frame
from python.spike_model import SpikeStream

logger = logging.getLogger(__name__)

SPIKE_MAGIC = b"SPKS"
SPIKE_VERSION = 1

# magic, version, width, height, frame_count, omega, sample_rate_hz
_HEADER_STRUCT = struct.Struct("<4sHIIQdd")
_CHECKSUM_STRUCT = struct.Struct("<I")
HEADER_SIZE = _HEADER_STRUCT.size + _CHECKSUM_STRUCT.size

# Chunk size of payload reads. A header frame count never sizes a buffer directly
_READ_CHUNK = 1 << 20

ReportFormat = Literal["csv", "json"]


class SpikeContainerError(ValueError):
    """A .spks container is malformed or truncated"""


class PixmapError(ValueError):
    """A PGM/PPM file is malformed or unsupported"""


###################
# SPIKE CONTAINER #
###################


def plane_size(width: int, height: int) -> int:
    """Bytes of one packed spike plane, ceil(width * height / 8)"""
    return -(-width * height // 8)


def write_stream(stream: SpikeStream, sink: BinaryIO) -> int:
    """Serialise a spike stream to a binary sink

    The header (magic, version, width, height, frame_count, omega, sample rate, all
    little-endian, then a CRC-32 of those fields) is followed by one packed plane per
    sample. Pixels are row-major, eight to a byte, most significant bit first; the
    pad bits of a plane's last byte are zero.

    Args:
        stream: The spike stream to write
        sink: A writable binary file object

    Returns:
        The number of bytes written

    Raises:
        ValueError: If the stream has no pixels
        OSError: If writing to the sink fails
    """
    if stream.width * stream.height == 0:
        raise ValueError("Cannot write a spike stream with zero pixels")
    fields = _HEADER_STRUCT.pack(
        SPIKE_MAGIC,
        SPIKE_VERSION,
        stream.width,
        stream.height,
        len(stream),
        stream.omega,
        stream.sample_rate_hz,
    )
    header = fields + _CHECKSUM_STRUCT.pack(zlib.crc32(fields))

    flat = stream.bits.reshape(len(stream), stream.width * stream.height)
    payload = np.packbits(flat, axis=1, bitorder="big").tobytes()

    sink.write(header)
    sink.write(payload)
    logger.debug(
        f"Wrote {len(stream)} spike planes of {stream.width}x{stream.height} "
        f"({len(header) + len(payload)} bytes)"
    )
    return len(header) + len(payload)


def read_stream(source: BinaryIO, strict: bool = True) -> SpikeStream:
    """Deserialise a spike stream written by write_stream()

    Args:
        source: A readable binary file object positioned at the header
        strict (optional): Also reject checksum mismatches, nonzero pad bits and
            trailing bytes. On by default

    Returns:
        The decoded SpikeStream

    Raises:
        SpikeContainerError: On a bad magic, version, checksum, dimensions, pad bits,
            or a truncated payload
    """
    header = source.read(HEADER_SIZE)
    if len(header) < HEADER_SIZE:
        raise SpikeContainerError(
            f"Container header is truncated: {len(header)} of {HEADER_SIZE} bytes"
        )
    fields = header[: _HEADER_STRUCT.size]
    magic, version, width, height, frame_count, omega, sample_rate_hz = (
        _HEADER_STRUCT.unpack(fields)
    )
    if magic != SPIKE_MAGIC:
        raise SpikeContainerError(f"Invalid container magic {magic!r}")
    if version != SPIKE_VERSION:
        raise SpikeContainerError(f"Unsupported container version {version}")
    (checksum,) = _CHECKSUM_STRUCT.unpack(header[_HEADER_STRUCT.size :])
    if strict and checksum != zlib.crc32(fields):
        raise SpikeContainerError("Container header checksum mismatch")
    if width * height == 0:
        raise SpikeContainerError(f"Container declares {width}x{height} pixels")
    if not (np.isfinite(omega) and omega > 0):
        raise SpikeContainerError(f"Container declares invalid omega {omega}")
    if not (np.isfinite(sample_rate_hz) and sample_rate_hz > 0):
        raise SpikeContainerError(
            f"Container declares invalid sample rate {sample_rate_hz}"
        )

    row_bytes = plane_size(width, height)
    expected = frame_count * row_bytes
    payload = _read_at_most(source, expected)
    if len(payload) < expected:
        raise SpikeContainerError(
            f"Container payload is truncated: {len(payload)} of {expected} bytes"
        )
    if strict and source.read(1):
        raise SpikeContainerError("Container has trailing bytes after the last plane")

    packed = np.frombuffer(payload, dtype=np.uint8).reshape(frame_count, row_bytes)
    unpacked = np.unpackbits(packed, axis=1, bitorder="big")
    if strict and unpacked[:, width * height :].any():
        raise SpikeContainerError("Container plane has nonzero pad bits")
    bits = unpacked[:, : width * height].reshape(frame_count, height, width)

    logger.debug(f"Read {frame_count} spike planes of {width}x{height}")
    return SpikeStream(bits=bits, omega=omega, sample_rate_hz=sample_rate_hz)


def _read_at_most(source: BinaryIO, size: int) -> bytes:
    """Read up to size bytes in chunks, stopping early at the end of the source"""
    payload = bytearray()
    while len(payload) < size:
        chunk = source.read(min(_READ_CHUNK, size - len(payload)))
        if not chunk:
            break
        payload += chunk
    return bytes(payload)


def save_stream(stream: SpikeStream, path: str | pathlib.Path) -> int:
    with open(path, "wb") as file:
        return write_stream(stream, file)


def load_stream(path: str | pathlib.Path, strict: bool = True) -> SpikeStream:
    with open(path, "rb") as file:
        return read_stream(file, strict=strict)


def stream_to_bytes(stream: SpikeStream) -> bytes:
    buffer = io.BytesIO()
    write_stream(stream, buffer)
    return buffer.getvalue()


def stream_from_bytes(data: bytes, strict: bool = True) -> SpikeStream:
    return read_stream(io.BytesIO(data), strict=strict)


###########
# PIXMAPS #
###########

_GRAY_SUFFIXES = (".pgm", ".pnm")
_RGB_SUFFIXES = (".ppm", ".pnm")


def write_pixmap(
    path: str | pathlib.Path, image: np.ndarray, bit_depth: Literal[8, 16] = 8
) -> None:
    """Write a [0, 1] image as binary PGM (H, W) or PPM (H, W, 3)

    Values are scaled by the maxval (255 or 65535) and rounded. The file suffix must
    match the image: .pgm for gray, .ppm for RGB, .pnm for either.

    Raises:
        ValueError: If the image shape, range, bit depth or file suffix is unsupported
        OSError: If OpenCV could not write the file
    """
    image = np.asarray(image, dtype=np.float64)
    path = pathlib.Path(path)
    if bit_depth not in (8, 16):
        raise ValueError(f"Pixmap bit depth must be 8 or 16, not {bit_depth}")
    if image.ndim == 2:
        suffixes = _GRAY_SUFFIXES
    elif image.ndim == 3 and image.shape[2] == 3:
        suffixes = _RGB_SUFFIXES
    else:
        raise ValueError(f"Pixmaps hold (H, W) or (H, W, 3) images, not {image.shape}")
    if path.suffix.lower() not in suffixes:
        raise ValueError(
            f"{path} must end in one of {list(suffixes)} for a {image.shape} image"
        )
    tests.validate_data(
        "Pixmap image", image, finite={}, bounds={"low": 0.0, "high": 1.0}
    )

    dtype = np.uint8 if bit_depth == 8 else np.uint16
    samples = np.round(image * np.iinfo(dtype).max).astype(dtype)
    if samples.ndim == 3:
        samples = cv2.cvtColor(samples, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), samples, [cv2.IMWRITE_PXM_BINARY, 1]):
        raise OSError(f"Could not write pixmap {path}")
    logger.debug(f"Wrote {bit_depth}-bit {image.shape} pixmap to {path}")


def read_pixmap(path: str | pathlib.Path) -> np.ndarray:
    """Read a binary PGM or PPM as a float image in [0, 1]

    Samples are scaled by the full range of their bit depth (255 or 65535).

    Returns:
        (H, W) for PGM, (H, W, 3) for PPM

    Raises:
        FileNotFoundError: If the file does not exist
        PixmapError: If OpenCV cannot decode the file as an 8 or 16-bit pixmap
    """
    path = pathlib.Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such pixmap: {path}")

    samples = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if samples is None:
        raise PixmapError(f"{path} is not a readable pixmap")
    if samples.dtype not in (np.uint8, np.uint16):
        raise PixmapError(f"Unsupported {samples.dtype} samples in {path}")
    if samples.ndim == 3:
        if samples.shape[2] != 3:
            raise PixmapError(f"Unsupported {samples.shape[2]}-channel image {path}")
        samples = cv2.cvtColor(samples, cv2.COLOR_BGR2RGB)

    logger.debug(f"Read {samples.dtype} {samples.shape} pixmap from {path}")
    return samples.astype(np.float64) / np.iinfo(samples.dtype).max


###########
# REPORTS #
###########


def events_csv(events: list[EventRecord], path: str | pathlib.Path) -> None:
    events_to_frame(events).to_csv(path, index=False)


def loss_trace_frame(trace: list[float]) -> pd.DataFrame:
    return pd.DataFrame({"iteration": np.arange(len(trace)), "loss": trace})


def format_table(table: pd.DataFrame, fmt: ReportFormat = "csv") -> str:
    """Render a report table as CSV or JSON text

    Infinite values (PSNR of identical images) are written as the string 'inf' in
    both formats.
    """
    table = table.map(lambda v: str(v) if isinstance(v, float) and np.isinf(v) else v)
    if fmt == "csv":
        return table.to_csv(index=False, lineterminator="\n")
    elif fmt == "json":
        return table.to_json(orient="records", indent=2) + "\n"
    else:
        raise ValueError(f"Report format must be one of ['csv', 'json'], not '{fmt}'")


def write_table(table: pd.DataFrame, path: str | pathlib.Path) -> None:
    """Write a report table, choosing CSV or JSON by the file suffix"""
    fmt = "json" if pathlib.Path(path).suffix.lower() == ".json" else "csv"
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(format_table(table, fmt))
    logger.info(f"Wrote {table.shape[0]} rows to {path}")
