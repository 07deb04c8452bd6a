# Container for blur synthesis and RGB to grayscale conversion. The fixed conversion
# uses the standard luminance weighting, the learned conversion uses three trainable
# weights aligning rendered colors with the spike textures. See the wiki page
# TfS-Loss.md

import logging
from dataclasses import dataclass

import numpy as np

import python.tests as tests
import python.utils as utils

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConverterWeights:
    """Weights of the learnable RGB to grayscale converter"""

    w_r: float
    w_g: float
    w_b: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError(f"Converter weights must be finite, not {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_r, self.w_g, self.w_b], dtype=np.float64)

    def distance(self, other: "ConverterWeights") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ConverterWeights":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (3,):
            raise ValueError(
                f"Converter weights need 3 values, got shape {values.shape}"
            )
        return cls(float(values[0]), float(values[1]), float(values[2]))

    @classmethod
    def standard(cls) -> "ConverterWeights":
        return cls(*utils.STANDARD_GRAY_WEIGHTS)

    @classmethod
    def uniform(cls) -> "ConverterWeights":
        return cls(1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class ConverterFit:
    """Result of a least-squares converter fit

    Attributes:
        weights: The fitted converter (minimum-norm when the fit is degenerate)
        residual_norm: L2 norm of the fit residual over all samples
        rank: Rank of the (N, 3) RGB design matrix
        degenerate: True when the rank is below 3 and the split between channels is
            not determined by the data
    """

    weights: ConverterWeights
    residual_norm: float
    rank: int
    degenerate: bool


def validate_rgb(name: str, frame: np.ndarray, in_range: bool = True) -> np.ndarray:
    """Check an RGB frame is a finite (H, W, 3) array, optionally inside [0, 1]"""
    frame = np.asarray(frame, dtype=np.float64)
    checks = {"shape": {"shape": (-1, -1, 3)}, "finite": {}}
    if in_range:
        checks["bounds"] = {"low": 0.0, "high": 1.0}
    tests.validate_data(name, frame, **checks)
    return frame


def synthesize_blur(burst: list[np.ndarray]) -> np.ndarray:
    """Average a burst of sharp RGB frames into one blurry frame

    Args:
        burst: Sharp (H, W, 3) frames in [0, 1], one per sub-exposure

    Returns:
        The pixel-wise arithmetic mean of the burst

    Raises:
        ValueError: If the burst is empty, dimensions differ, or a frame is invalid
    """
    if len(burst) == 0:
        raise ValueError("Cannot synthesize blur from an empty burst")
    frames = [validate_rgb(f"Burst frame {i}", frame) for i, frame in enumerate(burst)]
    for i, frame in enumerate(frames):
        if frame.shape != frames[0].shape:
            raise ValueError(
                f"Burst frame {i} has shape {frame.shape}, expected {frames[0].shape}"
            )
    return np.mean(np.stack(frames), axis=0)


def rgb_to_gray_learned(frame: np.ndarray, weights: ConverterWeights) -> np.ndarray:
    """Grayscale texture w_r * R + w_g * G + w_b * B of an (H, W, 3) frame

    Values outside [0, 1] are accepted, since rendered estimates are not clipped.
    """
    frame = validate_rgb("RGB frame", frame, in_range=False)
    return frame @ weights.as_array()


def rgb_to_gray_fixed(frame: np.ndarray) -> np.ndarray:
    """Grayscale texture with the standard weighting R:0.2989, G:0.5870, B:0.1140"""
    return rgb_to_gray_learned(frame, ConverterWeights.standard())


def fit_converter(
    rgb_samples: np.ndarray | list,
    gray_targets: np.ndarray | list,
    simplex: bool = False,
) -> ConverterFit:
    """Least-squares fit of converter weights to (RGB, gray) sample pairs

    Minimizes sum((w . rgb - gray)^2) in closed form. Rank-deficient designs (for
    example R == G == B everywhere) return the minimum-norm solution and are flagged
    as degenerate.

    Args:
        rgb_samples: (N, 3) RGB values
        gray_targets: N grayscale values
        simplex (optional): Project the fitted weights onto the probability simplex
            (non-negative, summing to one). Off by default

    Returns:
        A ConverterFit with the weights and the fit diagnostics

    Raises:
        ValueError: If the inputs are empty, non-finite or of mismatched length
    """
    design = np.asarray(rgb_samples, dtype=np.float64).reshape(-1, 3)
    targets = np.asarray(gray_targets, dtype=np.float64).ravel()
    if design.shape[0] == 0:
        raise ValueError("Cannot fit a converter without samples")
    if design.shape[0] != targets.shape[0]:
        raise ValueError(
            f"Got {design.shape[0]} RGB samples but {targets.shape[0]} gray targets"
        )
    tests.validate_data("Converter RGB samples", design, finite={})
    tests.validate_data("Converter gray targets", targets, finite={})

    solution, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank < 3:
        logger.warning(
            f"Converter design matrix has rank {rank}; returning the minimum-norm "
            f"solution"
        )
    if simplex:
        solution = utils.project_to_simplex(solution)

    residual_norm = float(np.linalg.norm(design @ solution - targets))
    return ConverterFit(
        weights=ConverterWeights.from_array(solution),
        residual_norm=residual_norm,
        rank=int(rank),
        degenerate=bool(rank < 3),
    )
