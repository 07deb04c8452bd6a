# Container for the full-reference image quality metrics, PSNR and SSIM. See the wiki
# page Metrics.md

import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.signal

import python.tests as tests

logger = logging.getLogger(__name__)

SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class MetricReport:
    """PSNR in dB (inf for identical images) and mean SSIM"""

    psnr_db: float
    ssim: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.ssim <= 1.0 + 1e-12:
            raise ValueError(f"SSIM must lie in [-1, 1], not {self.ssim}")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio 10 * log10(max_value^2 / MSE)

    Args:
        a: An image, gray (H, W) or RGB (H, W, 3)
        b: An image of the same shape
        max_value (optional): The peak signal value. Defaults to 1.0

    Returns:
        The PSNR in dB, or inf when the images are identical

    Raises:
        ValueError: If the shapes differ or max_value is not positive
    """
    a, b = _check_pair(a, b)
    if not np.isfinite(max_value) or max_value <= 0:
        raise ValueError(f"Peak value 'max_value' must be positive, not {max_value}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(max_value**2 / mse))


def gaussian_window(size: int = 11, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 2D Gaussian weighting window of shape (size, size)"""
    offsets = np.arange(size) - (size - 1) / 2
    profile = np.exp(-(offsets**2) / (2 * sigma**2))
    window = np.outer(profile, profile)
    return window / window.sum()


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    window: int = 11,
    k1: float = 0.01,
    k2: float = 0.03,
    max_value: float = 1.0,
) -> float:
    """Mean structural similarity with a Gaussian window (sigma 1.5)

    Local statistics are computed only where the window fits inside the image. RGB
    images score the mean of their per-channel SSIM.

    Args:
        a: An image, gray (H, W) or RGB (H, W, 3)
        b: An image of the same shape
        window (optional): Side of the square Gaussian window. Defaults to 11
        k1 (optional): Luminance stabiliser constant
        k2 (optional): Contrast stabiliser constant
        max_value (optional): The dynamic range of the pixel values

    Returns:
        The mean SSIM, at most 1

    Raises:
        ValueError: If the shapes differ or the image is smaller than the window
    """
    a, b = _check_pair(a, b)
    if window < 1:
        raise ValueError(f"SSIM window must be at least 1, not {window}")
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(
            f"Image of size {a.shape[:2]} is smaller than the {window}x{window} "
            f"SSIM window"
        )
    if a.ndim == 3:
        return float(
            np.mean(
                [
                    ssim(a[..., c], b[..., c], window, k1, k2, max_value)
                    for c in range(a.shape[2])
                ]
            )
        )

    kernel = gaussian_window(window)

    def local_mean(x: np.ndarray) -> np.ndarray:
        return scipy.signal.convolve2d(x, kernel, mode="valid")

    c1 = (k1 * max_value) ** 2
    c2 = (k2 * max_value) ** 2
    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a**2
    var_b = local_mean(b * b) - mu_b**2
    cov = local_mean(a * b) - mu_a * mu_b

    numerator = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    denominator = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(numerator / denominator))


def evaluate(
    estimate: np.ndarray,
    reference: np.ndarray,
    max_value: float = 1.0,
    window: int = 11,
    k1: float = 0.01,
    k2: float = 0.03,
) -> MetricReport:
    """PSNR and SSIM of an estimate against its reference"""
    report = MetricReport(
        psnr_db=psnr(estimate, reference, max_value),
        ssim=min(ssim(estimate, reference, window, k1, k2, max_value), 1.0),
    )
    logger.debug(f"PSNR {report.psnr_db:.4f} dB, SSIM {report.ssim:.6f}")
    return report


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] not in (1, 3)):
        raise ValueError(f"Images must be (H, W) or (H, W, 3), not {a.shape}")
    if a.shape != b.shape:
        raise ValueError(f"Image shapes {a.shape} and {b.shape} differ")
    tests.validate_data("First image", a, finite={})
    tests.validate_data("Second image", b, finite={})
    return a, b
