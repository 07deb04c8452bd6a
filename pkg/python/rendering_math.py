# Container for the rendering kernels: volume compositing along a ray and the 3D
# Gaussian evaluation and covariance projection used by splatting. See the wiki page
# Rendering-Kernels.md

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

import python.tests as tests

logger = logging.getLogger(__name__)

_SYMMETRY_TOLERANCE = 1e-12


@dataclass
class RaySamples:
    """Colors c_i, densities sigma_i and spacings delta_i of the samples along a ray"""

    colors: np.ndarray
    densities: np.ndarray
    deltas: np.ndarray

    def __post_init__(self) -> None:
        self.colors = np.asarray(self.colors, dtype=np.float64)
        self.densities = np.asarray(self.densities, dtype=np.float64)
        self.deltas = np.asarray(self.deltas, dtype=np.float64)
        count = self.densities.shape[0] if self.densities.ndim == 1 else -1
        if count < 1:
            raise ValueError("A ray needs at least one sample")
        tests.validate_data(
            "Ray colors", self.colors, shape={"shape": (count, 3)}, finite={}
        )
        tests.validate_data(
            "Ray densities",
            self.densities,
            shape={"shape": (count,)},
            finite={},
            bounds={"low": 0.0, "high": np.inf},
        )
        tests.validate_data(
            "Ray deltas", self.deltas, shape={"shape": (count,)}, finite={}
        )
        if np.any(self.deltas <= 0):
            raise ValueError("Ray sample spacings 'deltas' must all be positive")


@dataclass
class Gaussian3D:
    """A 3D Gaussian with mean mu and symmetric positive-definite covariance"""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        tests.validate_data(
            "Gaussian mean", self.mean, shape={"shape": (3,)}, finite={}
        )
        tests.validate_data(
            "Gaussian covariance", self.covariance, shape={"shape": (3, 3)}, finite={}
        )
        if np.max(np.abs(self.covariance - self.covariance.T)) > _SYMMETRY_TOLERANCE:
            raise ValueError("Gaussian covariance is not symmetric")
        self._factor = _cholesky(self.covariance)

    def density(self, point: np.ndarray) -> float:
        """G evaluated at a world-space point rather than an offset"""
        return gaussian_eval(np.asarray(point, dtype=np.float64) - self.mean, self)


def transmittance(samples: RaySamples) -> tuple[np.ndarray, float]:
    """T_i = exp(-sum_{j<i} sigma_j delta_j) per sample, plus the residual T_(N+1)"""
    depth = np.cumsum(samples.densities * samples.deltas)
    optical_depth = np.concatenate([[0.0], depth])
    remaining = np.exp(-optical_depth)
    return remaining[:-1], float(remaining[-1])


def composite_ray(samples: RaySamples) -> np.ndarray:
    """Volume rendered color C = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i

    Args:
        samples: The ray samples, front to back

    Returns:
        The composited RGB triple
    """
    along, _ = transmittance(samples)
    alpha = -np.expm1(-samples.densities * samples.deltas)
    return (along * alpha) @ samples.colors


def gaussian_eval(x: np.ndarray, g: Gaussian3D) -> float:
    """G(x) = exp(-1/2 x^T Sigma^-1 x) for an offset x from the Gaussian's mean

    The quadratic form is solved through the Cholesky factor of Sigma, so the result
    lies in (0, 1] and equals 1 at the mean.
    """
    x = np.asarray(x, dtype=np.float64)
    tests.validate_data("Gaussian offset", x, shape={"shape": (3,)}, finite={})
    quadratic = float(x @ scipy.linalg.cho_solve(g._factor, x))
    return float(np.exp(-0.5 * quadratic))


def project_covariance(
    sigma: np.ndarray, view: np.ndarray, jacobian: np.ndarray
) -> np.ndarray:
    """Camera-space covariance Sigma' = J W Sigma W^T J^T

    Args:
        sigma: World-space 3x3 covariance
        view: Viewing transformation; a 4x4 matrix contributes its upper-left 3x3
        jacobian: 2x3 (image plane) or 3x3 Jacobian of the projection's affine
            approximation

    Returns:
        The projected covariance, symmetrised so it is exactly symmetric

    Raises:
        ValueError: If the matrix dimensions are not conformable
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    view = np.asarray(view, dtype=np.float64)
    jacobian = np.asarray(jacobian, dtype=np.float64)
    tests.validate_data("Covariance", sigma, shape={"shape": (3, 3)}, finite={})
    if view.shape == (4, 4):
        view = view[:3, :3]
    tests.validate_data("View matrix", view, shape={"shape": (3, 3)}, finite={})
    if jacobian.ndim != 2 or jacobian.shape[1] != 3 or jacobian.shape[0] not in (2, 3):
        raise ValueError(
            f"Projection Jacobian must be 2x3 or 3x3, not {jacobian.shape}"
        )
    tests.validate_data("Projection Jacobian", jacobian, finite={})

    transform = jacobian @ view
    projected = transform @ sigma @ transform.T
    return 0.5 * (projected + projected.T)


def perspective_jacobian(point: np.ndarray, fx: float, fy: float) -> np.ndarray:
    """2x3 Jacobian of the pinhole projection (fx x/z, fy y/z) at a camera-space point

    This is the local affine approximation splatting uses to carry a 3D covariance
    onto the image plane.
    """
    x, y, z = np.asarray(point, dtype=np.float64)
    if z <= 0:
        raise ValueError(f"Point must lie in front of the camera, got depth {z}")
    return np.array(
        [
            [fx / z, 0.0, -fx * x / z**2],
            [0.0, fy / z, -fy * y / z**2],
        ]
    )


def _cholesky(covariance: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cho_factor(covariance, lower=True)
    except np.linalg.LinAlgError:
        raise ValueError("Gaussian covariance is singular or not positive-definite")
