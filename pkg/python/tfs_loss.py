# Container for the loss kernels. The color rendering loss compares coarse and fine
# renderings against the observed colors, the Texture from Spike (TfS) loss adds a
# weighted squared error between the learned grayscale rendering and the TFI/TFP
# spike textures. See the wiki page TfS-Loss.md

import logging
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

import python.color as color
import python.tests as tests
from python.reconstruction import DEFAULT_TFP_WINDOW, TfsTargets

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TfsConfig:
    """Knobs of the TfS loss

    Attributes:
        weight_w: Weight of the spike term
        tfp_window: TFP window used to build targets
        omega: Spike threshold, also the TFP brightness scale
        recon_per_view_n: Number of spike reconstructions supervising each view
        combine_mode: How the TFI and TFP squared errors of one target combine
        target_mode: Which spike textures supervise: TFI and TFP together, one of
            them, or the raw spike plane of each instant
    """

    weight_w: float = 0.0001
    tfp_window: int = DEFAULT_TFP_WINDOW
    omega: float = 2.0
    recon_per_view_n: int = 1
    combine_mode: Literal["sum", "mean"] = "mean"
    target_mode: Literal["both", "tfi", "tfp", "spikes"] = "both"

    def __post_init__(self) -> None:
        if not np.isfinite(self.weight_w) or self.weight_w < 0:
            raise ValueError(f"TfS weight must be finite and >= 0, not {self.weight_w}")
        if self.tfp_window < 1:
            raise ValueError(f"TFP window must be at least 1, not {self.tfp_window}")
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"Threshold 'omega' must be positive, not {self.omega}")
        if self.recon_per_view_n < 1:
            raise ValueError(
                f"Reconstructions per view must be at least 1, not "
                f"{self.recon_per_view_n}"
            )
        if self.combine_mode not in ("sum", "mean"):
            raise ValueError(f"Unknown combine mode '{self.combine_mode}'")
        if self.target_mode not in ("both", "tfi", "tfp", "spikes"):
            raise ValueError(f"Unknown target mode '{self.target_mode}'")

    @classmethod
    def from_settings(cls, tfs: dict, omega: float, tfp_window: int) -> "TfsConfig":
        """Build from the parsed [tfs] configuration section"""
        return cls(
            weight_w=tfs["weight_w"],
            tfp_window=tfp_window,
            omega=omega,
            recon_per_view_n=tfs["recon_per_view_n"],
            combine_mode=tfs["combine_mode"],
            target_mode=tfs["target_mode"],
        )

    def term_weights(self) -> dict[str, float]:
        """Weight of each supervising texture inside the spike term of one target"""
        sources = ["tfi", "tfp"] if self.target_mode == "both" else [self.target_mode]
        weight = 1.0 / len(sources) if self.combine_mode == "mean" else 1.0
        return {source: weight for source in sources}


class TfsLoss(NamedTuple):
    total: float
    color_part: float
    spike_part: float


@dataclass
class TfsGradient:
    """Gradients of the total TfS loss

    When no explicit sub-frames are supervised, the spike gradient is folded into
    'pred_fine' and 'sub_frames' stays empty.
    """

    pred_coarse: np.ndarray
    pred_fine: np.ndarray
    converter: np.ndarray
    sub_frames: list[np.ndarray] = field(default_factory=list)


def color_loss(pred_coarse: np.ndarray, pred_fine: np.ndarray, gt: np.ndarray) -> float:
    """Color rendering loss sum(|C_c - C|^2 + |C_f - C|^2) over all pixels

    A single-model renderer passes the same frame as 'pred_coarse' and 'pred_fine';
    both terms are still counted, nothing is halved.

    Raises:
        ValueError: If the three frames do not share one (H, W, 3) shape
    """
    pred_coarse, pred_fine, gt = _check_color_inputs(pred_coarse, pred_fine, gt)
    return float(np.sum((pred_coarse - gt) ** 2) + np.sum((pred_fine - gt) ** 2))


def tfs_loss(
    pred_coarse: np.ndarray,
    pred_fine: np.ndarray,
    gt: np.ndarray,
    converter: color.ConverterWeights,
    targets: list[TfsTargets],
    cfg: TfsConfig,
    sub_frames: list[np.ndarray] | None = None,
) -> TfsLoss:
    """Total TfS loss: color_part + weight_w * spike_part

    The spike part sums, over the n targets, the squared error between the learned
    grayscale rendering and the target's textures chosen by cfg.target_mode, combined
    per cfg.combine_mode. The k-th target supervises the k-th sub-frame; without
    explicit sub-frames every target supervises 'pred_fine'.

    Args:
        pred_coarse: Coarse rendering, (H, W, 3)
        pred_fine: Fine rendering, (H, W, 3)
        gt: Observed colors, (H, W, 3)
        converter: The learnable RGB to grayscale converter
        targets: Spike textures, one TfsTargets per supervised instant
        cfg: Loss configuration
        sub_frames (optional): Renderings paired with the targets by index

    Returns:
        TfsLoss(total, color_part, spike_part)

    Raises:
        ValueError: If targets are empty or any dimensions disagree
    """
    color_part = color_loss(pred_coarse, pred_fine, gt)
    grays = _supervised_grays(pred_fine, converter, targets, sub_frames)

    spike_part = 0.0
    for gray, target in zip(grays, targets):
        for source, weight in cfg.term_weights().items():
            residual = gray - _target_values(target, source)
            spike_part += weight * float(np.sum(residual**2))

    return TfsLoss(
        total=color_part + cfg.weight_w * spike_part,
        color_part=color_part,
        spike_part=spike_part,
    )


def tfs_loss_gradient(
    pred_coarse: np.ndarray,
    pred_fine: np.ndarray,
    gt: np.ndarray,
    converter: color.ConverterWeights,
    targets: list[TfsTargets],
    cfg: TfsConfig,
    sub_frames: list[np.ndarray] | None = None,
) -> TfsGradient:
    """Analytic gradient of tfs_loss() with respect to renderings and converter

    Takes exactly the arguments of tfs_loss(). The objective is quadratic in the
    renderings for a fixed converter and quadratic in the converter for fixed
    renderings, so the gradient is exact.
    """
    pred_coarse, pred_fine, gt = _check_color_inputs(pred_coarse, pred_fine, gt)
    grays = _supervised_grays(pred_fine, converter, targets, sub_frames)
    weights = converter.as_array()

    frames = sub_frames if sub_frames is not None else [pred_fine] * len(targets)
    gray_gradients = []
    converter_gradient = np.zeros(3, dtype=np.float64)
    for gray, target, frame in zip(grays, targets, frames):
        # d(spike term)/d(gray), scaled by the TfS weight
        d_gray = np.zeros_like(gray)
        for source, weight in cfg.term_weights().items():
            d_gray += 2.0 * weight * (gray - _target_values(target, source))
        d_gray *= cfg.weight_w
        gray_gradients.append(d_gray[..., None] * weights)
        converter_gradient += np.einsum("hw,hwc->c", d_gray, np.asarray(frame))

    gradient = TfsGradient(
        pred_coarse=2.0 * (pred_coarse - gt),
        pred_fine=2.0 * (pred_fine - gt),
        converter=converter_gradient,
    )
    if sub_frames is None:
        for d_frame in gray_gradients:
            gradient.pred_fine += d_frame
    else:
        gradient.sub_frames = gray_gradients
    return gradient


def converter_hessian(frames: list[np.ndarray], cfg: TfsConfig) -> np.ndarray:
    """Hessian of the weighted spike term with respect to the converter weights

    Equals weight_w * 2 * sum(term weights) * sum(rgb rgb^T) over the supervised
    frames. Its largest eigenvalue bounds the converter block's Lipschitz constant.
    """
    moment = np.zeros((3, 3), dtype=np.float64)
    for frame in frames:
        pixels = np.asarray(frame, dtype=np.float64).reshape(-1, 3)
        moment += pixels.T @ pixels
    return cfg.weight_w * 2.0 * sum(cfg.term_weights().values()) * moment


def _check_color_inputs(
    pred_coarse: np.ndarray, pred_fine: np.ndarray, gt: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gt = color.validate_rgb("Ground truth colors", gt, in_range=False)
    shape = {"shape": gt.shape}
    pred_coarse = np.asarray(pred_coarse, dtype=np.float64)
    pred_fine = np.asarray(pred_fine, dtype=np.float64)
    tests.validate_data("Coarse rendering", pred_coarse, shape=shape, finite={})
    tests.validate_data("Fine rendering", pred_fine, shape=shape, finite={})
    return pred_coarse, pred_fine, gt


def _target_values(target: TfsTargets, source: str) -> np.ndarray:
    texture = getattr(target, source)
    if texture is None:
        raise ValueError(
            f"Target at t={target.timestamp_index} has no {source} texture to supervise"
        )
    return texture.values


def _supervised_grays(
    pred_fine: np.ndarray,
    converter: color.ConverterWeights,
    targets: list[TfsTargets],
    sub_frames: list[np.ndarray] | None,
) -> list[np.ndarray]:
    """Learned grayscale renderings paired with each target"""
    if len(targets) == 0:
        raise ValueError("The TfS loss needs at least one spike target")
    if sub_frames is None:
        gray = color.rgb_to_gray_learned(pred_fine, converter)
        grays = [gray] * len(targets)
    else:
        if len(sub_frames) != len(targets):
            raise ValueError(
                f"Got {len(sub_frames)} sub-frames for {len(targets)} spike targets"
            )
        grays = [color.rgb_to_gray_learned(frame, converter) for frame in sub_frames]

    for k, (gray, target) in enumerate(zip(grays, targets)):
        if gray.shape != target.tfi.values.shape:
            raise ValueError(
                f"Spike target {k} has shape {target.tfi.values.shape} but the "
                f"rendering it supervises has shape {gray.shape}"
            )
    return grays
