# Container for the desk-scale deblurring demonstrator. A sharp scene is shaken along a
# known camera trajectory; the averaged sub-exposures form the blurry observation while
# a simulated spike camera records every sub-exposure. The latent sharp image is then
# recovered by gradient descent on the color loss, optionally regularised by the TfS
# loss against TFI/TFP textures of the spike stream. See the wiki page
# Desk-Scale-Deblurring.md

import dataclasses
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

import python.color as color
import python.metrics as metrics
import python.reconstruction as reconstruction
import python.spike_model as spike_model
import python.tests as tests
import python.utils as utils
from python.tfs_loss import (
    TfsConfig,
    converter_hessian,
    tfs_loss,
    tfs_loss_gradient,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES_PER_SHIFT = 24
DEFAULT_STEP = 0.2


class DeblurDivergenceError(RuntimeError):
    """The deblurring objective became non-finite

    Attributes:
        loss_trace: The objective recorded before divergence was detected
    """

    def __init__(self, message: str, loss_trace: list[float]) -> None:
        super().__init__(message)
        self.loss_trace = loss_trace


@dataclass(frozen=True)
class ShakeTrajectory:
    """Integer (dx, dy) camera offsets, one per sub-exposure, bounded by 'margin'"""

    shifts: tuple[tuple[int, int], ...]
    margin: int

    def __post_init__(self) -> None:
        shifts = tuple((int(dx), int(dy)) for dx, dy in self.shifts)
        object.__setattr__(self, "shifts", shifts)
        if len(shifts) < 2:
            raise ValueError(f"A trajectory needs at least 2 shifts, got {len(shifts)}")
        if self.margin < 0:
            raise ValueError(f"Trajectory margin must be >= 0, not {self.margin}")
        for dx, dy in shifts:
            if max(abs(dx), abs(dy)) > self.margin:
                raise ValueError(
                    f"Shift ({dx}, {dy}) exceeds the trajectory margin {self.margin}"
                )

    def __len__(self) -> int:
        return len(self.shifts)

    @classmethod
    def zero(
        cls, length: int = utils.BURST_LENGTH, margin: int = 0
    ) -> "ShakeTrajectory":
        """A camera at rest: every shift is (0, 0)"""
        return cls(shifts=((0, 0),) * length, margin=margin)

    @classmethod
    def random_walk(
        cls, length: int = utils.BURST_LENGTH, margin: int = 3, seed: int = 0
    ) -> "ShakeTrajectory":
        """Camera shake as a seeded random walk of unit steps, clipped to the margin"""
        generator = np.random.default_rng(seed)
        steps = generator.integers(-1, 2, size=(length - 1, 2))
        position = np.zeros(2, dtype=int)
        shifts = [(0, 0)]
        for step in steps:
            position = np.clip(position + step, -margin, margin)
            shifts.append((int(position[0]), int(position[1])))
        return cls(shifts=tuple(shifts), margin=margin)


@dataclass
class DeblurProblem:
    """A blurry observation with the spike stream of its sub-exposures

    The latent image is the full (size, size, 3) scene. Sub-exposure k sees the
    window of side size - 2 * margin offset by shift k, and the blurry observation
    and spike textures live on that window.

    Attributes:
        blurry: The observation, (size - 2 * margin, size - 2 * margin, 3)
        stream: Spikes of all sub-exposures, samples_per_shift planes each
        trajectory: The known camera trajectory
        cfg: TfS loss configuration of the solver
        samples_per_shift: Spike planes recorded during each sub-exposure
    """

    blurry: np.ndarray
    stream: spike_model.SpikeStream
    trajectory: ShakeTrajectory
    cfg: TfsConfig
    samples_per_shift: int = DEFAULT_SAMPLES_PER_SHIFT

    def __post_init__(self) -> None:
        self.blurry = color.validate_rgb("Blurry observation", self.blurry)
        if len(self.stream) != len(self.trajectory) * self.samples_per_shift:
            raise ValueError(
                f"Spike stream has {len(self.stream)} planes, expected "
                f"{len(self.trajectory)} shifts x {self.samples_per_shift} samples"
            )
        if (self.stream.height, self.stream.width) != self.blurry.shape[:2]:
            raise ValueError(
                f"Spike stream of {self.stream.height}x{self.stream.width} does not "
                f"match the blurry observation {self.blurry.shape[:2]}"
            )
        if self.samples_per_shift < self.cfg.tfp_window:
            raise ValueError(
                f"{self.samples_per_shift} samples per shift cannot fill a TFP window "
                f"of {self.cfg.tfp_window}"
            )

    @property
    def size(self) -> int:
        return self.blurry.shape[0] + 2 * self.trajectory.margin

    def target_indices(self) -> np.ndarray:
        """Sub-exposures supervised by spike textures"""
        return utils.evenly_spaced_indices(
            len(self.trajectory), self.cfg.recon_per_view_n
        )

    def spike_targets(self) -> list[reconstruction.TfsTargets]:
        """TFI/TFP targets at the last spike sample of each supervised sub-exposure"""
        return [
            reconstruction.tfs_targets(
                self.stream,
                (k + 1) * self.samples_per_shift - 1,
                self.cfg.tfp_window,
                self.cfg.omega,
            )
            for k in self.target_indices()
        ]

    def visible(self, image: np.ndarray) -> np.ndarray:
        """The part of a latent image seen by the camera at rest"""
        m = self.trajectory.margin
        return image[m : image.shape[0] - m, m : image.shape[1] - m]


class DeblurResult(NamedTuple):
    estimate: np.ndarray
    converter: color.ConverterWeights
    loss_trace: list[float]


@dataclass(frozen=True)
class ArmComparison:
    """Quality of the color-only and TfS-regularised solutions of one scene"""

    color_only: metrics.MetricReport
    tfs: metrics.MetricReport
    converter_start_distance: float
    converter_end_distance: float

    @property
    def psnr_margin_db(self) -> float:
        return self.tfs.psnr_db - self.color_only.psnr_db


def shift_crop(image: np.ndarray, shift: tuple[int, int], margin: int) -> np.ndarray:
    """The sub-exposure window of a latent image for one camera offset"""
    dx, dy = shift
    height, width = image.shape[:2]
    return image[margin + dy : height - margin + dy, margin + dx : width - margin + dx]


def forward_blur(image: np.ndarray, trajectory: ShakeTrajectory) -> np.ndarray:
    """Average of the shifted sub-exposure windows of a latent image"""
    crops = [shift_crop(image, s, trajectory.margin) for s in trajectory.shifts]
    return np.mean(np.stack(crops), axis=0)


def _place(
    window: np.ndarray, shift: tuple[int, int], margin: int, size: int
) -> np.ndarray:
    """Adjoint of shift_crop(): the window placed into a zero latent image"""
    latent = np.zeros((size, size) + window.shape[2:], dtype=np.float64)
    shift_crop(latent, shift, margin)[...] = window
    return latent


def synthetic_scene(size: int = 64, seed: int = 0) -> np.ndarray:
    """Seeded RGB test scene: colored rectangles and disks over a color gradient

    Returns:
        A (size, size, 3) image in [0, 1]
    """
    if size < 8:
        raise ValueError(f"Synthetic scenes need a size of at least 8, not {size}")
    generator = np.random.default_rng(seed)
    rows, cols = np.indices((size, size)) / (size - 1)

    angle = generator.uniform(0, 2 * np.pi)
    projection = np.cos(angle) * (cols - 0.5) + np.sin(angle) * (rows - 0.5)
    ramp = np.clip(0.5 + 0.7 * projection, 0.0, 1.0)
    start, end = generator.uniform(0.1, 0.9, size=(2, 3))
    scene = start + ramp[..., None] * (end - start)

    for _ in range(generator.integers(4, 8)):
        top, left = generator.uniform(0.0, 0.8, size=2)
        height, width = generator.uniform(0.1, 0.4, size=2)
        inside_rows = (rows >= top) & (rows < top + height)
        mask = inside_rows & (cols >= left) & (cols < left + width)
        scene[mask] = generator.uniform(0.0, 1.0, size=3)

    for _ in range(generator.integers(2, 5)):
        center = generator.uniform(0.15, 0.85, size=2)
        radius = generator.uniform(0.05, 0.2)
        mask = (rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= radius**2
        scene[mask] = generator.uniform(0.0, 1.0, size=3)

    return np.clip(scene, 0.0, 1.0)


def forge_problem(
    sharp: np.ndarray,
    trajectory: ShakeTrajectory,
    omega: float = spike_model.DEFAULT_OMEGA,
    seed: int = 0,
    samples_per_shift: int = DEFAULT_SAMPLES_PER_SHIFT,
    cfg: TfsConfig | None = None,
    sample_rate_hz: float = spike_model.DEFAULT_SAMPLE_RATE_HZ,
) -> tuple[DeblurProblem, np.ndarray]:
    """Build a deblurring problem from a sharp scene and a camera trajectory

    The shifted windows of the scene are averaged into the blurry observation. Their
    standard-weighted grayscale versions, each held for 'samples_per_shift' samples,
    drive a spike camera whose accumulators start from a seeded random state.

    Args:
        sharp: The sharp (size, size, 3) scene in [0, 1]
        trajectory: Camera offsets, one per sub-exposure
        omega (optional): Spike threshold
        seed (optional): Seed of the accumulator de-phasing
        samples_per_shift (optional): Spike planes per sub-exposure. Defaults to 24
        cfg (optional): Solver TfS configuration. Defaults to weight 0.0001, TFP
            window 6 and one target per sub-exposure
        sample_rate_hz (optional): Stored as stream metadata

    Returns:
        The problem and the sharp scene, kept as the held-out reference

    Raises:
        ValueError: If the scene is not square or too small for the margin
    """
    sharp = color.validate_rgb("Sharp scene", sharp)
    if sharp.shape[0] != sharp.shape[1]:
        raise ValueError(f"Sharp scene must be square, not {sharp.shape[:2]}")
    if 2 * trajectory.margin >= sharp.shape[0]:
        raise ValueError(
            f"Scene of size {sharp.shape[0]} is too small for margin "
            f"{trajectory.margin}"
        )
    if cfg is None:
        cfg = TfsConfig(
            omega=omega,
            recon_per_view_n=len(trajectory),
            tfp_window=min(reconstruction.DEFAULT_TFP_WINDOW, samples_per_shift),
        )

    crops = [shift_crop(sharp, s, trajectory.margin) for s in trajectory.shifts]
    blurry = color.synthesize_blur(crops)

    grays = [color.rgb_to_gray_fixed(crop) for crop in crops]
    frames = np.repeat(np.stack(grays), samples_per_shift, axis=0)
    init = spike_model.random_state(grays[0].shape, omega, seed)
    stream = spike_model.simulate_stream(
        frames, omega=omega, init=init, sample_rate_hz=sample_rate_hz
    )
    logger.info(
        f"Forged a {blurry.shape[0]}x{blurry.shape[1]} problem from {len(trajectory)} "
        f"shifts and {len(stream)} spike planes"
    )

    problem = DeblurProblem(
        blurry=blurry,
        stream=stream,
        trajectory=trajectory,
        cfg=cfg,
        samples_per_shift=samples_per_shift,
    )
    return problem, sharp


def lipschitz_bound(
    cfg: TfsConfig, converter: color.ConverterWeights, n_targets: int
) -> float:
    """Upper bound on the curvature of the objective in the latent pixels

    The color part contributes 2 + 2 (coarse and fine both render the blur, whose
    operator norm is at most 1); each target adds 2 * sum(term weights) * |c|^2.
    """
    weights = converter.as_array()
    spike = 2.0 * sum(cfg.term_weights().values()) * float(weights @ weights)
    return 4.0 + cfg.weight_w * n_targets * spike


def initial_estimate(problem: DeblurProblem) -> np.ndarray:
    """The blurry observation extended to the latent size by edge replication"""
    m = problem.trajectory.margin
    return np.pad(problem.blurry, ((m, m), (m, m), (0, 0)), mode="edge")


def solve(
    problem: DeblurProblem,
    use_tfs: bool = True,
    iterations: int = 500,
    step: float = DEFAULT_STEP,
    init: np.ndarray | None = None,
    converter: color.ConverterWeights | None = None,
) -> DeblurResult:
    """Recover the latent sharp image by block gradient descent

    Each iteration records the objective, takes a pixel step of size 'step' and then a
    converter step of size 1 / lambda_max of the converter Hessian. Without TfS the
    spike weight is zero and the converter keeps its initial value.

    Args:
        problem: The deblurring problem
        use_tfs (optional): Add the spike term to the color loss. On by default
        iterations (optional): Number of iterations, >= 1
        step (optional): Pixel step size; the objective decreases monotonically below
            1 / lipschitz_bound()
        init (optional): Starting latent image. Defaults to initial_estimate()
        converter (optional): Starting converter. Defaults to uniform weights

    Returns:
        DeblurResult(estimate, converter, loss_trace) with one loss per iteration

    Raises:
        ValueError: If iterations < 1 or step <= 0
        DeblurDivergenceError: If the objective becomes non-finite
    """
    if int(iterations) != iterations or iterations < 1:
        raise ValueError(f"Iterations must be an integer >= 1, not {iterations}")
    if not np.isfinite(step) or step <= 0:
        raise ValueError(f"Step size must be positive, not {step}")

    cfg = problem.cfg if use_tfs else dataclasses.replace(problem.cfg, weight_w=0.0)
    trajectory = problem.trajectory
    margin, size = trajectory.margin, problem.size
    targets = problem.spike_targets()
    shifts = [trajectory.shifts[k] for k in problem.target_indices()]

    if init is None:
        estimate = initial_estimate(problem)
    else:
        estimate = np.array(init, dtype=np.float64)
    tests.validate_data(
        "Initial estimate", estimate, shape={"shape": (size, size, 3)}, finite={}
    )
    weights = color.ConverterWeights.uniform() if converter is None else converter

    bound = lipschitz_bound(cfg, weights, len(targets))
    if step >= 1.0 / bound:
        logger.warning(
            f"Step {step} is not below 1/L = {1.0 / bound:.4f}; the objective may not "
            f"decrease monotonically"
        )
    logger.info(
        f"Solving {'with' if use_tfs else 'without'} TfS: {iterations} iterations, "
        f"step {step}, {len(targets)} spike targets"
    )

    def loss_inputs(x: np.ndarray) -> tuple:
        rendered = forward_blur(x, trajectory)
        sub_frames = [shift_crop(x, s, margin) for s in shifts]
        return rendered, rendered, problem.blurry, weights, targets, cfg, sub_frames

    trace = []
    for iteration in range(iterations):
        if not np.all(np.isfinite(estimate)):
            raise DeblurDivergenceError(
                f"Deblurring estimate became non-finite at iteration {iteration}", trace
            )
        inputs = loss_inputs(estimate)
        loss = tfs_loss(*inputs).total
        trace.append(loss)
        if not np.isfinite(loss):
            raise DeblurDivergenceError(
                f"Deblurring objective became {loss} at iteration {iteration}", trace
            )

        gradient = tfs_loss_gradient(*inputs)
        color_gradient = gradient.pred_coarse + gradient.pred_fine
        pixel_gradient = sum(
            _place(color_gradient, s, margin, size) for s in trajectory.shifts
        ) / len(trajectory)
        for s, sub_gradient in zip(shifts, gradient.sub_frames):
            pixel_gradient += _place(sub_gradient, s, margin, size)
        estimate = estimate - step * pixel_gradient

        if cfg.weight_w > 0 and np.all(np.isfinite(estimate)):
            inputs = loss_inputs(estimate)
            curvature = np.linalg.eigvalsh(converter_hessian(inputs[-1], cfg))[-1]
            if curvature > 0:
                converter_step = tfs_loss_gradient(*inputs).converter / curvature
                weights = color.ConverterWeights.from_array(
                    weights.as_array() - converter_step
                )

        if (iteration + 1) % 100 == 0:
            logger.debug(f"Iteration {iteration + 1}: objective {loss:.6e}")

    if not np.all(np.isfinite(estimate)):
        raise DeblurDivergenceError("Deblurring estimate became non-finite", trace)

    logger.info(f"Final objective {trace[-1]:.6e}, converter {weights}")
    return DeblurResult(estimate=estimate, converter=weights, loss_trace=trace)


def refine_converter(
    frames: list[np.ndarray],
    targets: list[reconstruction.TfsTargets],
    cfg: TfsConfig,
    converter: color.ConverterWeights | None = None,
    iterations: int = 200,
) -> color.ConverterWeights:
    """Converter gradient steps against fixed renderings

    Uses the same step 1 / lambda_max as solve(). On noiseless data the result agrees
    with fit_converter() on the stacked (RGB, texture) pairs.
    """
    if cfg.weight_w <= 0:
        raise ValueError("Refining the converter needs a positive TfS weight")
    weights = color.ConverterWeights.uniform() if converter is None else converter
    curvature = np.linalg.eigvalsh(converter_hessian(frames, cfg))[-1]
    if curvature <= 0:
        raise ValueError("Converter renderings carry no color signal")
    for _ in range(iterations):
        gradient = tfs_loss_gradient(
            frames[0], frames[0], frames[0], weights, targets, cfg, frames
        )
        weights = color.ConverterWeights.from_array(
            weights.as_array() - gradient.converter / curvature
        )
    return weights


def evaluate(estimate: np.ndarray, reference: np.ndarray) -> metrics.MetricReport:
    """PSNR and SSIM against the held-out reference, with the configured metric knobs"""
    return metrics.evaluate(
        estimate,
        reference,
        max_value=utils.METRICS["max_value"],
        window=utils.METRICS["ssim_window"],
        k1=utils.METRICS["k1"],
        k2=utils.METRICS["k2"],
    )


def compare_arms(
    sharp: np.ndarray,
    trajectory: ShakeTrajectory,
    seed: int = 0,
    iterations: int = 500,
    step: float = DEFAULT_STEP,
    omega: float = spike_model.DEFAULT_OMEGA,
    samples_per_shift: int = DEFAULT_SAMPLES_PER_SHIFT,
    cfg: TfsConfig | None = None,
) -> ArmComparison:
    """Solve one scene with and without TfS and score both on the visible window"""
    problem, reference = forge_problem(
        sharp, trajectory, omega, seed, samples_per_shift, cfg
    )
    color_only = solve(problem, use_tfs=False, iterations=iterations, step=step)
    with_tfs = solve(problem, use_tfs=True, iterations=iterations, step=step)

    standard = color.ConverterWeights.standard()
    visible_reference = problem.visible(reference)
    comparison = ArmComparison(
        color_only=evaluate(problem.visible(color_only.estimate), visible_reference),
        tfs=evaluate(problem.visible(with_tfs.estimate), visible_reference),
        converter_start_distance=color.ConverterWeights.uniform().distance(standard),
        converter_end_distance=with_tfs.converter.distance(standard),
    )
    logger.info(
        f"Seed {seed}: color-only {comparison.color_only.psnr_db:.3f} dB, TfS "
        f"{comparison.tfs.psnr_db:.3f} dB (margin {comparison.psnr_margin_db:+.4f} dB)"
    )
    return comparison
