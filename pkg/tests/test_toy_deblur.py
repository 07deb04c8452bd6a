import numpy as np
import pytest

import python.color as color
import python.reconstruction as reconstruction
import python.toy_deblur as toy_deblur
from python.color import ConverterWeights
from python.tfs_loss import TfsConfig
from python.toy_deblur import DeblurDivergenceError, ShakeTrajectory


def _small_problem(size: int = 16, seed: int = 0, **kwargs):
    scene = toy_deblur.synthetic_scene(size, seed=seed)
    trajectory = ShakeTrajectory.random_walk(margin=2, seed=seed)
    return toy_deblur.forge_problem(scene, trajectory, seed=seed, **kwargs)


##############
# TRAJECTORY #
##############


def test_default_trajectories_have_eighteen_shifts():
    assert len(ShakeTrajectory.zero()) == 18
    walk = ShakeTrajectory.random_walk(margin=3, seed=4)
    assert len(walk) == 18
    assert walk.shifts[0] == (0, 0)
    assert all(max(abs(dx), abs(dy)) <= 3 for dx, dy in walk.shifts)
    assert walk == ShakeTrajectory.random_walk(margin=3, seed=4)


def test_trajectory_rejects_invalid_shifts():
    with pytest.raises(ValueError):
        ShakeTrajectory(shifts=((0, 0),), margin=1)
    with pytest.raises(ValueError):
        ShakeTrajectory(shifts=((0, 0), (2, 0)), margin=1)
    with pytest.raises(ValueError):
        ShakeTrajectory(shifts=((0, 0), (0, 0)), margin=-1)


#################
# FORWARD MODEL #
#################


def test_zero_trajectory_keeps_the_scene_sharp():
    scene = toy_deblur.synthetic_scene(16, seed=1)
    problem, reference = toy_deblur.forge_problem(scene, ShakeTrajectory.zero())
    np.testing.assert_allclose(problem.blurry, scene, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(reference, scene)


def test_impulse_is_smeared_over_two_pixels():
    impulse = np.zeros((5, 5, 3))
    impulse[2, 2] = 1.0
    trajectory = ShakeTrajectory(shifts=((0, 0), (1, 0)), margin=1)
    problem, _ = toy_deblur.forge_problem(impulse, trajectory, samples_per_shift=6)
    expected = np.zeros((3, 3, 3))
    expected[1, 0] = 0.5
    expected[1, 1] = 0.5
    np.testing.assert_array_equal(problem.blurry, expected)


def test_forward_blur_reproduces_the_observation_exactly():
    problem, sharp = _small_problem(seed=3)
    np.testing.assert_array_equal(
        toy_deblur.forward_blur(sharp, problem.trajectory), problem.blurry
    )


def test_place_is_the_adjoint_of_the_crop():
    generator = np.random.default_rng(5)
    image = generator.normal(size=(10, 10, 3))
    window = generator.normal(size=(6, 6, 3))
    shift = (1, -2)
    left = np.sum(toy_deblur.shift_crop(image, shift, 2) * window)
    right = np.sum(image * toy_deblur._place(window, shift, 2, 10))
    assert left == pytest.approx(right, rel=1e-12)


def test_forged_problem_layout():
    problem, sharp = _small_problem(size=16, samples_per_shift=8)
    assert problem.size == 16
    assert problem.blurry.shape == (12, 12, 3)
    assert len(problem.stream) == 18 * 8
    assert (problem.stream.height, problem.stream.width) == (12, 12)
    assert problem.cfg.recon_per_view_n == 18
    assert problem.cfg.tfp_window == 6
    np.testing.assert_array_equal(problem.target_indices(), np.arange(18))
    assert problem.visible(sharp).shape == (12, 12, 3)


def test_spike_targets_read_the_end_of_each_sub_exposure():
    problem, _ = _small_problem(samples_per_shift=8)
    targets = problem.spike_targets()
    assert [t.timestamp_index for t in targets] == [8 * k + 7 for k in range(18)]
    expected = reconstruction.tfs_targets(problem.stream, 15, window=6)
    np.testing.assert_array_equal(targets[1].tfi.values, expected.tfi.values)
    np.testing.assert_array_equal(targets[1].tfp.values, expected.tfp.values)


def test_spike_targets_follow_the_sub_exposure_brightness():
    # Constant-color scene: every sub-exposure sees the same gray level
    scene = np.full((12, 12, 3), 0.5)
    trajectory = ShakeTrajectory.random_walk(margin=2, seed=0)
    problem, _ = toy_deblur.forge_problem(scene, trajectory, samples_per_shift=24)
    gray = color.rgb_to_gray_fixed(scene)[0, 0]
    for target in problem.spike_targets():
        assert np.abs(target.tfp.values.mean() - gray) < 0.1


def test_fewer_targets_are_spread_over_the_trajectory():
    scene = toy_deblur.synthetic_scene(16)
    trajectory = ShakeTrajectory.random_walk(margin=2)
    problem, _ = toy_deblur.forge_problem(
        scene, trajectory, cfg=TfsConfig(recon_per_view_n=3)
    )
    np.testing.assert_array_equal(problem.target_indices(), [3, 9, 15])


def test_forge_rejects_invalid_scenes():
    trajectory = ShakeTrajectory.random_walk(margin=4)
    with pytest.raises(ValueError):
        toy_deblur.forge_problem(np.zeros((8, 8, 3)), trajectory)
    with pytest.raises(ValueError):
        toy_deblur.forge_problem(np.zeros((16, 12, 3)), trajectory)
    with pytest.raises(ValueError):
        toy_deblur.forge_problem(
            np.zeros((16, 16, 3)),
            trajectory,
            samples_per_shift=4,
            cfg=TfsConfig(tfp_window=6),
        )


def test_synthetic_scenes_are_seeded():
    first = toy_deblur.synthetic_scene(32, seed=7)
    assert first.shape == (32, 32, 3)
    assert first.min() >= 0.0 and first.max() <= 1.0
    np.testing.assert_array_equal(first, toy_deblur.synthetic_scene(32, seed=7))
    assert not np.array_equal(first, toy_deblur.synthetic_scene(32, seed=8))


##########
# SOLVER #
##########


def test_identity_problem_converges_to_the_observation():
    scene = toy_deblur.synthetic_scene(12, seed=2)
    problem, _ = toy_deblur.forge_problem(scene, ShakeTrajectory.zero())
    result = toy_deblur.solve(
        problem, use_tfs=False, iterations=60, init=np.zeros((12, 12, 3))
    )
    np.testing.assert_allclose(result.estimate, problem.blurry, atol=1e-12)


def test_color_only_solve_never_touches_the_converter():
    problem, _ = _small_problem()
    result = toy_deblur.solve(problem, use_tfs=False, iterations=20)
    assert result.converter == ConverterWeights.uniform()


def test_objective_never_increases():
    problem, _ = _small_problem(seed=1)
    for use_tfs in [False, True]:
        trace = toy_deblur.solve(problem, use_tfs=use_tfs, iterations=100).loss_trace
        assert len(trace) == 100
        steps = np.diff(trace)
        assert np.all(steps <= 1e-12 * np.abs(trace[:-1]))


def test_solve_is_deterministic():
    problem, _ = _small_problem(seed=2)
    first = toy_deblur.solve(problem, iterations=30)
    second = toy_deblur.solve(problem, iterations=30)
    np.testing.assert_array_equal(first.estimate, second.estimate)
    assert first.converter == second.converter
    assert first.loss_trace == second.loss_trace


def test_large_steps_diverge():
    problem, _ = _small_problem(seed=4)
    with pytest.raises(DeblurDivergenceError) as error:
        toy_deblur.solve(problem, use_tfs=False, iterations=500, step=10.0)
    trace = error.value.loss_trace
    assert not np.isfinite(trace[-1])
    assert max(trace[:-1]) > trace[0]


def test_solve_rejects_invalid_arguments():
    problem, _ = _small_problem()
    with pytest.raises(ValueError):
        toy_deblur.solve(problem, iterations=0)
    with pytest.raises(ValueError):
        toy_deblur.solve(problem, step=0.0)
    with pytest.raises(ValueError):
        toy_deblur.solve(problem, init=np.zeros((4, 4, 3)))


def test_default_step_is_below_the_curvature_bound():
    problem, _ = _small_problem()
    bound = toy_deblur.lipschitz_bound(problem.cfg, ConverterWeights.uniform(), 18)
    assert toy_deblur.DEFAULT_STEP < 1.0 / bound


def test_converter_refinement_matches_the_closed_form_fit():
    generator = np.random.default_rng(9)
    frames = list(generator.uniform(0.0, 1.0, size=(4, 6, 6, 3)))
    truth = np.array([0.2, 0.5, 0.3])
    targets = []
    for t, frame in enumerate(frames):
        gray = frame @ truth
        targets.append(
            reconstruction.TfsTargets(
                tfi=reconstruction.TextureImage(gray, "tfi", t),
                tfp=reconstruction.TextureImage(gray, "tfp", t),
                timestamp_index=t,
            )
        )

    refined = toy_deblur.refine_converter(
        frames, targets, TfsConfig(weight_w=1.0), iterations=400
    )
    rgb = np.concatenate([f.reshape(-1, 3) for f in frames])
    gray = np.concatenate([(f @ truth).ravel() for f in frames])
    fitted = color.fit_converter(rgb, gray).weights
    np.testing.assert_allclose(refined.as_array(), fitted.as_array(), atol=1e-6)

    with pytest.raises(ValueError):
        toy_deblur.refine_converter(frames, targets, TfsConfig(weight_w=0.0))


##############
# EVALUATION #
##############


def test_evaluate_against_the_reference():
    image = toy_deblur.synthetic_scene(16, seed=3)
    report = toy_deblur.evaluate(image, image)
    assert report.psnr_db == float("inf")
    assert report.ssim == 1.0
    black = toy_deblur.evaluate(np.zeros((16, 16, 3)), np.ones((16, 16, 3)))
    assert black.psnr_db == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(5))
def test_spike_supervision_sharpens_the_estimate(seed):
    scene = toy_deblur.synthetic_scene(64, seed=seed)
    trajectory = ShakeTrajectory.random_walk(margin=3, seed=seed)
    comparison = toy_deblur.compare_arms(scene, trajectory, seed=seed, iterations=500)
    assert comparison.tfs.psnr_db > comparison.color_only.psnr_db
    assert comparison.psnr_margin_db > 0
    assert comparison.converter_end_distance < comparison.converter_start_distance
