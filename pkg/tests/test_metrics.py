import numpy as np
import pytest

import python.metrics as metrics


def _naive_ssim(a: np.ndarray, b: np.ndarray, size: int = 11) -> float:
    """Explicit loop over every window position, weights built from scratch"""
    offsets = np.arange(size) - (size - 1) / 2
    weights = np.exp(-(offsets[:, None] ** 2 + offsets[None, :] ** 2) / (2 * 1.5**2))
    weights /= weights.sum()
    c1, c2 = 0.01**2, 0.03**2

    scores = []
    for i in range(a.shape[0] - size + 1):
        for j in range(a.shape[1] - size + 1):
            pa = a[i : i + size, j : j + size]
            pb = b[i : i + size, j : j + size]
            mu_a = np.sum(weights * pa)
            mu_b = np.sum(weights * pb)
            var_a = np.sum(weights * (pa - mu_a) ** 2)
            var_b = np.sum(weights * (pb - mu_b) ** 2)
            cov = np.sum(weights * (pa - mu_a) * (pb - mu_b))
            scores.append(
                (2 * mu_a * mu_b + c1)
                * (2 * cov + c2)
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(scores))


def test_identical_images():
    image = np.random.default_rng(0).uniform(size=(16, 16, 3))
    assert metrics.psnr(image, image) == float("inf")
    assert metrics.ssim(image, image) == pytest.approx(1.0, abs=1e-12)


def test_black_against_white_is_zero_db():
    assert metrics.psnr(np.zeros((4, 4)), np.ones((4, 4))) == pytest.approx(0.0)


def test_constant_offset_of_one_level():
    a = np.full((8, 8), 0.5)
    expected = 20 * np.log10(255)
    assert metrics.psnr(a, a + 1 / 255) == pytest.approx(expected, abs=1e-6)
    assert metrics.psnr(a * 255, a * 255 + 1, max_value=255.0) == pytest.approx(
        expected
    )


def test_psnr_matches_a_naive_mse():
    generator = np.random.default_rng(1)
    a, b = generator.uniform(size=(2, 12, 9))
    squared = 0.0
    for i in range(12):
        for j in range(9):
            squared += (a[i, j] - b[i, j]) ** 2
    expected = 10 * np.log10(1.0 / (squared / a.size))
    assert metrics.psnr(a, b) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_ssim_matches_a_windowed_loop(seed):
    generator = np.random.default_rng(seed)
    a = generator.uniform(size=(16, 16))
    b = np.clip(a + generator.normal(scale=0.1, size=a.shape), 0, 1)
    assert metrics.ssim(a, b) == pytest.approx(_naive_ssim(a, b), abs=1e-9)


def test_rgb_ssim_is_the_channel_mean():
    generator = np.random.default_rng(6)
    a, b = generator.uniform(size=(2, 14, 13, 3))
    channels = [metrics.ssim(a[..., c], b[..., c]) for c in range(3)]
    assert metrics.ssim(a, b) == pytest.approx(np.mean(channels))


def test_negative_image_is_structurally_different():
    a = np.random.default_rng(2).uniform(size=(16, 16))
    assert metrics.ssim(a, 1 - a) < 1.0


def test_metrics_are_symmetric():
    generator = np.random.default_rng(3)
    a, b = generator.uniform(size=(2, 20, 20))
    assert metrics.psnr(a, b) == metrics.psnr(b, a)
    assert metrics.ssim(a, b) == pytest.approx(metrics.ssim(b, a), abs=1e-15)


def test_gaussian_window_is_normalised():
    window = metrics.gaussian_window(11)
    assert window.shape == (11, 11)
    assert window.sum() == pytest.approx(1.0)
    assert window[5, 5] == window.max()


def test_evaluate_reports_both_metrics():
    image = np.random.default_rng(4).uniform(size=(16, 16, 3))
    report = metrics.evaluate(image, image)
    assert report.as_dict() == {"psnr_db": float("inf"), "ssim": 1.0}
    noisy = metrics.evaluate(np.clip(image + 0.05, 0, 1), image)
    assert 20 < noisy.psnr_db < 40
    assert noisy.ssim < 1.0


def test_metrics_reject_invalid_inputs():
    with pytest.raises(ValueError):
        metrics.psnr(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        metrics.psnr(np.zeros((4, 4)), np.zeros((4, 4)), max_value=0.0)
    with pytest.raises(ValueError):
        metrics.psnr(np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((8, 8)), np.zeros((8, 8)))
    with pytest.raises(ValueError):
        metrics.psnr(np.full((2, 2), np.nan), np.zeros((2, 2)))
