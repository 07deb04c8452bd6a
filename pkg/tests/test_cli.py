import json
import struct
import zlib

import numpy as np
import pandas as pd
import pytest

import python.cli as cli
import python.formats as formats


def _run(capsys, *argv: str) -> tuple[int, str, str]:
    code = cli.main([str(arg) for arg in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _write_series(tmp_path, values: list[float]) -> list[str]:
    paths = []
    for i, value in enumerate(values):
        path = tmp_path / f"frame_{i}.pgm"
        formats.write_pixmap(path, np.full((1, 1), value))
        paths.append(str(path))
    return paths


def test_event_cost_of_a_small_network(capsys):
    code, out, _ = _run(
        capsys, "cost", "--widths", "3,4,2", "--n", "5", "--mode", "event"
    )
    assert code == 0
    assert out == "100\n"


def test_spike_cost_and_ratio(capsys):
    assert _run(capsys, "cost", "--widths", "3,4,2", "--mode", "spike")[1] == "28\n"
    code, out, _ = _run(capsys, "cost", "--widths", "60,256,256,3")
    assert code == 0
    assert 4.5 <= float(out) <= 5.0


def test_simulated_constant_reconstructs_to_its_intensity(tmp_path, capsys):
    stream_path = tmp_path / "constant.spks"
    code, out, _ = _run(
        capsys, "simulate", "--constant", "0.5", "--count", "40", "-o", stream_path
    )
    assert code == 0
    assert out.startswith("40 planes of 8x8, 640 spikes")
    assert len(formats.load_stream(stream_path)) == 40

    texture_path = tmp_path / "texture.pgm"
    code, _, _ = _run(
        capsys,
        "reconstruct",
        stream_path,
        "--method",
        "tfi",
        "--bit-depth",
        "16",
        "-o",
        texture_path,
    )
    assert code == 0
    np.testing.assert_allclose(formats.read_pixmap(texture_path), 0.5, atol=1e-4)


def test_reconstruct_both_methods_and_all_timestamps(tmp_path, capsys):
    stream_path = tmp_path / "constant.spks"
    _run(capsys, "simulate", "--constant", "1.0", "--count", "8", "-o", stream_path)

    code, _, _ = _run(capsys, "reconstruct", stream_path, "-o", tmp_path / "tex.pgm")
    assert code == 0
    for method in ["tfi", "tfp"]:
        values = formats.read_pixmap(tmp_path / f"tex_{method}.pgm")
        np.testing.assert_array_equal(values, 1.0)

    code, _, _ = _run(
        capsys,
        "reconstruct",
        stream_path,
        "--method",
        "tfp",
        "--window",
        "2",
        "--all",
        "-o",
        tmp_path / "seq.pgm",
    )
    assert code == 0
    written = sorted(path.name for path in tmp_path.glob("seq_*.pgm"))
    assert written == [f"seq_{t:05d}.pgm" for t in range(1, 8)]


def test_metrics_of_an_image_with_itself(tmp_path, capsys):
    path = tmp_path / "a.pgm"
    formats.write_pixmap(path, np.random.default_rng(0).uniform(size=(16, 16)))
    code, out, _ = _run(capsys, "metrics", path, path)
    assert code == 0
    assert out == "psnr_db,ssim\ninf,1.0\n"

    code, out, _ = _run(capsys, "metrics", path, path, "--format", "json")
    assert code == 0
    assert json.loads(out) == [{"psnr_db": "inf", "ssim": 1.0}]


def test_events_of_a_single_pixel(tmp_path, capsys):
    frames = _write_series(tmp_path, [0.0, 0.6, 0.0])
    code, out, _ = _run(capsys, "events", *frames, "--theta", "0.5")
    assert code == 0
    assert out == "x,y,t,polarity\n0,0,1,1\n0,0,2,-1\n"

    code, out, _ = _run(capsys, "events", *frames, "--theta", "0.5", "--stride", "2")
    assert code == 0
    assert out == "x,y,t,polarity\n"


def test_strided_events_are_stamped_with_the_input_frame(tmp_path, capsys):
    frames = _write_series(tmp_path, [0.0, 0.0, 0.0, 0.0, 0.8])
    code, out, _ = _run(capsys, "events", *frames, "--theta", "0.5", "--stride", "2")
    assert code == 0
    assert out == "x,y,t,polarity\n0,0,4,1\n"


def test_events_written_to_a_file(tmp_path, capsys):
    frames = _write_series(tmp_path, [0.0, 0.6])
    output = tmp_path / "events.csv"
    code, out, _ = _run(capsys, "events", *frames, "-o", output)
    assert code == 0
    assert out == ""
    assert output.read_text().splitlines() == ["x,y,t,polarity", "0,0,1,1"]


def test_blur_of_black_and_white(tmp_path, capsys):
    black, white = tmp_path / "black.ppm", tmp_path / "white.ppm"
    formats.write_pixmap(black, np.zeros((3, 4, 3)))
    formats.write_pixmap(white, np.ones((3, 4, 3)))
    output = tmp_path / "blurry.ppm"
    code, _, _ = _run(capsys, "blur", black, white, "-o", output)
    assert code == 0
    np.testing.assert_array_equal(formats.read_pixmap(output), 128 / 255)


def test_deblur_is_reproducible(tmp_path, capsys):
    def deblur(name: str) -> tuple[int, str]:
        code, out, _ = _run(
            capsys,
            "deblur",
            "--synthetic",
            "--size",
            "24",
            "--iters",
            "10",
            "--seed",
            "3",
            "-o",
            tmp_path / f"{name}.ppm",
            "--loss",
            tmp_path / f"{name}.csv",
        )
        return code, out

    first = deblur("first")
    second = deblur("second")
    assert first == second
    assert first[0] == 0
    assert first[1].splitlines()[0] == "psnr_db,ssim,w_r,w_g,w_b"
    first_image = (tmp_path / "first.ppm").read_bytes()
    assert first_image == (tmp_path / "second.ppm").read_bytes()
    assert formats.read_pixmap(tmp_path / "first.ppm").shape == (18, 18, 3)
    trace = pd.read_csv(tmp_path / "first.csv")
    assert trace.columns.tolist() == ["iteration", "loss"]
    assert len(trace) == 10


def test_deblur_supervision_overrides(tmp_path, capsys):
    def deblur(*flags: str) -> tuple[int, str]:
        code, out, _ = _run(
            capsys,
            "deblur",
            "--synthetic",
            "--size",
            "24",
            "--iters",
            "10",
            "--w",
            "0.001",
            *flags,
            "-o",
            tmp_path / "estimate.ppm",
        )
        return code, out

    raw_code, raw_out = deblur("--n", "3", "--target-mode", "spikes")
    both_code, both_out = deblur("--n", "3", "--target-mode", "both")
    assert raw_code == both_code == 0
    assert raw_out.splitlines()[0] == "psnr_db,ssim,w_r,w_g,w_b"
    assert raw_out != both_out

    assert deblur("--n", "0")[0] == 2
    assert deblur("--target-mode", "events")[0] == 2


def test_io_errors_exit_with_one(tmp_path, capsys):
    code, _, err = _run(capsys, "reconstruct", tmp_path / "missing.spks", "-o", "x.pgm")
    assert code == 1
    assert err.startswith("error:")

    corrupt = tmp_path / "corrupt.spks"
    corrupt.write_bytes(b"NOPE" + bytes(60))
    code, _, err = _run(capsys, "reconstruct", corrupt, "-o", tmp_path / "x.pgm")
    assert code == 1
    assert "magic" in err


def test_oversized_container_exits_with_one(tmp_path, capsys):
    fields = struct.pack("<4sHIIQdd", b"SPKS", 1, 1, 1, 2**62, 2.0, 4e4)
    path = tmp_path / "huge.spks"
    path.write_bytes(fields + struct.pack("<I", zlib.crc32(fields)) + b"\x80")
    code, _, err = _run(capsys, "reconstruct", path, "-o", tmp_path / "x.pgm")
    assert code == 1
    assert "truncated" in err


def test_invalid_parameters_exit_with_two(tmp_path, capsys):
    code, _, err = _run(capsys, "cost", "--widths", "3,x,2")
    assert code == 2
    assert err.startswith("error:")

    code, _, _ = _run(capsys, "cost", "--widths", "3,4,2", "--mode", "frames")
    assert code == 2

    code, _, _ = _run(capsys, "simulate", "-o", tmp_path / "empty.spks")
    assert code == 2

    code, _, _ = _run(capsys, "deblur", "--synthetic", "--w", "-1", "-o", "x.ppm")
    assert code == 2


def test_help_exits_cleanly(capsys):
    code, out, _ = _run(capsys, "--help")
    assert code == 0
    assert "simulate" in out and "deblur" in out


@pytest.mark.parametrize("argv", [[], ["unknown"]])
def test_missing_or_unknown_subcommand(capsys, argv):
    assert cli.main(argv) == 2
