# Python script to automatically run the desk-scale deblurring comparison over several
# seeds and report out the results. It then sweeps the TfS weight, the number of spike
# reconstructions per view and the texture source one at a time, and tabulates the
# per-ray inference cost of event versus spike supervision for a few network shapes.
# Every table is printed and saved next to this script

# Main configuration, which seeds, sweeps and network shapes to report on
SEEDS = range(5)
ABLATION_SEEDS = range(2)
WEIGHT_SWEEP = [0.0, 1e-5, 1e-4, 1e-3]
RECON_PER_VIEW_SWEEP = [1, 3, 18]
TARGET_MODE_SWEEP = ["spikes", "tfi", "tfp", "both"]
NETWORK_SHAPES = ["60,256,256,3", "60,128,128,128,3", "3,4,2"]
SAMPLED_TIMESTAMPS = [1, 5, 18]

import dataclasses
import pathlib
import textwrap

import pandas as pd

import python.event_model as event_model
import python.formats as formats
import python.toy_deblur as toy_deblur
import python.utils as utils
from python.tfs_loss import TfsConfig

OUTPUT_FOLDER = pathlib.Path(__file__).parent.resolve()
BASE_CONFIG = TfsConfig.from_settings(
    utils.TFS, utils.SPIKE["omega"], utils.RECONSTRUCTION["tfp_window"]
)


def compare(seed: int, cfg: TfsConfig) -> toy_deblur.ArmComparison:
    scene = toy_deblur.synthetic_scene(utils.DEBLUR["image_size"], seed=seed)
    trajectory = toy_deblur.ShakeTrajectory.random_walk(
        length=utils.DEBLUR["trajectory_length"],
        margin=utils.DEBLUR["margin"],
        seed=seed,
    )
    return toy_deblur.compare_arms(
        scene,
        trajectory,
        seed=seed,
        iterations=utils.DEBLUR["iterations"],
        step=utils.DEBLUR["step"],
        omega=utils.SPIKE["omega"],
        samples_per_shift=utils.DEBLUR["samples_per_shift"],
        cfg=cfg,
    )


# Every seed gets its own scene and shake, solved with and without spike supervision
print("Compare color-only and TfS deblurring")
rows = []
for seed in SEEDS:
    comparison = compare(seed, BASE_CONFIG)
    rows.append(
        {
            "seed": seed,
            "color_only_psnr_db": comparison.color_only.psnr_db,
            "tfs_psnr_db": comparison.tfs.psnr_db,
            "psnr_margin_db": comparison.psnr_margin_db,
            "color_only_ssim": comparison.color_only.ssim,
            "tfs_ssim": comparison.tfs.ssim,
            "converter_start_distance": comparison.converter_start_distance,
            "converter_end_distance": comparison.converter_end_distance,
        }
    )
results = pd.DataFrame(rows)

# Flag seeds where spike supervision did not help
flagged_rows = results["psnr_margin_db"] <= 0
print(textwrap.indent(results.to_string(index=False), "\t"))
if flagged_rows.sum() > 0:
    print(f"\t{flagged_rows.sum()} seeds where TfS did not beat color-only")
else:
    print("\tTfS beat color-only on every seed")
formats.write_table(results, OUTPUT_FOLDER / "deblur_comparison.csv")
print()

# Vary one TfS knob at a time around the configured defaults
print("Sweep the TfS weight, reconstructions per view and texture source")
sweeps = {
    "weight_w": WEIGHT_SWEEP,
    "recon_per_view_n": RECON_PER_VIEW_SWEEP,
    "target_mode": TARGET_MODE_SWEEP,
}
ablation = []
for knob, values in sweeps.items():
    for value in values:
        cfg = dataclasses.replace(BASE_CONFIG, **{knob: value})
        for seed in ABLATION_SEEDS:
            comparison = compare(seed, cfg)
            ablation.append(
                {
                    "knob": knob,
                    "value": str(value),
                    "seed": seed,
                    "color_only_psnr_db": comparison.color_only.psnr_db,
                    "tfs_psnr_db": comparison.tfs.psnr_db,
                    "psnr_margin_db": comparison.psnr_margin_db,
                    "converter_end_distance": comparison.converter_end_distance,
                }
            )
ablation = pd.DataFrame(ablation)
summary = (
    ablation.groupby(["knob", "value"], sort=False)[
        ["psnr_margin_db", "converter_end_distance"]
    ]
    .mean()
    .reset_index()
)
print(textwrap.indent(summary.to_string(index=False), "\t"))
formats.write_table(ablation, OUTPUT_FOLDER / "ablation.csv")
print()

# Per-ray cost of supervising N timestamps with events versus one spike rendering
print("Compare event and spike supervision cost")
costs = []
for shape in NETWORK_SHAPES:
    model = event_model.CostModel.parse(shape)
    for n in SAMPLED_TIMESTAMPS:
        costs.append(
            {
                "layer_widths": shape,
                "sampled_timestamps": n,
                "event_cost": event_model.supervision_cost(model, n, "event"),
                "spike_cost": event_model.supervision_cost(model, n, "spike"),
                "ratio": event_model.cost_ratio(model, n),
            }
        )
costs = pd.DataFrame(costs)
print(textwrap.indent(costs.to_string(index=False), "\t"))
formats.write_table(costs, OUTPUT_FOLDER / "supervision_cost.csv")
print()
