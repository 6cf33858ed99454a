#!/usr/bin/env python3
"""Alignment-loss comparison: train stage 1 per variant/seed, report the
held-out CLIP-score analog per language plus token-magnitude gaps."""

import argparse
import json
import time

import numpy as np

from llmdiff.alignment import magnitude_report
from llmdiff.evaluation import loss_variant_report, render_variant_table
from llmdiff.pipeline.models_io import load_model
from llmdiff.pipeline.stages import StageConfig, Workspace, run_stage
from llmdiff.presets import desk_stage_configs, desk_workspace_config

VARIANTS = ("mse", "cos", "cos-mag")


def run_seed(ws: Workspace, seed: int, steps: int, lam: float, out_root) -> dict:
    adapters = {"baseline": None}
    base = desk_stage_configs(seed=seed)[1]
    for variant in VARIANTS:
        config = StageConfig(
            stage=1, steps=steps, batch_size=base.batch_size, lr=base.lr,
            seed=seed, loss_variant=variant, lam=lam,
        )
        out_dir = out_root / f"{variant}-seed{seed}"
        t0 = time.time()
        run_stage(ws, config, None, out_dir)
        print(f"  seed {seed} {variant}: {time.time() - t0:.0f}s")
        adapters[variant] = load_model(out_dir / "adapter.ckpt", "adapter")
    rows = loss_variant_report(
        ws.eval_corpus(), adapters, ws.clip(), ws.lm(), ws.vocab, ws.registry
    )
    print(render_variant_table(rows))
    gaps = {}
    for variant in ("cos", "cos-mag"):
        values = [
            magnitude_report(e.prompt, ws.lm(), ws.clip(), adapters[variant],
                             ws.vocab, variant).mean_abs_gap()
            for e in ws.eval_corpus() if e.prompt.language == "en"
        ]
        gaps[variant] = float(np.mean(values))
    print(f"  magnitude gap: cos={gaps['cos']:.3f} cos-mag={gaps['cos-mag']:.3f}")
    return {
        "seed": seed,
        "scores": {r.name: {"overall": r.overall, **r.per_language} for r in rows},
        "magnitude_gaps": gaps,
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--workspace", default="workspace")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--steps", type=int, default=desk_stage_configs()[1].steps)
    parser.add_argument("--lam", type=float, default=0.1)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    ws = Workspace(args.workspace, desk_workspace_config())
    ws.prepare_backbones()
    out_root = ws.runs_dir / "loss-variants"
    results = [run_seed(ws, seed, args.steps, args.lam, out_root) for seed in args.seeds]

    ordered = sum(
        r["scores"]["cos-mag"]["overall"] >= r["scores"]["cos"]["overall"]
        and r["scores"]["cos"]["overall"] > r["scores"]["mse"]["overall"]
        for r in results
    )
    print(f"\nordering cos-mag >= cos > mse held in {ordered}/{len(results)} seeds")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=1)


if __name__ == "__main__":
    main()
