#!/usr/bin/env python3
"""Pretrain the frozen backbones (CLIP, LM, autoencoder, base denoiser)."""

import argparse
import json

from llmdiff.pipeline.stages import Workspace
from llmdiff.presets import desk_workspace_config


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--workspace", default="workspace")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--force", action="store_true")
    args = parser.parse_args()

    ws = Workspace(args.workspace, desk_workspace_config(seed=args.seed))
    reports = ws.prepare_backbones(force=args.force)
    for name, report in reports.items():
        summary = {k: v for k, v in report.items() if k != "losses" and k != "train"}
        print(f"{name}: {json.dumps(summary)}")
    print(f"backbones ready under {ws.models_dir}")


if __name__ == "__main__":
    main()
