#!/usr/bin/env python3
"""Stage-combination ablation over the default five-row matrix."""

import argparse

from llmdiff.pipeline.ablation import (
    DEFAULT_STAGE_MATRIX,
    render_ablation_table,
    run_ablation,
    save_ablation_json,
)
from llmdiff.pipeline.stages import Workspace
from llmdiff.presets import EVAL_GUIDANCE, EVAL_STEPS, desk_stage_configs, desk_workspace_config


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--workspace", default="workspace")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    ws = Workspace(args.workspace, desk_workspace_config())
    ws.prepare_backbones()
    rows = run_ablation(
        ws,
        DEFAULT_STAGE_MATRIX,
        desk_stage_configs(seed=args.seed),
        eval_steps=EVAL_STEPS,
        guidance=EVAL_GUIDANCE,
        seed=args.seed,
    )
    print(render_ablation_table(rows))
    if args.out:
        save_ablation_json(rows, args.out)


if __name__ == "__main__":
    main()
