"""Stage-combination ablation runner.

Rows share upstream results: every combination with the same executed
prefix (e.g. stage 1 under the same config/seed) reuses the cached stage
output, which is safe because stages are deterministic in their inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

from llmdiff.errors import InvalidArgumentError
from llmdiff.evaluation import evaluate_run
from llmdiff.pipeline.stages import RunRecord, StageConfig, Workspace, run_stage

DEFAULT_STAGE_MATRIX = ((1,), (2,), (1, 2), (1, 3), (1, 2, 3))


def _dir_name(stages: tuple) -> str:
    return "s" + "-".join(str(s) for s in stages)


def run_ablation(
    ws: Workspace,
    matrix=DEFAULT_STAGE_MATRIX,
    stage_configs: dict | None = None,
    out_root=None,
    eval_steps: int = 30,
    guidance: float = 3.0,
    seed: int = 0,
) -> list:
    """Run each stage combination and evaluate it; returns [(combo, RunRecord)].

    `stage_configs` maps stage number -> StageConfig shared across rows.
    """
    if stage_configs is None:
        raise InvalidArgumentError("stage_configs must provide a config per stage used")
    out_root = Path(out_root) if out_root is not None else ws.runs_dir / "ablation"
    out_root.mkdir(parents=True, exist_ok=True)
    lineage = {}  # executed-stage tuple -> (dir, [records])
    rows = []
    for combo in matrix:
        combo = tuple(sorted(set(combo)))
        if not combo or any(s not in (1, 2, 3) for s in combo):
            raise InvalidArgumentError(f"invalid stage combination {combo}")
        prefix = ()
        for stage in combo:
            key = prefix + (stage,)
            if key not in lineage:
                in_dir = lineage[prefix][0] if prefix else None
                out_dir = out_root / _dir_name(key)
                record = run_stage(ws, stage_configs[stage], in_dir, out_dir)
                prior = lineage[prefix][1] if prefix else []
                lineage[key] = (out_dir, prior + [record])
            prefix = key
        final_dir, records = lineage[prefix]
        bundle = ws.bundle_from_dir(final_dir)
        report = evaluate_run(
            bundle, ws.eval_corpus(), steps=eval_steps, guidance=guidance, seed=seed
        )
        row = RunRecord(
            stages={f"stage{i}": i in combo for i in (1, 2, 3)},
            wall_clock=sum(r.wall_clock for r in records),
            checkpoints=records[-1].checkpoints,
            metrics=report.to_dict(),
        )
        (out_root / f"{_dir_name(combo)}.row.json").write_text(
            json.dumps(row.to_dict(), indent=1)
        )
        rows.append((combo, row))
    return rows


def render_ablation_table(rows) -> str:
    """Aligned text table mirroring the stage-flag / metric columns."""
    langs = sorted(
        {l for _, r in rows for l in (r.metrics or {}).get("per_language", {})}
    )
    header = ["stage 1", "stage 2", "stage 3"]
    for lang in langs:
        header += [f"FID({lang})", f"CLIP-s({lang})", f"Aes({lang})"]
    header.append("cost (s)")
    table = [header]
    for combo, record in rows:
        row = ["x" if i in combo else "" for i in (1, 2, 3)]
        for lang in langs:
            m = record.metrics["per_language"][lang]
            row += [f"{m['fid']:.2f}", f"{m['clip_s']:.4f}", f"{m['aesthetic']:.2f}"]
        row.append(f"{record.wall_clock:.1f}")
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    return "\n".join(
        "  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in table
    )


def save_ablation_json(rows, path) -> None:
    payload = [
        {"stages": list(combo), **record.to_dict()} for combo, record in rows
    ]
    Path(path).write_text(json.dumps(payload, indent=1))
