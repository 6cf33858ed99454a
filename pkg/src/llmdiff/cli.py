"""Command-line interface.

Config files use a flat `key = value` format (one pair per line, `#`
comments). Keys mirror the StageConfig / WorkspaceConfig field names.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np


def parse_kv_file(path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (need key = value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = _coerce(value)
    return out


def _coerce(value: str):
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if "," in value:
        return tuple(v.strip() for v in value.split(","))
    return value


def _apply(config_cls_instance, overrides: dict):
    names = {f.name for f in fields(config_cls_instance)}
    unknown = set(overrides) - names
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return replace(config_cls_instance, **overrides)


def _workspace(args):
    from llmdiff.pipeline.stages import Workspace, WorkspaceConfig

    cfg = WorkspaceConfig()
    if getattr(args, "ws_config", None):
        cfg = _apply(cfg, parse_kv_file(args.ws_config))
    return Workspace(args.workspace, cfg)


def _save_image(image: np.ndarray, path) -> None:
    from PIL import Image as PILImage

    PILImage.fromarray((image * 255.0 + 0.5).astype(np.uint8)).save(path)


def cmd_corpus(args):
    from llmdiff.corpus import build_paired_corpus, dump_corpus

    ws = _workspace(args)
    entries = build_paired_corpus(
        args.size, languages=ws.config.languages, seed=args.seed,
        long_fraction=args.long_frac, registry=ws.registry,
    )
    dump_corpus(entries, args.out, image_dir=args.images, resolution=ws.config.resolution)
    print(f"wrote {len(entries)} records to {args.out}")


def cmd_prepare(args):
    ws = _workspace(args)
    reports = ws.prepare_backbones(force=args.force)
    for name, report in reports.items():
        summary = {k: v for k, v in report.items() if k != "losses"}
        print(f"{name}: {summary}")
    print(f"backbones ready under {ws.models_dir}")


def _stage_config(args, stage: int):
    from llmdiff.pipeline.stages import StageConfig

    defaults = {1: dict(stage=1, steps=1500), 2: dict(stage=2, steps=3000),
                3: dict(stage=3, steps=300)}[stage]
    cfg = StageConfig(**defaults)
    if args.config:
        cfg = _apply(cfg, parse_kv_file(args.config))
    overrides = {}
    if stage == 1:
        if args.loss:
            overrides["loss_variant"] = args.loss
        if args.lam is not None:
            overrides["lam"] = args.lam
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    return replace(cfg, **overrides) if overrides else cfg


def _run_stage_cmd(args, stage: int):
    from llmdiff.pipeline.stages import run_stage

    ws = _workspace(args)
    if stage == 1 and args.long_frac is not None:
        ws.config = replace(ws.config, stage1_long_fraction=args.long_frac)
    config = _stage_config(args, stage)
    record = run_stage(ws, config, args.in_dir, args.out_dir)
    print(json.dumps(record.to_dict(), indent=1))


def cmd_ablate(args):
    from llmdiff.pipeline.ablation import (
        DEFAULT_STAGE_MATRIX,
        render_ablation_table,
        run_ablation,
        save_ablation_json,
    )
    from llmdiff.pipeline.stages import StageConfig

    ws = _workspace(args)
    matrix = DEFAULT_STAGE_MATRIX
    if args.matrix:
        rows = []
        for raw in Path(args.matrix).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append(tuple(int(tok) for tok in line.replace(",", " ").split()))
        matrix = tuple(rows)
    stage_configs = {
        1: _stage_config_from_file(args.stage1_config, 1),
        2: _stage_config_from_file(args.stage2_config, 2),
        3: _stage_config_from_file(args.stage3_config, 3),
    }
    rows = run_ablation(ws, matrix, stage_configs, out_root=args.out_dir,
                        eval_steps=args.eval_steps, guidance=args.guidance)
    print(render_ablation_table(rows))
    if args.out:
        save_ablation_json(rows, args.out)


def _stage_config_from_file(path, stage: int):
    from llmdiff.pipeline.stages import StageConfig

    defaults = {1: dict(stage=1, steps=1500), 2: dict(stage=2, steps=3000),
                3: dict(stage=3, steps=300)}[stage]
    cfg = StageConfig(**defaults)
    if path:
        cfg = _apply(cfg, parse_kv_file(path))
    return cfg


def cmd_sample(args):
    from llmdiff.corpus.captions import Prompt

    ws = _workspace(args)
    bundle = ws.bundle_from_dir(args.run)
    prompt = Prompt(text=args.prompt, language=args.lang, length_mode="short")
    image = bundle.generate(prompt, steps=args.steps, guidance=args.guidance,
                            seed=args.seed)
    _save_image(image, args.out)
    print(f"wrote {args.out}")


def cmd_eval(args):
    from llmdiff.corpus.corpus import load_corpus
    from llmdiff.evaluation import evaluate_run

    ws = _workspace(args)
    bundle = ws.bundle_from_dir(args.run)
    entries = load_corpus(args.corpus) if args.corpus else ws.eval_corpus()
    report = evaluate_run(bundle, entries, steps=args.steps,
                          guidance=args.guidance, seed=args.seed)
    print(report.render())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1))


def cmd_magnitude(args):
    from llmdiff.alignment import magnitude_report
    from llmdiff.corpus.captions import Prompt

    ws = _workspace(args)
    bundle = ws.bundle_from_dir(args.run)
    prompt = Prompt(text=args.prompt, language=args.lang, length_mode="short")
    report = magnitude_report(prompt, bundle.lm, bundle.clip, bundle.adapter,
                              ws.vocab, args.variant)
    print(report.render())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1))


def cmd_variants(args):
    from llmdiff.evaluation import loss_variant_report, render_variant_table
    from llmdiff.pipeline.models_io import load_model

    ws = _workspace(args)
    adapters = {"baseline": None}
    for spec in args.runs:
        name, _, run_dir = spec.partition("=")
        if not run_dir:
            raise SystemExit(f"--runs entries look like name=dir, got {spec!r}")
        adapters[name] = load_model(Path(run_dir) / "adapter.ckpt", "adapter")
    rows = loss_variant_report(ws.eval_corpus(), adapters, ws.clip(), ws.lm(),
                               ws.vocab, ws.registry)
    print(render_variant_table(rows))
    if args.out:
        Path(args.out).write_text(
            json.dumps([row.__dict__ for row in rows], indent=1, default=float)
        )


def cmd_serve(args):
    import uvicorn

    from llmdiff.service.app import create_app
    from llmdiff.service.store import EvalStore

    store = EvalStore(args.store)
    app = create_app(store, default_manifest=args.manifest, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port)


def cmd_make_manifest(args):
    from llmdiff.service.store import ManifestPair, write_manifest

    records = json.loads(Path(args.pairs).read_text())
    pairs = [ManifestPair(**rec) for rec in records]
    write_manifest(args.out, pairs)
    print(f"wrote manifest with {len(pairs)} pairs to {args.out}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="llmdiff")
    parser.add_argument("--workspace", default="workspace", help="workspace root directory")
    parser.add_argument("--ws-config", default=None, help="workspace key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="dump a caption/image corpus")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--long-frac", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--images", default=None)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("prepare", help="pretrain CLIP/LM/autoencoder/base denoiser")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_prepare)

    for stage in (1, 2, 3):
        p = sub.add_parser(f"stage{stage}", help=f"run training stage {stage}")
        p.add_argument("--config", default=None, help="key=value stage config file")
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--in-dir", default=None)
        p.add_argument("--out-dir", default=None)
        if stage == 1:
            p.add_argument("--loss", choices=("mse", "cos", "cos-mag"), default=None)
            p.add_argument("--lambda", dest="lam", type=float, default=None)
            p.add_argument("--long-frac", type=float, default=None)
        else:
            p.set_defaults(loss=None, lam=None, long_frac=None)
        p.set_defaults(func=lambda a, s=stage: _run_stage_cmd(a, s))

    p = sub.add_parser("ablate", help="run the stage-combination ablation")
    p.add_argument("--matrix", default=None, help="file with one stage combination per line")
    p.add_argument("--stage1-config", default=None)
    p.add_argument("--stage2-config", default=None)
    p.add_argument("--stage3-config", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--out", default=None, help="machine-readable output file")
    p.add_argument("--eval-steps", type=int, default=30)
    p.add_argument("--guidance", type=float, default=3.0)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sample", help="generate one image from a prompt")
    p.add_argument("--run", required=True, help="run dir with adapter/denoiser checkpoints")
    p.add_argument("--prompt", required=True)
    p.add_argument("--lang", default="en")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--guidance", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="evaluate a run on a corpus")
    p.add_argument("--run", required=True)
    p.add_argument("--corpus", default=None, help="JSONL corpus dump (default: workspace eval split)")
    p.add_argument("--steps", type=int, default=30)
    p.add_argument("--guidance", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("magnitude", help="per-token magnitude report")
    p.add_argument("--run", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--lang", default="en")
    p.add_argument("--variant", default="cos-mag")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_magnitude)

    p = sub.add_parser("variants", help="loss-variant comparison table")
    p.add_argument("--runs", nargs="+", required=True, help="name=run_dir entries")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_variants)

    p = sub.add_parser("serve", help="serve the human-evaluation API")
    p.add_argument("--store", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--ui", default=None, help="directory of built UI assets")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("make-manifest", help="build a pair manifest from a JSON pair list")
    p.add_argument("--pairs", required=True, help="JSON list of pair records")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_manifest)

    args = parser.parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
