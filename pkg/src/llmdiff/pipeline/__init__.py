from llmdiff.pipeline.checkpoint import (
    save_checkpoint,
    load_checkpoint,
    arrays_checksum,
    module_arrays,
    load_module_arrays,
    optimizer_arrays,
    load_optimizer_arrays,
)
from llmdiff.pipeline.stages import (
    StageConfig,
    RunRecord,
    Workspace,
    prepare_backbones,
    run_stage,
)
from llmdiff.pipeline.ablation import run_ablation, DEFAULT_STAGE_MATRIX

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "arrays_checksum",
    "module_arrays",
    "load_module_arrays",
    "optimizer_arrays",
    "load_optimizer_arrays",
    "StageConfig",
    "RunRecord",
    "Workspace",
    "prepare_backbones",
    "run_stage",
    "run_ablation",
    "DEFAULT_STAGE_MATRIX",
]
