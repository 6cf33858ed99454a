from llmdiff.service.store import (
    ManifestPair,
    PairManifest,
    EvalStore,
    write_manifest,
)
from llmdiff.service.app import create_app

__all__ = ["ManifestPair", "PairManifest", "EvalStore", "write_manifest", "create_app"]
