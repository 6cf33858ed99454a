"""Persistence for pairwise human evaluation sessions.

Sessions and votes live in append-only JSONL logs with last-write-wins
materialization, so re-votes (the back/forward revision flow) overwrite
cleanly and a crashed process reconstructs exact state by replay.
Model identity is kept server-side only: client payloads carry opaque
image routes of the form /images/<session>/<index>/<side>.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

from llmdiff.errors import (
    IncompleteSessionError,
    InvalidArgumentError,
    InvalidManifestError,
    PairNotFoundError,
    SessionNotFoundError,
)
from llmdiff.seeding import numpy_rng

CHOICES = ("left", "right", "tie")


@dataclass(frozen=True)
class ManifestPair:
    prompt: str
    baseline: str          # name of the compared baseline model
    primary_image: str     # path to the primary model's image
    baseline_image: str    # path to the baseline model's image


@dataclass(frozen=True)
class PairManifest:
    pairs: tuple

    @classmethod
    def load(cls, path) -> "PairManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidManifestError(f"cannot read manifest {path}: {exc}") from exc
        pairs = []
        for i, rec in enumerate(data.get("pairs", [])):
            try:
                pair = ManifestPair(
                    prompt=rec["prompt"],
                    baseline=rec["baseline"],
                    primary_image=rec["primary_image"],
                    baseline_image=rec["baseline_image"],
                )
            except KeyError as exc:
                raise InvalidManifestError(f"manifest entry {i}: missing key {exc}") from exc
            for key in ("primary_image", "baseline_image"):
                img = (path.parent / rec[key]).resolve()
                if not img.exists():
                    raise InvalidManifestError(
                        f"manifest entry {i}: {key} {rec[key]!r} does not exist"
                    )
            pair = ManifestPair(
                prompt=pair.prompt,
                baseline=pair.baseline,
                primary_image=str((path.parent / pair.primary_image).resolve()),
                baseline_image=str((path.parent / pair.baseline_image).resolve()),
            )
            pairs.append(pair)
        return cls(pairs=tuple(pairs))


def write_manifest(path, pairs) -> None:
    path = Path(path)
    payload = {
        "pairs": [
            {
                "prompt": p.prompt,
                "baseline": p.baseline,
                "primary_image": p.primary_image,
                "baseline_image": p.baseline_image,
            }
            for p in pairs
        ]
    }
    path.write_text(json.dumps(payload, indent=1))


@dataclass
class SessionPair:
    index: int             # 1-based
    prompt: str
    baseline: str
    left_image: str
    right_image: str
    left_is_primary: bool


@dataclass
class Session:
    session_id: str
    user_id: str
    pairs: list
    votes: dict            # index -> choice (last write wins)
    raise_events: list

    @property
    def pair_count(self) -> int:
        return len(self.pairs)

    @property
    def progress(self) -> int:
        return len(self.votes)

    @property
    def complete(self) -> bool:
        return self.progress == self.pair_count

    def missing_indices(self) -> list:
        return [i for i in range(1, self.pair_count + 1) if i not in self.votes]


class EvalStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.sessions_log = self.root / "sessions.jsonl"
        self.votes_log = self.root / "votes.jsonl"
        self.sessions = {}
        self._replay()

    # -- durability ---------------------------------------------------------
    def _append(self, path: Path, record: dict) -> None:
        with path.open("a") as fh:
            fh.write(json.dumps(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _replay(self) -> None:
        if self.sessions_log.exists():
            with self.sessions_log.open() as fh:
                for line in fh:
                    rec = json.loads(line)
                    self.sessions[rec["session_id"]] = Session(
                        session_id=rec["session_id"],
                        user_id=rec["user_id"],
                        pairs=[SessionPair(**p) for p in rec["pairs"]],
                        votes={},
                        raise_events=[],
                    )
        if self.votes_log.exists():
            with self.votes_log.open() as fh:
                for line in fh:
                    rec = json.loads(line)
                    session = self.sessions.get(rec["session"])
                    if session is None:
                        continue
                    if rec["type"] == "vote":
                        session.votes[rec["index"]] = rec["choice"]
                    elif rec["type"] == "raise_hand":
                        session.raise_events.append(rec["index"])

    # -- sessions -------------------------------------------------------------
    def create_session(self, user_id: str, manifest: PairManifest, seed: int = 0
                       ) -> Session:
        if not user_id:
            raise InvalidArgumentError("user_id must be non-empty")
        session_id = f"sess-{len(self.sessions) + 1:04d}"
        rng = numpy_rng("session-sides", seed)
        pairs = []
        for i, mp in enumerate(manifest.pairs, start=1):
            left_is_primary = bool(rng.random() < 0.5)
            left = mp.primary_image if left_is_primary else mp.baseline_image
            right = mp.baseline_image if left_is_primary else mp.primary_image
            pairs.append(
                SessionPair(
                    index=i,
                    prompt=mp.prompt,
                    baseline=mp.baseline,
                    left_image=left,
                    right_image=right,
                    left_is_primary=left_is_primary,
                )
            )
        session = Session(
            session_id=session_id, user_id=user_id, pairs=pairs,
            votes={}, raise_events=[],
        )
        self._append(
            self.sessions_log,
            {
                "type": "session",
                "session_id": session_id,
                "user_id": user_id,
                "seed": seed,
                "pairs": [p.__dict__ for p in pairs],
            },
        )
        self.sessions[session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionNotFoundError(session_id) from None

    def _get_pair(self, session: Session, index: int) -> SessionPair:
        if not 1 <= index <= session.pair_count:
            raise PairNotFoundError(index)
        return session.pairs[index - 1]

    # -- client-facing payloads -----------------------------------------------
    def pair_payload(self, session_id: str, index: int) -> dict:
        """Blinded pair view: never contains model identity."""
        session = self.get_session(session_id)
        pair = self._get_pair(session, index)
        return {
            "index": pair.index,
            "pair_count": session.pair_count,
            "prompt": pair.prompt,
            "left_image": f"/images/{session_id}/{index}/left",
            "right_image": f"/images/{session_id}/{index}/right",
            "choice": session.votes.get(index),
        }

    def image_path(self, session_id: str, index: int, side: str) -> Path:
        session = self.get_session(session_id)
        pair = self._get_pair(session, index)
        if side == "left":
            return Path(pair.left_image)
        if side == "right":
            return Path(pair.right_image)
        raise InvalidArgumentError(f"side must be left or right, got {side!r}")

    # -- votes ------------------------------------------------------------------
    def record_vote(self, session_id: str, index: int, choice: str) -> dict:
        session = self.get_session(session_id)
        self._get_pair(session, index)
        if choice not in CHOICES:
            raise InvalidArgumentError(
                f"choice must be one of {CHOICES}, got {choice!r}"
            )
        self._append(
            self.votes_log,
            {
                "type": "vote",
                "session": session_id,
                "index": index,
                "choice": choice,
                "ts": time.time(),
            },
        )
        session.votes[index] = choice
        return {"progress": session.progress, "complete": session.complete}

    def raise_hand(self, session_id: str, index: int) -> None:
        session = self.get_session(session_id)
        self._get_pair(session, index)
        self._append(
            self.votes_log,
            {"type": "raise_hand", "session": session_id, "index": index,
             "ts": time.time()},
        )
        session.raise_events.append(index)

    # -- export ---------------------------------------------------------------
    def export_results(self, session_ids=None) -> list:
        """Per user x baseline win/loss/tie counts, de-blinded server-side."""
        ids = sorted(self.sessions) if session_ids is None else list(session_ids)
        missing = {}
        for sid in ids:
            session = self.get_session(sid)
            if not session.complete:
                missing[sid] = session.missing_indices()
        if missing:
            raise IncompleteSessionError(missing)
        counts = {}
        for sid in ids:
            session = self.sessions[sid]
            for pair in session.pairs:
                choice = session.votes[pair.index]
                key = (session.user_id, pair.baseline)
                row = counts.setdefault(key, {"win": 0, "loss": 0, "tie": 0})
                if choice == "tie":
                    row["tie"] += 1
                elif (choice == "left") == pair.left_is_primary:
                    row["win"] += 1
                else:
                    row["loss"] += 1
        return [
            {
                "user": user,
                "baseline": baseline,
                "win": row["win"],
                "loss": row["loss"],
                "tie": row["tie"],
                "total": row["win"] + row["loss"] + row["tie"],
            }
            for (user, baseline), row in sorted(counts.items())
        ]
