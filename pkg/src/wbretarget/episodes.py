"""Episode data model and line-delimited file I/O.

An episode is a timestamped stream of dual-wrist pose goals plus gripper
openings, with language and provenance metadata. Files are UTF-8 JSON lines,
one episode per line (schema `episode/v1`, documented in the README); a
`.gz` suffix selects transparent gzip compression.
"""
from __future__ import annotations

import gzip
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Pose

log = logging.getLogger(__name__)

EPISODE_SCHEMA = "episode/v1"


class EpisodeError(ValueError):
    """Raised for malformed episode records or invariant violations."""


@dataclass(frozen=True)
class Step:
    t: float
    left_wrist: Pose
    right_wrist: Pose
    left_grip: float
    right_grip: float
    goal_height: float | None = None

    def __post_init__(self):
        for name, g in (("left_grip", self.left_grip), ("right_grip", self.right_grip)):
            if not 0.0 <= g <= 1.0:
                raise EpisodeError(f"{name}={g} outside [0, 1]")
        if not np.isfinite(self.t):
            raise EpisodeError("non-finite timestamp")


@dataclass(frozen=True)
class Episode:
    episode_id: str
    task_id: str
    language: str
    frequency_hz: float
    steps: tuple[Step, ...]
    source: str = "unknown"
    vision_refs: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "vision_refs", tuple(self.vision_refs))
        if len(self.steps) < 2:
            raise EpisodeError(f"episode {self.episode_id}: needs >= 2 steps")
        if self.frequency_hz <= 0:
            raise EpisodeError(f"episode {self.episode_id}: frequency must be > 0")
        ts = np.array([s.t for s in self.steps])
        if not np.all(np.diff(ts) > 0):
            raise EpisodeError(f"episode {self.episode_id}: timestamps not strictly increasing")

    def __len__(self):
        return len(self.steps)

    # array views (copies) used by the numeric pipeline
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.steps])

    def wrist_flat(self) -> np.ndarray:
        """(T, 2, 7) array of [x y z qw qx qy qz], hands ordered left, right."""
        return np.array([[s.left_wrist.flat(), s.right_wrist.flat()] for s in self.steps])

    def wrist_positions(self) -> np.ndarray:
        """(T, 2, 3), hands ordered left, right."""
        return np.array(
            [[s.left_wrist.position, s.right_wrist.position] for s in self.steps]
        )

    def grips(self) -> np.ndarray:
        return np.array([[s.left_grip, s.right_grip] for s in self.steps])

    def goal_heights(self) -> np.ndarray | None:
        if any(s.goal_height is None for s in self.steps):
            return None
        return np.array([s.goal_height for s in self.steps])

    def with_meta(self, **kv) -> "Episode":
        meta = dict(self.meta)
        meta.update(kv)
        return replace(self, meta=meta)


def _step_to_record(s: Step) -> dict:
    rec = {
        "t": s.t,
        "left_wrist": s.left_wrist.flat().tolist(),
        "right_wrist": s.right_wrist.flat().tolist(),
        "left_grip": s.left_grip,
        "right_grip": s.right_grip,
    }
    if s.goal_height is not None:
        rec["goal_height"] = s.goal_height
    return rec


def _step_from_record(rec: dict) -> Step:
    return Step(
        t=float(rec["t"]),
        left_wrist=Pose.from_flat(rec["left_wrist"]),
        right_wrist=Pose.from_flat(rec["right_wrist"]),
        left_grip=float(rec["left_grip"]),
        right_grip=float(rec["right_grip"]),
        goal_height=float(rec["goal_height"]) if "goal_height" in rec else None,
    )


def episode_to_record(ep: Episode) -> dict:
    return {
        "schema": EPISODE_SCHEMA,
        "episode_id": ep.episode_id,
        "task_id": ep.task_id,
        "language": ep.language,
        "frequency_hz": ep.frequency_hz,
        "source": ep.source,
        "vision_refs": list(ep.vision_refs),
        "meta": ep.meta,
        "steps": [_step_to_record(s) for s in ep.steps],
    }


def episode_from_record(rec: dict) -> Episode:
    if rec.get("schema") != EPISODE_SCHEMA:
        raise EpisodeError(f"unsupported episode schema: {rec.get('schema')!r}")
    return Episode(
        episode_id=str(rec["episode_id"]),
        task_id=str(rec.get("task_id", "")),
        language=str(rec.get("language", "")),
        frequency_hz=float(rec["frequency_hz"]),
        steps=tuple(_step_from_record(s) for s in rec["steps"]),
        source=str(rec.get("source", "unknown")),
        vision_refs=tuple(rec.get("vision_refs", ())),
        meta=dict(rec.get("meta", {})),
    )


def _open(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def write_episodes(episodes, path) -> None:
    with _open(path, "w") as fh:
        for ep in episodes:
            fh.write(json.dumps(episode_to_record(ep), separators=(",", ":")))
            fh.write("\n")


def read_episodes(path, on_error: str = "raise") -> list[Episode]:
    """Read a JSONL episode file.

    on_error="raise" fails on the first malformed record, naming the episode
    and line; on_error="skip" drops bad records and logs each exclusion.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError("on_error must be 'raise' or 'skip'")
    out = []
    with _open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            eid = "?"
            try:
                rec = json.loads(line)
                eid = rec.get("episode_id", "?") if isinstance(rec, dict) else "?"
                out.append(episode_from_record(rec))
            except (json.JSONDecodeError, EpisodeError, KeyError, TypeError) as exc:
                msg = f"{path}:{lineno}: episode {eid!r}: {exc}"
                if on_error == "raise":
                    raise EpisodeError(msg) from exc
                log.warning("excluding malformed episode: %s", msg)
    return out
