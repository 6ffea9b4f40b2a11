"""Training bookkeeping arithmetic: LR schedule, batch math, checkpoint policy.

Nothing here touches model weights. The checkpoint manager tracks retained
checkpoint ids and emits an action log; resume is modeled as replaying that
log. Determinism checklist: one seed (default 42) drives every seeded
operation, reports embed config digests instead of timestamps, and all
schedule math is closed-form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import NonMonotonicStep, StepOutOfRange
from .io_utils import atomic_write_text

DEFAULT_SEED = 42

ACTION_SAVE = "save"
ACTION_DELETE = "delete"
ACTION_NOOP = "noop"


@dataclass(frozen=True)
class ScheduleConfig:
    lr_max: float
    total_steps: int
    warmup_steps: int

    def __post_init__(self):
        if not self.lr_max > 0:
            raise ValueError("lr_max must be positive")
        if not 0 < self.warmup_steps < self.total_steps:
            raise ValueError("need 0 < warmup_steps < total_steps")


def lr_at(t: int, cfg: ScheduleConfig) -> float:
    """Linear warmup to lr_max at step W, cosine decay to 0 at step T."""
    if not 0 <= t <= cfg.total_steps:
        raise StepOutOfRange(f"step {t} outside [0, {cfg.total_steps}]")
    if t <= cfg.warmup_steps:
        return cfg.lr_max * t / cfg.warmup_steps
    progress = (t - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.lr_max * 0.5 * (1.0 + math.cos(math.pi * progress))


def warmup_steps(total: int) -> int:
    """10% of total steps, at least 100, always below total."""
    if total < 1:
        raise ValueError("total must be at least 1")
    return min(max(round(0.10 * total), 100), total - 1)


def lr_curve(cfg: ScheduleConfig, n_points: int = 101) -> list[tuple[int, float]]:
    """Evenly spaced integer steps over [0, T] with their learning rates."""
    if n_points < 2:
        raise ValueError("need at least 2 points")
    steps = sorted({round(i * cfg.total_steps / (n_points - 1)) for i in range(n_points)})
    return [(t, lr_at(t, cfg)) for t in steps]


def effective_batch(b_per_device: int, n_devices: int, grad_accum: int) -> int:
    if min(b_per_device, n_devices, grad_accum) < 1:
        raise ValueError("all batch factors must be at least 1")
    return b_per_device * n_devices * grad_accum


@dataclass(frozen=True)
class CheckpointPolicy:
    save_every: int = 500
    keep_best: int = 3
    metric_direction: str = "maximize"

    def __post_init__(self):
        if self.save_every < 1 or self.keep_best < 1:
            raise ValueError("save_every and keep_best must be at least 1")
        if self.metric_direction not in ("maximize", "minimize"):
            raise ValueError("metric_direction must be maximize or minimize")


@dataclass(frozen=True)
class Action:
    kind: str  # save | delete | noop
    checkpoint_id: str | None = None
    step: int = 0
    metric: float | None = None


@dataclass
class Retained:
    checkpoint_id: str
    step: int
    metric: float


class CheckpointManager:
    """Keeps the best `keep_best` checkpoints among periodic save points.

    Steps must arrive strictly increasing. Save/delete actions are appended
    to an in-memory log (noops are not logged); the log replays to the same
    retained set.
    """

    def __init__(self, policy: CheckpointPolicy):
        self.policy = policy
        self.retained: dict[str, Retained] = {}
        self.log: list[Action] = []
        self._last_step: int | None = None

    def _worst_id(self) -> str:
        maximize = self.policy.metric_direction == "maximize"

        def badness(item: Retained):
            # ties delete the older step first
            key = item.metric if maximize else -item.metric
            return (key, item.step)

        return min(self.retained.values(), key=badness).checkpoint_id

    def step(self, step: int, metric: float) -> list[Action]:
        if self._last_step is not None and step <= self._last_step:
            raise NonMonotonicStep(f"step {step} after {self._last_step}")
        self._last_step = step
        if step % self.policy.save_every != 0:
            return [Action(ACTION_NOOP, step=step)]
        checkpoint_id = f"step-{step}"
        actions = [Action(ACTION_SAVE, checkpoint_id, step, metric)]
        self.retained[checkpoint_id] = Retained(checkpoint_id, step, metric)
        if len(self.retained) > self.policy.keep_best:
            worst = self._worst_id()
            actions.append(Action(ACTION_DELETE, worst, step, self.retained[worst].metric))
            del self.retained[worst]
        self.log.extend(actions)
        return actions

    def retained_ids(self) -> set[str]:
        return set(self.retained)


def write_action_log(actions: Iterable[Action], path) -> None:
    lines = [
        json.dumps(
            {"step": a.step, "action": a.kind, "id": a.checkpoint_id, "metric": a.metric},
            sort_keys=True,
        )
        for a in actions
        if a.kind != ACTION_NOOP
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def replay_action_log(path) -> dict[str, Retained]:
    """Rebuild the retained set by applying save/delete lines in order."""
    retained: dict[str, Retained] = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind, cid = obj["action"], obj["id"]
            if kind == ACTION_SAVE:
                retained[cid] = Retained(cid, int(obj["step"]), float(obj["metric"]))
            elif kind == ACTION_DELETE:
                retained.pop(cid, None)
            elif kind != ACTION_NOOP:
                raise ValueError(f"{path}: line {i}: unknown action {kind!r}")
    return retained
