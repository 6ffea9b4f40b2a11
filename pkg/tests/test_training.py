import json
import math
import random

import pytest

from cotqa.errors import NonMonotonicStep, StepOutOfRange
from cotqa.training import (
    Action,
    CheckpointManager,
    CheckpointPolicy,
    ScheduleConfig,
    effective_batch,
    lr_at,
    lr_curve,
    replay_action_log,
    warmup_steps,
    write_action_log,
)


CFG = ScheduleConfig(lr_max=3e-4, total_steps=5000, warmup_steps=500)


def test_lr_boundaries():
    assert lr_at(0, CFG) == 0.0
    assert lr_at(CFG.warmup_steps, CFG) == CFG.lr_max
    assert lr_at(CFG.total_steps, CFG) <= 1e-12 * CFG.lr_max


def test_lr_warmup_is_linear():
    for t in (1, 100, 250, 499):
        assert lr_at(t, CFG) == pytest.approx(CFG.lr_max * t / 500, rel=1e-15)


def test_lr_cosine_midpoint():
    # halfway through decay the cosine term is exactly zero
    mid = CFG.warmup_steps + (CFG.total_steps - CFG.warmup_steps) // 2
    assert lr_at(mid, CFG) == pytest.approx(CFG.lr_max / 2, rel=1e-12)


def test_lr_continuous_at_knee():
    just_after = lr_at(CFG.warmup_steps + 1, CFG)
    assert abs(lr_at(CFG.warmup_steps, CFG) - CFG.lr_max) == 0.0
    span = (CFG.total_steps - CFG.warmup_steps)
    expected = CFG.lr_max * 0.5 * (1 + math.cos(math.pi / span))
    assert just_after == pytest.approx(expected, rel=1e-15)


def test_lr_monotone_after_warmup():
    prev = lr_at(CFG.warmup_steps, CFG)
    for i in range(1, 1001):
        t = CFG.warmup_steps + round(i * (CFG.total_steps - CFG.warmup_steps) / 1000)
        t = min(t, CFG.total_steps)
        cur = lr_at(t, CFG)
        assert cur <= prev + 1e-18
        prev = cur


def test_lr_out_of_range():
    with pytest.raises(StepOutOfRange):
        lr_at(-1, CFG)
    with pytest.raises(StepOutOfRange):
        lr_at(CFG.total_steps + 1, CFG)


def test_schedule_config_validation():
    with pytest.raises(ValueError):
        ScheduleConfig(lr_max=0.0, total_steps=10, warmup_steps=2)
    with pytest.raises(ValueError):
        ScheduleConfig(lr_max=1e-3, total_steps=10, warmup_steps=10)
    with pytest.raises(ValueError):
        ScheduleConfig(lr_max=1e-3, total_steps=10, warmup_steps=0)


def test_warmup_steps_rule():
    assert warmup_steps(5000) == 500
    assert warmup_steps(200) == 100
    assert warmup_steps(50) == 49
    assert warmup_steps(20000) == 2000
    assert warmup_steps(1001) == 100


def test_lr_curve_covers_range():
    points = lr_curve(CFG, n_points=11)
    steps = [t for t, _ in points]
    assert steps[0] == 0
    assert steps[-1] == CFG.total_steps
    assert steps == sorted(set(steps))


def test_effective_batch():
    assert effective_batch(1, 2, 4) == 8
    assert effective_batch(8, 1, 1) == 8
    assert effective_batch(4, 4, 2) == 32
    rng = random.Random(61)
    for _ in range(50):
        b, n, g = (rng.randrange(1, 64) for _ in range(3))
        assert effective_batch(b, n, g) == b * n * g
        assert effective_batch(b, n, g) == effective_batch(g, b, n)


def test_effective_batch_rejects_nonpositive():
    with pytest.raises(ValueError):
        effective_batch(0, 1, 1)


def test_checkpoint_noop_off_schedule():
    mgr = CheckpointManager(CheckpointPolicy(save_every=500, keep_best=3))
    actions = mgr.step(750, 0.5)
    assert [a.kind for a in actions] == ["noop"]
    assert mgr.retained_ids() == set()


def test_checkpoint_retains_best_three():
    mgr = CheckpointManager(CheckpointPolicy(save_every=500, keep_best=3))
    for step, metric in [(500, 0.2), (1000, 0.4), (1500, 0.3)]:
        mgr.step(step, metric)
    assert mgr.retained_ids() == {"step-500", "step-1000", "step-1500"}
    actions = mgr.step(2000, 0.5)
    assert [a.kind for a in actions] == ["save", "delete"]
    assert actions[1].checkpoint_id == "step-500"  # worst of the four
    assert mgr.retained_ids() == {"step-1000", "step-1500", "step-2000"}


def test_checkpoint_minimize_direction():
    mgr = CheckpointManager(
        CheckpointPolicy(save_every=100, keep_best=2, metric_direction="minimize")
    )
    for step, loss in [(100, 1.0), (200, 0.5), (300, 0.8)]:
        mgr.step(step, loss)
    # the largest loss went away
    assert mgr.retained_ids() == {"step-200", "step-300"}


def test_checkpoint_tie_deletes_older_step():
    mgr = CheckpointManager(CheckpointPolicy(save_every=100, keep_best=2))
    mgr.step(100, 0.5)
    mgr.step(200, 0.5)
    actions = mgr.step(300, 0.9)
    assert actions[1].checkpoint_id == "step-100"


def test_checkpoint_new_save_can_be_immediately_worst():
    mgr = CheckpointManager(CheckpointPolicy(save_every=100, keep_best=2))
    mgr.step(100, 0.9)
    mgr.step(200, 0.8)
    actions = mgr.step(300, 0.1)
    assert [a.kind for a in actions] == ["save", "delete"]
    assert actions[1].checkpoint_id == "step-300"
    assert mgr.retained_ids() == {"step-100", "step-200"}


def test_checkpoint_rejects_non_increasing_steps():
    mgr = CheckpointManager(CheckpointPolicy())
    mgr.step(500, 0.1)
    with pytest.raises(NonMonotonicStep):
        mgr.step(500, 0.2)
    with pytest.raises(NonMonotonicStep):
        mgr.step(400, 0.2)


def brute_force_best(save_points, keep, direction):
    # best metric first; among equal metrics the newer step survives
    ordered = sorted(
        save_points,
        key=lambda sm: (sm[1] if direction == "maximize" else -sm[1], sm[0]),
        reverse=True,
    )
    return {f"step-{s}" for s, _ in ordered[:keep]}


def test_checkpoint_matches_brute_force_selection():
    rng = random.Random(67)
    for trial in range(50):
        keep = rng.randrange(1, 5)
        direction = rng.choice(["maximize", "minimize"])
        mgr = CheckpointManager(
            CheckpointPolicy(save_every=10, keep_best=keep, metric_direction=direction)
        )
        save_points = []
        for step in range(10, 210, 10):
            metric = round(rng.random(), 3)
            mgr.step(step, metric)
            save_points.append((step, metric))
        assert mgr.retained_ids() == brute_force_best(save_points, keep, direction)


def test_action_log_round_trip(tmp_path):
    mgr = CheckpointManager(CheckpointPolicy(save_every=500, keep_best=3))
    for step in range(1, 21):
        mgr.step(step * 250, metric=math.sin(step))
    path = tmp_path / "actions.jsonl"
    write_action_log(mgr.log, path)
    replayed = replay_action_log(path)
    assert set(replayed) == mgr.retained_ids()
    for cid, entry in replayed.items():
        assert mgr.retained[cid].metric == entry.metric
        assert mgr.retained[cid].step == entry.step


def test_action_log_format(tmp_path):
    path = tmp_path / "actions.jsonl"
    write_action_log(
        [Action("save", "step-500", 500, 0.25), Action("noop", step=750)], path
    )
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1  # noops are not persisted
    obj = json.loads(lines[0])
    assert obj == {"action": "save", "id": "step-500", "metric": 0.25, "step": 500}
