import io
import json
import math

import numpy as np
import pytest

from asha.envs import (
    Env,
    EnvConfig,
    EnvKind,
    Task,
    Trajectory,
    angle_diff,
    dump_jsonl,
    extract_spec,
    load_jsonl,
    pretrain_reward,
    sample_task,
    success_predicate,
)
from asha.nn import seeded_rng


def make_env(kind: str, **kw) -> Env:
    return Env(EnvConfig(kind=kind, **kw))


def fresh(kind: str, seed=0, mode="scene_and_arm", task_kw=None, **kw):
    env = make_env(kind, **kw)
    rng = seeded_rng(seed)
    task = sample_task(EnvKind(kind), env.config.task if task_kw is None else task_kw, rng)
    env.reset(task, mode, rng)
    return env, task, rng


# ---------------------------------------------------------------- task sampling

def test_switch_subset_sampling_is_uniform():
    rng = seeded_rng(0)
    counts = np.zeros(5)
    for _ in range(3000):
        t = sample_task(EnvKind.SWITCH, {"indices": [1, 2, 3]}, rng)
        counts[t.target_index] += 1
    assert counts[0] == counts[4] == 0
    for i in (1, 2, 3):
        assert abs(counts[i] / 3000 - 1 / 3) <= 0.03


def test_singleton_subset_always_sampled():
    rng = seeded_rng(1)
    for _ in range(20):
        assert sample_task(EnvKind.SWITCH, {"indices": [2]}, rng).target_index == 2


def test_empty_subset_rejected():
    with pytest.raises(ValueError):
        sample_task(EnvKind.SWITCH, {"indices": []}, seeded_rng(0))


def test_valve_targets_respect_exclusion_radius():
    rng = seeded_rng(2)
    cfg = {"initial_angle": 0.0, "exclusion": math.pi / 16}
    for _ in range(2000):
        t = sample_task(EnvKind.VALVE, cfg, rng)
        assert abs(angle_diff(t.target_angle, 0.0)) >= math.pi / 16


def test_puck_tasks_respect_min_separation():
    rng = seeded_rng(3)
    for _ in range(500):
        t = sample_task(EnvKind.PUCK, {"half_extent": [0.25, 0.15], "min_separation": 0.1}, rng)
        assert np.linalg.norm(t.goal_pos - t.puck_start) >= 0.1


def test_shelf_door_policies():
    rng = seeded_rng(4)
    for _ in range(50):
        t = sample_task(EnvKind.SHELF, {"targets": [0, 1], "door": "never_cover"}, rng)
        assert t.door_slot == 1 - t.target_index
        t = sample_task(EnvKind.SHELF, {"targets": [0, 1], "door": "cover_target"}, rng)
        assert t.door_slot == t.target_index


# ---------------------------------------------------------------- reset semantics

def test_arm_only_reset_preserves_scene():
    env, task, rng = fresh("switch")
    first = env.state.switches.copy()
    env.reset(task, "arm_only", rng)
    np.testing.assert_array_equal(env.state.switches, first)
    env.reset(task, "arm_only", rng)
    np.testing.assert_array_equal(env.state.switches, first)


def test_zero_noise_reset_gives_canonical_layout():
    env, _, _ = fresh("switch", jitter_scale=0.0)
    xs = env.state.switches[:, 0]
    np.testing.assert_allclose(xs, [-0.44, -0.22, 0.0, 0.22, 0.44], atol=1e-12)
    np.testing.assert_allclose(env.state.switches[:, 1], 0.8)


def test_row_jitter_spans_configured_interval():
    env = make_env("switch")
    rng = seeded_rng(5)
    jitters = []
    for _ in range(4000):
        task = sample_task(EnvKind.SWITCH, env.config.task, rng)
        env.reset(task, "scene_and_arm", rng)
        jitters.append(env.state.row_jitter)
    jitters = np.array(jitters)
    assert jitters.min() < -0.14 and jitters.max() > 0.14
    assert np.all(np.abs(jitters) <= 0.15)
    # all switches share the row jitter
    assert np.allclose(np.diff(env.state.switches[:, 0]), 0.22)


def test_scene_redrawn_on_scene_and_arm():
    env = make_env("switch")
    rng = seeded_rng(6)
    vals = set()
    for _ in range(10):
        task = sample_task(EnvKind.SWITCH, env.config.task, rng)
        env.reset(task, "scene_and_arm", rng)
        vals.add(round(env.state.row_jitter, 9))
    assert len(vals) > 5


def test_arm_only_with_new_task_rejected():
    env, task, rng = fresh("switch")
    other = Task(EnvKind.SWITCH, target_index=task.target_index)
    with pytest.raises(ValueError):
        env.reset(other, "arm_only", rng)


# ---------------------------------------------------------------- stepping

def test_action_clipping():
    env, _, _ = fresh("switch", jitter_scale=0.0)
    env.state.eff = np.zeros(2)
    env.state.vel = np.zeros(2)
    out = env.step(np.array([0.5, -0.5]))
    # v = 0.9*0 + clip(a) = (0.25, -0.25); pos = dt*v
    np.testing.assert_allclose(out.state.vel, [0.25, -0.25])
    np.testing.assert_allclose(out.state.eff, [0.0125, -0.0125])


def test_nonfinite_action_rejected():
    env, _, _ = fresh("switch")
    with pytest.raises(ValueError):
        env.step(np.array([np.nan, 0.0]))


def test_effector_on_target_switch_sets_success():
    env, task, _ = fresh("switch", jitter_scale=0.0)
    env.state.eff = env.state.switches[task.target_index].copy()
    env.state.vel = np.zeros(2)
    out = env.step(np.zeros(2))
    assert out.success and not out.wrong_task and out.done
    assert out.reward == 0.0


def test_effector_on_other_switch_sets_wrong_task():
    env, task, _ = fresh("switch", jitter_scale=0.0)
    wrong = (task.target_index + 1) % 5
    env.state.eff = env.state.switches[wrong].copy()
    env.state.vel = np.zeros(2)
    out = env.step(np.zeros(2))
    assert out.wrong_task and not out.success and out.done


def test_wrong_task_detection_disabled_during_pretraining():
    env, task, _ = fresh("switch", jitter_scale=0.0, end_on_wrong_task=False)
    wrong = (task.target_index + 1) % 5
    env.state.eff = env.state.switches[wrong].copy()
    env.state.vel = np.zeros(2)
    out = env.step(np.zeros(2))
    assert not out.wrong_task and not out.done
    assert out.state.pressed[wrong]


def test_step_limit_flag():
    env, task, rng = fresh("switch", step_limit=5)
    for t in range(5):
        out = env.step(np.zeros(2))
    assert out.step_limit and out.done
    assert sum([out.success, out.wrong_task, out.step_limit]) == 1


def test_zero_action_speed_decays_monotonically():
    env, _, _ = fresh("puck")
    env.state.vel = np.array([1.0, -0.5])
    speeds = []
    for _ in range(30):
        out = env.step(np.zeros(2))
        speeds.append(np.linalg.norm(out.state.vel))
        assert np.all(np.abs(out.state.eff) <= 1.0)
    assert all(b < a or a == 0 for a, b in zip(speeds, speeds[1:]))


def test_determinism_same_seed_same_rollout():
    def roll(seed):
        env, task, rng = fresh("switch", seed=seed)
        outs = []
        for _ in range(50):
            out = env.step(np.array([0.1, 0.2]))
            outs.append((out.state.eff.tolist(), out.reward, out.done))
        return outs

    assert roll(7) == roll(7)


# ---------------------------------------------------------------- shelf

def test_door_drag_moves_door_with_effector():
    env, task, _ = fresh("shelf", jitter_scale=0.0, task_kw={"targets": [0], "door": "cover_target"})
    st = env.state
    st.eff = st.handle.copy()
    st.vel = np.zeros(2)
    door_before = st.door_x
    out = env.step(np.array([0.25, 0.0]))
    # grabbed: door follows the effector's x displacement exactly
    assert out.state.door_x == pytest.approx(out.state.eff[0])
    assert out.state.door_x > door_before


def test_far_effector_does_not_drag_door():
    env, task, _ = fresh("shelf", jitter_scale=0.0)
    st = env.state
    st.eff = np.array([0.0, -0.5])
    door_before = st.door_x
    env.step(np.array([0.25, 0.0]))
    assert env.state.door_x == door_before


def test_covered_target_cannot_trigger():
    env, task, _ = fresh("shelf", jitter_scale=0.0, task_kw={"targets": [0], "door": "cover_target"})
    st = env.state
    st.eff = st.targets[task.target_index].copy()
    st.vel = np.zeros(2)
    out = env.step(np.zeros(2))
    assert not out.success and not out.state.reached[task.target_index]


def test_uncovered_target_triggers_success_and_reward():
    env, task, _ = fresh("shelf", jitter_scale=0.0, task_kw={"targets": [0], "door": "never_cover"})
    st = env.state
    st.eff = st.targets[task.target_index].copy()
    st.vel = np.zeros(2)
    out = env.step(np.zeros(2))
    assert out.success
    assert out.reward == pytest.approx(0.0)  # door open + bottle reached


# ---------------------------------------------------------------- valve

def test_valve_angle_always_wrapped():
    env, task, rng = fresh("valve", task_kw={"initial_angle": 6.2, "exclusion": 0.2})
    for _ in range(200):
        out = env.step(np.array([0.25]))
        assert 0.0 <= out.state.angle < 2 * math.pi


def test_valve_hold_requirement():
    env, task, _ = fresh("valve", task_kw={"initial_angle": 0.0, "exclusion": 0.2})
    env.state.angle = task.target_angle
    env.state.omega = 0.0
    for t in range(19):
        out = env.step(np.zeros(1))
        assert not out.success
    out = env.step(np.zeros(1))
    assert out.success


def test_valve_hold_reset_on_leaving_tolerance():
    env, task, _ = fresh("valve", task_kw={"initial_angle": 0.0, "exclusion": 0.2})
    env.state.angle = task.target_angle
    for _ in range(19):
        env.step(np.zeros(1))
    env.state.angle = task.target_angle + math.pi / 2  # kicked out of tolerance
    env.step(np.zeros(1))
    env.state.angle = task.target_angle
    env.state.omega = 0.0
    for _ in range(19):
        out = env.step(np.zeros(1))
        assert not out.success


def test_success_predicate_valve_history():
    task = Task(EnvKind.VALVE, initial_angle=0.0, target_angle=math.pi / 2)
    from asha.envs import ValveState

    good = [ValveState(math.pi / 2, 0, 0) for _ in range(20)]
    bad = good[:19] + [ValveState(0.0, 0, 0)]
    assert success_predicate(EnvKind.VALVE, good, task)
    assert not success_predicate(EnvKind.VALVE, bad, task)
    assert not success_predicate(EnvKind.VALVE, good[:19], task)


# ---------------------------------------------------------------- puck

def test_puck_pushed_without_overlap():
    env, task, _ = fresh("puck")
    st = env.state
    st.eff = st.puck - np.array([0.12, 0.0])
    st.vel = np.zeros(2)
    for _ in range(8):  # short drive so the puck stays off the workspace wall
        out = env.step(np.array([0.25, 0.0]))
        gap = np.linalg.norm(out.state.puck - out.state.eff)
        assert gap >= env.config.push_radius - 1e-9
    assert out.state.puck[0] > task.puck_start[0]


def test_puck_at_goal_is_success():
    env, task, _ = fresh("puck")
    st = env.state
    st.puck = task.goal_pos.copy()
    st.eff = st.puck + np.array([0.5, 0.5])
    out = env.step(np.zeros(2))
    assert out.success
    assert success_predicate(EnvKind.PUCK, [out.state], task)


# ---------------------------------------------------------------- rewards

def test_switch_reward_at_zero_distance():
    env, task, _ = fresh("switch", jitter_scale=0.0)
    st = env.state
    st.eff = st.switches[task.target_index].copy()
    # non-success step (flag not yet set): exp(-0 - 0.2) - 1
    assert pretrain_reward(EnvKind.SWITCH, st, task) == pytest.approx(math.exp(-0.2) - 1)
    st.pressed[task.target_index] = True
    assert pretrain_reward(EnvKind.SWITCH, st, task) == 0.0


def test_valve_reward_zero_at_target():
    env, task, _ = fresh("valve")
    env.state.angle = task.target_angle
    assert pretrain_reward(EnvKind.VALVE, env.state, task) == pytest.approx(0.0)
    env.state.angle = task.target_angle + 0.5
    assert pretrain_reward(EnvKind.VALVE, env.state, task) == pytest.approx(math.exp(-2.5) - 1)


def test_puck_reward_sign_tracks_progress():
    env, task, _ = fresh("puck")
    prev = env.state.copy()
    st = env.state
    st.puck = prev.puck + (task.goal_pos - prev.puck) * 0.2  # progress toward goal
    st.eff = prev.eff
    r_good = pretrain_reward(EnvKind.PUCK, st, task, prev_state=prev)
    st2 = prev.copy()
    st2.puck = prev.puck - (task.goal_pos - prev.puck) * 0.2
    r_bad = pretrain_reward(EnvKind.PUCK, st2, task, prev_state=prev)
    assert r_good > 0 > r_bad
    assert pretrain_reward(EnvKind.PUCK, prev, task, prev_state=prev) == pytest.approx(0.0)


# ---------------------------------------------------------------- spec extraction

def run_to_success(env, task, rng):
    traj = Trajectory(env.kind)
    state = env.state.copy()
    target = env.state.switches[task.target_index]
    for _ in range(200):
        d = target - env.state.eff
        a = np.clip(d * 4.0 - env.state.vel * 0.4, -0.25, 0.25)
        out = env.step(a)
        traj.append(state, np.zeros(2), a, out.reward)
        state = out.state
        if out.done:
            traj.finish(out.state, out.outcome, 1 if out.success else 0)
            return traj
    raise AssertionError("controller failed to reach switch")


def test_extract_spec_switch_returns_pressed_switch_position():
    env, task, rng = fresh("switch")
    traj = run_to_success(env, task, rng)
    assert traj.outcome == "success"
    spec = extract_spec(traj)
    np.testing.assert_allclose(
        spec.vector, env.state.switches[task.target_index], atol=1e-6
    )


def test_extract_spec_valve_sin_cos():
    env, task, _ = fresh("valve")
    traj = Trajectory(EnvKind.VALVE)
    from asha.envs import ValveState

    final = ValveState(math.pi / 2, 0.0, math.pi / 2)
    traj.append(final, np.zeros(2), np.zeros(1), 0.0)
    traj.finish(final, "success", 1)
    spec = extract_spec(traj)
    np.testing.assert_allclose(spec.vector, [1.0, 0.0], atol=1e-7)
    assert np.linalg.norm(spec.vector) == pytest.approx(1.0)


def test_extract_spec_encodes_reached_angle_not_ground_truth():
    env, task, _ = fresh("valve")
    reached = task.target_angle + math.pi / 20  # inside tolerance, off ground truth
    from asha.envs import ValveState

    traj = Trajectory(EnvKind.VALVE)
    final = ValveState(reached, 0.0, reached)
    traj.append(final, np.zeros(2), np.zeros(1), 0.0)
    traj.finish(final, "success", 1)
    spec = extract_spec(traj)
    np.testing.assert_allclose(spec.vector, [math.sin(reached), math.cos(reached)], atol=1e-7)
    assert not np.allclose(spec.vector, [math.sin(task.target_angle), math.cos(task.target_angle)])


def test_extract_spec_requires_success():
    traj = Trajectory(EnvKind.SWITCH)
    env, task, rng = fresh("switch")
    traj.append(env.state.copy(), np.zeros(2), np.zeros(2), 0.0)
    traj.finish(env.state.copy(), "step_limit", 0)
    with pytest.raises(ValueError):
        extract_spec(traj)


# ---------------------------------------------------------------- config + jsonl

def test_config_json_round_trip(tmp_path):
    from asha.envs import load_env_config, save_env_config

    cfg = EnvConfig(kind="shelf", jitter_scale=0.5, task={"targets": [0, 1], "door": "never_cover"})
    path = tmp_path / "env.json"
    save_env_config(path, cfg)
    loaded = load_env_config(path)
    assert loaded == cfg
    assert json.loads(path.read_text())["kind"] == "shelf"


def test_trajectory_jsonl_round_trip():
    env, task, rng = fresh("switch")
    traj = run_to_success(env, task, rng)
    buf = io.StringIO()
    dump_jsonl(traj, buf)
    buf.seek(0)
    loaded = load_jsonl(EnvKind.SWITCH, buf)
    assert loaded.outcome == traj.outcome
    assert len(loaded) == len(traj)
    np.testing.assert_allclose(loaded.actions[3], traj.actions[3])
    np.testing.assert_allclose(loaded.states[5].eff, traj.states[5].eff)
    lines = buf.getvalue().strip().split("\n")
    assert json.loads(lines[0])["t"] == 0
    assert json.loads(lines[-1])["flags"]["success"]
