import json
import math
import random

import seanav


def test_fuse_lse_matches_closed_form():
    out = seanav.fuse_lse([0.5, 0.6], k=10.0)
    assert abs(out["h"] - 0.468673831248177716595100450503) < 1e-12
    w = out["weights"]
    assert abs(sum(w) - 1.0) < 1e-12
    assert w[0] > w[1]


def test_fuse_lse_sandwich():
    rng = random.Random(0)
    for _ in range(200):
        n = rng.randint(1, 41)
        res = [rng.uniform(-2.0, 5.0) for _ in range(n)]
        out = seanav.fuse_lse(res, k=10.0)
        assert min(res) - math.log(n) / 10.0 - 1e-9 <= out["h"] <= min(res) + 1e-9


def test_projection_identity_and_active():
    out = seanav.project_damped((0.3, 0.0, 0.0), h=0.5, grad=(-1.0, 0.0, 0.0))
    assert not out["active"]
    assert out["u_safe"] == [0.3, 0.0, 0.0]

    out = seanav.project_damped((1.0, 0.0, 0.0), h=-0.1, grad=(-1.0, 0.0, 0.0))
    assert out["active"]
    assert abs(out["eta"] - 0.55) < 1e-12
    assert abs(out["u_safe"][0] - 0.45) < 1e-12


def test_shield_filter_slows_wall_approach():
    ranges = [3.0] * seanav.RAY_COUNT
    ranges[20] = 0.5
    out = seanav.shield_filter(ranges, (1.5, 0.0, 0.0), alpha=1.0)
    assert out["active"]
    assert out["u_safe"][0] < 1.5
    assert out["h"] < 0.5 - 0.45 + 1e-12


def test_scenario_generation_and_lidar():
    js = seanav.generate_scenario("medium", 3)
    assert len(json.loads(js)["obstacles"]) == 14
    assert js == seanav.generate_scenario("medium", 3)

    empty = json.dumps({"extent": 5.0, "difficulty": "easy", "seed": 0, "obstacles": []})
    ranges = seanav.cast_lidar(empty, 4.0, 0.0, 0.0)
    assert len(ranges) == seanav.RAY_COUNT
    assert abs(ranges[20] - 1.0) < 1e-12
    assert abs(ranges[0] - 3.0) < 1e-12


def test_config_round_trip_and_hash():
    base = seanav.default_config()
    cfg = json.loads(base)
    assert cfg["train"]["num_envs"] == 64
    assert seanav.parse_config(base) == base
    assert seanav.config_hash(base) == seanav.config_hash("")

    cfg["train"]["gamma"] = 0.9
    assert seanav.config_hash(json.dumps(cfg)) != seanav.config_hash(base)

    try:
        seanav.parse_config(json.dumps({"train": {"gamm": 0.9}}))
    except RuntimeError:
        pass
    else:
        raise AssertionError("unknown config key must be rejected")


def _tiny_config():
    cfg = json.loads(seanav.default_config())
    cfg["policy"].update(
        history_length=2,
        encoder_hidden=8,
        latent_dim=4,
        backbone_hidden=8,
        feature_dim=8,
        nav_hidden=4,
        alpha_hidden=4,
        critic_hidden=8,
        critic_hidden2=8,
    )
    cfg["train"].update(
        num_envs=4, rollout_steps=16, epochs=1, minibatches=2, threads=2, episode_duration=2.0
    )
    return cfg


def test_tiny_training_and_eval():
    tr = seanav.Trainer(json.dumps(_tiny_config()), "easy", seed=1)
    stats = tr.run_iteration()
    assert stats["env_steps"] == 64
    assert math.isfinite(stats["loss_total"])
    assert stats["episodes"] == stats["successes"] + stats["collisions"] + stats["timeouts"]
    assert tr.param_count == len(tr.params())

    rep = tr.evaluate(trials_per_group=2, groups=1, seed=5, threads=2)
    assert rep["successes"] + rep["collisions"] + rep["timeouts"] == 2
    assert rep["trials_csv"].startswith("group,trial,")


def test_evaluate_goto_policy_deterministic():
    cfg = json.loads(seanav.default_config())
    cfg["eval"]["timeout"] = 10.0
    text = json.dumps(cfg)
    rep = seanav.evaluate_policy(text, "easy", "goto", trials_per_group=2, groups=2, seed=3, threads=2)
    assert rep["groups"] * rep["trials_per_group"] == 4
    assert rep["successes"] + rep["collisions"] + rep["timeouts"] == 4
    rep2 = seanav.evaluate_policy(text, "easy", "goto", trials_per_group=2, groups=2, seed=3, threads=1)
    assert rep["trials_csv"] == rep2["trials_csv"]


def test_run_checks_all_pass():
    results = seanav.run_checks()
    assert len(results) == 8
    assert [r["name"] for r in results if not r["passed"]] == []
