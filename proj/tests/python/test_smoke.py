"""Python smoke tests for the ppg extension module."""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.environ.get("PPG_PKG_DIR", "python"))

import ppg  # noqa: E402


def test_gae_matches_numpy_reference():
    rng = np.random.default_rng(0)
    w, t = 3, 16
    rewards = rng.normal(size=(w, t))
    values = rng.normal(size=(w, t + 1))
    dones = (rng.random(w * t) < 0.2).astype(np.uint8)
    gamma, lam = 0.99, 0.95

    adv, targ = ppg.compute_gae(rewards, values, list(dones), gamma, lam)

    ref = np.zeros((w, t))
    for i in range(w):
        acc = 0.0
        for k in reversed(range(t)):
            nd = 0.0 if dones[i * t + k] else 1.0
            delta = rewards[i, k] + gamma * nd * values[i, k + 1] - values[i, k]
            acc = delta + gamma * lam * nd * acc
            ref[i, k] = acc
    assert np.allclose(adv, ref, atol=1e-12)
    assert np.allclose(targ, ref + values[:, :t], atol=1e-12)


def test_loss_values():
    assert ppg.loss_clip(np.zeros(1), np.zeros(1), np.array([2.0]), 0.2) == pytest.approx(2.0)
    assert ppg.loss_value(np.zeros(2), np.array([2.0, 4.0])) == pytest.approx(5.0)
    logits = np.zeros((1, 4))
    assert ppg.entropy(logits)[0] == pytest.approx(math.log(4.0))
    assert ppg.kl(logits, logits)[0] == pytest.approx(0.0, abs=1e-12)
    lp = ppg.log_prob(logits, [1])
    assert lp[0] == pytest.approx(math.log(0.25))


def test_env_determinism_and_shapes():
    a = ppg.VecEnv("keydoor", num_envs=2, seed=5)
    b = ppg.VecEnv("keydoor", num_envs=2, seed=5)
    oa, ob = a.reset(), b.reset()
    assert oa.shape == (2, a.obs_dim)
    assert np.array_equal(oa, ob)
    obs, rew, done, eps = a.step([0, 1])
    assert obs.shape == (2, a.obs_dim)
    assert rew.shape == (2,)
    assert obs.min() >= 0.0 and obs.max() <= 1.0


def test_invalid_config_is_a_config_error():
    with pytest.raises(ppg.core.ConfigError):
        ppg.validate_config("phasic.npi = 3\n")
    with pytest.raises(ppg.core.ConfigError):
        ppg.validate_config("rollout.minibatches = 7\n")


def test_tiny_training_run(tmp_path):
    cfg = (
        "env.name = chain\n"
        "env.length = 6\n"
        "env.num_envs = 2\n"
        "rollout.horizon = 16\n"
        "rollout.minibatches = 2\n"
        "phasic.n_pi = 2\n"
        "phasic.e_aux = 1\n"
        "phasic.aux_minibatches_per_npi = 2\n"
        "nn.hidden = 8\n"
        "run.total_steps = 128\n"
        "run.seeds = 0\n"
    )
    out = ppg.run_experiment(cfg, [], str(tmp_path / "run"), 1)
    assert os.path.exists(os.path.join(out["runs"][0]["dir"], "metrics.csv"))
    assert len(out["runs"]) == 1


def test_gradcheck_binding():
    results = ppg.gradcheck(instances=2)
    assert len(results) == 6
    assert all(r["pass"] for r in results)
