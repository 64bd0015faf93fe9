import math

import numpy as np
import pytest

import occball


def test_poles_and_zeros():
    plant = occball.linearize(occball.PhysicalParams(0.9))
    q = 0.02 * math.sqrt(1.1 * 9.81)
    got = sorted(p.real for p in occball.poles(plant))
    assert np.allclose(got, sorted([1.0, 1.0, 1.0 + q, 1.0 - q]), atol=1e-7)
    r = 0.02 * math.sqrt(9.81 / 0.1)
    zeros = sorted(z.real for z in occball.transmission_zeros(plant))
    assert np.allclose(zeros, [1.0 - r, 1.0 + r], atol=1e-9)


def test_limit_bound():
    p, q = 1 + 0.02 * math.sqrt(1.1 * 9.81), 1 + 0.02 * math.sqrt(9.81 / 0.3)
    bound = occball.limit_bound(occball.linearize(occball.PhysicalParams(0.7)))
    assert abs(bound - abs((p * q - 1) / (p - q))) < 1e-6
    assert occball.limit_bound(occball.linearize(occball.PhysicalParams(1.0))) == 1.0


def test_dare_scalar():
    x = occball.solve_dare(np.array([[2.0]]), np.eye(1), np.eye(1), np.eye(1))
    assert abs(x[0, 0] - (2 + math.sqrt(5))) < 1e-10


def test_step_and_accelerations():
    params = occball.PhysicalParams()
    hdd, tdd = occball.accelerations(params, np.array([0, 0, 0.01, 0]), 0.0)
    assert abs(hdd + 0.0098098) < 1e-6 and abs(tdd - 0.107908) < 1e-6
    nxt = occball.step(params, np.array([0, 0, 0.01, 0]), 0.0)
    assert abs(nxt[3] - 0.00215816) < 1e-8


def test_simulate_zero_controller():
    sensor = occball.SensorSpec(occball.SensorTier.noise_free, 1.0)
    rest = occball.simulate(occball.PhysicalParams(), sensor, np.zeros(4))
    assert rest["steps"] == 500 and rest["success"]
    tilted = occball.simulate(occball.PhysicalParams(), sensor, np.array([0, 0, math.radians(5), 0]))
    assert tilted["steps"] < 500
    assert tilted["states"].shape[1] == 4


def test_identify_synthesize_evaluate():
    params = occball.PhysicalParams(1.0)
    sensor = occball.SensorSpec(occball.SensorTier.noise_free, 1.0)
    model = occball.identify(params, sensor, 3000, seed=1, method="fullstate")
    syn = occball.synthesize(model, 5e-3)
    assert syn["feasible"]
    reward, success = occball.evaluate(syn["controller"], params, sensor, episodes=5, seed=2)
    assert 0 <= success <= 1 and reward > 100
    assert occball.max_stabilized_angle(syn["controller"], params, sensor, 0.5) > 1.0
    assert occball.max_stabilized_angle(None, params, sensor) == 0.0


def test_history_and_errors():
    assert list(occball.make_history_state([1, 2, 3, 4], 3)) == [2, 3, 4]
    with pytest.raises(ValueError):
        occball.linearize(occball.PhysicalParams(1.5))
    with pytest.raises(occball.Error):
        occball.hinf_norm(occball.linearize(occball.PhysicalParams()))


def test_tiny_training_is_deterministic():
    params = occball.PhysicalParams()
    sensor = occball.SensorSpec()
    kw = dict(episodes=3, history_len=4, hidden=[8], batch=16, random_steps=40, seed=4)
    a = occball.train_sac(params, sensor, **kw)
    b = occball.train_sac(params, sensor, **kw)
    assert a == b and len(a[0]) == 3


def test_sweep_json():
    spec = '{"method": "hinf_fullstate", "fixations": [1.0], "tiers": ["noise_free"], ' \
           '"budgets": [1000], "n_repeats": 1, "n_eval_episodes": 2, "angle_tol_deg": 0.5}'
    runs = occball.run_sweep(spec)
    assert len(runs) == 1 and runs[0]["feasible"]
