"""Smoke test for the wildfire_py extension module.

Build and install with `pip install ./crates/py` (maturin backend), or put a
built `wildfire_py` shared library on PYTHONPATH, then run this script.
"""

import json
import math

import wildfire_py as wf


def main():
    scenario = wf.Scenario.desk()
    assert scenario.aircraft_count == 2
    restored = wf.Scenario.from_json(scenario.to_json())
    assert restored.to_json() == scenario.to_json()

    grid = wf.FireGrid(7, 7, 10.0, fuel=10.0)
    assert grid.ignite(3, 3)
    p = grid.ignition_probability(3, 4)
    assert abs(p - 0.09) < 1e-12, p
    assert grid.ignition_probability(0, 0) == 0.0
    nxt = grid.step(seed=1)
    assert nxt.is_burning(3, 3) and abs(nxt.fuel(3, 3) - 9.0) < 1e-12

    # A full circle at 30 degrees of bank closes on itself.
    phi = math.radians(30.0)
    plane = wf.Aircraft(0.0, 0.0, 0.0, phi)
    period = 2.0 * math.pi * 20.0 / (9.81 * math.tan(phi))
    x, y, _, _ = plane.integrate(period).pose
    assert math.hypot(x, y) < 1e-6

    obs = wf.observe(grid, wf.Aircraft(35.0, 5.0, math.pi / 2), range_bins=10, angle_bins=8)
    assert len(obs) == 10 and len(obs[0]) == 8

    world = wf.World(scenario, 3)
    total, done = 0.0, False
    while not done:
        _, reward, done = world.step([1, 0])
        total += reward
    assert world.step_index == scenario.horizon_steps

    record = json.loads(wf.run_episode(scenario, "random", 5))
    assert record["controller"] == "random"
    mean, stderr, scores = wf.evaluate(scenario, "random", 3, 5)
    assert len(scores) == 3 and abs(mean - sum(scores) / 3) < 1e-9

    net, curve = wf.train(scenario, seed=2, iterations=0)
    assert curve == [] and net.image_shape == [10, 8, 1]
    action = net.act(wf.World(scenario, 1), 0)
    assert action in (0, 1)

    print("smoke test passed: episode score %.1f, random mean %.1f +/- %.1f" % (total, mean, stderr))


if __name__ == "__main__":
    main()
