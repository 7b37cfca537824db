#!/usr/bin/env python3
"""Benchmark the numba kernels against the NumPy/Python fallback.

Runs whole episodes through both run_controls implementations on the same
inputs, checks they agree bit-for-bit, and prints episodes/second for each
backend plus the per-tick state machine for scale.

Usage: python benchmarks/bench_kernels.py [--episodes N]
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from conftest import forced_scenario  # noqa: E402

from trolleysim import kernels  # noqa: E402
from trolleysim.sim import Control, EpisodePhase, SimParams, init_values  # noqa: E402


def kernel_inputs(scenario, params):
    episode = init_values(scenario, params)
    sp = scenario.spawn
    c = scenario.corridor
    return episode.layout, (
        episode.layout.x,
        episode.layout.y,
        episode.layout.r,
        episode.layout.is_victim,
        sp.x,
        sp.y,
        sp.heading,
        sp.speed,
        sp.heading,
        c.x_min,
        c.x_max,
        c.y_end,
        params.dt,
        params.a_auto,
        params.v_max,
        params.omega_max,
        params.theta_max,
        params.vehicle_radius,
        params.t_max_ticks,
    )


def time_backend(fn, control_arrays, args):
    results = []
    start = time.perf_counter()
    for steers in control_arrays:
        results.append(fn(steers, *args))
    return time.perf_counter() - start, results


def time_per_tick(scenario, params, control_arrays):
    start = time.perf_counter()
    total_ticks = 0
    for steers in control_arrays:
        episode = init_values(scenario, params)
        i = 0
        while episode.phase is EpisodePhase.RUNNING:
            episode.run_tick(Control(int(steers[i])) if i < len(steers) else Control.NONE)
            i += 1
        total_ticks += episode.tick
    return time.perf_counter() - start, total_ticks


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=500)
    args = parser.parse_args()

    params = SimParams()
    scenario = forced_scenario(0)
    _layout, kargs = kernel_inputs(scenario, params)
    rng = random.Random(42)
    control_arrays = [
        np.array(
            [rng.choice((-1, 0, 1)) for _ in range(params.t_max_ticks)], dtype=np.int8
        )
        for _ in range(args.episodes)
    ]

    print(f"backend flag resolves to: {kernels.BACKEND}")
    print(f"{args.episodes} episodes, forced-row scenario, t_max={params.t_max_ticks}\n")

    py_time, py_results = time_backend(kernels.run_controls_py, control_arrays, kargs)
    print(f"python/numpy fallback : {py_time:8.3f} s  ({args.episodes / py_time:10.1f} episodes/s)")

    if kernels.NUMBA_AVAILABLE:
        # compile outside the timed region
        kernels.run_controls_jit(control_arrays[0], *kargs)
        jit_time, jit_results = time_backend(kernels.run_controls_jit, control_arrays, kargs)
        print(
            f"numba @njit kernels   : {jit_time:8.3f} s  ({args.episodes / jit_time:10.1f} episodes/s)"
        )
        print(f"speedup               : {py_time / jit_time:8.1f}x")
        mismatches = sum(a != b for a, b in zip(py_results, jit_results))
        print(f"bit-identical results : {'yes' if mismatches == 0 else f'NO ({mismatches} differ)'}")
        if mismatches:
            return 1
    else:
        print("numba @njit kernels   : unavailable (install numba or unset TROLLEYSIM_NUMBA=0)")

    tick_episodes = min(args.episodes, 50)
    tick_time, total_ticks = time_per_tick(scenario, params, control_arrays[:tick_episodes])
    print(
        f"per-tick state machine: {tick_time:8.3f} s for {tick_episodes} episodes "
        f"({total_ticks / tick_time:10.0f} ticks/s)"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
