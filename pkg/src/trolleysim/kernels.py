"""Hot numeric kernels: per-tick vehicle update, collision scan, and a
whole-episode batch runner.

Two interchangeable backends produce bit-identical results:

* numba ``@njit`` compiled kernels (default when numba imports), and
* a plain Python / vectorized NumPy fallback.

Selection is via the ``TROLLEYSIM_NUMBA`` env var: ``0/false/off`` forces
the fallback, ``1/true/on`` requires numba (warns and falls back if it is
missing), unset picks numba when available. Both paths share one source
per kernel, so the simulation's update equations exist in exactly one
place. ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np


def _read_flag() -> bool | None:
    raw = os.environ.get("TROLLEYSIM_NUMBA", "").strip().lower()
    if raw in ("0", "false", "off", "no"):
        return False
    if raw in ("1", "true", "on", "yes"):
        return True
    return None


_WANTED = _read_flag()
NUMBA_AVAILABLE = False
if _WANTED is not False:
    try:
        from numba import njit

        NUMBA_AVAILABLE = True
    except ImportError:
        if _WANTED is True:
            warnings.warn("TROLLEYSIM_NUMBA=1 but numba is not importable; using python backend")

BACKEND = "numba" if NUMBA_AVAILABLE else "python"


def _tick_update_impl(x, y, heading, speed, steer, heading0, dt, a_auto, v_max, omega_max, theta_max):
    """One fixed-timestep vehicle update. Operation order is the contract:
    accelerate (capped), steer (heading clamped around heading0), displace
    with the new speed and heading, report the velocity-delta acceleration.
    """
    speed1 = speed + a_auto * dt
    if speed1 > v_max:
        speed1 = v_max
    heading1 = heading + steer * omega_max * dt
    lo = heading0 - theta_max
    hi = heading0 + theta_max
    if heading1 < lo:
        heading1 = lo
    if heading1 > hi:
        heading1 = hi
    sin1 = math.sin(heading1)
    cos1 = math.cos(heading1)
    x1 = x + speed1 * dt * sin1
    y1 = y + speed1 * dt * cos1
    ax = (speed1 * sin1 - speed * math.sin(heading)) / dt
    ay = (speed1 * cos1 - speed * math.cos(heading)) / dt
    return x1, y1, heading1, speed1, ax, ay


def _nearest_contact_impl(actor_x, actor_y, actor_r, x, y, vehicle_r):
    """Index of the nearest actor in contact (center distance <= radius sum),
    -1 if none. Arrays are pre-sorted by actor name, so equal-distance ties
    resolve to the ascending name."""
    best = -1
    best_d2 = 0.0
    for i in range(actor_x.shape[0]):
        dx = actor_x[i] - x
        dy = actor_y[i] - y
        d2 = dx * dx + dy * dy
        reach = vehicle_r + actor_r[i]
        if d2 <= reach * reach and (best == -1 or d2 < best_d2):
            best = i
            best_d2 = d2
    return best


def nearest_contact_np(actor_x, actor_y, actor_r, x, y, vehicle_r):
    """Vectorized twin of the contact scan; bit-identical result."""
    if actor_x.shape[0] == 0:
        return -1
    dx = actor_x - x
    dy = actor_y - y
    d2 = dx * dx + dy * dy
    reach = vehicle_r + actor_r
    hit = d2 <= reach * reach
    if not hit.any():
        return -1
    return int(np.argmin(np.where(hit, d2, np.inf)))


def _make_run_controls(tick_update, nearest_contact):
    def run_controls(
        steers,
        actor_x,
        actor_y,
        actor_r,
        is_victim,
        x,
        y,
        heading,
        speed,
        heading0,
        x_min,
        x_max,
        y_end,
        dt,
        a_auto,
        v_max,
        omega_max,
        theta_max,
        vehicle_r,
        t_max_ticks,
    ):
        """Run a whole episode against a precomputed steer array (int8 of
        -1/0/+1, padded with 0 past its end). Replicates the per-tick state
        machine: victim contact ends the episode, any other contact resets
        heading to heading0 and clamps the pose back inside the corridor.

        Returns (end_tick, hit_index, impulse_accum, x, y, heading, speed);
        hit_index is -1 for a timeout.
        """
        accum = 0.0
        tick = 0
        n = steers.shape[0]
        while True:
            steer = 0.0
            if tick < n:
                steer = float(steers[tick])
            x, y, heading, speed, _ax, _ay = tick_update(
                x, y, heading, speed, steer, heading0, dt, a_auto, v_max, omega_max, theta_max
            )
            tick += 1
            hit = nearest_contact(actor_x, actor_y, actor_r, x, y, vehicle_r)
            if hit >= 0 and is_victim[hit]:
                accum += speed
                return tick, hit, accum, x, y, heading, speed
            touched = hit >= 0
            if not touched:
                touched = x - vehicle_r < x_min or x + vehicle_r > x_max or y + vehicle_r >= y_end
            if touched:
                accum += speed
                heading = heading0
                if x < x_min + vehicle_r:
                    x = x_min + vehicle_r
                if x > x_max - vehicle_r:
                    x = x_max - vehicle_r
                if y > y_end - vehicle_r:
                    y = y_end - vehicle_r
            if tick >= t_max_ticks:
                return tick, -1, accum, x, y, heading, speed

    return run_controls


tick_update_py = _tick_update_impl
nearest_contact_py = _nearest_contact_impl
run_controls_py = _make_run_controls(_tick_update_impl, nearest_contact_np)

run_controls_jit = None
if NUMBA_AVAILABLE:
    tick_update_jit = njit(cache=True)(_tick_update_impl)
    nearest_contact_jit = njit(cache=True)(_nearest_contact_impl)
    run_controls_jit = njit(_make_run_controls(tick_update_jit, nearest_contact_jit))
    tick_update = tick_update_jit
    nearest_contact = nearest_contact_jit
    run_controls = run_controls_jit
else:
    tick_update = _tick_update_impl
    nearest_contact = nearest_contact_np
    run_controls = run_controls_py
