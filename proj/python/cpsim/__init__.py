"""Python bindings for the collaborative perception simulator."""

import json

from ._core import (
    BITS_PER_KB,
    CpsimError,
    aoi,
    aopt_cycle,
    calibrate,
    capacity,
    default_config,
    estimate_pose,
    fit_proxy,
    fuse,
    median_link,
    normalize_config,
    optimize,
    phase_occupancies,
    run_sweep,
    simulate,
    sweep_presets,
)


def config(**sections):
    """Default config with top-level sections overridden, as JSON text.

    >>> cfg = config(master_seed=7, age={"capacity_kbps": 200})
    """
    base = json.loads(default_config())
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key].update(value)
        else:
            base[key] = value
    return normalize_config(json.dumps(base))


__all__ = [
    "BITS_PER_KB",
    "CpsimError",
    "aoi",
    "aopt_cycle",
    "calibrate",
    "capacity",
    "config",
    "default_config",
    "estimate_pose",
    "fit_proxy",
    "fuse",
    "median_link",
    "normalize_config",
    "optimize",
    "phase_occupancies",
    "run_sweep",
    "simulate",
    "sweep_presets",
]
