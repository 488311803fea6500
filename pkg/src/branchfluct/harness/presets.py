"""Named reference experiments, each with a ``smoke`` and a ``full`` tier.

The YAML files under ``configs/`` in the repository are dumps of these
mappings; ``branchfluct simulate --preset NAME`` runs them directly.
"""

from __future__ import annotations

import copy

_LARGE = {"d": 2, "alpha": 0.5, "beta": 0.5, "V": 1.0, "intensity": 1.0}
_CRITICAL = {"d": 1, "alpha": 1.0 / 3.0, "beta": 0.5, "V": 1.0, "intensity": 1.0}
_LAPLACE = {"d": 1, "alpha": 1.5, "beta": 0.5, "V": 1.0, "intensity": 1.0}
_PHI = {"kind": "gaussian", "sigma": 1.0, "height": 1.0}
_T_VALUES = [0.2, 0.4, 0.6, 0.8, 1.0]

PRESETS = {
    "laplace-reference": {
        "smoke": {
            "kind": "laplace-triangle", "model": _LAPLACE, "expect_regime": "below-intermediate", "T": [10.0],
            "dt": 0.1, "replicas": 20000, "block_size": 500, "seed": 2024, "test_function": _PHI,
            "time_profile": {"kind": "constant", "value": 1.0}, "norming": {"power": 2.0 / 3.0},
            "box": {"bias_budget": 1e-3},
            "options": {"spot_points": [[0.0, 0], [1.5, 20], [-3.0, 50], [0.5, 80], [0.0, 95]],
                        "spot_replicas": 200000},
            "assertions": {"laplace_triangle": True, "spot_checks": True},
        },
    },
    "limits-large": {
        "smoke": {
            "kind": "deterministic-limits", "model": _LARGE, "expect_regime": "large", "T": [1e2, 1e3, 1e4],
            "test_function": _PHI, "time_profile": {"kind": "constant", "value": 1.0},
            "options": {"limit": "I2"}, "assertions": {"limits_gap": {"final_below": 0.1}},
        },
    },
    "limits-critical": {
        "smoke": {
            "kind": "deterministic-limits", "model": _CRITICAL, "expect_regime": "critical", "T": [1e2, 1e3, 1e4],
            "test_function": _PHI, "options": {"limit": "critical-log"},
            "assertions": {"limits_gap": {"final_below": 0.1}},
        },
    },
    "fluctuation-large": {
        "smoke": {
            "kind": "fluctuation-limit", "model": _LARGE, "expect_regime": "large", "T": [16.0, 64.0, 256.0],
            "dt": 0.25, "replicas": 1000, "block_size": 100, "seed": 11, "test_function": _PHI,
            "t_values": _T_VALUES, "norming": {"power": 2.0 / 3.0}, "box": {"half_width": [8.0, 12.0, 16.0]},
            "stats": {"n_resample": 200},
            "assertions": {"cf_distance_decreasing": True,
                           "increments_independent": {"windows": [[0.2, 0.4], [0.6, 0.8]]}},
        },
        "full": {
            "kind": "fluctuation-limit", "model": _LARGE, "expect_regime": "large", "T": [16.0, 64.0, 256.0],
            "dt": 0.25, "replicas": 10000, "block_size": 100, "seed": 11, "test_function": _PHI,
            "t_values": _T_VALUES, "norming": {"power": 2.0 / 3.0}, "box": {"half_width": [8.0, 12.0, 16.0]},
            "assertions": {"cf_distance_decreasing": True, "cf_below_threshold": True, "index_range": [1.35, 1.65],
                           "increments_independent": {"windows": [[0.2, 0.4], [0.6, 0.8]]}},
        },
    },
    "fluctuation-critical": {
        "smoke": {
            "kind": "fluctuation-limit", "model": _CRITICAL, "expect_regime": "critical", "T": [16.0, 64.0, 256.0],
            "dt": 0.25, "replicas": 1000, "block_size": 100, "seed": 12, "test_function": _PHI,
            "t_values": _T_VALUES, "norming": {"t_log_power": 2.0 / 3.0}, "box": {"half_width": 200.0},
            "stats": {"n_resample": 200},
            "assertions": {"cf_distance_decreasing": True},
        },
        "full": {
            "kind": "fluctuation-limit", "model": _CRITICAL, "expect_regime": "critical", "T": [16.0, 64.0, 256.0],
            "dt": 0.25, "replicas": 10000, "block_size": 100, "seed": 12, "test_function": _PHI,
            "t_values": _T_VALUES, "norming": {"t_log_power": 2.0 / 3.0}, "box": {"half_width": 200.0},
            "assertions": {"cf_distance_decreasing": True, "cf_below_threshold": True, "index_range": [1.35, 1.65],
                           "scale_within": 0.15},
        },
    },
    "tail-bound": {
        "smoke": {
            "kind": "tail-bound", "model": _LARGE, "expect_regime": "large", "T": [4.0, 16.0, 64.0], "dt": 0.1,
            "replicas": 2000, "block_size": 250, "seed": 13, "test_function": _PHI,
            "t_values": [0.5, 0.525, 0.55, 0.6, 0.7], "norming": {"power": 2.0 / 3.0}, "box": {"half_width": 10.0},
            "options": {"increments": [[0.5, 0.525], [0.5, 0.55], [0.5, 0.6], [0.5, 0.7]]},
            "stats": {"delta_grid": [0.1, 0.3, 0.5]},
            "assertions": {"tail_envelope": {"min_slope": 0.9}},
        },
        "full": {
            "kind": "tail-bound", "model": _LARGE, "expect_regime": "large", "T": [4.0, 16.0, 64.0], "dt": 0.1,
            "replicas": 20000, "block_size": 250, "seed": 13, "test_function": _PHI,
            "t_values": [0.5, 0.525, 0.55, 0.6, 0.7], "norming": {"power": 2.0 / 3.0}, "box": {"half_width": 10.0},
            "options": {"increments": [[0.5, 0.525], [0.5, 0.55], [0.5, 0.6], [0.5, 0.7]]},
            "stats": {"delta_grid": [0.1, 0.3, 0.5]},
            "assertions": {"tail_envelope": {"min_slope": 0.9}},
        },
    },
    "calibration": {
        "smoke": {
            "kind": "calibration", "model": _LAPLACE, "seed": 14,
            "options": {"index": 1.5, "rate": 1.0, "n": 10000, "reps": 1000, "z_max": 2.0,
                        "n_independence": 10000, "reps_independence": 400},
            "stats": {"n_resample": 400, "n_z": 16},
            "assertions": {"calibration_size": {"tolerance": 0.02}},
        },
        "full": {
            "kind": "calibration", "model": _LAPLACE, "seed": 14,
            "options": {"index": 1.5, "rate": 1.0, "n": 100000, "reps": 1000, "z_max": 2.0,
                        "n_independence": 100000, "reps_independence": 200},
            "stats": {"n_resample": 400, "n_z": 16},
            "assertions": {"calibration_size": {"tolerance": 0.02}},
        },
    },
}


def preset(name: str, tier: str = "smoke") -> dict:
    """A deep copy of preset ``name``; tiers missing from a preset fall back to ``smoke``."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    tiers = PRESETS[name]
    return copy.deepcopy(dict(tiers.get(tier, tiers["smoke"]), name=name))
