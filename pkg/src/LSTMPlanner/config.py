""" config
    Package-wide settings and the shipped default planner profile.
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union
from warnings import warn

import yaml

from LSTMPlanner._utils import InitialisationWarning

logger = logging.getLogger(__name__)


def _threads_from_env() -> int:
    fallback = os.cpu_count() or 1
    value = os.getenv("LSTMP_THREADS")
    if value is None:
        return fallback
    try:
        threads = int(value)
    except ValueError:
        threads = 0
    if threads < 1:
        warn(
            f"Ignoring LSTMP_THREADS={value!r}, expected a positive integer",
            InitialisationWarning,
        )
        return fallback
    return threads


class LSTMPConfigContainer:
    _default_threads = _threads_from_env()
    _feasibility_tolerance = 1e-6

    @property
    def DEFAULT_THREADS(self) -> int:
        """Upper bound on worker threads used by batch runs"""
        return self._default_threads

    @DEFAULT_THREADS.setter
    def DEFAULT_THREADS(self, value: int):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ValueError(
                "{v!r} is not a valid thread count, expected an integer >= 1".format(
                    v=value
                )
            )
        self._default_threads = value

    @property
    def FEASIBILITY_TOLERANCE(self) -> float:
        """Maximum constraint violation accepted for a solution"""
        return self._feasibility_tolerance

    @FEASIBILITY_TOLERANCE.setter
    def FEASIBILITY_TOLERANCE(self, value: float):
        if not value > 0:
            raise ValueError(
                "{v!r} is not a valid tolerance, expected a positive number".format(
                    v=value
                )
            )
        self._feasibility_tolerance = float(value)


LSTMPConfig = LSTMPConfigContainer()


#: Shipped default profile, sampling time and weights of the highway setup.
DEFAULT_PROFILE: Dict[str, Any] = {
    "road": {"lane_width": 3.75, "length": 2000.0},
    "stf": {
        "N": 15,
        "t_d": 0.3,
        "w_n": 1e-2,
        "w_v": 1e-1,
        "R": [5e-4, 2e-3],
        "a_lon_min": -8.0,
        "a_lon_max": 5.0,
        "a_lat_max": 3.0,
        "alpha_l": -0.17,
        "alpha_r": 0.17,
        "t_lc_max": 2.7,
    },
    "ltf": {
        "lanes": 5,
        "w_g": 200.0,
        "w_safe": 1e-5,
        "t_f": 1e5,
        "T_max": 120.0,
        "ref_cost_sign": "corrected",
    },
    "traffic": {
        "M": 7,
        "merge_threshold": 15.0,
        "follow_gap": None,
        "lateral_margin": 0.3,
        "sv_position_margin": 0.5,
        "dv_lower": 0.0,
        "dv_upper": 0.0,
    },
    "coupling": {"eps_t": 1e-3, "eps_s": 1e-2},
    "solver": {
        "abs_gap": 1e-2,
        "rel_gap": 1e-9,
        "int_tol": 1e-6,
        "node_limit": 20000,
        "time_limit_ms": 300.0,
        "dive": True,
    },
    "mipdm": {"N": 10, "M": 3, "L": 5},
    "hastar": {
        "expansion_steps": 7,
        "accel_samples": 11,
        "lane_change_primitives": 11,
        "position_bins": 100,
        "velocity_bins": 20,
        "max_expansions": 50,
        "horizon_expansions": 3,
    },
    "sim": {"duration": 40.0, "follow_threshold": 15.0},
}

#: Experiment variants, SV velocity spread and number of considered lanes.
VARIANTS: Dict[str, Dict[str, Any]] = {
    "deterministic": {"traffic": {"dv_lower": 0.0, "dv_upper": 0.0}},
    "V0": {"traffic": {"dv_lower": 1.0, "dv_upper": 1.0}, "ltf": {"lanes": 5}},
    "V1": {"traffic": {"dv_lower": 1.0, "dv_upper": 1.0}, "ltf": {"lanes": 3}},
    "V2": {"traffic": {"dv_lower": 3.0, "dv_upper": 3.0}, "ltf": {"lanes": 5}},
}


def merge_profile(base: Mapping, overrides: Optional[Mapping]) -> Dict[str, Any]:
    """Recursively merge `overrides` into a copy of `base`

    Args:
        base (Mapping): profile to start from
        overrides (Mapping, optional): values taking precedence

    Returns:
        Dict: merged profile
    """
    merged = copy.deepcopy(dict(base))
    if not overrides:
        return merged
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_profile(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_profile(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping] = None,
    variant: Optional[str] = None,
) -> Dict[str, Any]:
    """Layer the default profile, a variant, a YAML file and explicit overrides

    Args:
        path (str, Path, optional): YAML file with a (partial) profile, either
            at top level or under a `profile` key
        overrides (Mapping, optional): values taking precedence over the file
        variant (str, optional): one of `VARIANTS`

    Returns:
        Dict: the resulting profile

    Raises:
        ValueError: unknown variant or malformed file
    """
    profile = merge_profile(DEFAULT_PROFILE, None)
    if variant is not None:
        if variant not in VARIANTS:
            raise ValueError(
                f"Unknown variant {variant!r}, expected one of {sorted(VARIANTS)}"
            )
        profile = merge_profile(profile, VARIANTS[variant])
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f) or {}
        if not isinstance(content, Mapping):
            raise ValueError(f"Profile file {path} must hold a mapping")
        if "profile" in content:
            content = content["profile"]
        logger.debug("Loaded profile overrides from %s", path)
        profile = merge_profile(profile, content)
    return merge_profile(profile, overrides)
