"""Continuum arm kinematics and layered path planning."""

import json

from ._core import (
    Cache,
    CacheError,
    CarmError,
    InvariantError,
    SchemaError,
    curve_params,
    gen_scenarios,
    is_valid_actuation,
    plan_machine,
    skeleton_points,
    third_actuator,
    tip_position,
    validate_machine,
)

__all__ = [
    "Cache",
    "CacheError",
    "CarmError",
    "InvariantError",
    "SchemaError",
    "curve_params",
    "gen_scenarios",
    "is_valid_actuation",
    "plan",
    "skeleton_points",
    "third_actuator",
    "tip_position",
    "validate",
]


def plan(scene, cache, workers=1):
    """Plan a scene (JSON text or dict); returns the machine record as a dict."""
    if not isinstance(scene, str):
        scene = json.dumps(scene)
    return json.loads(plan_machine(scene, cache, workers))


def validate(scene, record, cache):
    """Re-check a successful record; returns {check name: (passed, detail)}."""
    if not isinstance(scene, str):
        scene = json.dumps(scene)
    if not isinstance(record, str):
        record = json.dumps(record)
    return {name: (ok, detail) for name, ok, detail in validate_machine(scene, record, cache)}
