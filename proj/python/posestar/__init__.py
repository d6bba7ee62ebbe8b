"""Anatomy-aware human mask synthesis from diffusion attention."""

from ._posestar import (
    EmptyRegionError,
    InputError,
    NoTokensError,
    ParamError,
    PosestarError,
    ShapeError,
    iou,
    parse_instruction,
    read_astd,
    run_fixture,
    synth,
    write_astd,
)

__all__ = [
    "EmptyRegionError",
    "InputError",
    "NoTokensError",
    "ParamError",
    "PosestarError",
    "ShapeError",
    "iou",
    "parse_instruction",
    "read_astd",
    "run_fixture",
    "synth",
    "write_astd",
]
