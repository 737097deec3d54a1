"""Balloon-animal generation toolkit: skeleton editing, balloon meshing,
conditioning renders and two-stage radiance-grid optimisation."""

from ._core import (
    BalloonShape,
    BodyPartConfig,
    Camera,
    ConfigError,
    ContractError,
    DegenerateBoneError,
    DomainError,
    Error,
    NoiseSchedule,
    NumericError,
    ParseError,
    Pipeline,
    RadianceGrid,
    Skeleton,
    anneal_timestep,
    control_scale,
    curate,
    guidance_scale,
    render_pose,
)

__all__ = [
    "BalloonShape",
    "BodyPartConfig",
    "Camera",
    "ConfigError",
    "ContractError",
    "DegenerateBoneError",
    "DomainError",
    "Error",
    "NoiseSchedule",
    "NumericError",
    "ParseError",
    "Pipeline",
    "RadianceGrid",
    "Skeleton",
    "anneal_timestep",
    "control_scale",
    "curate",
    "guidance_scale",
    "render_pose",
]
