"""Run configuration: a flat key = value format, diff-friendly."""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import mesh as meshmod
from .geometry import dziuk_surface


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    surface: str = "sphere"
    radius: float = 1.0
    major_radius: float = 0.8
    minor_radius: float = 0.2
    sector_angle: float = 2.0 * np.pi
    mesh_level: int = 2
    n_major: int = 64
    n_minor: int = 32
    m: int = 3
    eps0: float = 0.5
    tau0: float = 8e-4
    eps_factor: float = 1.0 / np.sqrt(2.0)
    tau_factor: float = 1.0 / np.sqrt(2.0)
    levels: int = 3
    seed: int = 0
    stop_tol: float = 1e-6
    max_steps: int = 500_000
    heat_rel_tol: float = 1e-10
    workers: int = 1
    out: str = "out"

    def validate(self):
        if self.surface not in ("sphere", "torus", "dziuk", "disk", "sector"):
            raise ConfigError(f"unknown surface {self.surface!r}")
        if self.m < 2:
            raise ConfigError("m must be at least 2")
        if self.eps0 <= 0 or self.tau0 <= 0:
            raise ConfigError("eps0 and tau0 must be positive")
        if not (0.0 < self.eps_factor <= 1.0 and 0.0 < self.tau_factor <= 1.0):
            raise ConfigError("shrink factors must lie in (0, 1]")
        if self.levels < 0 or self.mesh_level < 0:
            raise ConfigError("levels must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self

    def serialize(self):
        lines = ["# surfpart run configuration"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float):
                value = format(value, ".17g")
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def parse_config(text):
    """Parse the flat key = value format back into a RunConfig."""
    types = {f.name: f.type for f in fields(RunConfig)}
    casts = {"str": str, "float": float, "int": int}
    kwargs = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        try:
            kwargs[key] = casts[types[key]](value)
        except ValueError:
            raise ConfigError(f"line {ln}: bad value for {key!r}") from None
    return RunConfig(**kwargs)


def build_mesh(config):
    """Construct the surface mesh a configuration asks for."""
    kind = config.surface
    if kind == "sphere":
        return meshmod.generate_icosphere(config.mesh_level, config.radius)
    if kind == "torus":
        mesh = meshmod.generate_torus(config.major_radius, config.minor_radius,
                                      config.n_major, config.n_minor)
        for _ in range(config.mesh_level):
            mesh, _ = meshmod.refine(mesh)
        return mesh
    if kind == "dziuk":
        seed = meshmod.generate_icosphere(config.mesh_level)
        return meshmod.generate_implicit(seed, dziuk_surface())
    if kind == "disk":
        return meshmod.generate_disk(config.mesh_level, config.radius)
    if kind == "sector":
        return meshmod.generate_disk(config.mesh_level, config.radius,
                                     config.sector_angle)
    raise ConfigError(f"unknown surface {kind!r}")


def euler_characteristic(surface):
    return {"sphere": 2, "dziuk": 2, "torus": 0, "disk": 1, "sector": 1}[surface]
