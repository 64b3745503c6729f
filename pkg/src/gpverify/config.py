"""Run configuration: a YAML document validated by pydantic.

Precedence is file < environment (``GPVERIFY_*``) < command-line flags.
Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .harness import FamilySpec
from .slices import Family, SurfaceSpec

ENV_PREFIX = "GPVERIFY_"
DEFAULT_RESOLUTION = (64, 128)
TOLERANCE_KEYS = ("identity", "inequality")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ConstantCfg(_Strict):
    kind: Literal["constant"]
    value: float


class HarmonicsCfg(_Strict):
    kind: Literal["harmonics"]
    base: float
    terms: list[tuple[int, int, float]] = []
    relative: bool = False


class EllipsoidCfg(_Strict):
    kind: Literal["ellipsoid"]
    axes: tuple[float, float, float]


class TabulatedCfg(_Strict):
    kind: Literal["tabulated"]
    path: str


ProfileCfg = Annotated[
    Union[ConstantCfg, HarmonicsCfg, EllipsoidCfg, TabulatedCfg], Field(discriminator="kind")
]


class SurfaceCfg(_Strict):
    family: Family
    u: Optional[ProfileCfg] = None
    tau: Optional[ProfileCfg] = None
    sigma_hat: Optional[ProfileCfg] = None
    lam: Optional[float] = None

    @field_validator("u", "tau", "sigma_hat", mode="before")
    @classmethod
    def _bare_number_is_constant(cls, v):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return {"kind": "constant", "value": float(v)}
        return v


class FamilyCfg(_Strict):
    family: Family
    base_radius: float = 3.0
    l_max: int = Field(4, ge=1)
    amplitude: float = Field(0.1, ge=0)
    tau_amplitude: float = Field(0.1, ge=0)
    count: int = Field(100, ge=1)


class RunConfig(_Strict):
    command: Literal["verify", "family", "converge", "identities"]
    m: float = Field(1.0, ge=0)
    lambdas: list[float] = [1.0]
    surface: Optional[SurfaceCfg] = None
    family: Optional[FamilyCfg] = None
    resolutions: list[tuple[int, int]] = [DEFAULT_RESOLUTION]
    seed: int = 0
    out: str = "results"
    threads: int = Field(1, ge=1)
    tolerances: dict[str, float] = {}
    fault_injection: Optional[Literal["christoffel"]] = None

    @field_validator("lambdas")
    @classmethod
    def _positive_lambdas(cls, v):
        if not v or any(x <= 0 for x in v):
            raise ValueError("lambdas must be a nonempty list of positive numbers")
        return v

    @field_validator("tolerances")
    @classmethod
    def _known_tolerances(cls, v):
        bad = set(v) - set(TOLERANCE_KEYS)
        if bad:
            raise ValueError(f"unknown tolerance keys {sorted(bad)}; allowed {TOLERANCE_KEYS}")
        return v

    @model_validator(mode="after")
    def _command_inputs(self):
        if self.command in ("verify", "converge") and self.surface is None:
            raise ValueError(f"command '{self.command}' needs a 'surface' section")
        if self.command == "family" and self.family is None:
            raise ValueError("command 'family' needs a 'family' section")
        if self.command == "converge" and len(self.resolutions) < 3:
            raise ValueError("command 'converge' needs at least three resolutions")
        return self

    # -- derived objects -------------------------------------------------

    def tolerance(self, key: str) -> float:
        from .harness import IDENTITY_TOL, INEQUALITY_TOL

        defaults = {"identity": IDENTITY_TOL, "inequality": INEQUALITY_TOL}
        return self.tolerances.get(key, defaults[key])

    def surface_spec(self) -> SurfaceSpec:
        s = self.surface
        data = s.model_dump(exclude_none=True)
        data["m"] = self.m
        if s.family is Family.UMBILICAL_SLICE and s.lam is None:
            data["lam"] = self.lambdas[0]
        return SurfaceSpec.from_dict(data)

    def family_spec(self) -> FamilySpec:
        f = self.family
        return FamilySpec(
            family=f.family,
            base_radius=f.base_radius,
            l_max=f.l_max,
            amplitude=f.amplitude,
            count=f.count,
            seed=self.seed,
            m=self.m,
            lam=self.lambdas[0],
            tau_amplitude=f.tau_amplitude,
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)


def _resolve_paths(data: dict, base: Path) -> None:
    surface = data.get("surface") or {}
    for key in ("u", "tau", "sigma_hat"):
        prof = surface.get(key)
        if isinstance(prof, dict) and prof.get("kind") == "tabulated":
            p = Path(prof["path"])
            if not p.is_absolute():
                prof["path"] = str((base / p).resolve())


def parse_resolution(text: str) -> tuple[int, int]:
    parts = text.replace("x", ",").split(",")
    if len(parts) != 2:
        raise ValueError(f"resolution must look like T,P; got {text!r}")
    return int(parts[0]), int(parts[1])


def env_overrides(environ=None) -> dict:
    env = os.environ if environ is None else environ
    out: dict = {}
    if f"{ENV_PREFIX}THREADS" in env:
        out["threads"] = int(env[f"{ENV_PREFIX}THREADS"])
    if f"{ENV_PREFIX}SEED" in env:
        out["seed"] = int(env[f"{ENV_PREFIX}SEED"])
    if f"{ENV_PREFIX}OUT" in env:
        out["out"] = env[f"{ENV_PREFIX}OUT"]
    if f"{ENV_PREFIX}RESOLUTIONS" in env:
        out["resolutions"] = [parse_resolution(r) for r in env[f"{ENV_PREFIX}RESOLUTIONS"].split(";") if r]
    return out


def load_config(path: str | Path | None, command: str | None = None,
                overrides: dict | None = None, environ=None) -> RunConfig:
    data: dict = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        loaded = yaml.safe_load(path.read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        data = loaded
        base = path.parent
    if command is not None:
        if "command" in data and data["command"] != command:
            raise ValueError(f"config names command {data['command']!r}, CLI asked for {command!r}")
        data["command"] = command
    data.update(env_overrides(environ))
    for key, value in (overrides or {}).items():
        if key == "tolerances":
            data.setdefault("tolerances", {}).update(value)
        else:
            data[key] = value
    _resolve_paths(data, base)
    return RunConfig.model_validate(data)
