"""Experiment configuration: file, CLI flags and PATHSPACE_ environment"""
import logging
import os
from typing import Any, Dict, List, Literal, Optional

from dotenv import dotenv_values
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from harness.errors import ConfigError

logger = logging.getLogger(__name__)


class ExperimentConfig(BaseSettings):
    """
    Settings for one run of the check suite.

    Sizes left unset fall back to each check's own defaults. Environment
    variables PATHSPACE_<FIELD> override everything else.
    """

    model_config = SettingsConfigDict(env_prefix="PATHSPACE_", extra="ignore")

    model: Literal["sphere", "group"] = "sphere"
    horizon: float = Field(1.0, gt=0)
    steps: Optional[int] = Field(None, gt=0)
    paths: Optional[int] = Field(None, gt=0)
    resamples: Optional[int] = Field(None, gt=0)
    base_paths: Optional[int] = Field(None, gt=0)
    seeds: Optional[int] = Field(None, gt=0)
    levels: Optional[int] = Field(None, gt=0)
    seed: int = Field(20240101, ge=0)
    checks: str = ""
    tol_scale: float = Field(1.0, gt=0)
    z_max: float = Field(4.0, gt=0)
    pass_rate: float = Field(0.95, gt=0, le=1)
    workers: int = Field(1, gt=0)
    chunk_size: int = Field(256, gt=0)
    out: str = "results"
    format: Literal["json", "csv"] = "json"

    @field_validator("checks", mode="before")
    @classmethod
    def join_checks(cls, v):
        if isinstance(v, (list, tuple)):
            return ",".join(v)
        return v

    def check_ids(self) -> List[str]:
        """Comma-separated checks as a list, empty when unset"""
        return [c.strip() for c in self.checks.split(",") if c.strip()]

    @classmethod
    def settings_customise_sources(cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings):
        # environment beats explicit values (file and CLI)
        return env_settings, init_settings

    def size(self, name: str, default: int) -> int:
        value = getattr(self, name)
        return default if value is None else value

    def tol(self, base: float) -> float:
        return base * self.tol_scale

    def echo(self) -> Dict[str, Any]:
        return self.model_dump()


def read_config_file(path: str) -> Dict[str, Any]:
    """Flat key = value file; keys are case-insensitive, empty values ignored"""
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return {k.strip().lower(): v for k, v in values.items() if v not in (None, "")}


def load_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """
    Merge the config file with CLI overrides (None means not given).

    Raises:
        ConfigError: missing file
        pydantic.ValidationError: invalid values
    """
    merged: Dict[str, Any] = read_config_file(path) if path else {}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    config = ExperimentConfig(**merged)
    logger.debug(f"Loaded config: {config.model_dump()}")
    return config
