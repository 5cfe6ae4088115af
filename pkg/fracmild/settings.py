from os import environ
from pathlib import Path
from typing import Any, Literal

import tomlkit
from pydantic import BaseModel, BaseSettings, validator

from fracmild import __COMMIT__, __VERSION__

DEFAULT_CONFIG_HOME = (
    Path.home() / environ.get("XDG_CONFIG_HOME", ".config") / "fracmild"
)


class Settings(BaseSettings):
    config_file: str = "config.toml"
    config_home: Path = DEFAULT_CONFIG_HOME

    @property
    def config_path(self) -> Path:
        return self.config_home / self.config_file

    class Config:
        env_file_encoding = "utf-8"
        env_prefix = "fracmild_"


config_settings = Settings()


def load_config_file(settings: BaseSettings) -> dict[str, Any]:
    encoding = settings.__config__.env_file_encoding
    config_file = config_settings.config_path
    if not config_file.exists():
        return {}
    return tomlkit.loads(config_file.read_text(encoding)).unwrap()


class SolverSettings(BaseModel):
    h: float = 1 / 256
    tol: float = 1e-10
    max_iter: int = 50
    quad_refine: int = 4


class OracleSettings(BaseModel):
    h_list: list[float] = [1 / 64, 1 / 128, 1 / 256, 1 / 512]
    picard_inner: int = 100
    tol_inner: float = 1e-14
    # gaps must shrink at least this much per halving of h
    min_ratio: float = 1.5
    # gaps below this count as agreement whatever the ratio
    exact_gap: float = 1e-12

    @validator("h_list")
    def check_h_list(cls, value: list[float]) -> list[float]:
        if not value or any(h <= 0 for h in value):
            raise ValueError("h_list needs positive steps")
        return sorted(value, reverse=True)


class HypothesisSettings(BaseModel):
    bound_points: int = 1000
    bound_margin: float = 0.05
    estimate_samples: int = 256
    estimate_seed: int = 0


class ResidualSettings(BaseModel):
    threshold: float = 0.05
    interior: float = 0.1


class ReportSettings(BaseModel):
    output: Literal["json", "rich"] = "rich"
    out_dir: Path = Path(".")


class FracMildSettings(Settings):
    solver: SolverSettings = SolverSettings()
    oracle: OracleSettings = OracleSettings()
    hypotheses: HypothesisSettings = HypothesisSettings()
    residual: ResidualSettings = ResidualSettings()
    report: ReportSettings = ReportSettings()
    log_level: str = "WARNING"

    version: str = __VERSION__
    commit: str = __COMMIT__

    class Config:
        env_file_encoding = "utf-8"
        env_prefix = "fracmild_"
        env_nested_delimiter = "__"

        @classmethod
        def customise_sources(
            cls,
            init_settings,
            env_settings,
            file_secret_settings,
        ):
            del file_secret_settings
            return (
                init_settings,
                env_settings,
                load_config_file,
            )
