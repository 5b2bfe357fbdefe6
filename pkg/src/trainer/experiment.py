"""
Schema-versioned experiment configuration: every sub-config of a run in one
JSON document. Unknown keys are rejected at every level.
"""
import json
import os
from typing import Any, Dict

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config import Config
from src.lora.inject import AdaptationConfig
from src.losses.reprojection import ReprojectionLossConfig
from src.model.decoder import DecoderConfig
from src.model.encoder import EncoderConfig
from src.model.pose_net import PoseNetConfig
from src.synth.scenes import SceneConfig
from src.trainer.config import EvalConfig, TrainConfig
from src.utils.errors import ConfigurationError
from src.utils.validators import validate_file_exists


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: int = Config.SCHEMA_VERSION
    scene: SceneConfig = Field(default_factory=SceneConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    pose: PoseNetConfig = Field(default_factory=PoseNetConfig)
    adaptation: AdaptationConfig = Field(default_factory=AdaptationConfig)
    loss: ReprojectionLossConfig = Field(default_factory=ReprojectionLossConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @field_validator("schema_version")
    @classmethod
    def _check_schema(cls, version: int) -> int:
        if version != Config.SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version}, expected {Config.SCHEMA_VERSION}")
        return version

    @model_validator(mode="after")
    def _check_resolution(self):
        if (self.scene.width, self.scene.height) != (self.encoder.image_width, self.encoder.image_height):
            raise ValueError(
                f"scene resolution {self.scene.width}x{self.scene.height} differs from encoder input "
                f"{self.encoder.image_width}x{self.encoder.image_height}"
            )
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)

    def with_overrides(self, **sections: Dict[str, Any]) -> "ExperimentConfig":
        """Copy with some section fields replaced, re-validated."""
        data = self.model_dump(mode="json")
        for section, values in sections.items():
            data[section] = {**data[section], **values}
        scene = sections.get("scene", {})
        # derived scene fields are re-filled from the new frame count and resolution
        if "n_frames" in scene and "motion" not in scene:
            data["scene"]["motion"] = None
        if ("width" in scene or "height" in scene) and "intrinsics" not in scene:
            data["scene"]["intrinsics"] = None
        return build_experiment_config(data)


def _field_path(error: Dict) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def build_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigurationError(f"Invalid config field '{_field_path(first)}': {first['msg']}") from e
    except TypeError as e:
        raise ConfigurationError(f"Invalid config: {e}") from e


def load_experiment_config(file_path: str) -> ExperimentConfig:
    validate_file_exists(file_path)
    with open(file_path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config {file_path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config {file_path} must hold a JSON object")
    return build_experiment_config(data)


def save_experiment_config(config: ExperimentConfig, file_path: str):
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(config.to_json())
