from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = 1e-4
    # counted in epochs
    lr_decay_every: int = 10
    lr_decay_factor: float = 0.1
    epochs: int = 50
    batch_size: int = 4
    seed: int = 0
    frame_offsets: List[int] = Field(default_factory=lambda: [-1, 1])
    val_fraction: float = 0.1

    @model_validator(mode="after")
    def _check(self):
        if not self.lr >= 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if not 0 < self.lr_decay_factor <= 1:
            raise ValueError("lr_decay_factor must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")
        return self

    @field_validator("frame_offsets")
    @classmethod
    def _check_offsets(cls, offsets: List[int]) -> List[int]:
        if not offsets or 0 in offsets:
            raise ValueError(f"frame_offsets must be non-empty and exclude 0, got {offsets}")
        return sorted(set(offsets))

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay_factor ** (epoch // self.lr_decay_every)


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    median_scale: bool = True
    cap: float = 150.0
    align: Literal["none", "rigid", "similarity"] = "similarity"
