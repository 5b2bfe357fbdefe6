from dataclasses import dataclass
from typing import Dict, Optional

import torch


@dataclass
class TrainState:
    epoch: int = 0
    step: int = 0
    best_abs_rel: float = float("inf")
    initial_abs_rel: Optional[float] = None

    def to_dict(self, optimizer: torch.optim.Optimizer, scheduler) -> Dict:
        return {
            "epoch": self.epoch,
            "step": self.step,
            "best_abs_rel": self.best_abs_rel,
            "initial_abs_rel": self.initial_abs_rel,
            "optimizer": optimizer.state_dict(),
            "scheduler": scheduler.state_dict(),
            "rng": torch.get_rng_state(),
        }

    @classmethod
    def from_dict(cls, data: Dict, optimizer: torch.optim.Optimizer, scheduler) -> "TrainState":
        """Restores optimizer moments, schedule position and the global RNG in place."""
        optimizer.load_state_dict(data["optimizer"])
        scheduler.load_state_dict(data["scheduler"])
        torch.set_rng_state(data["rng"])
        return cls(epoch=data["epoch"], step=data["step"], best_abs_rel=data["best_abs_rel"],
                   initial_abs_rel=data["initial_abs_rel"])
