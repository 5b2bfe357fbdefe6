"""
Self-supervised training: the center frame of each triplet is the depth
target, its neighbors are warped into it with predicted depth and pose, and
the reprojection loss drives Adam over the trainable parameters only.
"""
import math
import os
import sys
from itertools import chain
from typing import Dict, List, Optional

import torch
from torch import optim
from torch.utils.data import DataLoader
from tqdm import tqdm

from src.config import Config
from src.losses.reprojection import total_ssl_loss
from src.metrics.depth import DepthMetrics
from src.model.checkpoint import load_checkpoint, restore_models, save_checkpoint
from src.model.depth_net import depth_forward
from src.model.factory import build_models
from src.model.pose_net import pose_forward
from src.synth.scenes import SyntheticScene
from src.trainer.dataset import TripletDataset, split_frames, triplet_centers
from src.trainer.evaluation import depth_metrics_for, predict_depths
from src.trainer.experiment import ExperimentConfig
from src.trainer.state import TrainState
from src.utils.csv_writer import append_row
from src.utils.errors import ConfigurationError, NumericalError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

TRAIN_LOG_COLUMNS = ["step", "total", "ms_reproj", "smoothness", "lr"]
# different seeds never share a shuffle stream
SHUFFLE_STRIDE = 1_000_003


class Trainer:
    def __init__(self, config: ExperimentConfig, scene: SyntheticScene, out_dir: Optional[str] = None):
        self.config = config
        self.opt = config.train
        self.scene = scene
        self.out_dir = out_dir
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        torch.set_num_threads(Config.THREADS)

        enc = config.encoder
        if (scene.intrinsics.width, scene.intrinsics.height) != (enc.image_width, enc.image_height):
            raise ConfigurationError(
                f"dataset resolution {scene.intrinsics.width}x{scene.intrinsics.height} differs from encoder "
                f"input {enc.image_width}x{enc.image_height}"
            )

        self.depth_net, self.pose_net = build_models(config.encoder, config.decoder, config.pose,
                                                     config.adaptation, seed=self.opt.seed)
        self.parameters_to_train = [
            p for p in chain(self.depth_net.parameters(), self.pose_net.parameters()) if p.requires_grad
        ]
        self.optimizer = optim.Adam(self.parameters_to_train, lr=self.opt.lr, betas=(0.9, 0.999), eps=1e-8)
        self.scheduler = optim.lr_scheduler.LambdaLR(
            self.optimizer, lambda epoch: self.opt.lr_decay_factor ** (epoch // self.opt.lr_decay_every)
        )
        self.state = TrainState()

        train_frames, self.val_frames = split_frames(len(scene), self.opt.val_fraction)
        centers = triplet_centers(train_frames, self.opt.frame_offsets)
        if not centers:
            raise ConfigurationError(f"no training triplets for offsets {self.opt.frame_offsets}")
        self.train_dataset = TripletDataset(scene, centers, self.opt.frame_offsets)
        self.config_json = config.to_json()
        logger.info(f"Trainer ready: {len(centers)} training triplets, {len(self.val_frames)} validation frames, "
                    f"{sum(p.numel() for p in self.parameters_to_train)} trainable parameters")

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def compute_loss(self, batch: Dict):
        center = batch["center"]
        K = batch["K"]
        if not torch.equal(K, K[:1].expand_as(K)):
            raise ConfigurationError("frames in a batch must share intrinsics")
        pyramid = depth_forward(self.depth_net, center)
        poses = {o: pose_forward(self.pose_net, center, src).matrix() for o, src in batch["sources"].items()}
        return total_ssl_loss(center, batch["sources"], pyramid, poses, K[0], self.config.loss)

    def train_step(self, batch: Dict) -> Dict[str, float]:
        """One Adam update; returns the loss breakdown measured before the update."""
        self.depth_net.train()
        self.pose_net.train()
        loss, breakdown = self.compute_loss(batch)
        if not math.isfinite(breakdown["total"]):
            logger.error(f"Non-finite loss at step {self.state.step}: {breakdown}")
            raise NumericalError(f"loss became {breakdown['total']} at step {self.state.step}: {breakdown}")

        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        self.state.step += 1
        return {**breakdown, "lr": self.lr}

    def validate(self) -> DepthMetrics:
        depths = predict_depths(self.depth_net, self.scene, self.val_frames)
        return depth_metrics_for(self.scene, self.val_frames, depths, self.config.eval)

    def _loader(self, epoch: int) -> DataLoader:
        generator = torch.Generator().manual_seed(self.opt.seed * SHUFFLE_STRIDE + epoch)
        order = torch.randperm(len(self.train_dataset), generator=generator).tolist()
        return DataLoader(self.train_dataset, batch_size=self.opt.batch_size, sampler=order, num_workers=0)

    def _path(self, name: str) -> Optional[str]:
        return os.path.join(self.out_dir, name) if self.out_dir else None

    def save(self, name: str):
        path = self._path(name)
        if path:
            save_checkpoint(path, self.config_json, self.depth_net, self.pose_net,
                            self.state.to_dict(self.optimizer, self.scheduler))

    def resume(self, checkpoint_path: str):
        container = load_checkpoint(checkpoint_path, expected_config_json=self.config_json)
        if container.get("train_state") is None:
            raise ConfigurationError(f"Checkpoint {checkpoint_path} holds no training state to resume from")
        restore_models(container, self.depth_net, self.pose_net)
        self.state = TrainState.from_dict(container["train_state"], self.optimizer, self.scheduler)
        logger.info(f"Resumed from {checkpoint_path} at epoch {self.state.epoch}, step {self.state.step}")

    def run_epoch(self, epoch: int) -> List[Dict[str, float]]:
        expected = self.opt.lr_at(epoch)
        assert math.isclose(self.lr, expected, rel_tol=1e-9, abs_tol=0.0), \
            f"lr {self.lr} at epoch {epoch} differs from schedule {expected}"
        rows = []
        log_path = self._path(Config.TRAIN_LOG)
        progress = tqdm(self._loader(epoch), desc=f"epoch {epoch + 1}/{self.opt.epochs}", file=sys.stderr,
                        leave=False, disable=not sys.stderr.isatty())
        for batch in progress:
            breakdown = self.train_step(batch)
            row = {"epoch": epoch, "step": self.state.step, **breakdown}
            rows.append(row)
            if log_path:
                append_row(row, TRAIN_LOG_COLUMNS, log_path)
            progress.set_postfix(loss=f"{breakdown['total']:.4f}")
        return rows

    def train(self, stop_after_epoch: Optional[int] = None) -> List[Dict[str, float]]:
        """
        Runs the remaining epochs. `stop_after_epoch` ends the run early after
        that many completed epochs, leaving last.ckpt to resume from.
        """
        history = []
        if self.state.initial_abs_rel is None:
            self.state.initial_abs_rel = self.validate().abs_rel
            logger.info(f"Initial validation abs_rel {self.state.initial_abs_rel:.4f}")

        for epoch in range(self.state.epoch, self.opt.epochs):
            rows = self.run_epoch(epoch)
            history.extend(rows)
            metrics = self.validate()
            self.scheduler.step()
            self.state.epoch = epoch + 1

            mean_loss = sum(r["total"] for r in rows) / max(1, len(rows))
            logger.info(f"Epoch {epoch + 1}/{self.opt.epochs}: loss {mean_loss:.5f}, "
                        f"val abs_rel {metrics.abs_rel:.4f}, delta1 {metrics.delta1:.4f}")
            if metrics.abs_rel < self.state.best_abs_rel:
                self.state.best_abs_rel = metrics.abs_rel
                self.save(Config.BEST_CHECKPOINT)
            self.save(Config.LAST_CHECKPOINT)

            if stop_after_epoch is not None and self.state.epoch >= stop_after_epoch:
                logger.info(f"Stopping after epoch {self.state.epoch}")
                break
        return history


def fit(config: ExperimentConfig, scene: SyntheticScene, out_dir: Optional[str] = None, resume: bool = False,
        stop_after_epoch: Optional[int] = None) -> Trainer:
    """Trains from scratch (or from out_dir/last.ckpt with `resume`) and returns the trainer."""
    trainer = Trainer(config, scene, out_dir)
    if resume:
        if not out_dir:
            raise ConfigurationError("resume needs an output directory holding last.ckpt")
        trainer.resume(os.path.join(out_dir, Config.LAST_CHECKPOINT))
    elif out_dir and os.path.exists(os.path.join(out_dir, Config.TRAIN_LOG)):
        os.remove(os.path.join(out_dir, Config.TRAIN_LOG))

    logger.info(f"Training {config.adaptation.mode.value} for {config.train.epochs} epochs (seed {config.train.seed})")
    trainer.train(stop_after_epoch=stop_after_epoch)
    logger.info(f"Training complete: best val abs_rel {trainer.state.best_abs_rel:.4f} "
                f"(initial {trainer.state.initial_abs_rel:.4f})")
    return trainer
