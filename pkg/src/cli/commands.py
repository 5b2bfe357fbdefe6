"""
Command implementations. Each returns an exit code on success and raises a
project error otherwise; `src.cli.main` maps errors to exit codes.
Results go to stdout as key=value lines, diagnostics to the log on stderr.
"""
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from src.config import Config
from src.geometry.camera import load_intrinsics, parse_pose_line
from src.geometry.warp import synthesize_view
from src.lora.inject import AdaptationMode, parameter_summary
from src.losses.reprojection import ReprojectionLossConfig
from src.metrics.depth import METRIC_COLUMNS
from src.metrics.photometric import psnr
from src.synth.export import export_dataset, load_dataset, manifest_hash
from src.synth.scenes import render_scene
from src.trainer.evaluation import evaluate_models, measure_inference_ms, models_from_checkpoint
from src.trainer.experiment import ExperimentConfig, load_experiment_config, save_experiment_config
from src.trainer.loop import fit
from src.cli.gradcheck import run_gradcheck
from src.utils.csv_writer import write_rows
from src.utils.errors import ConfigurationError
from src.utils.image_io import load_pfm, load_png, save_mask_png, save_pfm, save_png
from src.utils.logger import setup_logger
from src.utils.validators import validate_file_exists

logger = setup_logger(__name__)

ATE_COLUMNS = ["ate", "align", "n_frames"]
ABLATION_METRICS = ["abs_rel", "sq_rel", "rmse", "rmse_log", "delta1"]
ABLATION_COLUMNS = ["variant", "mode", "loss", "seed"] + ABLATION_METRICS
GRADCHECK_COLUMNS = ["component", "seed", "probes", "max_rel_error", "tolerance", "passed"]


def emit(**values):
    """Machine-readable results on stdout."""
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.6f}"
        print(f"{key}={value}", flush=True)


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None,
                    scales: Optional[List[int]] = None) -> ExperimentConfig:
    """--seed drives the texture and training seeds; --scales picks the loss pyramid levels."""
    if seed is not None:
        config = config.with_overrides(scene={"texture_seed": seed}, train={"seed": seed})
    if scales is not None:
        config = config.with_overrides(loss={"scales": scales})
    return config


def cmd_synth(config_path: str, out_dir: str, seed: Optional[int] = None) -> int:
    config = apply_overrides(load_experiment_config(config_path), seed=seed)
    logger.info(f"Rendering {config.scene.kind} scene ({config.scene.n_frames} frames)")
    scene = render_scene(config.scene)
    export_dataset(scene, out_dir)
    emit(manifest=os.path.join(out_dir, Config.MANIFEST), manifest_sha256=manifest_hash(out_dir),
         n_frames=len(scene))
    return 0


def cmd_train(config_path: str, data_dir: str, out_dir: str, resume: bool = False, seed: Optional[int] = None,
              scales: Optional[List[int]] = None) -> int:
    config = apply_overrides(load_experiment_config(config_path), seed=seed, scales=scales)
    scene = load_dataset(data_dir)
    if scene.config != config.scene:
        logger.warning(f"Dataset {data_dir} was rendered from a different scene config than {config_path}")
    save_experiment_config(config, os.path.join(out_dir, "config.json"))

    trainer = fit(config, scene, out_dir, resume=resume)
    summary = parameter_summary({"encoder": trainer.depth_net.encoder, "decoder": trainer.depth_net.decoder,
                                 "pose": trainer.pose_net})
    logger.info(f"Parameters: {summary['trainable']} trainable of {summary['total']} "
                f"({100 * summary['trainable_fraction']:.2f}%), LoRA {summary['lora']}")
    emit(best_checkpoint=os.path.join(out_dir, Config.BEST_CHECKPOINT),
         train_log=os.path.join(out_dir, Config.TRAIN_LOG),
         initial_abs_rel=trainer.state.initial_abs_rel, best_abs_rel=trainer.state.best_abs_rel)
    return 0


def cmd_eval(checkpoint_path: str, data_dir: str, out_dir: Optional[str] = None, export_depth: bool = False,
             align: Optional[str] = None, oracle: bool = False) -> int:
    out_dir = out_dir or os.path.dirname(os.path.abspath(checkpoint_path))
    config, depth_net, pose_net = models_from_checkpoint(checkpoint_path)
    scene = load_dataset(data_dir)
    eval_cfg = config.eval if align is None else config.eval.model_copy(update={"align": align})

    result = evaluate_models(depth_net, pose_net, scene, eval_cfg, oracle=oracle)
    write_rows([result.metrics.as_row()], METRIC_COLUMNS, os.path.join(out_dir, Config.DEPTH_METRICS_CSV))
    write_rows([{"ate": result.ate, "align": eval_cfg.align, "n_frames": result.n_frames}], ATE_COLUMNS,
               os.path.join(out_dir, Config.ATE_CSV))

    if export_depth:
        depth_dir = os.path.join(out_dir, "depth_pred")
        os.makedirs(depth_dir, exist_ok=True)
        for i, depth in enumerate(result.depths):
            save_pfm(depth, os.path.join(depth_dir, f"pred_{i:06d}.pfm"))
        logger.info(f"Exported {len(result.depths)} depth maps to {depth_dir}")

    sample = torch.from_numpy(np.ascontiguousarray(scene.frames[0])).permute(2, 0, 1)[None].float()
    logger.info(f"Depth inference {measure_inference_ms(depth_net, sample):.2f} ms/frame")
    emit(abs_rel=result.metrics.abs_rel, delta1=result.metrics.delta1, ate=result.ate,
         depth_metrics=os.path.join(out_dir, Config.DEPTH_METRICS_CSV), ate_csv=os.path.join(out_dir, Config.ATE_CSV))
    return 0


def cmd_gradcheck(component: str, seed: int = 0, out_path: Optional[str] = None) -> int:
    report = run_gradcheck(component, seed=seed)
    if out_path:
        write_rows([report.as_row()], GRADCHECK_COLUMNS, out_path)
    emit(component=report.component, max_rel_error=f"{report.max_rel_error:.3e}", passed=report.passed)
    return 0 if report.passed else 1


def cmd_warp(image_path: str, depth_path: str, pose_line: str, intrinsics_path: str, out_dir: str,
             target_path: Optional[str] = None) -> int:
    """Warps a source image into the target view given target depth and T_target_to_source."""
    for path in (image_path, depth_path, intrinsics_path):
        validate_file_exists(path)
    source = load_png(image_path)
    depth = load_pfm(depth_path)
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise ConfigurationError(f"depth map {depth_path} must be finite and strictly positive")
    if depth.shape != source.shape[:2]:
        raise ConfigurationError(f"depth {depth.shape} and image {source.shape[:2]} sizes differ")
    intrinsics = load_intrinsics(intrinsics_path)
    pose = parse_pose_line(pose_line)

    source_t = torch.from_numpy(source.astype(np.float64)).permute(2, 0, 1)[None]
    depth_t = torch.from_numpy(depth.astype(np.float64))[None, None]
    warped, mask = synthesize_view(source_t, depth_t, intrinsics.matrix(torch.float64), pose.as_tensor(torch.float64))
    warped_np = warped[0].permute(1, 2, 0).numpy()
    mask_np = mask[0].numpy()

    os.makedirs(out_dir, exist_ok=True)
    save_png(warped_np, os.path.join(out_dir, "warped.png"))
    save_mask_png(mask_np, os.path.join(out_dir, "mask.png"))
    results: Dict[str, object] = {"warped": os.path.join(out_dir, "warped.png"),
                                  "valid_fraction": float(mask_np.mean())}
    if target_path:
        target = load_png(target_path)
        if target.shape != source.shape:
            raise ConfigurationError(f"target {target.shape} and image {source.shape} sizes differ")
        results["psnr"] = psnr(warped_np, target, mask=mask_np)
    emit(**results)
    return 0


def _ssim_baseline_loss() -> Dict[str, object]:
    preset = ReprojectionLossConfig.ssim_baseline()
    return {"kind": preset.kind, "alpha": preset.alpha, "beta": preset.beta}


# variant name -> config section overrides
ABLATION_VARIANTS: Dict[str, Dict[str, Dict]] = {
    "vector_lora": {"adaptation": {"mode": AdaptationMode.VECTOR_LORA.value}},
    "lora": {"adaptation": {"mode": AdaptationMode.LORA.value}},
    "frozen": {"adaptation": {"mode": AdaptationMode.FROZEN.value}},
    "full": {"adaptation": {"mode": AdaptationMode.FULL.value}},
    "vector_lora_ssim": {"adaptation": {"mode": AdaptationMode.VECTOR_LORA.value}, "loss": _ssim_baseline_loss()},
}


def cmd_ablate(config_path: str, data_dir: str, out_dir: str, seeds: Sequence[int] = (0, 1, 2),
               scales: Optional[List[int]] = None, variants: Optional[Sequence[str]] = None) -> int:
    """
    Trains each ablation variant on the same data and seeds: Vector-LoRA,
    uniform-rank LoRA, the frozen zero-shot encoder, full fine-tuning and
    Vector-LoRA under the single-scale SSIM loss.
    """
    variants = list(variants) if variants else list(ABLATION_VARIANTS)
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ConfigurationError(f"Unknown ablation variants {unknown}; valid: {', '.join(ABLATION_VARIANTS)}")
    base = apply_overrides(load_experiment_config(config_path), scales=scales)
    scene = load_dataset(data_dir)
    rows = []
    for seed in seeds:
        for variant in variants:
            config = base.with_overrides(**ABLATION_VARIANTS[variant], train={"seed": seed})
            run_dir = os.path.join(out_dir, f"{variant}_seed{seed}")
            trainer = fit(config, scene, run_dir)
            # best.ckpt holds the lowest validation abs_rel
            _, depth_net, pose_net = models_from_checkpoint(os.path.join(run_dir, Config.BEST_CHECKPOINT))
            metrics = evaluate_models(depth_net, pose_net, scene, config.eval).metrics
            logger.info(f"{variant} seed {seed}: abs_rel {metrics.abs_rel:.4f} "
                        f"(initial val {trainer.state.initial_abs_rel:.4f})")
            rows.append({"variant": variant, "mode": config.adaptation.mode.value, "loss": config.loss.kind,
                         "seed": seed, **{k: getattr(metrics, k) for k in ABLATION_METRICS}})

    write_rows(rows, ABLATION_COLUMNS, os.path.join(out_dir, "ablation.csv"))
    results: Dict[str, object] = {"ablation": os.path.join(out_dir, "ablation.csv")}
    for variant in variants:
        scores = [r["abs_rel"] for r in rows if r["variant"] == variant]
        results[f"{variant}_abs_rel"] = float(np.mean(scores))
    if "vector_lora" in variants and "lora" in variants:
        by_run = {(r["variant"], r["seed"]): r["abs_rel"] for r in rows}
        wins = sum(by_run[("vector_lora", s)] <= by_run[("lora", s)] for s in seeds)
        results["vector_lora_wins"] = f"{wins}/{len(seeds)}"
        results["vector_lora_majority"] = wins * 3 >= 2 * len(seeds)
    emit(**results)
    return 0
