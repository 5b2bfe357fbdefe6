import argparse
import sys
import traceback
from typing import List, Optional

from src.cli import commands
from src.utils.errors import CheckpointError, ConfigurationError, DatasetIOError, ShapeError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CHECKPOINT = 4


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _name_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlora_depth",
                                     description="Vector-LoRA self-supervised monocular depth experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="render a synthetic scene and export it")
    synth.add_argument("--config", required=True)
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int)

    train = sub.add_parser("train", help="self-supervised training on an exported scene")
    train.add_argument("--config", required=True)
    train.add_argument("--data", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--seed", type=int)
    train.add_argument("--resume", action="store_true", help="continue from <out>/last.ckpt")
    train.add_argument("--scales", type=_int_list, help="loss pyramid levels, e.g. 0,1,2,3")

    evaluate = sub.add_parser("eval", help="depth metrics and ATE of a checkpoint")
    evaluate.add_argument("checkpoint")
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--out")
    evaluate.add_argument("--export-depth", action="store_true")
    evaluate.add_argument("--align", choices=["none", "rigid", "similarity"])
    evaluate.add_argument("--oracle", action="store_true", help="score ground-truth depth and poses")

    gradcheck = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gradcheck.add_argument("component")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--out", help="optional CSV report path")

    warp = sub.add_parser("warp", help="warp a source image into the target view")
    warp.add_argument("--image", required=True)
    warp.add_argument("--depth", required=True, help="target depth PFM")
    warp.add_argument("--pose", required=True, help="T_target_to_source, 12 values of the 3x4 matrix")
    warp.add_argument("--intrinsics", required=True)
    warp.add_argument("--out", required=True)
    warp.add_argument("--target", help="target PNG to report PSNR against")

    ablate = sub.add_parser("ablate", help="adaptation modes and loss variants over several seeds")
    ablate.add_argument("--config", required=True)
    ablate.add_argument("--data", required=True)
    ablate.add_argument("--out", required=True)
    ablate.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    ablate.add_argument("--scales", type=_int_list)
    ablate.add_argument("--variants", type=_name_list, help="subset of ablation variants, e.g. vector_lora,lora")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "synth":
        return commands.cmd_synth(args.config, args.out, seed=args.seed)
    if args.command == "train":
        return commands.cmd_train(args.config, args.data, args.out, resume=args.resume, seed=args.seed,
                                  scales=args.scales)
    if args.command == "eval":
        return commands.cmd_eval(args.checkpoint, args.data, out_dir=args.out, export_depth=args.export_depth,
                                 align=args.align, oracle=args.oracle)
    if args.command == "gradcheck":
        return commands.cmd_gradcheck(args.component, seed=args.seed, out_path=args.out)
    if args.command == "warp":
        return commands.cmd_warp(args.image, args.depth, args.pose, args.intrinsics, args.out,
                                 target_path=args.target)
    if args.command == "ablate":
        return commands.cmd_ablate(args.config, args.data, args.out, seeds=args.seeds, scales=args.scales,
                                   variants=args.variants)
    raise ConfigurationError(f"Unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except (ConfigurationError, ShapeError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except CheckpointError as e:
        logger.error(f"Checkpoint error: {e}")
        return EXIT_CHECKPOINT
    except (DatasetIOError, OSError) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except Exception as e:
        logger.error(f"Unexpected failure: {e}")
        traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
