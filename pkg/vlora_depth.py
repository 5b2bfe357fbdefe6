"""
Entry point. `python vlora_depth.py <command> ...` runs one CLI command;
`python vlora_depth.py pipeline [config] [out]` runs synth -> train -> eval.
"""
import os
import sys

from src.cli.main import main as cli_main
from src.config import Config
from src.utils.logger import setup_logger

logger = setup_logger("PipelineRunner")

DEFAULT_CONFIG = os.path.join(Config.BASE_DIR, "configs", "terrain.json")


def run_step(name: str, argv):
    logger.info(f"========== Running {name} ==========")
    code = cli_main(argv)
    if code != 0:
        logger.error(f"========== {name} FAILED (exit {code}) ==========")
        sys.exit(code)
    logger.info(f"========== {name} Completed Successfully ==========")


def run_pipeline(config_path: str, out_root: str):
    data_dir = os.path.join(out_root, "data")
    run_dir = os.path.join(out_root, "run")
    steps = [
        ("synth", ["synth", "--config", config_path, "--out", data_dir]),
        ("train", ["train", "--config", config_path, "--data", data_dir, "--out", run_dir]),
        ("eval", ["eval", os.path.join(run_dir, Config.BEST_CHECKPOINT), "--data", data_dir]),
    ]
    for name, argv in steps:
        run_step(name, argv)
    logger.info(">>> FULL PIPELINE EXECUTION COMPLETED SUCCESSFULLY <<<")


def main():
    args = sys.argv[1:]
    if args and args[0] == "pipeline":
        config_path = args[1] if len(args) > 1 else DEFAULT_CONFIG
        out_root = args[2] if len(args) > 2 else Config.OUTPUT_DIR
        logger.info(f"Pipeline config {config_path}, output {out_root}")
        run_pipeline(config_path, out_root)
        return
    sys.exit(cli_main(args))


if __name__ == "__main__":
    main()
