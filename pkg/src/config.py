import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    OUTPUT_DIR = os.getenv("VLORA_OUTPUT_DIR", os.path.join(BASE_DIR, "output"))

    # Runtime
    # 1 thread gives bit-exact reruns
    THREADS = int(os.getenv("VLORA_THREADS", "1"))
    LOG_LEVEL = os.getenv("VLORA_LOG_LEVEL", "INFO").upper()

    # Experiment JSON
    SCHEMA_VERSION = 1
    CHECKPOINT_FORMAT_VERSION = 1

    # Output file names
    BEST_CHECKPOINT = "best.ckpt"
    LAST_CHECKPOINT = "last.ckpt"
    TRAIN_LOG = "train_log.csv"
    DEPTH_METRICS_CSV = "depth_metrics.csv"
    ATE_CSV = "ate.csv"
    MANIFEST = "manifest.json"
