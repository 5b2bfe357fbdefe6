from src.trainer.config import EvalConfig, TrainConfig
from src.trainer.dataset import TripletDataset, split_frames, triplet_centers
from src.trainer.evaluation import EvaluationResult, evaluate, evaluate_models, measure_inference_ms
from src.trainer.experiment import ExperimentConfig, build_experiment_config, load_experiment_config
from src.trainer.loop import Trainer, fit
from src.trainer.state import TrainState
