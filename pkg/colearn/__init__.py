
from .tensor import Tensor, ParamTensor, Tape, backward
from .config import Config, micro_config
from .errors import ConfigError, NumericalError
from .maxformer import CrossModalBooster, MaxFormerBlock
from .decoders import ASPDecoder, AAMSoftmaxHead
from .model import CoLearnModel, BaselineModel, build_model, count_parameters
from .scoring import cosine_score, fuse_audio_driven, fuse_visual_driven, fuse_baseline, compute_eer, compute_min_dcf
from .synth import Corpus, gen_population, gen_utterance, build_trials
from .checkpoint import Checkpoint
from .train import train_step, run_training, train_baseline, warm_start

__all__ = ["Tensor", "ParamTensor", "Tape", "backward", "Config", "micro_config", "ConfigError", "NumericalError",
           "CrossModalBooster", "MaxFormerBlock", "ASPDecoder", "AAMSoftmaxHead", "CoLearnModel", "BaselineModel",
           "build_model", "count_parameters", "cosine_score", "fuse_audio_driven", "fuse_visual_driven",
           "fuse_baseline", "compute_eer", "compute_min_dcf", "Corpus", "gen_population", "gen_utterance",
           "build_trials", "Checkpoint", "train_step", "run_training", "train_baseline", "warm_start"]

__version__ = "0.1.0"
