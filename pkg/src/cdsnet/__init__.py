"""Complex-valued co-domain symmetric networks for 8-band multispectral chips."""

from .complex import ComplexScalar, ComplexTensor, complex_scale
from .data import ChipDataset, DatasetManifest, generate_synthetic, iterate_batches, load_dataset, save_dataset
from .encodings import sliding_decode, sliding_encode
from .errors import ContractError, DataError, DimensionError, FormatError, TrainingDivergedError
from .metrics import EvalReport, class_accuracy, class_prior, instance_accuracy, logit_adjust
from .models import ModelConfig, build_cds_large, build_model, load_checkpoint, parameter_count, save_checkpoint
from .tensor import Tensor, backward, no_grad
from .training import AdamW, TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "ChipDataset",
    "ComplexScalar",
    "ComplexTensor",
    "ContractError",
    "DataError",
    "DatasetManifest",
    "DimensionError",
    "EvalReport",
    "FormatError",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "TrainingDivergedError",
    "backward",
    "build_cds_large",
    "build_model",
    "class_accuracy",
    "class_prior",
    "complex_scale",
    "generate_synthetic",
    "instance_accuracy",
    "iterate_batches",
    "load_checkpoint",
    "load_dataset",
    "logit_adjust",
    "no_grad",
    "parameter_count",
    "save_checkpoint",
    "save_dataset",
    "sliding_decode",
    "sliding_encode",
    "train",
]
