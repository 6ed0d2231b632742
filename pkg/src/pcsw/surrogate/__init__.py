"""Surrogate models for mean-field stress-strain curves and their training."""

from .models import (
    HIDDEN_DIM,
    MpDeepONet,
    ResUnet,
    ScDeepONet,
    load_weights,
    parameter_count,
    readout,
    save_weights,
)
from .scaling import ScalerPerStep, VectorScaler, material_inputs9
from .training import (
    SurrogateDataset,
    TrainConfig,
    TrainingDiverged,
    history_to_csv,
    predict,
    predict_batch,
    split_indices,
    train,
    transfer_finetune,
)

__all__ = [
    "HIDDEN_DIM",
    "MpDeepONet",
    "ResUnet",
    "ScDeepONet",
    "ScalerPerStep",
    "SurrogateDataset",
    "TrainConfig",
    "TrainingDiverged",
    "VectorScaler",
    "history_to_csv",
    "load_weights",
    "material_inputs9",
    "parameter_count",
    "predict",
    "predict_batch",
    "readout",
    "save_weights",
    "split_indices",
    "train",
    "transfer_finetune",
]
