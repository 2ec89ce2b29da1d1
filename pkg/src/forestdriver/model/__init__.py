"""Segmentation network, losses, training and region inference."""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .inference import Predictor, RegionPrediction, predict_region, prepare_input
from .losses import focal_loss, gdice_loss, loss_total, masked_cross_entropy
from .net import DriverNet, FusionHead, SegNet, build_model
from .training import Example, TrainResult, train

__all__ = [
    "Checkpoint", "load_checkpoint", "save_checkpoint", "Predictor", "RegionPrediction",
    "predict_region", "prepare_input", "focal_loss", "gdice_loss", "loss_total",
    "masked_cross_entropy", "DriverNet", "FusionHead", "SegNet", "build_model", "Example",
    "TrainResult", "train",
]
