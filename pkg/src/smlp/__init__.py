"""Classify search queries into dynamic event classes with stacked MLPs."""

from .datamodel import EventClass, FEATURE_NAMES, LabeledDataset, QueryInstance, TimeSeries
from .features import FeatureConfig, Gazetteer, extract_features
from .harness import compare_models, compare_optimizers, evaluate, split, train
from .network import SmlpModel, init_model, load_checkpoint, save_checkpoint
from .optim import Method, OptimizerSpec
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "EventClass", "FEATURE_NAMES", "LabeledDataset", "QueryInstance", "TimeSeries",
    "FeatureConfig", "Gazetteer", "extract_features",
    "compare_models", "compare_optimizers", "evaluate", "split", "train",
    "SmlpModel", "init_model", "load_checkpoint", "save_checkpoint",
    "Method", "OptimizerSpec", "SyntheticSpec", "generate_synthetic",
]
