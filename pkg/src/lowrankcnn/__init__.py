"""Composite low-rank convolutional layers: training, init, cost analysis."""

__version__ = "0.1.0"

from . import backend
from .checkpoint import load_checkpoint, save_checkpoint
from .composite import CompositeConvSpec, FilterGroup, effective_filters
from .costmodel import CostReport, analyze, compare, report_csv
from .data import augment, load_cifar10, zca_apply, zca_fit
from .initialization import (InitSpec, composite_stddev, he_stddev,
                             init_network, variance_probe)
from .ops import ConvWeights, GradBundle
from .trainer import TrainConfig, TrainHistory, evaluate, lr_schedule, train
from .zoo import ArchSpec, build, build_desk, validate

__all__ = [
    "ArchSpec", "CompositeConvSpec", "ConvWeights", "CostReport",
    "FilterGroup", "GradBundle", "InitSpec", "TrainConfig", "TrainHistory",
    "analyze", "augment", "backend", "build", "build_desk", "compare",
    "composite_stddev", "effective_filters", "evaluate", "he_stddev",
    "init_network", "load_checkpoint", "load_cifar10", "lr_schedule",
    "report_csv", "save_checkpoint", "train", "validate", "variance_probe",
    "zca_apply", "zca_fit",
]
