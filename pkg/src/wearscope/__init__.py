"""Patch-based tool wear monitoring with LBP-family texture descriptors."""

from .imageio import GrayImage, load_image, load_manifest, save_image
from .patching import extract_patches, layout_for
from .svm import classify, decision, load_model, save_model, train
from .texture import Descriptor, NeighborhoodSpec, describe
from .wearcheck import assess_edge, evaluate, metrics

__version__ = "0.1.0"

__all__ = [
    "Descriptor", "GrayImage", "NeighborhoodSpec", "assess_edge", "classify", "decision",
    "describe", "evaluate", "extract_patches", "layout_for", "load_image", "load_manifest",
    "load_model", "metrics", "save_image", "save_model", "train",
]
