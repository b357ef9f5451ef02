"""Bridge from fitted prediction models to masksig bundle directories.

The adapter owns model execution and nothing else: it loads a model, masks
features with reference values computed from a training split, evaluates the
model on unmasked and per-feature masked inputs, and writes a bundle
directory that the significance engine consumes through its file format and
command line. All statistics stay on the other side of that boundary.
"""

from masksig_adapter.config import AdapterConfig, ConfigError, FeatureConfig
from masksig_adapter.export import ExportError, export_bundle
from masksig_adapter.models import ModelError, load_model
from masksig_adapter.validate import ValidationReport, validate_bundle

__all__ = [
    "AdapterConfig",
    "FeatureConfig",
    "ConfigError",
    "export_bundle",
    "ExportError",
    "load_model",
    "ModelError",
    "validate_bundle",
    "ValidationReport",
]
