"""Zero-shot learning with iterative attribute selection (IAS).

Modules: dataset, ecoc_bounds, attribute_classifiers, bilinear, avae, ias, metrics, cli.
"""
from .errors import NumericalError, ValidationError, ZslError

__all__ = ["NumericalError", "ValidationError", "ZslError"]
__version__ = "0.1.0"
