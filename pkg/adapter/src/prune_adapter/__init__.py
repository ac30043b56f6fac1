"""External accuracy evaluator for the pruning oracle wire protocol."""

from .config import AdapterConfig
from .evaluator import ModelEvaluator
from .serve import serve

__version__ = "0.1.0"
