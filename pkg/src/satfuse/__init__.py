"""satfuse: multi-modal learner-satisfaction prediction.

Fuses short-text topic distributions, contextual sentiment embeddings, and
normalized behavioral features into one design matrix, trains a family of
regression backbones on it, and runs benchmark/ablation experiments at desk
scale.
"""

__version__ = "0.1.0"

from .corpus import ReviewRecord, TokenizedDoc, Vocabulary  # noqa: F401
from .errors import ConfigError, FormatError, PipelineError  # noqa: F401
