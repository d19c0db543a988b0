"""Text-to-video person retrieval, end to end and from scratch.

Paired video and caption encoders trained with a temperature-scaled
contrastive objective over relation scores, evaluated with recall-at-rank
and median-rank retrieval metrics, exercised on a procedurally generated
person-video corpus.  Everything numeric runs on a small reverse-mode
autodiff core over numpy arrays.
"""

from .config import ModelConfig, TrainConfig, model_config
from .caption import Vocabulary, build_vocabulary, tokenize
from .metrics import RetrievalResult, median_rank, recall_at
from .model import TVPRModel
from .relation import LossConfig, contrastive_loss, relation_score, relation_scores
from .tensor import Tensor

__version__ = "0.1.0"

__all__ = [
    "ModelConfig", "TrainConfig", "model_config",
    "Vocabulary", "build_vocabulary", "tokenize",
    "RetrievalResult", "median_rank", "recall_at",
    "TVPRModel",
    "LossConfig", "contrastive_loss", "relation_score", "relation_scores",
    "Tensor",
    "__version__",
]
