"""
    tcezsl
    ~~~~~~

    Translational concept embeddings for generalized compositional
    zero-shot learning: recognise attribute-object concepts, including
    pairs never seen in training, from precomputed image features.
"""

from typing import Any, Optional

from .dataforge import Dataset, SynthSpec, generate_synthetic, load_feature_dataset, write_dataset
from .embedspace import ConceptSpace, WordVecTable, load_word_vectors, split_concepts
from .errors import TceError
from .evaluation import MetricsReport, ScoreMatrix, compute_metrics, harmonic_mean
from .losses import LossWeights
from .models import ModelRef
from .models._base import BaseModel
from .trainer import TrainConfig, Trainer, evaluate, train


def create_model(
    model: ModelRef,
    dataset: Dataset,
    config: Optional[TrainConfig] = None,
    **options: Any,
) -> BaseModel:
    """Create an untrained model sized for ``dataset``.

    :param model: registry name (``tce``, ``visprod``, ``labelembed``) or
        a model class
    :param dataset: dataset whose concept space and word vectors are used
    :param config: source of the dimensions and the seed

    For instance::

        dataset = generate_synthetic(SynthSpec(m=6, n=5))
        model = create_model('tce', dataset, TrainConfig(latent_dim=32))
        scores = model.score(dataset.split('test').features)
    """
    return Trainer(config).build_model(dataset, model, **options)


__version__ = '1.0.0'
__all__ = [
    'Dataset', 'SynthSpec', 'generate_synthetic', 'load_feature_dataset', 'write_dataset',
    'ConceptSpace', 'WordVecTable', 'load_word_vectors', 'split_concepts',
    'TceError', 'MetricsReport', 'ScoreMatrix', 'compute_metrics', 'harmonic_mean',
    'LossWeights', 'BaseModel', 'TrainConfig', 'Trainer', 'train', 'evaluate',
    'create_model',
]
