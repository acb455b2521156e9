from typing import Any, ClassVar, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..dataforge import Batch
from ..diffcore import Grads, Mlp, Params, zeros_like
from ..embedspace import FALLBACK_RANGE, ConceptSpace, WordVecTable
from ..errors import CompatibilityError, PreconditionError, ShapeError
from ..evaluation import ScoreMatrix
from ..losses import LossBreakdown, LossWeights


class BaseModel:
    """Shared plumbing of every concept classifier.

    Subclasses declare their networks and tables in ``__init__`` and list
    them in :meth:`parameters`; the returned arrays are the live tensors,
    so an optimizer updating them in place updates the model.

    :param space: concept space the model classifies into
    :param feature_dim: width of the image features
    :param word_dim: width of the attribute and object embeddings
    :param latent_dim: width of the space concepts are compared in
    :param rng: generator for the initial weights
    :param words: word vectors to initialise the embedding tables from
    """

    NAME: ClassVar[str] = ''

    #: L2 coefficient used when the training config does not set one
    DEFAULT_WEIGHT_DECAY: ClassVar[float] = 0.0

    #: training config field that supplies ``latent_dim``
    LATENT_KEY: ClassVar[str] = 'latent_dim'

    def __init__(
        self,
        space: ConceptSpace,
        feature_dim: int,
        word_dim: int = 300,
        latent_dim: int = 256,
        rng: Optional[np.random.Generator] = None,
        words: Optional[WordVecTable] = None,
        **options: Any,
    ) -> None:
        if feature_dim <= 0 or latent_dim <= 0 or word_dim < 0:
            raise ShapeError('model dimensions must be positive')
        if words is not None:
            word_dim = words.dim
        self.space = space
        self.feature_dim = int(feature_dim)
        self.word_dim = int(word_dim)
        self.latent_dim = int(latent_dim)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.words = words
        self.options = options

    def init_table(self, tokens: List[str]) -> np.ndarray:
        """Embedding rows for ``tokens``, copied from the word vectors or
        drawn uniformly from the fallback range.
        """
        if self.words is not None:
            return self.words.rows(tokens)
        return self.rng.uniform(-FALLBACK_RANGE, FALLBACK_RANGE, size=(len(tokens), self.word_dim))

    def parameters(self) -> Params:
        raise NotImplementedError

    def nets(self) -> Dict[str, Mlp]:
        return {}

    def mlp_parameters(self) -> Params:
        params: Params = {}
        for name, net in self.nets().items():
            params.update(net.parameters(name + '.'))
        return params

    def lr_groups(self, lr_attr_table: float) -> Dict[str, float]:
        """Learning rates by parameter prefix; embedding tables built from
        frozen word vectors get 0.
        """
        if self.words is not None and not self.words.trainable:
            return {'attr_table': 0.0, 'obj_table': 0.0}
        return {}

    def dims(self) -> Dict[str, int]:
        return {
            'm': self.space.m,
            'n': self.space.n,
            'latent_dim': self.latent_dim,
            'word_dim': self.word_dim,
            'feature_dim': self.feature_dim,
        }

    def loss_and_grads(self, batch: Batch, weights: LossWeights) -> Tuple[LossBreakdown, Grads]:
        raise NotImplementedError

    def score(self, features: np.ndarray, threads: int = 1) -> ScoreMatrix:
        raise NotImplementedError

    def uses_rvc(self) -> bool:
        return False

    def sample_rvc_pairs(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise PreconditionError('{} has no ratio variance term'.format(self.NAME))

    def zero_grads(self) -> Grads:
        return zeros_like(self.parameters())

    def snapshot(self) -> Params:
        return {k: v.copy() for k, v in self.parameters().items()}

    def restore(self, snapshot: Mapping[str, np.ndarray]) -> None:
        self.load_state(snapshot)

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        """Copy ``state`` into the live parameters; names and shapes must match."""
        params = self.parameters()
        if set(state) != set(params):
            raise CompatibilityError(
                'parameter names differ: missing {}, unexpected {}'.format(
                    sorted(set(params) - set(state)), sorted(set(state) - set(params)))
            )
        for name, live in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != live.shape:
                raise CompatibilityError(
                    '{} has shape {}, expected {}'.format(name, value.shape, live.shape)
                )
            np.copyto(live, value)
        self.mark_updated()

    def mark_updated(self) -> None:
        """Invalidate forward tapes after an in-place parameter update."""
        for net in self.nets().values():
            net.mark_updated()

    def __repr__(self) -> str:
        return '<{} {}>'.format(self.__class__.__name__, self.dims())
