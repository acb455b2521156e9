"""
    tcezsl.models.visprod
    ~~~~~~~~~~~~~~~~~~~~~

    Independent attribute and object classifiers; a concept scores the
    product of its attribute and object probabilities.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..dataforge import Batch
from ..diffcore import Grads, Mlp, Params, add_into, softmax
from ..embedspace import ConceptSpace, WordVecTable
from ..evaluation import ScoreMatrix, score_with
from ..losses import LossBreakdown, LossWeights, concept_class_loss, total_loss
from ._base import BaseModel


class VisProdModel(BaseModel):
    """Two ``F -> hidden -> {m, n}`` ReLU networks. ``latent_dim`` is the
    hidden width and no word vectors are used.
    """

    NAME = 'visprod'
    DEFAULT_WEIGHT_DECAY = 5e-5
    LATENT_KEY = 'hidden_dim'

    def __init__(
        self,
        space: ConceptSpace,
        feature_dim: int,
        word_dim: int = 0,
        latent_dim: int = 512,
        rng: Optional[np.random.Generator] = None,
        words: Optional[WordVecTable] = None,
        **options: Any,
    ) -> None:
        super(VisProdModel, self).__init__(space, feature_dim, 0, latent_dim, rng, None, **options)
        self.attr_net = Mlp.build([self.feature_dim, self.latent_dim, space.m], self.rng)
        self.obj_net = Mlp.build([self.feature_dim, self.latent_dim, space.n], self.rng)

    def nets(self) -> Dict[str, Mlp]:
        return {'attr_net': self.attr_net, 'obj_net': self.obj_net}

    def parameters(self) -> Params:
        return self.mlp_parameters()

    def probabilities(self, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        attr_logits, _ = self.attr_net.forward(features)
        obj_logits, _ = self.obj_net.forward(features)
        return softmax(attr_logits), softmax(obj_logits)

    def concept_scores(self, features: np.ndarray) -> np.ndarray:
        p_attr, p_obj = self.probabilities(np.atleast_2d(features))
        columns = np.array(self.space.concepts(), dtype=np.int64)
        return p_attr[:, columns[:, 0]] * p_obj[:, columns[:, 1]]

    def score(self, features: np.ndarray, threads: int = 1) -> ScoreMatrix:
        return score_with(self.concept_scores, np.atleast_2d(features), self.space, threads)

    def loss_and_grads(self, batch: Batch, weights: LossWeights) -> Tuple[LossBreakdown, Grads]:
        grads = self.zero_grads()
        terms: Dict[str, float] = {}
        if weights.lambda_cls > 0:
            attr_logits, tape_a = self.attr_net.forward(batch.features)
            obj_logits, tape_o = self.obj_net.forward(batch.features)
            terms['cls'], g = concept_class_loss(attr_logits, obj_logits, batch.attrs, batch.objs)
            g_attr, _ = self.attr_net.backward(tape_a, weights.lambda_cls * g['attr_logits'])
            g_obj, _ = self.obj_net.backward(tape_o, weights.lambda_cls * g['obj_logits'])
            add_into(grads, g_attr, 'attr_net.')
            add_into(grads, g_obj, 'obj_net.')
        return total_loss(terms, weights), grads
