"""
    tcezsl.models.labelembed
    ~~~~~~~~~~~~~~~~~~~~~~~~

    Concept embeddings from the concatenated attribute and object vectors
    through a two-layer network; images are mapped into the same space and
    trained with a concept triplet loss.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..dataforge import Batch
from ..diffcore import Grads, Mlp, Params, add_into
from ..embedspace import ConceptSpace, WordVecTable
from ..errors import ShapeError
from ..evaluation import ScoreMatrix, score_images
from ..losses import LossBreakdown, LossWeights, concept_triplet_loss, total_loss
from ._base import BaseModel


class LabelEmbedModel(BaseModel):
    """``[e_a, e_o]`` goes through ``2w -> 2w -> w``; ``latent_dim`` equals the
    word dimension.
    """

    NAME = 'labelembed'
    DEFAULT_WEIGHT_DECAY = 5e-5

    def __init__(
        self,
        space: ConceptSpace,
        feature_dim: int,
        word_dim: int = 300,
        latent_dim: int = 300,
        rng: Optional[np.random.Generator] = None,
        words: Optional[WordVecTable] = None,
        **options: Any,
    ) -> None:
        if words is not None:
            word_dim = words.dim
        super(LabelEmbedModel, self).__init__(space, feature_dim, word_dim, word_dim, rng, words, **options)
        w = self.word_dim
        if w <= 0:
            raise ShapeError('labelembed needs word vectors of positive width')
        self.image_mapper = Mlp.build([self.feature_dim, w], self.rng)
        self.embedder = Mlp.build([2 * w, 2 * w, w], self.rng)
        self.attr_table = self.init_table(space.attributes)
        self.obj_table = self.init_table(space.objects)

    def nets(self) -> Dict[str, Mlp]:
        return {'image_mapper': self.image_mapper, 'embedder': self.embedder}

    def parameters(self) -> Params:
        params = self.mlp_parameters()
        params['attr_table'] = self.attr_table
        params['obj_table'] = self.obj_table
        return params

    def embed_concept(self, e_a: np.ndarray, e_o: np.ndarray) -> np.ndarray:
        e_a = np.asarray(e_a, dtype=np.float64)
        e_o = np.asarray(e_o, dtype=np.float64)
        if e_a.shape != e_o.shape:
            raise ShapeError('e_a {} and e_o {} differ'.format(e_a.shape, e_o.shape))
        y, _ = self.embedder.forward(np.concatenate([e_a, e_o], axis=-1))
        return y

    def concept_gallery(self, concepts: Any) -> np.ndarray:
        pairs = np.array(list(concepts), dtype=np.int64).reshape(-1, 2)
        return self.embed_concept(self.attr_table[pairs[:, 0]], self.obj_table[pairs[:, 1]])

    def score(self, features: np.ndarray, threads: int = 1) -> ScoreMatrix:
        x, _ = self.image_mapper.forward(np.atleast_2d(features))
        return score_images(x, self.concept_gallery(self.space.concepts()), self.space, threads)

    def loss_and_grads(self, batch: Batch, weights: LossWeights) -> Tuple[LossBreakdown, Grads]:
        grads = self.zero_grads()
        terms: Dict[str, float] = {}
        if weights.lambda_tri > 0:
            lam = weights.lambda_tri
            rows = len(batch)
            w = self.word_dim
            x, tape_x = self.image_mapper.forward(batch.features)
            neg = np.asarray(batch.neg_concepts, dtype=np.int64).reshape(-1, 2)
            attrs = np.concatenate([batch.attrs, neg[:, 0]])
            objs = np.concatenate([batch.objs, neg[:, 1]])
            inputs = np.concatenate([self.attr_table[attrs], self.obj_table[objs]], axis=1)
            concepts, tape_e = self.embedder.forward(inputs)
            terms['tri'], g = concept_triplet_loss(x, concepts[:rows], concepts[rows:], weights.m_c)
            g_concepts = lam * np.concatenate([g['concept'], g['concept_neg']], axis=0)
            g_emb, g_inputs = self.embedder.backward(tape_e, g_concepts)
            g_im, _ = self.image_mapper.backward(tape_x, lam * g['x'])
            add_into(grads, g_emb, 'embedder.')
            add_into(grads, g_im, 'image_mapper.')
            np.add.at(grads['attr_table'], attrs, g_inputs[:, :w])
            np.add.at(grads['obj_table'], objs, g_inputs[:, w:])
        return total_loss(terms, weights), grads
