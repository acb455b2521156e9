"""
    tcezsl.models.tce
    ~~~~~~~~~~~~~~~~~

    Translational concept embedding: a concept ``(a, o)`` is the prototype
    of object ``o`` moved by an attribute translation that is conditioned
    on that prototype::

        x_ao  = image_mapper(f)
        p_o   = g_o(e_o)
        z_ao  = g_a([p_o, e_a])
        c_ao  = p_o + z_ao

    Images are classified to the concept embedding nearest to ``x``.
"""

from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..dataforge import Batch
from ..diffcore import Grads, Mlp, Params, add_into
from ..embedspace import Concept, ConceptSpace, WordVecTable
from ..errors import ShapeError
from ..evaluation import ScoreMatrix, score_images
from ..losses import (
    LossBreakdown,
    LossWeights,
    concept_class_loss,
    concept_triplet_loss,
    object_prototype_loss,
    reconstruction_loss,
    rvc_loss,
    sample_rvc_pairs,
    total_loss,
)
from ._base import BaseModel


class TceModel(BaseModel):
    """
    :param rvc_include_unseen: draw ratio-variance pairs from unseen
        concepts as well as seen ones
    :param rvc_frozen_semantics: measure semantic distances on the initial
        word vectors instead of the finetuned tables
    """

    NAME = 'tce'

    def __init__(
        self,
        space: ConceptSpace,
        feature_dim: int,
        word_dim: int = 300,
        latent_dim: int = 256,
        rng: Optional[np.random.Generator] = None,
        words: Optional[WordVecTable] = None,
        rvc_include_unseen: bool = False,
        rvc_frozen_semantics: bool = False,
        **options: Any,
    ) -> None:
        super(TceModel, self).__init__(space, feature_dim, word_dim, latent_dim, rng, words, **options)
        d, w, rng = self.latent_dim, self.word_dim, self.rng
        if w <= 0:
            raise ShapeError('tce needs word vectors of positive width')
        self.image_mapper = Mlp.build([self.feature_dim, d], rng)
        self.g_o = Mlp.build([w, d], rng)
        self.g_a = Mlp.build([d + w, d, d], rng)
        self.head_obj_proto = Mlp.build([d, space.n], rng)
        self.head_attr = Mlp.build([d, space.m], rng)
        self.head_obj = Mlp.build([d, space.n], rng)
        self.attr_table = self.init_table(space.attributes)
        self.obj_table = self.init_table(space.objects)

        self.rvc_include_unseen = rvc_include_unseen
        self.rvc_frozen_semantics = rvc_frozen_semantics
        candidates = list(space.seen)
        if rvc_include_unseen:
            candidates = space.concepts()
        self.rvc_candidates = np.array(candidates, dtype=np.int64).reshape(-1, 2)
        self._frozen_attr = self.attr_table.copy()
        self._frozen_obj = self.obj_table.copy()

    def nets(self) -> Dict[str, Mlp]:
        return {
            'image_mapper': self.image_mapper,
            'g_o': self.g_o,
            'g_a': self.g_a,
            'head_obj_proto': self.head_obj_proto,
            'head_attr': self.head_attr,
            'head_obj': self.head_obj,
        }

    def parameters(self) -> Params:
        params = self.mlp_parameters()
        params['attr_table'] = self.attr_table
        params['obj_table'] = self.obj_table
        return params

    def lr_groups(self, lr_attr_table: float) -> Dict[str, float]:
        groups = {'attr_table': lr_attr_table}
        groups.update(super(TceModel, self).lr_groups(lr_attr_table))
        return groups

    def uses_rvc(self) -> bool:
        return True

    # single-vector operations

    def image_embed(self, features: np.ndarray) -> np.ndarray:
        x, _ = self.image_mapper.forward(features)
        return x

    def object_prototype(self, e_o: np.ndarray) -> np.ndarray:
        proto, _ = self.g_o.forward(e_o)
        return proto

    def attribute_translation(self, proto: np.ndarray, e_a: np.ndarray) -> np.ndarray:
        proto = np.asarray(proto, dtype=np.float64)
        e_a = np.asarray(e_a, dtype=np.float64)
        if proto.shape[-1] != self.latent_dim or e_a.shape[-1] != self.word_dim:
            raise ShapeError('prototype {} or attribute {} has the wrong width'.format(
                proto.shape, e_a.shape))
        z, _ = self.g_a.forward(np.concatenate([proto, e_a], axis=-1))
        return z

    @staticmethod
    def compose_concept(proto: np.ndarray, translation: np.ndarray) -> np.ndarray:
        proto = np.asarray(proto, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64)
        if proto.shape != translation.shape:
            raise ShapeError('prototype {} and translation {} differ'.format(
                proto.shape, translation.shape))
        return proto + translation

    def prototypes(self) -> np.ndarray:
        """Prototype of every object, ``[n, D]``."""
        protos, _ = self.g_o.forward(self.obj_table)
        return protos

    def concept_gallery(self, concepts: Sequence[Concept]) -> np.ndarray:
        """Concept embeddings of ``concepts`` stacked into ``[len, D]``."""
        pairs = np.array(list(concepts), dtype=np.int64).reshape(-1, 2)
        if pairs.size and (
            pairs[:, 0].min() < 0 or pairs[:, 0].max() >= self.space.m
            or pairs[:, 1].min() < 0 or pairs[:, 1].max() >= self.space.n
        ):
            raise IndexError('concept index outside the space')
        if not pairs.size:
            return np.zeros((0, self.latent_dim))
        protos = self.prototypes()[pairs[:, 1]]
        z = self.attribute_translation(protos, self.attr_table[pairs[:, 0]])
        return self.compose_concept(protos, z)

    def score(self, features: np.ndarray, threads: int = 1) -> ScoreMatrix:
        x = self.image_embed(np.atleast_2d(features))
        gallery = self.concept_gallery(self.space.concepts())
        return score_images(x, gallery, self.space, threads)

    # training

    def rvc_semantics(self) -> np.ndarray:
        attr_table, obj_table = self.attr_table, self.obj_table
        if self.rvc_frozen_semantics:
            attr_table, obj_table = self._frozen_attr, self._frozen_obj
        c = self.rvc_candidates
        return attr_table[c[:, 0]] + obj_table[c[:, 1]]

    def sample_rvc_pairs(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample_rvc_pairs(self.rvc_semantics(), count, rng)

    def loss_and_grads(self, batch: Batch, weights: LossWeights) -> Tuple[LossBreakdown, Grads]:
        """Evaluate the weighted objective on ``batch`` and backpropagate it.
        Terms with zero weight are skipped and reported as 0.
        """
        grads = self.zero_grads()
        terms: Dict[str, float] = {}
        rows = len(batch)
        d = self.latent_dim

        x, tape_x = self.image_mapper.forward(batch.features)
        protos, tape_p = self.g_o.forward(self.obj_table)
        g_x = np.zeros_like(x)
        g_protos = np.zeros_like(protos)

        if weights.lambda_op > 0:
            lam = weights.lambda_op
            proto = protos[batch.objs]
            logits, tape_h = self.head_obj_proto.forward(proto)
            ce, tri, g = object_prototype_loss(
                proto, protos[batch.neg_objs], x, logits, batch.objs, weights.m_o
            )
            terms['op_cls'], terms['op_tri'] = ce, tri
            g_head, g_proto = self.head_obj_proto.backward(tape_h, lam * g['logits'])
            add_into(grads, g_head, 'head_obj_proto.')
            np.add.at(g_protos, batch.objs, lam * g['proto'] + g_proto)
            np.add.at(g_protos, batch.neg_objs, lam * g['proto_neg'])
            g_x += lam * g['x']

        use_rvc = weights.lambda_rvc > 0 and batch.rvc_pairs is not None
        needs_concepts = use_rvc or any(
            getattr(weights, key) > 0 for key in ('lambda_cls', 'lambda_tri', 'lambda_rec')
        )
        if needs_concepts:
            parts = [
                np.stack([batch.attrs, batch.objs], axis=1),
                np.asarray(batch.neg_concepts, dtype=np.int64).reshape(-1, 2),
            ]
            if use_rvc:
                parts.append(self.rvc_candidates)
            pairs = np.concatenate(parts, axis=0)
            c_attrs, c_objs = pairs[:, 0], pairs[:, 1]
            c_protos = protos[c_objs]
            z, tape_a = self.g_a.forward(np.concatenate([c_protos, self.attr_table[c_attrs]], axis=1))
            concepts = c_protos + z
            g_concepts = np.zeros_like(concepts)
            pos = concepts[:rows]
            neg = concepts[rows:2 * rows]

            if weights.lambda_cls > 0:
                lam = weights.lambda_cls
                attr_logits, tape_ha = self.head_attr.forward(pos)
                obj_logits, tape_ho = self.head_obj.forward(pos)
                terms['cls'], g = concept_class_loss(attr_logits, obj_logits, batch.attrs, batch.objs)
                g_ha, g_pos_a = self.head_attr.backward(tape_ha, lam * g['attr_logits'])
                g_ho, g_pos_o = self.head_obj.backward(tape_ho, lam * g['obj_logits'])
                add_into(grads, g_ha, 'head_attr.')
                add_into(grads, g_ho, 'head_obj.')
                g_concepts[:rows] += g_pos_a + g_pos_o

            if weights.lambda_tri > 0:
                lam = weights.lambda_tri
                terms['tri'], g = concept_triplet_loss(x, pos, neg, weights.m_c)
                g_x += lam * g['x']
                g_concepts[:rows] += lam * g['concept']
                g_concepts[rows:2 * rows] += lam * g['concept_neg']

            if weights.lambda_rec > 0:
                lam = weights.lambda_rec
                terms['rec'], g = reconstruction_loss(x, pos)
                g_x += lam * g['x']
                g_concepts[:rows] += lam * g['concept']

            if use_rvc:
                lam = weights.lambda_rvc
                cand = self.rvc_candidates
                terms['rvc'], g = rvc_loss(
                    concepts[2 * rows:], self.rvc_semantics(), batch.rvc_pairs, weights.m_r
                )
                g_concepts[2 * rows:] += lam * g['embeddings']
                if not self.rvc_frozen_semantics:
                    np.add.at(grads['attr_table'], cand[:, 0], lam * g['semantics'])
                    np.add.at(grads['obj_table'], cand[:, 1], lam * g['semantics'])

            g_ga, g_inputs = self.g_a.backward(tape_a, g_concepts)
            add_into(grads, g_ga, 'g_a.')
            np.add.at(g_protos, c_objs, g_concepts + g_inputs[:, :d])
            np.add.at(grads['attr_table'], c_attrs, g_inputs[:, d:])

        g_go, g_obj_table = self.g_o.backward(tape_p, g_protos)
        add_into(grads, g_go, 'g_o.')
        grads['obj_table'] += g_obj_table
        g_im, _ = self.image_mapper.backward(tape_x, g_x)
        add_into(grads, g_im, 'image_mapper.')
        return total_loss(terms, weights), grads

