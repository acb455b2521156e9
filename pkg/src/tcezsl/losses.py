"""
    tcezsl.losses
    ~~~~~~~~~~~~~

    Loss terms of the translational concept embedding model. Each term
    works on a batch of rows, reduces with the batch mean and returns the
    gradients wrt its array inputs; the model chains those through its
    networks.
"""

import logging
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np

from .diffcore import euclidean_distance, softmax_cross_entropy, variance
from .errors import ConfigError, PreconditionError

log = logging.getLogger(__name__)

#: pairs whose semantic distance falls below this are resampled
SEMANTIC_FLOOR = 1e-8

LAMBDA_KEYS = ('lambda_cls', 'lambda_tri', 'lambda_rec', 'lambda_op', 'lambda_rvc')


class LossWeights:
    """Loss weights, margins and the RVC pair count. Defaults follow the
    usual TCE setting with ``lambda_cls = 1``.
    """

    FIELDS = LAMBDA_KEYS + ('m_o', 'm_c', 'm_r', 'rvc_pairs')

    def __init__(
        self,
        lambda_cls: float = 1.0,
        lambda_tri: float = 1.0,
        lambda_rec: float = 1.0,
        lambda_op: float = 1.0,
        lambda_rvc: float = 0.01,
        m_o: float = 0.0,
        m_c: float = 0.5,
        m_r: float = 5.0,
        rvc_pairs: int = 100,
    ) -> None:
        self.lambda_cls = float(lambda_cls)
        self.lambda_tri = float(lambda_tri)
        self.lambda_rec = float(lambda_rec)
        self.lambda_op = float(lambda_op)
        self.lambda_rvc = float(lambda_rvc)
        self.m_o = float(m_o)
        self.m_c = float(m_c)
        self.m_r = float(m_r)
        self.rvc_pairs = int(rvc_pairs)
        for key in self.FIELDS[:-1]:
            if getattr(self, key) < 0:
                raise ConfigError('{} must be nonnegative'.format(key))
        if self.rvc_pairs <= 0:
            raise ConfigError('rvc_pairs must be positive')

    def replace(self, **kwargs: Any) -> 'LossWeights':
        values = self.as_dict()
        values.update(kwargs)
        return LossWeights(**values)

    def as_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, key) for key in self.FIELDS}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LossWeights):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        return '<LossWeights {}>'.format(self.as_dict())


class LossBreakdown:
    """Per-term values of one objective evaluation."""

    TERMS = ('op_cls', 'op_tri', 'cls', 'tri', 'rec', 'rvc')

    def __init__(self, total: float = 0.0, **terms: float) -> None:
        unknown = set(terms) - set(self.TERMS)
        if unknown:
            raise KeyError('unknown loss terms: {}'.format(sorted(unknown)))
        self.terms: Dict[str, float] = {t: float(terms.get(t, 0.0)) for t in self.TERMS}
        self.total = float(total)

    def __getattr__(self, name: str) -> float:
        terms = self.__dict__.get('terms')
        if terms is not None and name in terms:
            return terms[name]
        raise AttributeError(name)

    @property
    def op(self) -> float:
        return self.terms['op_cls'] + self.terms['op_tri']

    def as_dict(self) -> Dict[str, float]:
        row = dict(self.terms)
        row['total'] = self.total
        return row

    def __repr__(self) -> str:
        return '<LossBreakdown {}>'.format(self.as_dict())


def triplet_hinge(
    anchor: np.ndarray, positive: np.ndarray, negative: np.ndarray, margin: float
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean of ``max(0, d(anchor, pos) - d(anchor, neg) + margin)`` over rows."""
    d_pos, ga_pos, gp = euclidean_distance(anchor, positive)
    d_neg, ga_neg, gn = euclidean_distance(anchor, negative)
    hinge = np.asarray(d_pos) - np.asarray(d_neg) + margin
    active = (hinge > 0).astype(np.float64)
    rows = max(int(active.size), 1)
    value = float(np.sum(np.maximum(hinge, 0.0)) / rows)
    scale = np.expand_dims(active, -1) / rows
    return value, {
        'anchor': (ga_pos - ga_neg) * scale,
        'positive': gp * scale,
        'negative': -gn * scale,
    }


def object_prototype_loss(
    proto: np.ndarray,
    proto_neg: np.ndarray,
    x: np.ndarray,
    proto_logits: np.ndarray,
    obj_labels: np.ndarray,
    m_o: float,
) -> Tuple[float, float, Dict[str, np.ndarray]]:
    """Object prototype loss: cross-entropy of the prototype head on the
    prototype of the true object, plus the prototype triplet
    ``max(0, d(x, proto) - d(x, proto_neg) + m_o)``.

    :returns: ``(ce, triplet, grads)`` with grads keyed ``proto``,
        ``proto_neg``, ``x`` and ``logits``
    """
    losses, g_logits = softmax_cross_entropy(np.atleast_2d(proto_logits), np.atleast_1d(obj_labels))
    rows = g_logits.shape[0]
    ce = float(np.mean(losses))
    tri, g = triplet_hinge(x, proto, proto_neg, m_o)
    return ce, tri, {
        'proto': g['positive'],
        'proto_neg': g['negative'],
        'x': g['anchor'],
        'logits': g_logits / rows,
    }


def concept_class_loss(
    attr_logits: np.ndarray,
    obj_logits: np.ndarray,
    attr_labels: np.ndarray,
    obj_labels: np.ndarray,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Attribute plus object cross-entropy on composed concept embeddings."""
    la, ga = softmax_cross_entropy(np.atleast_2d(attr_logits), np.atleast_1d(attr_labels))
    lo, go = softmax_cross_entropy(np.atleast_2d(obj_logits), np.atleast_1d(obj_labels))
    rows = ga.shape[0]
    value = float(np.mean(la) + np.mean(lo))
    return value, {'attr_logits': ga / rows, 'obj_logits': go / rows}


def concept_triplet_loss(
    x: np.ndarray, concept: np.ndarray, concept_neg: np.ndarray, m_c: float
) -> Tuple[float, Dict[str, np.ndarray]]:
    value, g = triplet_hinge(x, concept, concept_neg, m_c)
    return value, {'x': g['anchor'], 'concept': g['positive'], 'concept_neg': g['negative']}


def reconstruction_loss(x: np.ndarray, concept: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """Euclidean distance (not squared) between image and concept embeddings."""
    d, gx, gc = euclidean_distance(x, concept)
    d = np.atleast_1d(d)
    rows = d.size
    return float(np.mean(d)), {'x': gx / rows, 'concept': gc / rows}


def concept_loss(l_cls: float, l_tri: float, l_rec: float, weights: LossWeights) -> float:
    return weights.lambda_cls * l_cls + weights.lambda_tri * l_tri + weights.lambda_rec * l_rec


def sample_rvc_pairs(
    semantics: np.ndarray,
    count: int,
    rng: np.random.Generator,
    max_rounds: int = 100,
) -> np.ndarray:
    """Sample ``count`` index pairs ``(i, j)``, ``i != j``, uniformly over the
    rows of ``semantics``; pairs closer than the semantic floor are drawn
    again.
    """
    k = semantics.shape[0]
    if k < 2:
        raise PreconditionError('ratio variance needs at least 2 concepts')
    pairs = np.zeros((count, 2), dtype=np.int64)
    todo = np.arange(count)
    for _ in range(max_rounds):
        i = rng.integers(0, k, size=todo.size)
        j = rng.integers(0, k - 1, size=todo.size)
        j = j + (j >= i)
        pairs[todo, 0] = i
        pairs[todo, 1] = j
        gap = semantics[i] - semantics[j]
        close = np.sqrt(np.sum(gap * gap, axis=1)) < SEMANTIC_FLOOR
        if not np.any(close):
            return pairs
        log.debug('resampling %d rvc pair(s) with coincident semantics', int(close.sum()))
        todo = todo[close]
    raise PreconditionError('could not sample rvc pairs with distinct semantics')


def rvc_loss(
    embeddings: np.ndarray, semantics: np.ndarray, pairs: np.ndarray, m_r: float
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Ratio variance constraint ``max(0, var(r) - m_r)`` with
    ``r_k = d(x_i, x_j) / d(e_i, e_j)`` over the sampled pairs.

    :param embeddings: concept embeddings, one row per candidate concept
    :param semantics: semantic embeddings ``e_a + e_o`` of the same concepts
    :param pairs: ``[P, 2]`` row indices into both arrays
    :returns: ``(value, grads)`` with grads keyed ``embeddings`` and ``semantics``
    """
    if pairs.shape[0] < 2:
        raise PreconditionError('variance needs at least 2 sampled pairs')
    i, j = pairs[:, 0], pairs[:, 1]
    d_x, gx_i, gx_j = euclidean_distance(embeddings[i], embeddings[j])
    d_e, ge_i, ge_j = euclidean_distance(semantics[i], semantics[j])
    if np.any(d_e < SEMANTIC_FLOOR):
        raise PreconditionError('rvc pair with coincident semantic embeddings')
    ratios = d_x / d_e
    var, g_var = variance(ratios)
    g_emb = np.zeros_like(embeddings)
    g_sem = np.zeros_like(semantics)
    value = max(0.0, var - m_r)
    if value > 0.0:
        g_dx = (g_var / d_e)[:, None]
        g_de = (-g_var * ratios / d_e)[:, None]
        np.add.at(g_emb, i, g_dx * gx_i)
        np.add.at(g_emb, j, g_dx * gx_j)
        np.add.at(g_sem, i, g_de * ge_i)
        np.add.at(g_sem, j, g_de * ge_j)
    return value, {'embeddings': g_emb, 'semantics': g_sem}


def total_loss(terms: Mapping[str, float], weights: LossWeights) -> LossBreakdown:
    """Weighted objective: concept loss plus ``lambda_op * L_op`` plus
    ``lambda_rvc * L_rvc``.
    """
    def get(name: str) -> float:
        return float(terms.get(name, 0.0))

    total = (
        concept_loss(get('cls'), get('tri'), get('rec'), weights)
        + weights.lambda_op * (get('op_cls') + get('op_tri'))
        + weights.lambda_rvc * get('rvc')
    )
    return LossBreakdown(total=total, **{t: get(t) for t in LossBreakdown.TERMS})


#: loss subsets of the ablation study, keyed by row label
ABLATION_VARIANTS: Dict[str, Tuple[str, ...]] = {
    '(1) +L_tri': ('tri',),
    '(2) +L_tri+L_cls': ('tri', 'cls'),
    '(3) +L_tri+L_cls+L_rec': ('tri', 'cls', 'rec'),
    '(4) +L_tri+L_cls+L_rec+L_op': ('tri', 'cls', 'rec', 'op'),
    '(5) +L_tri+L_rec+L_op+L_rvc': ('tri', 'rec', 'op', 'rvc'),
    '(6) +L_tri+L_cls+L_rec+L_op+L_rvc': ('tri', 'cls', 'rec', 'op', 'rvc'),
}


def ablation_weights(base: LossWeights, active: Sequence[str]) -> LossWeights:
    """Zero the weight of every term outside ``active``."""
    unknown = set(active) - {'cls', 'tri', 'rec', 'op', 'rvc'}
    if unknown:
        raise ConfigError('unknown loss terms: {}'.format(sorted(unknown)))
    changes = {
        'lambda_' + term: getattr(base, 'lambda_' + term) if term in active else 0.0
        for term in ('cls', 'tri', 'rec', 'op', 'rvc')
    }
    return base.replace(**changes)
