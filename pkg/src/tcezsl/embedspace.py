"""
    tcezsl.embedspace
    ~~~~~~~~~~~~~~~~~

    Concept-space bookkeeping, word-vector tables and the semantic
    concept embedding ``e_c = e_a + e_o``.
"""

import logging
import os
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import ConfigError, DataValidationError, FormatError, ShapeError
from .util import fmt_float, rng_stream

log = logging.getLogger(__name__)

Concept = Tuple[int, int]

#: fallback vectors for tokens missing from a word-vector file
FALLBACK_RANGE = 0.1
DEFAULT_WORD_DIM = 300


class ConceptSpace:
    """Attributes, objects and the disjoint seen / unseen concept split.
    Concepts are ``(attr_idx, obj_idx)`` pairs; :meth:`concepts` is the
    stable enumeration used for score-matrix columns.
    """

    def __init__(
        self,
        attributes: Sequence[str],
        objects: Sequence[str],
        seen: Iterable[Concept],
        unseen: Iterable[Concept],
    ) -> None:
        self.attributes: List[str] = list(attributes)
        self.objects: List[str] = list(objects)
        self.seen: Tuple[Concept, ...] = tuple(sorted({(int(a), int(o)) for a, o in seen}))
        self.unseen: Tuple[Concept, ...] = tuple(sorted({(int(a), int(o)) for a, o in unseen}))
        self._validate()
        self._seen_set: Set[Concept] = set(self.seen)
        self._attr_index = {name: i for i, name in enumerate(self.attributes)}
        self._obj_index = {name: i for i, name in enumerate(self.objects)}

    def _validate(self) -> None:
        if len(set(self.attributes)) != len(self.attributes):
            raise DataValidationError('duplicate attribute names')
        if len(set(self.objects)) != len(self.objects):
            raise DataValidationError('duplicate object names')
        overlap = set(self.seen) & set(self.unseen)
        if overlap:
            raise DataValidationError(
                'concepts both seen and unseen: {}'.format(sorted(overlap)[:5])
            )
        for a, o in self.seen + self.unseen:
            if not (0 <= a < self.m and 0 <= o < self.n):
                raise IndexError('concept ({}, {}) outside the space'.format(a, o))
        attrs = {a for a, _ in self.seen}
        objs = {o for _, o in self.seen}
        if len(attrs) != self.m or len(objs) != self.n:
            raise DataValidationError(
                'every attribute and object must appear in a seen concept'
            )

    @property
    def m(self) -> int:
        return len(self.attributes)

    @property
    def n(self) -> int:
        return len(self.objects)

    def concepts(self) -> List[Concept]:
        return sorted(self.seen + self.unseen)

    def is_seen(self, concept: Concept) -> bool:
        return concept in self._seen_set

    def attr_index(self, name: str) -> int:
        try:
            return self._attr_index[name]
        except KeyError:
            raise DataValidationError('unknown attribute {!r}'.format(name))

    def obj_index(self, name: str) -> int:
        try:
            return self._obj_index[name]
        except KeyError:
            raise DataValidationError('unknown object {!r}'.format(name))

    def concept_name(self, concept: Concept) -> str:
        a, o = concept
        return self.attributes[a] + ' ' + self.objects[o]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConceptSpace):
            return NotImplemented
        return (
            self.attributes == other.attributes
            and self.objects == other.objects
            and self.seen == other.seen
            and self.unseen == other.unseen
        )

    def __repr__(self) -> str:
        return '<ConceptSpace m={} n={} seen={} unseen={}>'.format(
            self.m, self.n, len(self.seen), len(self.unseen)
        )


class WordVecTable:
    """Token vectors of one shared dimension.

    :param dim: vector dimension
    :param vectors: mapping of token to vector
    :param trainable: whether models finetune the tables initialised from it
    """

    def __init__(
        self, dim: int, vectors: Mapping[str, np.ndarray], trainable: bool = True
    ) -> None:
        if dim <= 0:
            raise ShapeError('word vector dim must be positive')
        self.dim = dim
        self.trainable = trainable
        self.vectors: Dict[str, np.ndarray] = {}
        #: tokens filled by the random fallback
        self.missing: List[str] = []
        for token, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (dim,):
                raise ShapeError('vector of {!r} has shape {}'.format(token, arr.shape))
            self.vectors[token] = arr

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, token: str) -> np.ndarray:
        return self.vectors[token]

    def rows(self, tokens: Sequence[str]) -> np.ndarray:
        """Stack the vectors of ``tokens`` into a fresh ``[len, dim]`` matrix."""
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self.vectors[t] for t in tokens]).copy()


def load_word_vectors(
    path: str,
    required_tokens: Sequence[str],
    seed: int = 0,
    dim: Optional[int] = None,
) -> WordVecTable:
    """Read a text word-vector file, one ``token v1 ... vD`` line per token.
    Tokens in ``required_tokens`` that the file lacks get a seeded uniform
    vector in ``[-0.1, 0.1]`` and are listed in ``table.missing``::

        table = load_word_vectors('glove.6B.300d.txt', ['red', 'apple'])
    """
    required = set(required_tokens)
    found: Dict[str, np.ndarray] = {}
    file_dim: Optional[int] = None
    with open(path, 'rb') as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.decode('utf-8').rstrip('\r\n')
            if not line.strip():
                continue
            parts = line.rstrip().split(' ')
            width = len(parts) - 1
            if file_dim is None:
                file_dim = width
            elif width != file_dim:
                raise FormatError(
                    '{}:{}: expected {} values, got {}'.format(path, lineno, file_dim, width)
                )
            if width <= 0:
                raise FormatError('{}:{}: token without values'.format(path, lineno))
            token = parts[0]
            if token in required and token not in found:
                try:
                    found[token] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
                except ValueError:
                    raise FormatError('{}:{}: malformed number'.format(path, lineno))

    if file_dim is None:
        file_dim = dim or DEFAULT_WORD_DIM
    elif dim is not None and dim != file_dim:
        raise FormatError('{} holds {}-dim vectors, expected {}'.format(path, file_dim, dim))

    table = WordVecTable(file_dim, found)
    fill_missing(table, required_tokens, seed)
    return table


def fill_missing(table: WordVecTable, tokens: Sequence[str], seed: int) -> List[str]:
    rng = rng_stream(seed, 'fallback')
    for token in tokens:
        if token in table:
            continue
        table.vectors[token] = rng.uniform(-FALLBACK_RANGE, FALLBACK_RANGE, size=table.dim)
        table.missing.append(token)
        log.warning('no word vector for %r, using random fallback', token)
    if table.missing:
        log.warning('%d token(s) initialised by fallback', len(table.missing))
    return table.missing


def write_word_vectors(table: WordVecTable, path: str) -> None:
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for token, vec in table.vectors.items():
            f.write(token + ' ' + ' '.join(fmt_float(x) for x in vec) + '\n')


def concept_semantic(e_a: np.ndarray, e_o: np.ndarray) -> np.ndarray:
    """Semantic embedding of a concept, ``e_c = e_a + e_o``."""
    e_a = np.asarray(e_a, dtype=np.float64)
    e_o = np.asarray(e_o, dtype=np.float64)
    if e_a.shape != e_o.shape:
        raise ShapeError('e_a {} and e_o {} differ'.format(e_a.shape, e_o.shape))
    return e_a + e_o


def split_concepts(
    attributes: Sequence[str],
    objects: Sequence[str],
    seen_fraction: float,
    seed: int,
    max_retries: int = 1000,
) -> ConceptSpace:
    """Split ``attributes x objects`` into seen and unseen concepts. The seen
    set holds ``round(seen_fraction * m * n)`` concepts and covers every
    attribute and object; sampling is retried until it does.
    """
    m, n = len(attributes), len(objects)
    if not 0.0 < seen_fraction < 1.0:
        raise ConfigError('seen_fraction must lie in (0, 1), got {}'.format(seen_fraction))
    total = m * n
    k = int(round(seen_fraction * total))
    if k < max(m, n) or k >= total:
        raise ConfigError(
            'no covering split of {}x{} with {} seen concepts'.format(m, n, k)
        )

    rng = rng_stream(seed, 'split')
    for attempt in range(max_retries):
        chosen = rng.permutation(total)[:k]
        attrs = {int(i) // n for i in chosen}
        objs = {int(i) % n for i in chosen}
        if len(attrs) == m and len(objs) == n:
            seen = [(int(i) // n, int(i) % n) for i in chosen]
            seen_set = set(seen)
            unseen = [(a, o) for a in range(m) for o in range(n) if (a, o) not in seen_set]
            return ConceptSpace(attributes, objects, seen, unseen)
        log.debug('split attempt %d does not cover the space, retrying', attempt + 1)
    raise ConfigError(
        'no covering split found after {} retries (fraction {})'.format(max_retries, seen_fraction)
    )
