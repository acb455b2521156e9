"""
    tcezsl.dataforge
    ~~~~~~~~~~~~~~~~

    Datasets of precomputed image features: the synthetic compositional
    generator, manifest reading and writing, the ground-truth oracle and
    negative sampling for training batches.
"""

import logging
import os
from collections import Counter
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .embedspace import ConceptSpace, WordVecTable, load_word_vectors, split_concepts, write_word_vectors
from .errors import ConfigError, DataValidationError, FormatError, PreconditionError, ShapeError
from .helpers import (
    MANIFEST_HEADER,
    RESERVED_NAME_CHARS,
    join_concept_names,
    split_concept_names,
    split_names,
)
from .util import fmt_float, rng_stream

if TYPE_CHECKING:
    from .evaluation import MetricsReport

log = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')
MANIFEST_NAME = 'dataset.txt'
SIDECAR_NAME = 'features.bin'
WORDS_NAME = 'words.txt'

#: hidden width of the network that draws synthetic context offsets
CONTEXT_UNITS = 8


class SplitView:
    """Read-only rows of one split."""

    def __init__(self, split: str, features: np.ndarray, attrs: np.ndarray, objs: np.ndarray) -> None:
        self.split = split
        self.features = features
        self.attrs = attrs
        self.objs = objs

    def __len__(self) -> int:
        return int(self.attrs.shape[0])

    @property
    def labels(self) -> np.ndarray:
        """``[N, 2]`` array of ``(attr_idx, obj_idx)``."""
        return np.stack([self.attrs, self.objs], axis=1)


class SyntheticTruth:
    """Generative parameters kept for oracle evaluation."""

    def __init__(
        self,
        centers: np.ndarray,
        directions: np.ndarray,
        perturbations: np.ndarray,
        context_strength: float,
    ) -> None:
        #: object centers ``[n, F]``
        self.centers = centers
        #: global attribute directions ``[m, F]``
        self.directions = directions
        #: object-specific attribute offsets ``[m, n, F]``
        self.perturbations = perturbations
        self.context_strength = context_strength

    def concept_means(self) -> np.ndarray:
        """Noise-free feature of every concept, ``[m, n, F]``."""
        cs = self.context_strength
        return (
            self.centers[None, :, :]
            + (1.0 - cs) * self.directions[:, None, :]
            + cs * self.perturbations
        )


class Dataset:
    """Samples of ``(feature, attr_idx, obj_idx, split)`` over a concept space.

    Train samples must belong to seen concepts. Access to the rows of a
    split goes through :meth:`split`, which counts reads per
    ``(split, purpose)``.
    """

    def __init__(
        self,
        features: np.ndarray,
        attrs: Sequence[int],
        objs: Sequence[int],
        splits: Sequence[str],
        space: ConceptSpace,
        truth: Optional[SyntheticTruth] = None,
        word_vectors: Optional[WordVecTable] = None,
    ) -> None:
        self.features = np.asarray(features, dtype=np.float64)
        self.attrs = np.asarray(attrs, dtype=np.int64)
        self.objs = np.asarray(objs, dtype=np.int64)
        self.splits = np.asarray(splits, dtype=object)
        self.space = space
        self.truth = truth
        self.word_vectors = word_vectors
        self.access_log: Counter = Counter()
        self._validate()
        self.features.setflags(write=False)

    def _validate(self) -> None:
        count = self.attrs.shape[0]
        if self.features.ndim != 2 or self.features.shape[0] != count:
            raise ShapeError('features must be [N, F] with one row per sample')
        if self.objs.shape != (count,) or self.splits.shape != (count,):
            raise ShapeError('labels and splits must have one entry per sample')
        for i in range(count):
            split = self.splits[i]
            if split not in SPLITS:
                raise FormatError('sample {} has unknown split {!r}'.format(i, split))
            concept = (int(self.attrs[i]), int(self.objs[i]))
            check_sample(self.space, split, concept, 'sample {}'.format(i))
        for split in ('val', 'test'):
            idx = self.indices(split)
            if idx.size:
                seen = [self.space.is_seen(c) for c in zip(self.attrs[idx], self.objs[idx])]
                if all(seen):
                    raise DataValidationError('{} split has no unseen-concept samples'.format(split))
                if not any(seen):
                    raise DataValidationError('{} split has no seen-concept samples'.format(split))

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return int(self.attrs.shape[0])

    def indices(self, split: str) -> np.ndarray:
        return np.flatnonzero(self.splits == split)

    def count(self, split: str) -> int:
        return int(self.indices(split).size)

    def split(self, split: str, purpose: str = 'eval') -> SplitView:
        if split not in SPLITS:
            raise ValueError('unknown split {!r}'.format(split))
        self.access_log[(split, purpose)] += 1
        idx = self.indices(split)
        return SplitView(split, self.features[idx], self.attrs[idx], self.objs[idx])


def check_sample(space: ConceptSpace, split: str, concept: Tuple[int, int], where: str) -> None:
    if space.is_seen(concept):
        return
    if concept not in space.unseen:
        raise DataValidationError(
            '{}: concept {!r} is not part of the concept space'.format(
                where, space.concept_name(concept))
        )
    if split == 'train':
        raise DataValidationError(
            '{}: train sample labeled with unseen concept {!r}'.format(
                where, space.concept_name(concept))
        )


class SynthSpec:
    """Parameters of a synthetic compositional dataset.

    :param m: number of attributes
    :param n: number of objects
    :param feature_dim: width of the generated feature vectors
    :param seen_fraction: share of concepts that are seen
    :param samples_per_concept: train samples per seen concept
    :param eval_per_concept: val and test samples per concept, defaults to
        ``samples_per_concept``
    :param noise_sigma: standard deviation of the feature noise
    :param context_strength: weight of object-specific attribute offsets
    :param word_dim: dimension of the generated word vectors
    :param semantic_noise: noise added to the generated word vectors
    """

    FIELDS = (
        'm', 'n', 'feature_dim', 'seen_fraction', 'samples_per_concept',
        'eval_per_concept', 'noise_sigma', 'context_strength', 'word_dim',
        'semantic_noise', 'seed',
    )

    def __init__(
        self,
        m: int = 16,
        n: int = 12,
        feature_dim: int = 64,
        seen_fraction: float = 0.6,
        samples_per_concept: int = 50,
        eval_per_concept: Optional[int] = None,
        noise_sigma: float = 0.3,
        context_strength: float = 0.8,
        word_dim: int = 32,
        semantic_noise: float = 0.1,
        seed: int = 0,
    ) -> None:
        self.m = int(m)
        self.n = int(n)
        self.feature_dim = int(feature_dim)
        self.seen_fraction = float(seen_fraction)
        self.samples_per_concept = int(samples_per_concept)
        if eval_per_concept is None:
            eval_per_concept = samples_per_concept
        self.eval_per_concept = int(eval_per_concept)
        self.noise_sigma = float(noise_sigma)
        self.context_strength = float(context_strength)
        self.word_dim = int(word_dim)
        self.semantic_noise = float(semantic_noise)
        self.seed = int(seed)
        self.validate()

    def validate(self) -> None:
        if self.m < 2 or self.n < 2:
            raise ConfigError('m and n must be at least 2')
        if self.feature_dim < 1 or self.word_dim < 1:
            raise ConfigError('feature_dim and word_dim must be positive')
        if not 0.0 < self.seen_fraction < 1.0:
            raise ConfigError('seen_fraction must lie in (0, 1)')
        if self.samples_per_concept < 1 or self.eval_per_concept < 1:
            raise ConfigError('samples_per_concept must be at least 1')
        if self.noise_sigma < 0 or self.semantic_noise < 0:
            raise ConfigError('noise levels must be nonnegative')
        if not 0.0 <= self.context_strength <= 1.0:
            raise ConfigError('context_strength must lie in [0, 1]')

    def as_dict(self) -> Dict[str, object]:
        return {key: getattr(self, key) for key in self.FIELDS}


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Draw a synthetic dataset whose features follow the additive law
    ``mu_o + (1 - c) tau_a + c delta_ao + noise``. Word vectors are noisy
    random projections of ``tau_a`` and ``mu_o``.

    The offset ``delta_ao`` is a random one-hidden-layer ReLU network of
    the noise-free attribute and object codes, ``C relu(A u_a + B v_o)``.
    Its weights are shared by every pair, seen or unseen.
    """
    spec.validate()
    attributes = ['attr{:02d}'.format(i) for i in range(spec.m)]
    objects = ['obj{:02d}'.format(i) for i in range(spec.n)]
    space = split_concepts(attributes, objects, spec.seen_fraction, spec.seed)

    rng = rng_stream(spec.seed, 'data')
    f = spec.feature_dim
    w = spec.word_dim
    centers = rng.standard_normal((spec.n, f))
    directions = rng.standard_normal((spec.m, f))
    projection = rng.standard_normal((w, f)) / np.sqrt(f)
    attr_codes = directions @ projection.T
    obj_codes = centers @ projection.T
    attr_in = rng.standard_normal((CONTEXT_UNITS, w)) / np.sqrt(w)
    obj_in = rng.standard_normal((CONTEXT_UNITS, w)) / np.sqrt(w)
    out = rng.standard_normal((f, CONTEXT_UNITS)) / np.sqrt(CONTEXT_UNITS)
    hidden = np.maximum(
        (attr_codes @ attr_in.T)[:, None, :] + (obj_codes @ obj_in.T)[None, :, :], 0.0
    )
    perturbations = hidden @ out.T
    truth = SyntheticTruth(centers, directions, perturbations, spec.context_strength)
    means = truth.concept_means()

    features: List[np.ndarray] = []
    attrs: List[int] = []
    objs: List[int] = []
    splits: List[str] = []
    plan = (
        ('train', list(space.seen), spec.samples_per_concept),
        ('val', space.concepts(), spec.eval_per_concept),
        ('test', space.concepts(), spec.eval_per_concept),
    )
    for split, concepts, per_concept in plan:
        for a, o in concepts:
            noise = spec.noise_sigma * rng.standard_normal((per_concept, f))
            features.append(means[a, o][None, :] + noise)
            attrs.extend([a] * per_concept)
            objs.extend([o] * per_concept)
            splits.extend([split] * per_concept)

    vectors: Dict[str, np.ndarray] = {}
    for i, name in enumerate(attributes):
        vectors[name] = attr_codes[i] + spec.semantic_noise * rng.standard_normal(spec.word_dim)
    for i, name in enumerate(objects):
        vectors[name] = obj_codes[i] + spec.semantic_noise * rng.standard_normal(spec.word_dim)
    words = WordVecTable(spec.word_dim, vectors)

    return Dataset(
        np.concatenate(features, axis=0), attrs, objs, splits, space,
        truth=truth, word_vectors=words,
    )


def expected_counts(spec: SynthSpec) -> Dict[str, int]:
    """Closed-form split sizes of :func:`generate_synthetic`."""
    total = spec.m * spec.n
    seen = int(round(spec.seen_fraction * total))
    return {
        'train': seen * spec.samples_per_concept,
        'val': total * spec.eval_per_concept,
        'test': total * spec.eval_per_concept,
    }


def write_dataset(dataset: Dataset, directory: str, encoding: str = 'text') -> str:
    """Write ``dataset.txt`` (plus ``features.bin`` for the binary encoding
    and ``words.txt`` when word vectors are attached) into ``directory``.

    :returns: path of the manifest
    """
    if encoding not in ('text', 'bin'):
        raise ConfigError('encoding must be text or bin')
    space = dataset.space
    for name in space.attributes + space.objects:
        if RESERVED_NAME_CHARS.search(name):
            raise DataValidationError('name {!r} contains a reserved character'.format(name))

    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, MANIFEST_NAME)
    def names(pairs: Sequence[Tuple[int, int]]) -> List[Tuple[str, str]]:
        return [(space.attributes[a], space.objects[o]) for a, o in pairs]

    lines = [
        'attrs: ' + ','.join(space.attributes),
        'objs: ' + ','.join(space.objects),
        'feature_dim: {}'.format(dataset.feature_dim),
        'seen: ' + join_concept_names(names(space.seen)),
        'unseen: ' + join_concept_names(names(space.unseen)),
    ]
    if encoding == 'bin':
        lines.append('encoding: bin')
        lines.append('sidecar: ' + SIDECAR_NAME)
        with open(os.path.join(directory, SIDECAR_NAME), 'wb') as f:
            f.write(dataset.features.astype('<f4').tobytes())
    if dataset.word_vectors is not None:
        write_word_vectors(dataset.word_vectors, os.path.join(directory, WORDS_NAME))
        lines.append('word_vectors: ' + WORDS_NAME)

    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for line in lines:
            f.write(line + '\n')
        for i in range(len(dataset)):
            label = '{},{},{}'.format(
                dataset.splits[i],
                space.attributes[dataset.attrs[i]],
                space.objects[dataset.objs[i]],
            )
            if encoding == 'text':
                label += ',' + ','.join(fmt_float(x) for x in dataset.features[i])
            f.write(label + '\n')
    return path


def load_feature_dataset(manifest_path: str, seed: int = 0) -> Dataset:
    """Load a dataset manifest. ``manifest_path`` may also name the
    directory holding ``dataset.txt``.
    """
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, MANIFEST_NAME)
    base = os.path.dirname(manifest_path)
    header: Dict[str, str] = {}
    rows: List[Tuple[int, str]] = []
    with open(manifest_path, 'rb') as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.decode('utf-8').rstrip('\r\n')
            if not line.strip():
                continue
            m = MANIFEST_HEADER.match(line)
            if m and not rows and m.group('key') not in SPLITS:
                header[m.group('key')] = m.group('value')
            else:
                rows.append((lineno, line))

    for key in ('attrs', 'objs', 'feature_dim', 'seen', 'unseen'):
        if key not in header:
            raise FormatError('{}: missing header {!r}'.format(manifest_path, key))
    try:
        fdim = int(header['feature_dim'])
        attributes = split_names(header['attrs'])
        objects = split_names(header['objs'])
        seen_names = split_concept_names(header['seen'])
        unseen_names = split_concept_names(header['unseen'])
    except ValueError as e:
        raise FormatError('{}: {}'.format(manifest_path, e))

    attr_idx = {a: i for i, a in enumerate(attributes)}
    obj_idx = {o: i for i, o in enumerate(objects)}

    def concept_of(pair: Tuple[str, str]) -> Tuple[int, int]:
        a, o = pair
        if a not in attr_idx or o not in obj_idx:
            raise DataValidationError('{}: unknown concept {}|{}'.format(manifest_path, a, o))
        return attr_idx[a], obj_idx[o]

    space = ConceptSpace(
        attributes, objects,
        [concept_of(p) for p in seen_names],
        [concept_of(p) for p in unseen_names],
    )

    binary = header.get('encoding', 'text') == 'bin'
    width = 3 if binary else 3 + fdim
    count = len(rows)
    features = np.zeros((count, fdim))
    attrs = np.zeros(count, dtype=np.int64)
    objs = np.zeros(count, dtype=np.int64)
    splits: List[str] = []
    for i, (lineno, line) in enumerate(rows):
        where = '{}:{} (row {})'.format(manifest_path, lineno, i + 1)
        cells = line.split(',')
        if len(cells) != width:
            raise FormatError('{}: expected {} fields, got {}'.format(where, width, len(cells)))
        split, attr, obj = cells[0], cells[1], cells[2]
        if split not in SPLITS:
            raise FormatError('{}: unknown split {!r}'.format(where, split))
        if attr not in attr_idx or obj not in obj_idx:
            raise DataValidationError('{}: unknown concept {}|{}'.format(where, attr, obj))
        concept = (attr_idx[attr], obj_idx[obj])
        check_sample(space, split, concept, where)
        if not binary:
            try:
                features[i] = [float(x) for x in cells[3:]]
            except ValueError:
                raise FormatError('{}: malformed number'.format(where))
        attrs[i], objs[i] = concept
        splits.append(split)

    if binary:
        sidecar = os.path.join(base, header.get('sidecar', SIDECAR_NAME))
        with open(sidecar, 'rb') as f:
            data = f.read()
        if len(data) != count * fdim * 4:
            raise FormatError('{}: expected {} float32 values'.format(sidecar, count * fdim))
        features = np.frombuffer(data, dtype='<f4').astype(np.float64).reshape(count, fdim)

    words = None
    if 'word_vectors' in header:
        words = load_word_vectors(
            os.path.join(base, header['word_vectors']), attributes + objects, seed=seed
        )
    log.info('loaded %d samples from %s', count, manifest_path)
    try:
        return Dataset(features, attrs, objs, splits, space, word_vectors=words)
    except DataValidationError as e:
        raise DataValidationError('{}: {}'.format(manifest_path, e))


class Batch:
    """One training batch with its sampled negatives."""

    def __init__(
        self,
        features: np.ndarray,
        attrs: np.ndarray,
        objs: np.ndarray,
        neg_objs: np.ndarray,
        neg_concepts: np.ndarray,
        rvc_pairs: Optional[np.ndarray] = None,
    ) -> None:
        self.features = features
        self.attrs = attrs
        self.objs = objs
        #: negative object per row, for the object prototype loss
        self.neg_objs = neg_objs
        #: negative seen concept ``(attr, obj)`` per row
        self.neg_concepts = neg_concepts
        #: ``[P, 2]`` indices into the model's rvc candidate list
        self.rvc_pairs = rvc_pairs

    def __len__(self) -> int:
        return int(self.attrs.shape[0])


def sample_negatives(
    objs: np.ndarray,
    concepts: np.ndarray,
    space: ConceptSpace,
    rng: Union[int, np.random.Generator],
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw a negative object ``!= o`` uniformly from the objects and a
    negative concept ``!= c`` uniformly from the seen concepts, per row.

    :param objs: object index per row
    :param concepts: ``[B, 2]`` seen concept per row
    :returns: ``(neg_objs, neg_concepts)``
    """
    if isinstance(rng, (int, np.integer)):
        rng = rng_stream(int(rng), 'sampling')
    seen = np.asarray(space.seen, dtype=np.int64)
    if space.n < 2 or seen.shape[0] < 2:
        raise PreconditionError('negative sampling needs 2 objects and 2 seen concepts')
    objs = np.asarray(objs, dtype=np.int64)
    concepts = np.asarray(concepts, dtype=np.int64).reshape(-1, 2)

    neg_objs = rng.integers(0, space.n - 1, size=objs.size)
    neg_objs = neg_objs + (neg_objs >= objs)

    position = {c: i for i, c in enumerate(space.seen)}
    try:
        pos = np.array([position[(int(a), int(o))] for a, o in concepts], dtype=np.int64)
    except KeyError as e:
        raise PreconditionError('positive concept {} is not seen'.format(e.args[0]))
    pick = rng.integers(0, seen.shape[0] - 1, size=pos.size)
    pick = pick + (pick >= pos)
    return neg_objs, seen[pick]


def make_batch(
    view: SplitView, rows: np.ndarray, space: ConceptSpace, rng: np.random.Generator
) -> Batch:
    attrs = view.attrs[rows]
    objs = view.objs[rows]
    neg_objs, neg_concepts = sample_negatives(objs, np.stack([attrs, objs], axis=1), space, rng)
    return Batch(view.features[rows], attrs, objs, neg_objs, neg_concepts)


def bayes_oracle_accuracy(
    dataset: Dataset,
    truth: Optional[SyntheticTruth] = None,
    splits: Sequence[str] = ('val', 'test'),
    bins: int = 100,
) -> Dict[str, 'MetricsReport']:
    """Classify every sample to the nearest ground-truth concept mean and
    report the metrics of each split; an upper bound for learned models.
    """
    from .evaluation import compute_metrics, score_images

    truth = truth or dataset.truth
    if truth is None:
        raise PreconditionError('the oracle needs a synthetic dataset with ground truth')
    means = truth.concept_means()
    columns = dataset.space.concepts()
    gallery = np.stack([means[a, o] for a, o in columns])
    reports = {}
    for split in splits:
        view = dataset.split(split, purpose='oracle')
        if not len(view):
            continue
        scores = score_images(view.features, gallery, dataset.space)
        reports[split] = compute_metrics(scores, view.labels, bins=bins)
    return reports
