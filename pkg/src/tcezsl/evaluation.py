"""
    tcezsl.evaluation
    ~~~~~~~~~~~~~~~~~

    Scoring of images against every concept and the generalized
    compositional zero-shot metrics: closed and open accuracies, harmonic
    means, attribute and object accuracy and the unseen-bias sweep AUC.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Literal

from .embedspace import Concept, ConceptSpace
from .errors import ConfigError, FormatError, PreconditionError, ShapeError
from .util import fmt_float, fmt_percent

log = logging.getLogger(__name__)

SmaxMode = Literal['global', 'per_image']

#: rows scored per task when scoring runs on a thread pool
CHUNK_ROWS = 64

Scorer = Callable[[np.ndarray], np.ndarray]


class ScoreMatrix:
    """Scores of ``N`` images against the concepts of a space, higher is
    better. Column ``j`` is ``columns[j]``; columns follow the sorted
    enumeration :meth:`ConceptSpace.concepts`.
    """

    def __init__(self, scores: np.ndarray, space: ConceptSpace) -> None:
        scores = np.asarray(scores, dtype=np.float64)
        self.columns: List[Concept] = space.concepts()
        if scores.ndim != 2 or scores.shape[1] != len(self.columns):
            raise ShapeError(
                'score matrix {} does not have {} concept columns'.format(
                    scores.shape, len(self.columns))
            )
        if not np.all(np.isfinite(scores)):
            raise ShapeError('score matrix holds non-finite entries')
        self.scores = scores
        self.space = space
        self.col_attr = np.array([a for a, _ in self.columns], dtype=np.int64)
        self.col_obj = np.array([o for _, o in self.columns], dtype=np.int64)
        self.col_seen = np.array([space.is_seen(c) for c in self.columns], dtype=bool)
        self._col_index: Dict[Concept, int] = {c: i for i, c in enumerate(self.columns)}

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    def column_of(self, concept: Concept) -> int:
        try:
            return self._col_index[(int(concept[0]), int(concept[1]))]
        except KeyError:
            raise IndexError('concept {} has no score column'.format(concept))

    def s_max(self, mode: SmaxMode = 'global') -> float:
        """Largest absolute score. ``per_image`` takes the largest absolute
        row maximum instead of the largest absolute entry.
        """
        if not self.scores.size:
            return 0.0
        if mode == 'global':
            return float(np.max(np.abs(self.scores)))
        if mode == 'per_image':
            return float(np.max(np.abs(np.max(self.scores, axis=1))))
        raise ConfigError('unknown s_max mode {!r}'.format(mode))


class MetricsReport:
    """Evaluation metrics in percent."""

    FIELDS = (
        'closed_unseen', 'open_unseen', 'open_seen', 'unseen_hm', 'all_hm',
        'auc', 'attr_acc', 'obj_acc',
    )

    def __init__(self, **values: float) -> None:
        missing = set(self.FIELDS) - set(values)
        unknown = set(values) - set(self.FIELDS)
        if missing or unknown:
            raise KeyError('metrics mismatch: missing {}, unknown {}'.format(
                sorted(missing), sorted(unknown)))
        for key in self.FIELDS:
            setattr(self, key, float(values[key]))

    def as_dict(self) -> Dict[str, float]:
        return {key: getattr(self, key) for key in self.FIELDS}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        body = ' '.join('{}={}'.format(k, fmt_percent(v)) for k, v in self.as_dict().items())
        return '<MetricsReport {}>'.format(body)


class CurvePoint:
    __slots__ = ('bias', 'open_seen', 'open_unseen')

    def __init__(self, bias: float, open_seen: float, open_unseen: float) -> None:
        self.bias = bias
        self.open_seen = open_seen
        self.open_unseen = open_unseen

    def __iter__(self) -> Iterator[float]:
        return iter((self.bias, self.open_seen, self.open_unseen))

    def __repr__(self) -> str:
        return '<CurvePoint bias={} seen={} unseen={}>'.format(
            fmt_float(self.bias), fmt_percent(self.open_seen), fmt_percent(self.open_unseen))


def _pairwise_scores(embeddings: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    diff = embeddings[:, None, :] - gallery[None, :, :]
    return -np.sqrt(np.sum(diff * diff, axis=-1))


def score_with(
    scorer: Scorer, features: np.ndarray, space: ConceptSpace, threads: int = 1
) -> ScoreMatrix:
    """Apply ``scorer`` to fixed row chunks of ``features`` and assemble the
    score matrix. With ``threads > 1`` the chunks run on a thread pool;
    chunking is the same either way, so the result is identical.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError('features must be [N, F]')
    starts = list(range(0, features.shape[0], CHUNK_ROWS))
    chunks = [features[s:s + CHUNK_ROWS] for s in starts]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(scorer, chunks))
    else:
        parts = [scorer(c) for c in chunks]
    k = len(space.seen) + len(space.unseen)
    scores = np.concatenate(parts, axis=0) if parts else np.zeros((0, k))
    return ScoreMatrix(scores, space)


def score_images(
    embeddings: np.ndarray, gallery: np.ndarray, space: ConceptSpace, threads: int = 1
) -> ScoreMatrix:
    """Score each embedded image by its negative euclidean distance to every
    gallery row. ``gallery`` rows follow :meth:`ConceptSpace.concepts`.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if gallery.ndim != 2 or gallery.shape[0] != len(space.concepts()):
        raise ShapeError('gallery needs one row per concept')
    if embeddings.ndim != 2 or embeddings.shape[1] != gallery.shape[1]:
        raise ShapeError(
            'embeddings {} and gallery {} differ in width'.format(embeddings.shape, gallery.shape)
        )
    return score_with(lambda chunk: _pairwise_scores(chunk, gallery), embeddings, space, threads)


def _candidate_mask(scores: ScoreMatrix, candidates: Union[None, str, Sequence[int], np.ndarray]) -> np.ndarray:
    k = len(scores.columns)
    if candidates is None or isinstance(candidates, str):
        named = {'all': np.ones(k, dtype=bool), 'seen': scores.col_seen, 'unseen': ~scores.col_seen}
        if candidates is None:
            candidates = 'all'
        if candidates not in named:
            raise ValueError('unknown candidate set {!r}'.format(candidates))
        mask = named[candidates]
    else:
        arr = np.asarray(candidates)
        if arr.dtype == bool:
            if arr.shape != (k,):
                raise ShapeError('candidate mask needs one entry per column')
            mask = arr
        else:
            mask = np.zeros(k, dtype=bool)
            mask[arr.astype(np.int64)] = True
    if not np.any(mask):
        raise PreconditionError('empty candidate set')
    return mask


def predict_all(
    scores: ScoreMatrix,
    candidates: Union[None, str, Sequence[int], np.ndarray] = None,
    bias: float = 0.0,
) -> np.ndarray:
    """Column index of the best candidate for every row after adding
    ``bias`` to unseen columns. Ties resolve to the lowest column index.
    """
    mask = _candidate_mask(scores, candidates)
    shifted = scores.scores + np.where(scores.col_seen, 0.0, bias)[None, :]
    masked = np.where(mask[None, :], shifted, -np.inf)
    if not masked.shape[0]:
        return np.zeros(0, dtype=np.int64)
    return np.argmax(masked, axis=1)


def predict(
    scores: ScoreMatrix,
    row: int,
    candidates: Union[None, str, Sequence[int], np.ndarray] = None,
    bias: float = 0.0,
) -> int:
    mask = _candidate_mask(scores, candidates)
    shifted = scores.scores[row] + np.where(scores.col_seen, 0.0, bias)
    return int(np.argmax(np.where(mask, shifted, -np.inf)))


def harmonic_mean(a: float, b: float) -> float:
    if a + b == 0:
        return 0.0
    return 2.0 * a * b / (a + b)


def _label_columns(scores: ScoreMatrix, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 2 or labels.shape != (len(scores), 2):
        raise ShapeError('labels {} do not align with {} score rows'.format(labels.shape, len(scores)))
    return np.array([scores.column_of(tuple(row)) for row in labels], dtype=np.int64)


def _percent(hits: np.ndarray) -> float:
    if not hits.size:
        return 0.0
    return 100.0 * float(np.count_nonzero(hits)) / hits.size


def _open_accuracies(
    scores: ScoreMatrix, target: np.ndarray, seen_rows: np.ndarray, bias: float
) -> Tuple[float, float]:
    hits = predict_all(scores, None, bias) == target
    return _percent(hits[seen_rows]), _percent(hits[~seen_rows])


def auc_bias_sweep(
    scores: ScoreMatrix,
    labels: np.ndarray,
    bins: int = 100,
    smax_mode: SmaxMode = 'global',
) -> Tuple[float, List[CurvePoint]]:
    """Sweep a bias added to unseen columns over ``bins`` evenly spaced
    values of ``[-s_max, s_max]`` (plus bias 0) and integrate the curve of
    open unseen over open seen accuracy.

    :returns: ``(auc, curve)`` with the curve ordered by bias
    """
    if bins < 2:
        raise ConfigError('bins must be at least 2')
    target = _label_columns(scores, labels)
    seen_rows = scores.col_seen[target]
    if seen_rows.all() or not seen_rows.any():
        raise PreconditionError('the bias sweep needs seen and unseen labeled images')

    s_max = scores.s_max(smax_mode)
    biases = np.union1d(np.linspace(-s_max, s_max, bins), [0.0])
    curve = []
    for bias in biases:
        seen_acc, unseen_acc = _open_accuracies(scores, target, seen_rows, float(bias))
        curve.append(CurvePoint(float(bias), seen_acc, unseen_acc))
    return curve_area(curve), curve


def curve_area(curve: Iterable[CurvePoint]) -> float:
    """Trapezoidal area under open unseen over open seen, divided by 100.
    Points sharing an open seen value keep the best open unseen; the curve
    starts at open seen 0 with the height of its leftmost point.
    """
    best: Dict[float, float] = {}
    for p in curve:
        best[p.open_seen] = max(best.get(p.open_seen, 0.0), p.open_unseen)
    if not best:
        return 0.0
    xs = sorted(best)
    ys = [best[x] for x in xs]
    if xs[0] > 0.0:
        xs.insert(0, 0.0)
        ys.insert(0, ys[0])
    area = 0.0
    for i in range(1, len(xs)):
        area += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0
    return area / 100.0


def compute_metrics(
    scores: ScoreMatrix,
    labels: np.ndarray,
    bins: int = 100,
    smax_mode: SmaxMode = 'global',
) -> MetricsReport:
    """Evaluate ``scores`` against ``[N, 2]`` ``(attr, obj)`` labels."""
    target = _label_columns(scores, labels)
    if not target.size:
        raise PreconditionError('no images to evaluate')
    seen_rows = scores.col_seen[target]

    if seen_rows.all():
        closed_unseen = 0.0
    else:
        closed = predict_all(scores, 'unseen')
        closed_unseen = _percent(closed[~seen_rows] == target[~seen_rows])

    full = predict_all(scores)
    hits = full == target
    open_seen = _percent(hits[seen_rows])
    open_unseen = _percent(hits[~seen_rows])
    attr_acc = _percent(scores.col_attr[full] == scores.col_attr[target])
    obj_acc = _percent(scores.col_obj[full] == scores.col_obj[target])

    if seen_rows.all() or not seen_rows.any():
        log.warning('split lacks seen or unseen images, auc reported as 0')
        auc = 0.0
    else:
        auc, _ = auc_bias_sweep(scores, labels, bins=bins, smax_mode=smax_mode)

    return MetricsReport(
        closed_unseen=closed_unseen,
        open_unseen=open_unseen,
        open_seen=open_seen,
        unseen_hm=harmonic_mean(closed_unseen, open_unseen),
        all_hm=harmonic_mean(open_unseen, open_seen),
        auc=auc,
        attr_acc=attr_acc,
        obj_acc=obj_acc,
    )


def write_metrics_csv(report: MetricsReport, path: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['metric', 'value'])
        for key, value in report.as_dict().items():
            writer.writerow([key, fmt_percent(value)])


def read_metrics_csv(path: str) -> MetricsReport:
    values: Dict[str, float] = {}
    with open(path, encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ['metric', 'value']:
            raise FormatError('{}: not a metrics file'.format(path))
        for row in reader:
            if len(row) != 2:
                raise FormatError('{}: malformed row {}'.format(path, row))
            values[row[0]] = float(row[1])
    try:
        return MetricsReport(**values)
    except KeyError as e:
        raise FormatError('{}: {}'.format(path, e.args[0]))


def write_curve_csv(curve: Sequence[CurvePoint], path: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['bias', 'open_seen', 'open_unseen'])
        for p in curve:
            writer.writerow([fmt_float(p.bias), fmt_percent(p.open_seen), fmt_percent(p.open_unseen)])


def evaluate_scores(
    scores: ScoreMatrix,
    labels: np.ndarray,
    bins: int = 100,
    smax_mode: SmaxMode = 'global',
) -> Tuple[MetricsReport, Optional[List[CurvePoint]]]:
    """Metrics plus the sweep curve when the labels allow one."""
    report = compute_metrics(scores, labels, bins=bins, smax_mode=smax_mode)
    seen_rows = scores.col_seen[_label_columns(scores, labels)]
    if seen_rows.all() or not seen_rows.any():
        return report, None
    _, curve = auc_bias_sweep(scores, labels, bins=bins, smax_mode=smax_mode)
    return report, curve
