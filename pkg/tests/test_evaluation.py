import os
import tempfile
from unittest import TestCase

import numpy as np

from tcezsl.embedspace import ConceptSpace, split_concepts
from tcezsl.errors import ConfigError, PreconditionError, ShapeError
from tcezsl.evaluation import (
    CurvePoint,
    ScoreMatrix,
    auc_bias_sweep,
    compute_metrics,
    curve_area,
    evaluate_scores,
    harmonic_mean,
    predict,
    predict_all,
    read_metrics_csv,
    score_images,
    score_with,
    write_curve_csv,
    write_metrics_csv,
)
from tcezsl.helpers import split_concept_names
from tcezsl.util import fmt_percent
from tests import BaseTestCase


def parse_score_case(text):
    header = {}
    labels = []
    rows = []
    for line in text.splitlines():
        if '=' in line:
            label, _, values = line.partition('=')
            a, o = label.split('|')
            labels.append((int(a), int(o)))
            rows.append([float(v) for v in values.split()])
        elif line.strip():
            key, _, value = line.partition(':')
            header[key.strip()] = value.strip()

    def concepts(key):
        return [(int(a), int(o)) for a, o in split_concept_names(header[key])]

    attrs = ['a{}'.format(i) for i in range(int(header['attrs']))]
    objs = ['o{}'.format(i) for i in range(int(header['objs']))]
    space = ConceptSpace(attrs, objs, concepts('seen'), concepts('unseen'))
    return ScoreMatrix(np.array(rows), space), np.array(labels)


class TestMetricFixtures(BaseTestCase):
    def compute(self, text):
        scores, labels = parse_score_case(text)
        report = compute_metrics(scores, labels)
        return '\n'.join(
            '{} = {}'.format(k, fmt_percent(v)) for k, v in report.as_dict().items()
        )


class TestHarmonicMean(BaseTestCase):
    def compute(self, text):
        a, b = (float(v) for v in text.split())
        return fmt_percent(harmonic_mean(a, b))


TestMetricFixtures.load_fixtures('metrics.txt')
TestHarmonicMean.load_fixtures('harmonic_mean.txt')


def random_case(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    space = split_concepts(
        ['a{}'.format(i) for i in range(m)], ['o{}'.format(i) for i in range(n)], 0.6, seed
    )
    columns = space.concepts()
    count = len(columns) * 3
    labels = np.array([columns[i % len(columns)] for i in range(count)])
    # coarse values so that ties occur
    scores = rng.integers(0, 5, size=(count, len(columns))) / 4.0
    return ScoreMatrix(scores, space), labels


def naive_accuracies(scores, labels):
    columns = scores.columns
    seen = [scores.space.is_seen(c) for c in columns]

    def best(row, allowed):
        pick = None
        for j in range(len(columns)):
            if allowed[j] and (pick is None or row[j] > row[pick]):
                pick = j
        return pick

    open_seen, open_unseen, closed_unseen = [], [], []
    for row, label in zip(scores.scores, labels):
        target = columns.index(tuple(label))
        hit = best(row, [True] * len(columns)) == target
        if seen[target]:
            open_seen.append(hit)
        else:
            open_unseen.append(hit)
            closed_unseen.append(best(row, [not s for s in seen]) == target)

    def pct(hits):
        return 100.0 * sum(hits) / len(hits) if hits else 0.0

    return pct(closed_unseen), pct(open_unseen), pct(open_seen)


def naive_auc(scores, labels, bins=100):
    columns = scores.columns
    seen = [scores.space.is_seen(c) for c in columns]
    limit = float(np.max(np.abs(scores.scores)))
    biases = sorted(set(np.linspace(-limit, limit, bins).tolist()) | {0.0})
    best = {}
    for bias in biases:
        hits = {True: [], False: []}
        for row, label in zip(scores.scores, labels):
            target = columns.index(tuple(label))
            pick = 0
            for j in range(1, len(columns)):
                shifted = row[j] + (0.0 if seen[j] else bias)
                if shifted > row[pick] + (0.0 if seen[pick] else bias):
                    pick = j
            hits[seen[target]].append(pick == target)
        x = 100.0 * sum(hits[True]) / len(hits[True])
        y = 100.0 * sum(hits[False]) / len(hits[False])
        best[x] = max(best.get(x, 0.0), y)
    points = sorted(best.items())
    if points[0][0] > 0:
        points.insert(0, (0.0, points[0][1]))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area / 100.0


class TestMetrics(TestCase):
    def setUp(self):
        self.space = ConceptSpace(['a0', 'a1'], ['o0', 'o1'], [(0, 0), (1, 1)], [(0, 1), (1, 0)])

    def test_brute_force_accuracies(self):
        for seed in range(50):
            scores, labels = random_case(seed)
            report = compute_metrics(scores, labels)
            closed, unseen, seen = naive_accuracies(scores, labels)
            self.assertAlmostEqual(report.closed_unseen, closed)
            self.assertAlmostEqual(report.open_unseen, unseen)
            self.assertAlmostEqual(report.open_seen, seen)
            self.assertAlmostEqual(report.unseen_hm, harmonic_mean(closed, unseen))
            self.assertAlmostEqual(report.all_hm, harmonic_mean(unseen, seen))
            self.assertGreaterEqual(report.closed_unseen, report.open_unseen)
            self.assertAlmostEqual(report.auc, naive_auc(scores, labels), delta=1e-9)

    def test_curve_holds_unbiased_point(self):
        for seed in range(10):
            scores, labels = random_case(seed)
            report, curve = evaluate_scores(scores, labels)
            zero = [p for p in curve if p.bias == 0.0]
            self.assertEqual(len(zero), 1)
            self.assertEqual(zero[0].open_seen, report.open_seen)
            self.assertEqual(zero[0].open_unseen, report.open_unseen)
            biases = [p.bias for p in curve]
            self.assertEqual(biases, sorted(biases))

    def test_auc_scale_invariant(self):
        for seed in range(10):
            scores, labels = random_case(seed)
            auc, _ = auc_bias_sweep(scores, labels)
            for factor in (2.0, 0.5):
                scaled = ScoreMatrix(scores.scores * factor, scores.space)
                self.assertEqual(auc_bias_sweep(scaled, labels)[0], auc)

    def test_per_image_smax(self):
        scores = ScoreMatrix(np.array([
            [-3.0, -2.0, -5.0, -4.0],
            [1.0, 0.5, 0.0, -6.0],
        ]), self.space)
        self.assertEqual(scores.s_max('global'), 6.0)
        self.assertEqual(scores.s_max('per_image'), 2.0)
        self.assertRaises(ConfigError, scores.s_max, 'median')

    def test_ties_pick_lowest_column(self):
        scores = ScoreMatrix(np.ones((1, 4)), self.space)
        self.assertEqual(predict(scores, 0), 0)
        self.assertEqual(predict(scores, 0, 'unseen'), 1)
        self.assertEqual(predict(scores, 0, [2, 3]), 2)
        self.assertEqual(list(predict_all(scores, 'seen', bias=5.0)), [0])
        self.assertEqual(list(predict_all(scores, bias=0.5)), [1])

    def test_empty_candidates(self):
        scores = ScoreMatrix(np.ones((1, 4)), self.space)
        self.assertRaises(PreconditionError, predict, scores, 0, [])
        self.assertRaises(PreconditionError, predict_all, scores, np.zeros(4, dtype=bool))

    def test_invalid_scores(self):
        self.assertRaises(ShapeError, ScoreMatrix, np.zeros((2, 3)), self.space)
        bad = np.zeros((1, 4))
        bad[0, 2] = np.nan
        self.assertRaises(ShapeError, ScoreMatrix, bad, self.space)
        scores = ScoreMatrix(np.zeros((1, 4)), self.space)
        self.assertRaises(IndexError, scores.column_of, (2, 0))

    def test_sweep_needs_both_label_kinds(self):
        scores = ScoreMatrix(np.eye(4)[:2], self.space)
        labels = np.array([[0, 0], [1, 1]])
        self.assertRaises(PreconditionError, auc_bias_sweep, scores, labels)
        self.assertRaises(ConfigError, auc_bias_sweep, scores, labels, 1)

        report, curve = evaluate_scores(scores, labels)
        self.assertIsNone(curve)
        self.assertEqual(report.auc, 0.0)
        self.assertEqual(report.closed_unseen, 0.0)
        self.assertEqual(report.open_seen, 50.0)

    def test_no_rows(self):
        scores = ScoreMatrix(np.zeros((0, 4)), self.space)
        self.assertRaises(PreconditionError, compute_metrics, scores, np.zeros((0, 2)))

    def test_curve_area(self):
        curve = [CurvePoint(-1.0, 80.0, 0.0), CurvePoint(0.0, 40.0, 10.0), CurvePoint(1.0, 40.0, 20.0)]
        self.assertAlmostEqual(curve_area(curve), 12.0)
        self.assertEqual(curve_area([]), 0.0)
        self.assertAlmostEqual(curve_area([CurvePoint(0.0, 100.0, 100.0)]), 100.0)


class TestScoring(TestCase):
    def setUp(self):
        attrs = ['a{}'.format(i) for i in range(3)]
        objs = ['o{}'.format(i) for i in range(3)]
        self.space = split_concepts(attrs, objs, 0.6, 1)

    def test_threads_do_not_change_scores(self):
        rng = np.random.default_rng(3)
        features = rng.standard_normal((200, 5))
        gallery = rng.standard_normal((9, 5))
        single = score_images(features, gallery, self.space, threads=1)
        pooled = score_images(features, gallery, self.space, threads=4)
        self.assertTrue(np.array_equal(single.scores, pooled.scores))

    def test_negative_distance(self):
        gallery = np.zeros((9, 2))
        gallery[4] = [3.0, 4.0]
        scores = score_images(np.zeros((1, 2)), gallery, self.space)
        self.assertEqual(scores.scores[0, 4], -5.0)
        self.assertEqual(scores.scores[0, 0], 0.0)

    def test_shape_checks(self):
        self.assertRaises(ShapeError, score_images, np.zeros((1, 2)), np.zeros((8, 2)), self.space)
        self.assertRaises(ShapeError, score_images, np.zeros((1, 3)), np.zeros((9, 2)), self.space)
        self.assertRaises(ShapeError, score_with, lambda x: x, np.zeros(3), self.space)


class TestMetricFiles(TestCase):
    def test_metrics_csv(self):
        space = ConceptSpace(['a0', 'a1'], ['o0', 'o1'], [(0, 0), (1, 1)], [(0, 1), (1, 0)])
        scores = ScoreMatrix(np.array([
            [0.9, 0.1, 0.0, 0.2],
            [0.5, 0.1, 0.0, 0.2],
            [0.1, 0.8, 0.3, 0.0],
        ]), space)
        labels = np.array([[0, 0], [1, 1], [0, 1]])
        report, curve = evaluate_scores(scores, labels)
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'metrics.csv')
            write_metrics_csv(report, path)
            with open(path) as f:
                lines = f.read().splitlines()
            self.assertEqual(lines[0], 'metric,value')
            self.assertEqual(lines[1], 'closed_unseen,100.00')
            self.assertEqual(lines[3], 'open_seen,50.00')
            loaded = read_metrics_csv(path)
            self.assertAlmostEqual(loaded.all_hm, round(report.all_hm, 2))

            curve_path = os.path.join(d, 'curve.csv')
            write_curve_csv(curve, curve_path)
            with open(curve_path) as f:
                rows = f.read().splitlines()
            self.assertEqual(rows[0], 'bias,open_seen,open_unseen')
            self.assertEqual(len(rows), len(curve) + 1)
            self.assertEqual(float(rows[1].split(',')[0]), curve[0].bias)
