"""
Tests for micro and class-wise AUPRC
"""
import tempfile
from pathlib import Path

import numpy as np

from django.test import SimpleTestCase

from audio.synth import write_manifest
from audio.types import CLASS_NAMES
from core.exceptions import (
    InvalidInputError,
    ManifestParseError,
    UndefinedRecallError,
)
from distill import evaluation
from distill.evaluation import PredictionSet


def prediction_set(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    return PredictionSet(scores, labels,
                         [f'c{i}' for i in range(scores.shape[0])])


def brute_force_auprc(scores, labels):
    """direct sweep over every distinct threshold"""
    scores, labels = scores.ravel(), labels.ravel()
    thresholds = [np.inf, *sorted(set(scores.tolist())), -np.inf]
    positives = labels.sum()
    best = {}
    for threshold in thresholds:
        tp = fp = 0
        for score, label in zip(scores, labels):
            if score >= threshold:
                if label:
                    tp += 1
                else:
                    fp += 1
        precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
        recall = tp / positives
        best[recall] = max(best.get(recall, 0.0), precision)

    recalls = sorted(best)
    area = 0.0
    for r0, r1 in zip(recalls, recalls[1:]):
        area += (r1 - r0) * (best[r0] + best[r1]) / 2
    return area


class MicroAuprcTests(SimpleTestCase):
    """Test the global-tally AUPRC"""

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 101))
            labels = (rng.random((n, 8)) < 0.3).astype(int)
            labels[0, 0] = 1
            # coarse scores give ties
            scores = rng.integers(0, 11, (n, 8)) / 10
            value = evaluation.micro_pr_curve(
                prediction_set(scores, labels)).auprc

            self.assertAlmostEqual(value, brute_force_auprc(scores, labels),
                                   delta=1e-12)

    def test_perfect_scores(self):
        labels = np.eye(8, dtype=int)[[0, 3, 5, 7]]
        curve = evaluation.micro_pr_curve(prediction_set(labels, labels))

        self.assertEqual(curve.auprc, 1.0)

    def test_inverted_pair(self):
        curve = evaluation.micro_pr_curve(
            prediction_set([[0.4], [0.6]], [[1], [0]]))

        self.assertAlmostEqual(curve.auprc, 0.75, places=12)
        self.assertEqual(curve.points[-1], (1.0, 0.0))
        self.assertIn((0.5, 1.0), curve.points)

    def test_recall_does_not_increase_with_threshold(self):
        rng = np.random.default_rng(1)
        curve = evaluation.micro_pr_curve(prediction_set(
            rng.random((30, 8)), (rng.random((30, 8)) < 0.4).astype(int)))
        recalls = [r for _, r in curve.points]

        self.assertEqual(recalls, sorted(recalls, reverse=True))
        self.assertTrue(0.0 <= curve.auprc <= 1.0)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        scores = rng.random((40, 8))
        labels = (rng.random((40, 8)) < 0.3).astype(int)
        labels[0, 0] = 1
        plain = evaluation.micro_pr_curve(prediction_set(scores, labels))
        warped = evaluation.micro_pr_curve(
            prediction_set(scores ** 3 / 2, labels))

        self.assertEqual(plain.points, warped.points)
        self.assertEqual(plain.auprc, warped.auprc)

    def test_clip_order_does_not_matter(self):
        rng = np.random.default_rng(3)
        scores = rng.random((25, 8))
        labels = (rng.random((25, 8)) < 0.3).astype(int)
        labels[0, 0] = 1
        order = rng.permutation(25)

        self.assertEqual(
            evaluation.micro_pr_curve(prediction_set(scores, labels)).auprc,
            evaluation.micro_pr_curve(
                prediction_set(scores[order], labels[order])).auprc)

    def test_no_positives_raises(self):
        with self.assertRaises(UndefinedRecallError):
            evaluation.micro_pr_curve(
                prediction_set(np.full((3, 8), 0.5), np.zeros((3, 8), int)))


class ClasswiseAuprcTests(SimpleTestCase):

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(1, 101))
            labels = (rng.random((n, 8)) < 0.3).astype(int)
            labels[rng.integers(0, n, 8), np.arange(8)] = 1
            scores = rng.integers(0, 11, (n, 8)) / 10
            values = evaluation.classwise_auprc(
                prediction_set(scores, labels))

            for k in range(8):
                self.assertAlmostEqual(
                    values[k], brute_force_auprc(scores[:, k], labels[:, k]),
                    delta=1e-12)

    def test_perfect_class(self):
        rng = np.random.default_rng(4)
        labels = (rng.random((20, 8)) < 0.5).astype(int)
        labels[0] = 1
        scores = rng.random((20, 8))
        scores[:, 2] = labels[:, 2]
        values = evaluation.classwise_auprc(prediction_set(scores, labels))

        self.assertEqual(values[2], 1.0)
        self.assertEqual(values.shape, (8,))

    def test_single_class_matches_micro(self):
        rng = np.random.default_rng(5)
        p = prediction_set(rng.random((30, 8)),
                           (rng.random((30, 8)) < 0.5).astype(int))
        p.labels[0, 6] = 1
        single = p.only_class(6)

        self.assertEqual(evaluation.micro_pr_curve(single).auprc,
                         evaluation.classwise_auprc(p)[6])

    def test_random_scores_track_positive_rate(self):
        rng = np.random.default_rng(6)
        values = []
        for _ in range(100):
            labels = np.zeros((200, 1), dtype=int)
            labels[rng.permutation(200)[:100]] = 1
            values.append(evaluation.classwise_auprc(
                prediction_set(rng.random((200, 1)), labels))[0])

        self.assertTrue(0.35 <= np.mean(values) <= 0.65)

    def test_class_without_positives_is_nan(self):
        labels = np.zeros((4, 8), dtype=int)
        labels[:, 0] = [1, 0, 1, 0]
        with self.assertLogs('distill.evaluation', level='WARNING'):
            values = evaluation.classwise_auprc(
                prediction_set(np.full((4, 8), 0.5), labels))

        self.assertFalse(np.isnan(values[0]))
        self.assertTrue(np.isnan(values[1:]).all())

    def test_evaluate_frame(self):
        labels = np.eye(8, dtype=int)
        result = evaluation.evaluate(prediction_set(labels, labels))
        frame = result.to_frame()

        self.assertEqual(list(frame.scope), ['micro', *CLASS_NAMES])
        self.assertEqual(result.micro_auprc, 1.0)
        self.assertTrue((frame.auprc == 1.0).all())


class PredictionSetTests(SimpleTestCase):

    def test_shape_mismatch_raises(self):
        with self.assertRaises(InvalidInputError):
            prediction_set(np.zeros((2, 8)), np.zeros((2, 7), int))

    def test_non_finite_scores_raise(self):
        scores = np.zeros((1, 8))
        scores[0, 3] = np.nan
        with self.assertRaises(InvalidInputError):
            prediction_set(scores, np.zeros((1, 8), int))

    def test_non_binary_labels_raise(self):
        with self.assertRaises(InvalidInputError):
            prediction_set(np.zeros((1, 8)), np.full((1, 8), 2))


class LoadPredictionsTests(SimpleTestCase):
    """Test pairing a prediction CSV with a label manifest"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.labels = self.root / 'labels.csv'
        write_manifest([
            ('a', np.eye(8, dtype=int)[0]),
            ('b', np.eye(8, dtype=int)[5]),
        ], self.labels)

    def tearDown(self):
        self.tmp.cleanup()

    def test_pairs_by_clip_id(self):
        p = prediction_set([[0.1] * 8, [0.9] * 8], np.zeros((2, 8), int))
        p.clip_ids = ['b', 'a']
        path = evaluation.write_predictions(p, self.root / 'pred.csv')
        loaded = evaluation.load_predictions(path, self.labels)

        self.assertEqual(loaded.clip_ids, ['b', 'a'])
        np.testing.assert_array_equal(loaded.labels[0],
                                      np.eye(8, dtype=int)[5])
        np.testing.assert_allclose(loaded.scores[1], 0.9)

    def test_unknown_clip_raises(self):
        p = prediction_set([[0.5] * 8], np.zeros((1, 8), int))
        p.clip_ids = ['zzz']
        path = evaluation.write_predictions(p, self.root / 'pred.csv')

        with self.assertRaises(InvalidInputError):
            evaluation.load_predictions(path, self.labels)

    def test_score_out_of_range_names_line(self):
        path = self.root / 'pred.csv'
        path.write_text('clip_id,' + ','.join(CLASS_NAMES) + '\n'
                        + 'a,' + ','.join(['0.5'] * 8) + '\n'
                        + 'b,' + ','.join(['1.5'] * 8) + '\n')

        with self.assertRaises(ManifestParseError) as ctx:
            evaluation.load_predictions(path, self.labels)

        self.assertEqual(ctx.exception.line, 3)
