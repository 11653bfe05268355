"""
Tests for the similarity kernels
"""
import math

import numpy as np
import torch

from django.test import SimpleTestCase

from core.exceptions import InvalidInputError
from distill import kernels
from distill.kernels import FeatureMap, SquashParams


def random_map(rng):
    shape = tuple(int(n) for n in rng.integers(1, 5, size=4))
    return torch.as_tensor(rng.standard_normal(shape))


def naive_sp_gram(a):
    b = a.shape[0]
    q = a.reshape(b, -1)
    g = np.zeros((b, b))
    for i in range(b):
        for j in range(b):
            for k in range(q.shape[1]):
                g[i, j] += q[i, k] * q[j, k]
    for i in range(b):
        norm = math.sqrt(sum(g[i, j] ** 2 for j in range(b)))
        g[i] = 0.0 if norm < kernels.EPS_NORM else g[i] / norm
    return g


def naive_channel_normalize(a):
    out = np.zeros_like(a)
    b, c, h, w = a.shape
    for i in range(b):
        for j in range(c):
            norm = math.sqrt(sum(a[i, j, y, x] ** 2
                                 for y in range(h) for x in range(w)))
            if norm >= kernels.EPS_NORM:
                out[i, j] = a[i, j] / norm
    return out


def naive_frame_gram(a, index):
    _, c, h, w = a.shape
    g = np.zeros((w, w))
    for s in range(w):
        for t in range(w):
            for j in range(c):
                for y in range(h):
                    g[s, t] += a[index, j, y, s] * a[index, j, y, t]
    return g


def naive_resize(a, target_h, target_w):
    b, c, h, w = a.shape
    out = np.zeros((b, c, target_h, target_w))

    def source(i, n_out, n_in):
        pos = 0.0 if n_out == 1 else i * (n_in - 1) / (n_out - 1)
        low = min(int(math.floor(pos)), n_in - 1)
        high = min(low + 1, n_in - 1)
        return low, high, pos - low

    for y in range(target_h):
        y0, y1, fy = source(y, target_h, h)
        for x in range(target_w):
            x0, x1, fx = source(x, target_w, w)
            out[:, :, y, x] = (
                a[:, :, y0, x0] * (1 - fy) * (1 - fx)
                + a[:, :, y0, x1] * (1 - fy) * fx
                + a[:, :, y1, x0] * fy * (1 - fx)
                + a[:, :, y1, x1] * fy * fx)
    return out


class NaiveReferenceTests(SimpleTestCase):
    """every kernel matches a loop implementation on random inputs"""

    def setUp(self):
        self.rng = np.random.default_rng(20)

    def test_sp_gram(self):
        for _ in range(200):
            a = random_map(self.rng)
            np.testing.assert_allclose(
                kernels.sp_gram(a).values.numpy(), naive_sp_gram(a.numpy()),
                rtol=0, atol=1e-10)

    def test_channel_normalize(self):
        for _ in range(200):
            a = random_map(self.rng)
            np.testing.assert_allclose(
                kernels.channel_normalize(a).numpy(),
                naive_channel_normalize(a.numpy()), rtol=0, atol=1e-10)

    def test_frame_gram(self):
        for _ in range(200):
            a = kernels.channel_normalize(random_map(self.rng))
            index = int(self.rng.integers(0, a.shape[0]))
            np.testing.assert_allclose(
                kernels.frame_gram(a, index).values.numpy(),
                naive_frame_gram(a.numpy(), index), rtol=0, atol=1e-10)

    def test_frame_grams_batch_matches_single(self):
        a = kernels.channel_normalize(
            torch.as_tensor(self.rng.standard_normal((3, 2, 4, 5))))
        batch = kernels.frame_grams(a)
        for i in range(3):
            torch.testing.assert_close(batch[i],
                                       kernels.frame_gram(a, i).values)

    def test_sigmoid_squash(self):
        p = SquashParams()
        for _ in range(200):
            g = torch.as_tensor(self.rng.standard_normal((4, 4)))
            expected = 1.0 / (1.0 + np.exp(-p.gamma * (g.numpy() - p.delta)))
            np.testing.assert_allclose(
                kernels.sigmoid_squash(g, p).numpy(), expected,
                rtol=0, atol=1e-10)

    def test_bilinear_resize(self):
        for _ in range(200):
            a = random_map(self.rng)
            h, w = (int(n) for n in self.rng.integers(1, 7, size=2))
            np.testing.assert_allclose(
                kernels.bilinear_resize(a, h, w).numpy(),
                naive_resize(a.numpy(), h, w), rtol=0, atol=1e-10)


class SpGramTests(SimpleTestCase):

    def test_orthonormal_rows_give_identity(self):
        a = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        g = kernels.sp_gram(a.reshape(2, 1, 1, 2))

        torch.testing.assert_close(g.values, torch.eye(2, dtype=torch.float64))
        self.assertEqual(g.kind, kernels.SimilarityKind.BATCH)

    def test_parallel_rows(self):
        a = torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=torch.float64)
        g = kernels.sp_gram(a.reshape(2, 1, 1, 2)).values

        torch.testing.assert_close(
            g, torch.full((2, 2), 1 / math.sqrt(2), dtype=torch.float64))

    def test_scale_invariance_and_unit_rows(self):
        a = torch.randn(4, 3, 2, 5, dtype=torch.float64)
        g = kernels.sp_gram(a).values

        torch.testing.assert_close(kernels.sp_gram(7.5 * a).values, g)
        torch.testing.assert_close(torch.linalg.vector_norm(g, dim=1),
                                   torch.ones(4, dtype=torch.float64))

    def test_zero_row_stays_zero(self):
        a = torch.randn(3, 1, 2, 2, dtype=torch.float64)
        a[1] = 0.0
        g = kernels.sp_gram(a).values

        self.assertTrue(torch.isfinite(g).all())
        self.assertTrue(torch.equal(g[1], torch.zeros(3, dtype=torch.float64)))


class ChannelNormalizeTests(SimpleTestCase):

    def test_constant_slice(self):
        a = torch.full((1, 1, 3, 4), 5.0, dtype=torch.float64)
        out = kernels.channel_normalize(a)

        torch.testing.assert_close(
            out, torch.full_like(a, 1 / math.sqrt(12)))

    def test_idempotent(self):
        a = kernels.channel_normalize(torch.randn(2, 3, 4, 5,
                                                  dtype=torch.float64))
        torch.testing.assert_close(kernels.channel_normalize(a), a)

    def test_zero_slice_has_no_nan(self):
        a = torch.zeros(1, 2, 3, 3, dtype=torch.float64)
        a[0, 1] = 1.0
        out = kernels.channel_normalize(a)

        zeros = torch.zeros(3, 3, dtype=torch.float64)
        self.assertTrue(torch.equal(out[0, 0], zeros))
        self.assertTrue(torch.isfinite(out).all())

    def test_keeps_layer_id(self):
        fm = FeatureMap(torch.ones(1, 1, 2, 2), 'pool1')
        out = kernels.channel_normalize(fm)

        self.assertIsInstance(out, FeatureMap)
        self.assertEqual(out.layer_id, 'pool1')


class FrameGramTests(SimpleTestCase):

    def test_orthogonal_frames_give_identity(self):
        a = torch.eye(2, dtype=torch.float64).reshape(1, 1, 2, 2)
        g = kernels.frame_gram(a, 0)

        torch.testing.assert_close(g.values, torch.eye(2, dtype=torch.float64))
        self.assertEqual(g.kind, kernels.SimilarityKind.FRAME)

    def test_identical_frames_give_constant(self):
        frame = torch.tensor([1.0, 2.0, 2.0], dtype=torch.float64)
        a = frame.reshape(1, 1, 3, 1).repeat(1, 1, 1, 4)
        g = kernels.frame_gram(a, 0).values

        torch.testing.assert_close(
            g, torch.full((4, 4), 9.0, dtype=torch.float64))

    def test_symmetric_and_psd(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = kernels.channel_normalize(random_map(rng))
            g = kernels.frame_gram(a, 0).values
            self.assertLessEqual(float((g - g.T).abs().max()), 1e-12)
            self.assertGreaterEqual(float(torch.linalg.eigvalsh(g).min()),
                                    -1e-8)

    def test_invariant_to_channel_rescaling(self):
        a = torch.randn(2, 3, 4, 5, dtype=torch.float64)
        scale = torch.tensor([0.5, 3.0, 11.0],
                             dtype=torch.float64).reshape(1, 3, 1, 1)
        g = kernels.frame_gram(kernels.channel_normalize(a), 1).values

        torch.testing.assert_close(
            kernels.frame_gram(kernels.channel_normalize(a * scale), 1).values,
            g)

    def test_index_out_of_range(self):
        a = torch.ones(2, 1, 1, 3)
        with self.assertRaises(IndexError):
            kernels.frame_gram(a, 2)


class SigmoidSquashTests(SimpleTestCase):

    def test_values(self):
        p = SquashParams(10.0, 0.5)
        g = torch.tensor([0.5, 1.0, 0.0], dtype=torch.float64)
        out = kernels.sigmoid_squash(g, p)

        self.assertEqual(float(out[0]), 0.5)
        self.assertAlmostEqual(float(out[1]), 0.993307, places=6)
        self.assertAlmostEqual(float(out[2]), 0.006693, places=6)

    def test_strictly_monotone(self):
        g = torch.linspace(-1.0, 2.0, 101, dtype=torch.float64)
        out = kernels.sigmoid_squash(g, SquashParams())

        self.assertTrue(bool((out[1:] > out[:-1]).all()))

    def test_squash_twice_raises(self):
        g = kernels.frame_gram(torch.ones(1, 1, 1, 2), 0)
        once = kernels.sigmoid_squash(g, SquashParams())

        self.assertTrue(once.squashed)
        with self.assertRaises(InvalidInputError):
            kernels.sigmoid_squash(once, SquashParams())

    def test_gamma_must_be_positive(self):
        with self.assertRaises(InvalidInputError):
            SquashParams(gamma=0.0)


class BilinearResizeTests(SimpleTestCase):

    def test_same_size_is_identity(self):
        a = torch.randn(2, 3, 4, 5, dtype=torch.float64)
        torch.testing.assert_close(kernels.bilinear_resize(a, 4, 5), a)

    def test_constant_slice(self):
        a = torch.full((1, 2, 3, 3), 2.5, dtype=torch.float64)
        out = kernels.bilinear_resize(a, 7, 2)

        torch.testing.assert_close(out, torch.full((1, 2, 7, 2), 2.5,
                                                   dtype=torch.float64))

    def test_middle_column(self):
        a = torch.tensor([[0.0, 1.0], [0.0, 1.0]],
                         dtype=torch.float64).reshape(1, 1, 2, 2)
        out = kernels.bilinear_resize(a, 2, 3)

        torch.testing.assert_close(out[0, 0, :, 1],
                                   torch.tensor([0.5, 0.5],
                                                dtype=torch.float64))

    def test_bad_target_raises(self):
        with self.assertRaises(InvalidInputError):
            kernels.bilinear_resize(torch.ones(1, 1, 2, 2), 0, 3)


class BandMeanTests(SimpleTestCase):

    def test_band_of_known_matrix(self):
        g = torch.arange(16, dtype=torch.float64).reshape(4, 4)
        # offsets 1..3 around lag 2
        expected = np.mean([1, 6, 11, 2, 7, 3])

        self.assertAlmostEqual(kernels.band_mean(g, 2), expected)

    def test_no_diagonal_raises(self):
        with self.assertRaises(InvalidInputError):
            kernels.band_mean(torch.eye(3), 10)
