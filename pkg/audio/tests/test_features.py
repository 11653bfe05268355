"""
Tests for log-mel feature extraction
"""
import tempfile
from pathlib import Path

import numpy as np

from django.test import SimpleTestCase

from audio import features
from audio.types import LabeledClip, Waveform
from core.exceptions import ClipIOError, InvalidInputError


def sine(freq, seconds=10.0, rate=16000, amplitude=0.5):
    """create and return a pure tone"""
    t = np.arange(int(seconds * rate)) / rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t), rate)


def labels(*positive):
    values = np.zeros(8, dtype=np.int64)
    values[list(positive)] = 1
    return values


class ResampleTests(SimpleTestCase):
    """Test resampling"""

    def test_same_rate_is_identity(self):
        """resampling to the current rate keeps every sample"""
        w = sine(440.0)
        out = features.resample(w, 16000)

        np.testing.assert_array_equal(out.samples, w.samples)
        self.assertIsNot(out.samples, w.samples)

    def test_downsample_length(self):
        """10 s at 32 kHz becomes 160000 samples"""
        out = features.resample(sine(440.0, rate=32000), 16000)

        self.assertEqual(out.sample_rate, 16000)
        self.assertEqual(out.samples.size, 160000)

    def test_downsampled_tone_matches_analytic_tone(self):
        """a 440 Hz tone survives resampling away from the edges"""
        out = features.resample(sine(440.0, rate=32000), 16000)
        expected = sine(440.0).samples

        middle = slice(1000, -1000)
        error = np.abs(out.samples[middle] - expected[middle])
        self.assertLess(np.max(error), 1e-2)
        spectrum = np.abs(np.fft.rfft(out.samples))
        peak_hz = np.argmax(spectrum) * 16000 / out.samples.size
        self.assertAlmostEqual(peak_hz, 440.0, delta=0.5)

    def test_bad_rate_raises(self):
        with self.assertRaises(InvalidInputError):
            features.resample(sine(440.0), 0)


class LogMelTests(SimpleTestCase):
    """Test log-mel shapes and values"""

    def test_teacher_shape(self):
        """a 10 s clip gives a 64 x 998 teacher input"""
        spec = features.log_mel(sine(440.0), 64)

        self.assertEqual(spec.values.shape, (64, 998))
        self.assertEqual(spec.frames, features.frame_count(160000))

    def test_student_shape(self):
        """a 10 s clip gives a 20 x 998 student input"""
        spec = features.log_mel(sine(440.0), 20)

        self.assertEqual(spec.values.shape, (20, 998))
        self.assertEqual(spec.mel_bins, 20)

    def test_silence_is_constant_floor(self):
        """all-zero audio gives log(EPS_FLOOR) everywhere"""
        silence = Waveform(np.zeros(160000), 16000)
        spec = features.log_mel(silence, 20)

        np.testing.assert_allclose(spec.values, np.log(features.EPS_FLOOR))

    def test_tone_energy_in_matching_bin(self):
        """the loudest student bin is the one covering 440 Hz"""
        spec = features.log_mel(sine(440.0), 20)
        centers = features.librosa.mel_frequencies(n_mels=22, fmin=0.0,
                                                   fmax=8000.0)[1:-1]

        loudest = int(np.argmax(spec.values.mean(axis=1)))
        nearest = int(np.argmin(np.abs(centers - 440.0)))
        self.assertLessEqual(abs(loudest - nearest), 1)

    def test_shorter_than_window_raises(self):
        """fewer samples than one 25 ms window is invalid input"""
        with self.assertRaises(InvalidInputError):
            features.log_mel(Waveform(np.ones(100), 16000), 20)


class StandardizeTests(SimpleTestCase):

    def test_zero_mean_unit_variance_per_bin(self):
        rng = np.random.default_rng(0)
        spec = features.LogMelSpectrogram(rng.normal(3.0, 2.0, (20, 998)),
                                          25.0, 10.0)
        out = features.standardize(spec).values

        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.std(axis=1), 1.0, atol=1e-12)

    def test_flat_bins_become_zero(self):
        values = np.full((20, 998), -23.0)
        out = features.standardize(
            features.LogMelSpectrogram(values, 25.0, 10.0)).values

        np.testing.assert_array_equal(out, 0.0)


class ExtractPairTests(SimpleTestCase):
    """Test extraction from labeled clips"""

    def test_pad_short_clip(self):
        """a 5 s clip at 44.1 kHz is resampled and padded to 10 s"""
        clip = LabeledClip('short', labels(4),
                           waveform=sine(440.0, seconds=5.0, rate=44100))
        teacher, student = features.extract_pair(clip)

        self.assertEqual(teacher.values.shape, (64, 998))
        self.assertEqual(student.values.shape, (20, 998))

    def test_truncate_long_clip(self):
        w = features.fit_duration(sine(440.0, seconds=12.0))

        self.assertEqual(w.samples.size, features.CLIP_SAMPLES)
        np.testing.assert_array_equal(
            w.samples, sine(440.0, seconds=12.0).samples[:160000])

    def test_unreadable_clip_carries_id(self):
        """a missing file surfaces as an I/O error naming the clip"""
        clip = LabeledClip('ghost', labels(0),
                           audio_path=Path('/nonexistent/ghost.wav'))

        with self.assertRaises(ClipIOError) as ctx:
            features.extract_pair(clip)

        self.assertEqual(ctx.exception.clip_ids, ('ghost',))


class FeatureCacheTests(SimpleTestCase):
    """Test the per-clip feature cache"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.cache = Path(self.tmp.name)
        self.clips = [
            LabeledClip('a', labels(0), waveform=sine(220.0)),
            LabeledClip('b', labels(4, 6), waveform=sine(880.0)),
        ]

    def tearDown(self):
        self.tmp.cleanup()

    def test_extract_corpus_and_read_back(self):
        """cached features load into a stacked FeatureSet"""
        paths = features.extract_corpus(self.clips, self.cache, jobs=2)
        data = features.FeatureSet.from_cache(self.clips, self.cache)

        self.assertEqual([p.name for p in paths], ['a.feat', 'b.feat'])
        self.assertEqual(data.teacher_inputs.shape, (2, 64, 998))
        self.assertEqual(data.student_inputs.shape, (2, 20, 998))
        self.assertEqual(data.clip_ids, ['a', 'b'])
        np.testing.assert_array_equal(data.labels[1], labels(4, 6))

    def test_cache_matches_direct_extraction(self):
        noise = np.random.default_rng(1).uniform(-0.5, 0.5, 160000)
        clips = [LabeledClip('n', labels(1),
                             waveform=Waveform(noise, 16000))]
        features.extract_corpus(clips, self.cache)
        cached = features.FeatureSet.from_cache(clips, self.cache)
        direct = features.FeatureSet.from_clips(clips)

        np.testing.assert_allclose(cached.student_inputs,
                                   direct.student_inputs, atol=1e-4)

    def test_missing_cache_entries_raise(self):
        with self.assertRaises(ClipIOError) as ctx:
            features.FeatureSet.from_cache(self.clips, self.cache)

        self.assertEqual(ctx.exception.clip_ids, ('a', 'b'))

    def test_subset(self):
        data = features.FeatureSet.from_clips(self.clips)
        part = data.subset([1])

        self.assertEqual(part.clip_ids, ['b'])
        self.assertEqual(len(part), 1)
