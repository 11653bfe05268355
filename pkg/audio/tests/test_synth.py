"""
Tests for the synthetic corpus generator
"""
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from django.test import SimpleTestCase

from audio import synth
from audio.features import STUDENT_MEL_BINS, log_mel, standardize
from audio.manifest import HEADER
from audio.types import CLASS_NAMES, Waveform, read_wav
from core.exceptions import ConfigurationError, InvalidInputError
from distill.kernels import band_mean
from distill.reporting import utterance_similarity


def spec_for(name):
    return synth.CLASS_SPECS[CLASS_NAMES.index(name)]


def period_contrast(waveform, lag):
    """student-input frame gram band at ``lag`` minus the mean of the bands
    half a lag to either side"""
    student = standardize(log_mel(waveform, STUDENT_MEL_BINS))
    g = utterance_similarity(student)
    half = lag // 2
    off = (band_mean(g, lag - half) + band_mean(g, lag + half)) / 2
    return band_mean(g, lag) - off


class RenderEventTests(SimpleTestCase):
    """Test rendering single class events"""

    def test_same_seed_is_bit_identical(self):
        for spec in synth.CLASS_SPECS:
            a = synth.render_event(spec, 11).samples
            b = synth.render_event(spec, 11).samples
            self.assertTrue(np.array_equal(a, b), spec.variant)

    def test_length_and_peak(self):
        """every render is 10 s at 16 kHz without clipping"""
        for spec in synth.CLASS_SPECS:
            w = synth.render_event(spec, 3)
            self.assertEqual(w.samples.size, 160000)
            self.assertEqual(w.sample_rate, 16000)
            self.assertLessEqual(np.max(np.abs(w.samples)), 1.0)

    def test_siren_repeats_at_least_three_times(self):
        for seed in range(10):
            event = synth.render_event_with_events(spec_for('alert-signal'),
                                                   seed)
            self.assertGreaterEqual(10.0 / event.period_s, 3.0)

    def test_impulsive_energy_inside_event_windows(self):
        """>= 90% of the energy sits in windows covering <= 20% of the clip"""
        for spec in synth.CLASS_SPECS:
            if spec.kind is not synth.GeneratorKind.IMPULSIVE:
                continue
            for seed in range(5):
                event = synth.render_event_with_events(spec, seed)
                x = event.waveform.samples
                mask = np.zeros(x.size, dtype=bool)
                for onset, end in event.windows:
                    mask[int(onset * 16000):int(end * 16000)] = True

                self.assertLessEqual(mask.mean(), 0.2)
                self.assertGreaterEqual(
                    np.sum(x[mask] ** 2) / np.sum(x ** 2), 0.9)

    def test_siren_frame_gram_bands_at_its_period(self):
        """the band at the repetition period stands out for sirens only"""
        rng = np.random.default_rng(0)
        siren, noise, nonstationary = [], [], []
        for seed in range(20):
            event = synth.render_event_with_events(spec_for('alert-signal'),
                                                   seed)
            lag = round(event.period_s * 100)
            siren.append(period_contrast(event.waveform, lag))
            white = Waveform(0.1 * rng.standard_normal(160000), 16000)
            noise.append(abs(period_contrast(white, lag)))
            other = spec_for('human-voice' if seed % 2 else 'music')
            nonstationary.append(
                abs(period_contrast(synth.render_event(other, seed), lag)))

        for baseline in (np.mean(noise), np.mean(nonstationary)):
            self.assertGreater(baseline, 0.0)
            self.assertGreaterEqual(np.mean(siren), 2 * baseline)

    def test_invalid_spec_raises(self):
        """a fundamental at or above Nyquist is rejected"""
        with self.assertRaises(ConfigurationError):
            synth.SynthClassSpec(0, synth.GeneratorKind.STATIONARY_BROADBAND,
                                 'engine', fundamental_hz=(100.0, 9000.0))
        with self.assertRaises(ConfigurationError):
            synth.SynthClassSpec(0, synth.GeneratorKind.IMPULSIVE, 'metal',
                                 fundamental_hz=(500.0, 100.0))


class LabelTests(SimpleTestCase):

    def test_one_to_three_labels(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            self.assertIn(int(synth.sample_labels(rng).sum()), (1, 2, 3))

    def test_label_marginals(self):
        """every class shows up in at least 5% of 10000 draws"""
        rng = np.random.default_rng(7)
        draws = np.stack([synth.sample_labels(rng) for _ in range(10000)])

        self.assertGreaterEqual(draws.mean(axis=0).min(), 0.05)

    def test_clip_seed_depends_only_on_seed_and_id(self):
        self.assertEqual(synth.clip_seed(7, 'train-00001'),
                         synth.clip_seed(7, 'train-00001'))
        self.assertNotEqual(synth.clip_seed(7, 'train-00001'),
                            synth.clip_seed(7, 'train-00002'))


class GenerateDatasetTests(SimpleTestCase):
    """Test writing a whole corpus"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_counts_and_files(self):
        manifest = synth.generate_dataset(3, 2, 1, seed=7,
                                          out_dir=self.root / 'a')

        train = pd.read_csv(manifest.csv_path('train'))
        self.assertEqual(list(train.columns), HEADER)
        self.assertEqual(len(train), 3)
        self.assertTrue(train[list(CLASS_NAMES)].isin([0, 1]).all().all())
        self.assertTrue((self.root / 'a' / 'dataset.yaml').exists())

        ids = set()
        for split in synth.SPLITS:
            ids |= set(pd.read_csv(manifest.csv_path(split)).clip_id)
        self.assertEqual(len(ids), 6)

        w = read_wav(manifest.audio_dir / 'train-00000.wav')
        self.assertEqual(w.samples.size, 160000)
        self.assertLessEqual(np.max(np.abs(w.samples)), 1.0)

    def test_fixed_seed_is_byte_identical(self):
        """order of generation and worker count do not matter"""
        a = synth.generate_dataset(2, 1, 1, seed=3, out_dir=self.root / 'a')
        b = synth.generate_dataset(2, 1, 1, seed=3, out_dir=self.root / 'b',
                                   jobs=3)

        for split in synth.SPLITS:
            self.assertEqual(a.csv_path(split).read_bytes(),
                             b.csv_path(split).read_bytes())
        for wav in sorted(a.audio_dir.iterdir()):
            self.assertEqual(wav.read_bytes(),
                             (b.audio_dir / wav.name).read_bytes())

    def test_zero_count_raises(self):
        with self.assertRaises(InvalidInputError):
            synth.generate_dataset(0, 1, 1, seed=1, out_dir=self.root)
