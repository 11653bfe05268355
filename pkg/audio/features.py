"""
Log-mel feature extraction for the teacher (64 bins) and student (20 bins)
inputs: 16 kHz audio, 25 ms periodic-Hann windows, 10 ms hop, no centering.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import librosa
import numpy as np
from scipy.signal import resample_poly
from tqdm import tqdm

from audio.container import read_container, write_container
from audio.types import LogMelSpectrogram, Waveform
from core.exceptions import ClipIOError, InvalidInputError

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000
CLIP_SECONDS = 10
CLIP_SAMPLES = SAMPLE_RATE * CLIP_SECONDS
WIN_MS = 25.0
HOP_MS = 10.0
TEACHER_MEL_BINS = 64
STUDENT_MEL_BINS = 20
EPS_FLOOR = 1e-10
STD_FLOOR = 1e-8


def resample(w, target_rate):
    """band-limited polyphase resampling to ``target_rate`` Hz"""
    if target_rate <= 0:
        raise InvalidInputError(
            f'target rate must be positive, got {target_rate}')
    if w.sample_rate == target_rate:
        return Waveform(w.samples.copy(), target_rate)

    divisor = gcd(int(w.sample_rate), int(target_rate))
    up, down = target_rate // divisor, w.sample_rate // divisor
    samples = resample_poly(w.samples.astype(np.float64), up, down)
    return Waveform(samples, int(target_rate))


def frame_count(num_samples, sample_rate=SAMPLE_RATE,
                win_ms=WIN_MS, hop_ms=HOP_MS):
    """number of full analysis windows in ``num_samples``"""
    win, hop = _window_sizes(sample_rate, win_ms, hop_ms)
    return (num_samples - win) // hop + 1


def _window_sizes(sample_rate, win_ms, hop_ms):
    return (int(round(sample_rate * win_ms / 1000.0)),
            int(round(sample_rate * hop_ms / 1000.0)))


def log_mel(w, mel_bins, win_ms=WIN_MS, hop_ms=HOP_MS):
    """log(mel energy + EPS_FLOOR) with a 0..Nyquist slaney filterbank"""
    win, hop = _window_sizes(w.sample_rate, win_ms, hop_ms)
    if w.samples.size < win:
        raise InvalidInputError(
            f'clip of {w.samples.size} samples is shorter than one '
            f'{win}-sample window')

    mel = librosa.feature.melspectrogram(
        y=w.samples.astype(np.float64),
        sr=w.sample_rate,
        n_fft=win,
        hop_length=hop,
        win_length=win,
        window='hann',
        center=False,
        power=2.0,
        n_mels=mel_bins,
        fmin=0.0,
        fmax=w.sample_rate / 2.0,
        htk=False,
        norm='slaney',
    )
    return LogMelSpectrogram(np.log(mel + EPS_FLOOR), win_ms, hop_ms)


def standardize(spec):
    """per-bin zero mean, unit variance over time; flat bins become zeros"""
    values = spec.values
    mean = values.mean(axis=1, keepdims=True)
    std = values.std(axis=1, keepdims=True)
    scaled = np.where(std < STD_FLOOR, 0.0,
                      (values - mean) / np.maximum(std, STD_FLOOR))
    return LogMelSpectrogram(scaled, spec.win_ms, spec.hop_ms)


def fit_duration(w, num_samples=CLIP_SAMPLES):
    """zero-pad or truncate at the end to exactly ``num_samples``"""
    samples = w.samples[:num_samples]
    if samples.size < num_samples:
        samples = np.pad(samples, (0, num_samples - samples.size))
    return Waveform(samples, w.sample_rate)


def extract_pair(clip):
    """return ``(teacher_input, student_input)`` log-mels for one clip

    Unreadable audio surfaces as ``ClipIOError`` carrying the clip id.
    """
    waveform = fit_duration(resample(clip.load_waveform(), SAMPLE_RATE))
    return (log_mel(waveform, TEACHER_MEL_BINS),
            log_mel(waveform, STUDENT_MEL_BINS))


def feature_path(cache_dir, clip_id):
    return Path(cache_dir) / f'{clip_id}.feat'


def write_features(path, teacher_input, student_input):
    return write_container(path, {
        'teacher': teacher_input.values,
        'student': student_input.values,
    })


def read_features(path):
    """read a cached ``(teacher_input, student_input)`` pair"""
    if not Path(path).exists():
        clip_id = Path(path).stem
        raise ClipIOError(f'no cached features for clip {clip_id}',
                          clip_ids=[clip_id])
    entries, _ = read_container(path)
    return (LogMelSpectrogram(entries['teacher'].astype(np.float64),
                              WIN_MS, HOP_MS),
            LogMelSpectrogram(entries['student'].astype(np.float64),
                              WIN_MS, HOP_MS))


def extract_corpus(clips, cache_dir, jobs=1):
    """extract and cache features for every clip; returns the written paths"""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    def work(clip):
        teacher_input, student_input = extract_pair(clip)
        return write_features(feature_path(cache_dir, clip.clip_id),
                              teacher_input, student_input)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        paths = list(tqdm(pool.map(work, clips), total=len(clips),
                          desc='features', unit='clip'))
    logger.info('cached features for %d clips in %s', len(paths), cache_dir)
    return paths


@dataclass
class FeatureSet:
    """standardized model inputs stacked over clips"""
    teacher_inputs: np.ndarray
    student_inputs: np.ndarray
    labels: np.ndarray
    clip_ids: list

    def __len__(self):
        return len(self.clip_ids)

    def subset(self, indices):
        indices = list(indices)
        return FeatureSet(self.teacher_inputs[indices],
                          self.student_inputs[indices],
                          self.labels[indices],
                          [self.clip_ids[i] for i in indices])

    @classmethod
    def from_pairs(cls, pairs, clips):
        teacher = np.stack([standardize(t).values for t, _ in pairs])
        student = np.stack([standardize(s).values for _, s in pairs])
        labels = np.stack([clip.labels for clip in clips]).astype(np.float64)
        return cls(teacher, student, labels, [c.clip_id for c in clips])

    @classmethod
    def from_clips(cls, clips, jobs=1):
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            pairs = list(pool.map(extract_pair, clips))
        return cls.from_pairs(pairs, clips)

    @classmethod
    def from_cache(cls, clips, cache_dir):
        missing = [c.clip_id for c in clips
                   if not feature_path(cache_dir, c.clip_id).exists()]
        if missing:
            raise ClipIOError(
                f'missing cached features for {len(missing)} clips: '
                + ', '.join(missing[:10]), clip_ids=missing)
        pairs = [read_features(feature_path(cache_dir, c.clip_id))
                 for c in clips]
        return cls.from_pairs(pairs, clips)
