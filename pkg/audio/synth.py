"""
Seeded synthetic 8-class urban-sound corpus.

Each class is rendered by one of four generator kinds (repetitive tonal,
impulsive, stationary broadband, nonstationary) so that class-wise results
can be read against the acoustic structure the class carries. A clip mixes
1-3 class renders over pink background noise.
"""
import enum
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from scipy import signal
from tqdm import tqdm

from audio.features import CLIP_SAMPLES, SAMPLE_RATE
from audio.types import CLASS_NAMES, NUM_CLASSES, Waveform, write_wav
from core.exceptions import ClipIOError, ConfigurationError, InvalidInputError

logger = logging.getLogger(__name__)

PEAK = 0.9
FADE_SECONDS = 0.01
BACKGROUND_RMS = 0.01
SPLITS = ('train', 'val', 'test')


class GeneratorKind(str, enum.Enum):
    REPETITIVE_TONAL = 'repetitive-tonal'
    IMPULSIVE = 'impulsive'
    STATIONARY_BROADBAND = 'stationary-broadband'
    NONSTATIONARY = 'nonstationary'


@dataclass(frozen=True)
class SynthClassSpec:
    """generator recipe for one tag class

    Ranges are inclusive ``(low, high)`` pairs; ``variant`` selects the
    timbre within a generator kind.
    """
    class_id: int
    kind: GeneratorKind
    variant: str
    fundamental_hz: tuple
    period_s: tuple = (0.5, 2.0)
    event_count: tuple = (1, 1)
    event_seconds: tuple = (0.05, 0.15)
    snr_db: tuple = (5.0, 20.0)

    def __post_init__(self):
        nyquist = SAMPLE_RATE / 2
        for name in ('fundamental_hz', 'period_s', 'event_count',
                     'event_seconds', 'snr_db'):
            low, high = getattr(self, name)
            if low > high:
                raise ConfigurationError(f'{name}: empty range {low}..{high}')
        low, high = self.fundamental_hz
        if not (0 < low and high < nyquist):
            raise ConfigurationError('fundamental must lie in (0, Nyquist)')
        if self.kind is GeneratorKind.REPETITIVE_TONAL \
                and self.period_s[1] * 3 > CLIP_SAMPLES / SAMPLE_RATE:
            raise ConfigurationError('period too long for three repetitions')

    @property
    def name(self):
        return CLASS_NAMES[self.class_id]


CLASS_SPECS = (
    SynthClassSpec(0, GeneratorKind.STATIONARY_BROADBAND, 'engine',
                   fundamental_hz=(30.0, 90.0)),
    SynthClassSpec(1, GeneratorKind.IMPULSIVE, 'metal',
                   fundamental_hz=(300.0, 1500.0), event_count=(3, 6),
                   event_seconds=(0.05, 0.15)),
    SynthClassSpec(2, GeneratorKind.IMPULSIVE, 'thud',
                   fundamental_hz=(60.0, 200.0), event_count=(2, 5),
                   event_seconds=(0.08, 0.2)),
    SynthClassSpec(3, GeneratorKind.STATIONARY_BROADBAND, 'saw',
                   fundamental_hz=(100.0, 300.0)),
    SynthClassSpec(4, GeneratorKind.REPETITIVE_TONAL, 'siren',
                   fundamental_hz=(600.0, 1000.0), period_s=(0.5, 2.0)),
    SynthClassSpec(5, GeneratorKind.NONSTATIONARY, 'music',
                   fundamental_hz=(150.0, 600.0)),
    SynthClassSpec(6, GeneratorKind.NONSTATIONARY, 'voice',
                   fundamental_hz=(90.0, 300.0)),
    SynthClassSpec(7, GeneratorKind.IMPULSIVE, 'bark',
                   fundamental_hz=(400.0, 900.0), event_count=(3, 8),
                   event_seconds=(0.08, 0.2)),
)


@dataclass(frozen=True)
class RenderedEvent:
    """a class render plus the generator's own timing facts"""
    waveform: Waveform
    windows: tuple
    period_s: float | None = None


def _time():
    return np.arange(CLIP_SAMPLES) / SAMPLE_RATE


def _fade(x):
    n = int(FADE_SECONDS * SAMPLE_RATE)
    ramp = np.linspace(0.0, 1.0, n)
    x[:n] *= ramp
    x[-n:] *= ramp[::-1]
    return x


def _peak_normalize(x, peak=PEAK):
    top = np.max(np.abs(x))
    return x if top == 0 else x * (peak / top)


def _harmonics(phase, weights):
    return sum(w * np.sin((k + 1) * phase) for k, w in enumerate(weights))


def _render_siren(spec, rng):
    low, high = spec.period_s
    period_frames = int(rng.integers(round(low * 100), round(high * 100) + 1))
    period = period_frames / 100.0
    f0 = rng.uniform(*spec.fundamental_hz)
    depth = rng.uniform(0.3, 0.6)

    t = _time()
    u = np.mod(t, period) / period
    freq = f0 * (1.0 + depth * (1.0 - np.abs(2.0 * u - 1.0)))
    phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE
    x = _fade(_harmonics(phase, (1.0, 0.35, 0.15)))
    return x, ((0.0, CLIP_SAMPLES / SAMPLE_RATE),), period


def _event_onsets(spec, rng):
    count = int(rng.integers(spec.event_count[0], spec.event_count[1] + 1))
    slot = CLIP_SAMPLES / SAMPLE_RATE / count
    windows = []
    for i in range(count):
        duration = rng.uniform(*spec.event_seconds)
        onset = i * slot + rng.uniform(0.0, slot - duration)
        windows.append((onset, onset + duration))
    return windows


def _render_impulses(spec, rng):
    windows = _event_onsets(spec, rng)
    x = np.zeros(CLIP_SAMPLES)
    for onset, end in windows:
        start, stop = int(onset * SAMPLE_RATE), int(end * SAMPLE_RATE)
        t = np.arange(stop - start) / SAMPLE_RATE
        duration = end - onset
        f0 = rng.uniform(*spec.fundamental_hz)
        if spec.variant == 'metal':
            decay = np.exp(-t / (duration / 5.0))
            burst = 0.6 * rng.standard_normal(t.size) \
                + np.sin(2 * np.pi * f0 * t) \
                + 0.5 * np.sin(2 * np.pi * 2.76 * f0 * t)
        elif spec.variant == 'thud':
            decay = np.exp(-t / (duration / 4.0))
            glide = f0 * (1.0 - 0.3 * t / duration)
            burst = np.sin(2 * np.pi * np.cumsum(glide) / SAMPLE_RATE) \
                + 0.2 * rng.standard_normal(t.size)
        else:
            decay = np.sin(np.pi * t / duration) ** 2
            phase = 2 * np.pi * np.cumsum(
                f0 * (1.0 + 0.15 * np.sin(np.pi * t / duration)))
            phase /= SAMPLE_RATE
            burst = _harmonics(phase, (1.0, 0.6, 0.4, 0.2))
        x[start:stop] += burst * decay
    return x, tuple(windows), None


def _lowpass(x, cutoff):
    sos = signal.butter(4, cutoff, btype='lowpass', fs=SAMPLE_RATE,
                        output='sos')
    return signal.sosfilt(sos, x)


def _bandpass(x, low, high):
    sos = signal.butter(4, (low, high), btype='bandpass', fs=SAMPLE_RATE,
                        output='sos')
    return signal.sosfilt(sos, x)


def _render_stationary(spec, rng):
    t = _time()
    f0 = rng.uniform(*spec.fundamental_hz)
    drift = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(0.05, 0.3) * t
                                + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * drift) / SAMPLE_RATE
    noise = rng.standard_normal(CLIP_SAMPLES)

    if spec.variant == 'engine':
        rumble = _lowpass(noise, 600.0)
        firing = 1.0 + 0.5 * np.sin(phase / 2.0)
        hum = _harmonics(phase, (1.0, 0.7, 0.5, 0.35, 0.25, 0.15))
        x = firing * hum + 2.0 * rumble / (np.std(rumble) + 1e-12)
    else:
        buzz = signal.sawtooth(phase)
        hiss = _bandpass(noise, 2000.0, 5000.0)
        x = buzz + 0.8 * hiss / (np.std(hiss) + 1e-12)
    return _fade(x), ((0.0, CLIP_SAMPLES / SAMPLE_RATE),), None


def _segments(rng, shortest, longest, gap_low, gap_high):
    """random (start, stop) spans in seconds tiling the clip with gaps"""
    spans, cursor = [], rng.uniform(0.0, 0.3)
    total = CLIP_SAMPLES / SAMPLE_RATE
    while cursor < total - shortest:
        duration = min(rng.uniform(shortest, longest), total - cursor)
        spans.append((cursor, cursor + duration))
        cursor += duration + rng.uniform(gap_low, gap_high)
    return spans


def _render_nonstationary(spec, rng):
    x = np.zeros(CLIP_SAMPLES)
    if spec.variant == 'voice':
        spans = _segments(rng, 0.1, 0.4, 0.05, 0.3)
    else:
        spans = _segments(rng, 0.15, 0.6, 0.0, 0.1)
    base = rng.uniform(*spec.fundamental_hz)

    for onset, end in spans:
        start, stop = int(onset * SAMPLE_RATE), int(end * SAMPLE_RATE)
        t = np.arange(stop - start) / SAMPLE_RATE
        duration = max(end - onset, 1e-3)
        if spec.variant == 'voice':
            f_start = base * rng.uniform(0.8, 1.25)
            contour = f_start * (1.0 + rng.uniform(-0.3, 0.3) * t / duration)
            formants = (rng.uniform(400, 900), rng.uniform(1000, 2500))
            envelope = np.sin(np.pi * t / duration)
        else:
            semitone = int(rng.integers(0, 13))
            contour = np.full(t.size, base * 2 ** (semitone / 12.0))
            formants = (rng.uniform(300, 1200), rng.uniform(1500, 3500))
            envelope = np.exp(-t / (duration / 3.0))
        phase = 2 * np.pi * np.cumsum(contour) / SAMPLE_RATE
        partials = np.zeros(t.size)
        for k in range(1, 11):
            if k * contour.max() >= SAMPLE_RATE / 2:
                break
            centre = k * contour.mean()
            weight = np.exp(-((centre - formants[0]) / 250) ** 2) \
                + 0.5 * np.exp(-((centre - formants[1]) / 350) ** 2) \
                + 0.05
            partials += weight * np.sin(k * phase)
        x[start:stop] += envelope * partials
    windows = tuple(spans)
    return _fade(x), windows, None


RENDERERS = {
    GeneratorKind.REPETITIVE_TONAL: _render_siren,
    GeneratorKind.IMPULSIVE: _render_impulses,
    GeneratorKind.STATIONARY_BROADBAND: _render_stationary,
    GeneratorKind.NONSTATIONARY: _render_nonstationary,
}


def render_event_with_events(spec, rng_seed):
    """render a 10 s class event and report its event windows in seconds"""
    rng = np.random.default_rng(rng_seed)
    samples, windows, period = RENDERERS[spec.kind](spec, rng)
    return RenderedEvent(Waveform(_peak_normalize(samples), SAMPLE_RATE),
                         windows, period)


def render_event(spec, rng_seed):
    """render a 10 s, 16 kHz class event; deterministic given the seed"""
    return render_event_with_events(spec, rng_seed).waveform


def pink_noise(rng, num_samples=CLIP_SAMPLES):
    """1/f noise with unit RMS, shaped in the frequency domain"""
    spectrum = np.fft.rfft(rng.standard_normal(num_samples))
    freqs = np.fft.rfftfreq(num_samples)
    freqs[0] = freqs[1]
    noise = np.fft.irfft(spectrum / np.sqrt(freqs), n=num_samples)
    noise -= noise.mean()
    return noise / np.sqrt(np.mean(noise ** 2))


def clip_seed(seed, clip_id):
    """per-clip seed so generation order never matters"""
    digest = hashlib.sha256(f'{seed}:{clip_id}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


def sample_labels(rng):
    """1-3 distinct positive classes"""
    count = int(rng.integers(1, 4))
    labels = np.zeros(NUM_CLASSES, dtype=np.int64)
    labels[rng.choice(NUM_CLASSES, size=count, replace=False)] = 1
    return labels


def _active_power(event):
    x = event.waveform.samples
    mask = np.zeros(x.size, dtype=bool)
    for onset, end in event.windows:
        mask[int(onset * SAMPLE_RATE):int(end * SAMPLE_RATE)] = True
    active = x[mask] if mask.any() else x
    return float(np.mean(active ** 2))


def render_clip(seed, clip_id):
    """render one labeled mixture; returns ``(Waveform, labels)``"""
    base = clip_seed(seed, clip_id)
    rng = np.random.default_rng(base)
    labels = sample_labels(rng)

    background = BACKGROUND_RMS * pink_noise(rng)
    noise_power = BACKGROUND_RMS ** 2
    mix = background.copy()
    for class_id in np.flatnonzero(labels):
        spec = CLASS_SPECS[class_id]
        event = render_event_with_events(spec, rng.integers(2 ** 62))
        snr_db = rng.uniform(*spec.snr_db)
        target_power = noise_power * 10 ** (snr_db / 10.0)
        gain = np.sqrt(target_power / max(_active_power(event), 1e-20))
        mix += gain * event.waveform.samples

    peak = np.max(np.abs(mix))
    if peak > PEAK:
        mix *= PEAK / peak
    return Waveform(mix, SAMPLE_RATE), labels


@dataclass(frozen=True)
class Manifest:
    """where a generated (or ingested) corpus lives"""
    root: Path
    audio_dir: Path
    splits: dict

    def csv_path(self, split):
        return self.splits[split]


def write_manifest(rows, path):
    """write ``(clip_id, labels)`` rows with the canonical header"""
    frame = pd.DataFrame(
        [[clip_id, *map(int, labels)] for clip_id, labels in rows],
        columns=['clip_id', *CLASS_NAMES],
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    return path


def generate_dataset(n_train, n_val, n_test, seed, out_dir, jobs=1):
    """write WAVs plus one manifest CSV per split under ``out_dir``"""
    counts = {'train': n_train, 'val': n_val, 'test': n_test}
    for split, count in counts.items():
        if count < 1:
            raise InvalidInputError(
                f'{split} count must be >= 1, got {count}')

    root = Path(out_dir)
    audio_dir = root / 'audio'
    try:
        audio_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ClipIOError(f'cannot write dataset to {root}: {exc}') from exc

    def work(clip_id):
        waveform, labels = render_clip(seed, clip_id)
        write_wav(audio_dir / f'{clip_id}.wav', waveform)
        return clip_id, labels

    splits = {}
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for split, count in counts.items():
            clip_ids = [f'{split}-{i:05d}' for i in range(count)]
            rows = list(tqdm(pool.map(work, clip_ids), total=count,
                             desc=f'synth {split}', unit='clip'))
            splits[split] = write_manifest(rows, root / f'{split}.csv')

    with open(root / 'dataset.yaml', 'w', encoding='utf-8') as fh:
        yaml.safe_dump({'seed': seed, 'counts': counts,
                        'sample_rate': SAMPLE_RATE,
                        'classes': list(CLASS_NAMES)}, fh, sort_keys=False)
    logger.info('generated %s clips under %s', counts, root)
    return Manifest(root, audio_dir, splits)
