"""
Value types passed between the audio stages.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import soundfile as sf

from core.exceptions import ClipIOError, InvalidInputError

CLASS_NAMES = (
    'engine',
    'machinery-impact',
    'non-machinery-impact',
    'powered-saw',
    'alert-signal',
    'music',
    'human-voice',
    'dog',
)
NUM_CLASSES = len(CLASS_NAMES)


@dataclass(frozen=True)
class Waveform:
    """mono samples in [-1, 1] at an integer sample rate"""
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidInputError(
                f'sample rate must be positive, got {self.sample_rate}')
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidInputError('waveform must be a non-empty 1-d array')
        object.__setattr__(self, 'samples', samples)

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class LogMelSpectrogram:
    """log mel energies, shape ``(mel_bins, frames)``"""
    values: np.ndarray
    win_ms: float
    hop_ms: float

    @property
    def mel_bins(self):
        return self.values.shape[0]

    @property
    def frames(self):
        return self.values.shape[1]


@dataclass
class LabeledClip:
    """one 10 s utterance with its 8 coarse tags

    The waveform is read from ``audio_path`` on first access when it was
    not supplied directly.
    """
    clip_id: str
    labels: np.ndarray
    waveform: Waveform | None = None
    audio_path: Path | None = None
    _loaded: Waveform | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (NUM_CLASSES,):
            raise InvalidInputError(
                f'{self.clip_id}: expected {NUM_CLASSES} labels, '
                f'got shape {self.labels.shape}')
        if not np.isin(self.labels, (0, 1)).all():
            raise InvalidInputError(f'{self.clip_id}: labels must be 0 or 1')

    def load_waveform(self):
        """return the waveform, reading and down-mixing the file if needed"""
        if self.waveform is not None:
            return self.waveform
        if self._loaded is None:
            self._loaded = read_wav(self.audio_path, clip_id=self.clip_id)
        return self._loaded


def read_wav(path, clip_id=None):
    """read a PCM or float WAV as a mono float64 waveform"""
    clip_id = clip_id or Path(str(path)).stem
    try:
        samples, sample_rate = sf.read(str(path), dtype='float64',
                                       always_2d=True)
    except (RuntimeError, OSError, TypeError) as exc:
        raise ClipIOError(f'cannot read audio for clip {clip_id}: {exc}',
                          clip_ids=[clip_id]) from exc
    if samples.size == 0:
        raise ClipIOError(f'empty audio for clip {clip_id}',
                          clip_ids=[clip_id])
    return Waveform(samples.mean(axis=1), int(sample_rate))


def write_wav(path, waveform):
    """write a waveform as 16-bit PCM"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), waveform.samples, waveform.sample_rate,
             subtype='PCM_16')
    return path
