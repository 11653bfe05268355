"""
Ingestion of DCASE-style manifests: ``clip_id`` plus one {0,1} column per
coarse class, audio at ``<audio_dir>/<clip_id>.wav``.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from audio.serializers import ManifestRowSerializer, first_error
from audio.types import CLASS_NAMES, LabeledClip
from core.exceptions import ClipIOError, ManifestParseError

logger = logging.getLogger(__name__)

HEADER = ['clip_id', *CLASS_NAMES]


def read_table(csv_path, header=HEADER):
    """read a CSV as strings and check its header (line 1)"""
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False,
                            encoding='utf-8')
    except FileNotFoundError as exc:
        raise ClipIOError(f'manifest not found: {csv_path}') from exc
    except pd.errors.EmptyDataError as exc:
        raise ManifestParseError('empty file, header missing',
                                 line=1) from exc
    except pd.errors.ParserError as exc:
        raise ManifestParseError(str(exc)) from exc

    if list(frame.columns) != list(header):
        raise ManifestParseError(
            f'expected header {",".join(header)}', line=1)
    return frame


def read_manifest_rows(csv_path):
    """validated ``(clip_id, labels)`` rows, without touching audio"""
    frame = read_table(csv_path)
    rows, seen = [], set()
    for index, record in enumerate(frame.to_dict(orient='records')):
        line = index + 2
        serializer = ManifestRowSerializer(data=record)
        if not serializer.is_valid():
            raise ManifestParseError(first_error(serializer.errors),
                                     line=line)
        data = serializer.validated_data
        clip_id = data['clip_id']
        if clip_id in seen:
            raise ManifestParseError(f'duplicate clip_id {clip_id}',
                                     line=line)
        seen.add(clip_id)
        rows.append((clip_id,
                     np.array([data[name] for name in CLASS_NAMES],
                              dtype=np.int64)))
    return rows


def load_manifest(csv_path, audio_dir):
    """one ``LabeledClip`` per manifest row; audio is read lazily

    Every missing audio file is reported in one ``ClipIOError``.
    """
    audio_dir = Path(audio_dir)
    rows = read_manifest_rows(csv_path)
    clips = [LabeledClip(clip_id, labels,
                         audio_path=audio_dir / f'{clip_id}.wav')
             for clip_id, labels in rows]

    missing = [clip.clip_id for clip in clips if not clip.audio_path.exists()]
    if missing:
        raise ClipIOError(
            f'missing audio for {len(missing)} clips: '
            + ', '.join(missing[:10]), clip_ids=missing)
    logger.info('loaded %d clips from %s', len(clips), csv_path)
    return clips


def read_label_manifest(csv_path):
    """labels keyed by clip_id; audio is never touched"""
    return dict(read_manifest_rows(csv_path))
