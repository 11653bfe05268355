"""
Self-describing binary tensor container.

Used for cached features (``<clip_id>.feat``) and model checkpoints. A file
is a magic tag, a YAML text header (empty for features) and a sequence of
named entries, each with its dtype code, rank, dimension list and row-major
little-endian data.
"""
import logging
import struct
from pathlib import Path

import numpy as np
import yaml

from core.exceptions import ClipIOError, InvalidInputError

logger = logging.getLogger(__name__)

MAGIC = b'KDTC'
VERSION = 1

DTYPE_CODES = {1: np.dtype('<f4'), 2: np.dtype('<f8')}
CODE_FOR_DTYPE = {dtype: code for code, dtype in DTYPE_CODES.items()}


def write_container(path, entries, header=None, dtype='<f4'):
    """write named arrays (and an optional YAML header) to ``path``"""
    out_dtype = np.dtype(dtype)
    if out_dtype not in CODE_FOR_DTYPE:
        raise InvalidInputError(f'unsupported container dtype {dtype}')
    header_bytes = yaml.safe_dump(header, sort_keys=True).encode('utf-8') \
        if header else b''

    chunks = [MAGIC, struct.pack('<H', VERSION),
              struct.pack('<I', len(header_bytes)), header_bytes,
              struct.pack('<I', len(entries))]
    for name, values in entries.items():
        array = np.ascontiguousarray(values, dtype=out_dtype)
        name_bytes = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack('<BB', CODE_FOR_DTYPE[out_dtype],
                                  array.ndim))
        chunks.append(struct.pack(f'<{array.ndim}Q', *array.shape))
        chunks.append(array.tobytes(order='C'))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b''.join(chunks))
    logger.debug('wrote %d entries to %s', len(entries), path)
    return path


class _Reader:
    """cursor over container bytes that reports truncation"""

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size):
        end = self.offset + size
        if end > len(self.data):
            raise InvalidInputError(f'{self.path}: truncated container')
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_container(path):
    """return ``(entries, header)`` from a container file"""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ClipIOError(f'cannot read {path}: {exc.strerror}') from exc
    reader = _Reader(data, path)
    if reader.take(4) != MAGIC:
        raise InvalidInputError(f'{path}: not a tensor container')
    (version,) = reader.unpack('<H')
    if version != VERSION:
        raise InvalidInputError(f'{path}: unsupported version {version}')

    (header_len,) = reader.unpack('<I')
    header_text = reader.take(header_len).decode('utf-8')
    header = yaml.safe_load(header_text) if header_text else {}

    entries = {}
    (count,) = reader.unpack('<I')
    for _ in range(count):
        (name_len,) = reader.unpack('<H')
        name = reader.take(name_len).decode('utf-8')
        code, rank = reader.unpack('<BB')
        if code not in DTYPE_CODES:
            raise InvalidInputError(f'{path}: unknown dtype code {code}')
        shape = reader.unpack(f'<{rank}Q') if rank else ()
        dtype = DTYPE_CODES[code]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        values = np.frombuffer(reader.take(size), dtype=dtype)
        entries[name] = values.reshape(shape).copy()

    return entries, header
