"""
Tests for the tensor container
"""
import struct
import tempfile
from pathlib import Path

import numpy as np

from django.test import SimpleTestCase

from audio.container import MAGIC, read_container, write_container
from core.exceptions import ClipIOError, InvalidInputError


class ContainerTests(SimpleTestCase):
    """Test writing and reading containers"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'x.feat'

    def tearDown(self):
        self.tmp.cleanup()

    def test_layout_starts_with_magic_and_empty_header(self):
        """a feature file has the magic tag, version 1 and no header"""
        write_container(self.path, {'student': np.zeros((2, 3))})
        data = self.path.read_bytes()

        self.assertEqual(data[:4], MAGIC)
        self.assertEqual(struct.unpack('<H', data[4:6]), (1,))
        self.assertEqual(struct.unpack('<I', data[6:10]), (0,))
        self.assertEqual(struct.unpack('<I', data[10:14]), (1,))
        self.assertEqual(struct.unpack('<H', data[14:16]), (7,))
        self.assertEqual(data[16:23], b'student')
        self.assertEqual(tuple(data[23:25]), (1, 2))

    def test_entries_and_header_survive(self):
        values = np.arange(12, dtype=np.float64).reshape(3, 4) / 7
        write_container(self.path, {'w': values}, header={'seed': 3},
                        dtype='<f8')
        entries, header = read_container(self.path)

        np.testing.assert_array_equal(entries['w'], values)
        self.assertEqual(header, {'seed': 3})

    def test_truncated_file_raises(self):
        write_container(self.path, {'w': np.ones((4, 4))})
        self.path.write_bytes(self.path.read_bytes()[:-5])

        with self.assertRaises(InvalidInputError):
            read_container(self.path)

    def test_bad_magic_raises(self):
        self.path.write_bytes(b'RIFF' + b'\0' * 20)

        with self.assertRaises(InvalidInputError):
            read_container(self.path)

    def test_missing_file_raises(self):
        with self.assertRaises(ClipIOError):
            read_container(self.path)
