# Test WAV input/output
import os
import shutil
import tempfile
import numpy as np
from scipy.io import wavfile

from maskgev.audio_io import Waveform, read_wav, write_wav
from maskgev.utils import (ValidationError, WavFormatError,
                           UnsupportedEncodingError)
from maskgev.utils import rng

# Unit Test
import unittest
import numpy.testing as nptest


class audio_io_tests(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def path(self, name):
        return os.path.join(self.tmp, name)

    def test_waveform_shape(self):
        w = Waveform(np.zeros(10), 8000)
        self.assertEqual(w.num_channels, 1)
        self.assertEqual(w.num_frames, 10)
        self.assertAlmostEqual(w.duration, 10 / 8000.)
        with self.assertRaises(ValidationError):
            Waveform(np.zeros((2, 3, 4)), 8000)
        with self.assertRaises(ValidationError):
            Waveform(np.zeros(3), 0)

    def test_read_pcm16_mono(self):
        data = (rng(1).standard_normal(16000) * 3000).astype(np.int16)
        wavfile.write(self.path('a.wav'), 16000, data)
        w = read_wav(self.path('a.wav'))
        self.assertEqual(w.num_channels, 1)
        self.assertEqual(w.num_frames, 16000)
        self.assertEqual(w.sample_rate, 16000)

    def test_pcm16_scaling(self):
        data = np.array([-32768, 0, 16384, 32767], dtype=np.int16)
        wavfile.write(self.path('a.wav'), 8000, data)
        w = read_wav(self.path('a.wav'))
        nptest.assert_array_equal(w.samples[0],
                                  [-1., 0., 0.5, 32767 / 32768.])

    def test_float32_round_trip(self):
        samples = rng(2).uniform(-1, 1, size=(3, 1000))
        samples = samples.astype(np.float32).astype(np.float64)
        w = Waveform(samples, 16000)
        write_wav(self.path('b.wav'), w, 'float32')
        r = read_wav(self.path('b.wav'))
        self.assertEqual(r, w)

    def test_pcm16_round_trip(self):
        w = Waveform(rng(3).uniform(-1, 1, size=(2, 500)), 8000)
        write_wav(self.path('c.wav'), w, 'pcm16')
        r = read_wav(self.path('c.wav'))
        self.assertLessEqual(np.max(np.abs(r.samples - w.samples)),
                             1. / 32768)

    def test_pcm16_clipping(self):
        w = Waveform(np.array([1.5, -1.5, 0.]), 8000)
        write_wav(self.path('d.wav'), w, 'pcm16')
        _, data = wavfile.read(self.path('d.wav'))
        nptest.assert_array_equal(data, [32767, -32768, 0])

    def test_channel_order(self):
        samples = np.array([[0.25, 0.25], [-0.5, -0.5]])
        write_wav(self.path('e.wav'), Waveform(samples, 8000), 'float32')
        r = read_wav(self.path('e.wav'))
        nptest.assert_array_equal(r.samples, samples)

    def test_empty_waveform(self):
        w = Waveform(np.zeros((2, 0)), 8000)
        write_wav(self.path('f.wav'), w, 'float32')
        r = read_wav(self.path('f.wav'))
        self.assertEqual(r.num_frames, 0)

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_wav(self.path('missing.wav'))

    def test_malformed_header(self):
        with open(self.path('bad.wav'), 'wb') as f:
            f.write(b'JUNKJUNKJUNKJUNK')
        with self.assertRaises(WavFormatError):
            read_wav(self.path('bad.wav'))

    def test_unsupported_encoding(self):
        wavfile.write(self.path('i32.wav'), 8000,
                      np.zeros(100, dtype=np.int32))
        with self.assertRaises(UnsupportedEncodingError):
            read_wav(self.path('i32.wav'))

    def test_unknown_encoding_name(self):
        with self.assertRaises(UnsupportedEncodingError):
            write_wav(self.path('g.wav'), Waveform(np.zeros(4), 8000),
                      'mp3')

    def test_truncated_file(self):
        write_wav(self.path('h.wav'), Waveform(np.zeros(4), 8000),
                  'float32')
        with open(self.path('h.wav'), 'rb') as f:
            header = f.read(20)
        with open(self.path('h.wav'), 'wb') as f:
            f.write(header)
        with self.assertRaises(WavFormatError):
            read_wav(self.path('h.wav'))

    def test_channel_view(self):
        w = Waveform(np.arange(6.).reshape(2, 3), 8000)
        nptest.assert_array_equal(w.channel(1).samples, [[3., 4., 5.]])
        with self.assertRaises(ValidationError):
            w.channel(2)
