# Test STFT analysis and synthesis
import warnings
import numpy as np

from maskgev.audio_io import Waveform
from maskgev.stft import StftConfig, Spectrogram, stft, istft, magnitude
from maskgev.utils import ConfigError, ValidationError, rng
from maskgev.tests.utils import reconstruction_tol

# Unit Test
import unittest
import numpy.testing as nptest


def relative_error(x, y):
    return np.linalg.norm(x - y) / np.linalg.norm(x)


class stft_tests(unittest.TestCase):

    def setUp(self):
        self.cfg = StftConfig()

    def test_defaults(self):
        self.assertEqual(self.cfg.fft_size, 1024)
        self.assertEqual(self.cfg.hop, 256)
        self.assertEqual(self.cfg.window, 'hann')
        self.assertEqual(self.cfg.num_bins, 513)
        self.assertTrue(self.cfg.is_cola())

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            StftConfig(fft_size=1023)
        with self.assertRaises(ConfigError):
            StftConfig(fft_size=256, hop=512)
        with self.assertRaises(ConfigError):
            StftConfig(window='kaiser')
        with self.assertRaises(ConfigError):
            StftConfig(hop=0)
        with self.assertRaises(ConfigError):
            StftConfig(overlap=3)

    def test_shape(self):
        w = Waveform(rng(0).standard_normal((2, 16000)), 16000)
        s = stft(w, self.cfg)
        # 1 + ceil(16000 / 256) frames
        self.assertEqual(s.data.shape, (2, 64, 513))
        self.assertEqual(s.num_frames, self.cfg.num_frames(16000))

    def test_perfect_reconstruction(self):
        gen = rng(1)
        for _ in range(100):
            w = Waveform(gen.standard_normal(16000), 16000)
            r = istft(stft(w, self.cfg), out_len=16000)
            self.assertLess(relative_error(w.samples, r.samples),
                            reconstruction_tol)

    def test_sqrt_hann_reconstruction(self):
        cfg = StftConfig(window='sqrt_hann', fft_size=512, hop=128)
        gen = rng(2)
        for _ in range(10):
            w = Waveform(gen.standard_normal(8000), 8000)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                r = istft(stft(w, cfg), out_len=8000)
            self.assertLess(relative_error(w.samples, r.samples), 1e-6)

    def test_blackman_and_boxcar(self):
        gen = rng(3)
        for window, hop in (('blackman', 128), ('boxcar', 256)):
            cfg = StftConfig(fft_size=512, hop=hop, window=window)
            w = Waveform(gen.standard_normal((3, 5000)), 8000)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                r = istft(stft(w, cfg), out_len=5000)
            self.assertLess(relative_error(w.samples, r.samples),
                            reconstruction_tol)

    def test_non_cola_warning(self):
        cfg = StftConfig(fft_size=512, hop=200, window='hann')
        self.assertFalse(cfg.is_cola())
        w = Waveform(rng(4).standard_normal(4000), 8000)
        s = stft(w, cfg)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            r = istft(s, out_len=4000)
        self.assertTrue(any('COLA' in str(c.message) for c in caught))
        self.assertLess(relative_error(w.samples, r.samples),
                        reconstruction_tol)

    def test_short_signal(self):
        w = Waveform(rng(5).standard_normal(100), 16000)
        s = stft(w, self.cfg)
        self.assertEqual(s.num_frames, 2)
        r = istft(s, out_len=100)
        nptest.assert_allclose(r.samples, w.samples, atol=1e-12)

    def test_output_length(self):
        w = Waveform(rng(6).standard_normal(3000), 16000)
        s = stft(w, self.cfg)
        self.assertEqual(istft(s, out_len=2000).num_frames, 2000)
        self.assertEqual(istft(s, out_len=5000).num_frames, 5000)
        self.assertGreaterEqual(istft(s).num_frames, 3000)

    def test_config_mismatch(self):
        w = Waveform(rng(7).standard_normal(3000), 16000)
        s = stft(w, self.cfg)
        with self.assertRaises(ConfigError):
            istft(s, StftConfig(fft_size=512, hop=128))

    def test_sine_peak_bin(self):
        fs = 16000
        t = np.arange(fs) / float(fs)
        # 1000 Hz falls on bin 64 of a 1024-point FFT
        w = Waveform(np.sin(2 * np.pi * 1000. * t), fs)
        mag = magnitude(stft(w, self.cfg))
        middle = mag[mag.shape[0] // 2]
        self.assertEqual(int(np.argmax(middle)), 64)

    def test_sine_energy_near_peak(self):
        fs = 16000
        t = np.arange(fs) / float(fs)
        w = Waveform(np.sin(2 * np.pi * 1000. * t), fs)
        power = magnitude(stft(w, self.cfg)) ** 2
        # frames fully inside the signal
        for frame in power[4:-4]:
            near = np.sum(frame[63:66])
            self.assertGreaterEqual(near / np.sum(frame), 0.95)

    def test_linearity(self):
        gen = rng(9)
        x = Waveform(gen.standard_normal((2, 5000)), 16000)
        y = Waveform(gen.standard_normal((2, 5000)), 16000)
        a, b = 0.7, -2.5
        mix = Waveform(a * x.samples + b * y.samples, 16000)
        expected = a * stft(x, self.cfg).data + b * stft(y, self.cfg).data
        self.assertLess(relative_error(expected, stft(mix, self.cfg).data),
                        1e-12)

    def test_frame_energy(self):
        cfg = StftConfig(fft_size=256, hop=64)
        n = 2000
        x = rng(10).standard_normal(n)
        s = stft(Waveform(x, 8000), cfg)
        padded = np.zeros((s.num_frames - 1) * 64 + 256)
        padded[256 - 64:256 - 64 + n] = x
        win = cfg.get_window()
        for t in range(s.num_frames):
            frame = padded[t * 64:t * 64 + 256] * win
            spec = s.data[0, t]
            # one-sided spectrum: DC and Nyquist appear once
            energy = (np.abs(spec[0]) ** 2 + np.abs(spec[-1]) ** 2 +
                      2 * np.sum(np.abs(spec[1:-1]) ** 2)) / 256.
            nptest.assert_allclose(energy, np.sum(frame ** 2), rtol=1e-9,
                                   atol=1e-12)

    def test_magnitude(self):
        cfg = StftConfig(fft_size=8, hop=4)
        s = Spectrogram(np.full((2, 3, 5), 3. + 4.j), cfg, 8000)
        nptest.assert_array_equal(magnitude(s, 1), np.full((3, 5), 5.))
        gen = rng(11)
        data = gen.standard_normal((2, 3, 5)) + \
            1j * gen.standard_normal((2, 3, 5))
        s = Spectrogram(data, cfg, 8000)
        nptest.assert_allclose(magnitude(s, 0),
                               np.sqrt(data[0].real ** 2 + data[0].imag ** 2),
                               rtol=1e-14)
        with self.assertRaises(ValidationError):
            magnitude(s, 2)

    def test_empty_waveform(self):
        with self.assertRaises(ValidationError):
            stft(Waveform(np.zeros((1, 0)), 16000), self.cfg)

    def test_workers(self):
        w = Waveform(rng(8).standard_normal((2, 8000)), 16000)
        s1 = stft(w, self.cfg, workers=1)
        s4 = stft(w, self.cfg, workers=4)
        nptest.assert_array_equal(s1.data, s4.data)
        nptest.assert_array_equal(istft(s1, workers=1).samples,
                                  istft(s4, workers=4).samples)

    def test_spectrogram_validation(self):
        with self.assertRaises(ValidationError):
            Spectrogram(np.zeros((1, 4, 10)), self.cfg, 16000)
