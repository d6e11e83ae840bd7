"""
Short-time Fourier analysis and weighted overlap-add synthesis

Spectrogram data is stored as (channels M, frames T, bins B) with
B = fft_size / 2 + 1 (DC at b = 0, Nyquist at b = B - 1).
"""
from warnings import warn
import numpy as np
import scipy.fft as spfft
from scipy import signal

from maskgev.audio_io import Waveform
from maskgev.utils import (ConfigError, ValidationError, check_channel,
                           pop_settings)


WINDOWS = ('hann', 'sqrt_hann', 'blackman', 'boxcar')


class StftConfig(object):
    """
    STFT settings

    Attributes
    ----------
    fft_size  [1024]    - frame length and FFT size in samples (even)
    hop       [256]     - frame advance in samples (hop <= fft_size)
    window    ['hann']  - analysis/synthesis window: hann, sqrt_hann,
                          blackman or boxcar
    """

    def __init__(self, **kwargs):
        values = pop_settings(kwargs, {'fft_size': 1024,
                                       'hop': 256,
                                       'window': 'hann'}, 'STFT')
        self.fft_size = values['fft_size']
        self.hop = values['hop']
        self.window = values['window']
        self.validate()

    def validate(self):
        for name in ('fft_size', 'hop'):
            value = getattr(self, name)
            if isinstance(value, bool) or \
                    not isinstance(value, (int, np.integer)) or value <= 0:
                raise ConfigError("%s must be a positive integer" % name)
        if self.fft_size % 2 != 0:
            raise ConfigError("fft_size must be even")
        if self.hop > self.fft_size:
            raise ConfigError("hop must not exceed fft_size")
        if self.window not in WINDOWS:
            raise ConfigError("Unknown window '%s', expected one of %s" %
                              (self.window, WINDOWS))
        win = self.get_window()
        if not signal.check_NOLA(win, self.fft_size,
                                 self.fft_size - self.hop):
            raise ConfigError("window %s with hop %d cannot be inverted "
                              "(overlap-add of the squared window vanishes)" %
                              (self.window, self.hop))

    @property
    def num_bins(self):
        return self.fft_size // 2 + 1

    def get_window(self):
        """Periodic window of length fft_size"""
        if self.window == 'sqrt_hann':
            return np.sqrt(signal.get_window('hann', self.fft_size))
        return signal.get_window(self.window, self.fft_size)

    def is_cola(self):
        """
        True if the squared window overlap-adds to a constant, i.e. the
        synthesis normalization is a pure gain
        """
        win = self.get_window()
        return bool(signal.check_COLA(win ** 2, self.fft_size,
                                      self.fft_size - self.hop))

    def num_frames(self, n_samples):
        return 1 + -(-n_samples // self.hop)

    def to_dict(self):
        return {'fft_size': int(self.fft_size), 'hop': int(self.hop),
                'window': self.window}

    def __eq__(self, other):
        if not isinstance(other, StftConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return "StftConfig(fft_size=%d, hop=%d, window='%s')" % \
            (self.fft_size, self.hop, self.window)


class Spectrogram(object):
    """
    Complex multichannel STFT

    Attributes
    ----------
    data         - complex array (channels M, frames T, bins B)
    config       - StftConfig used for analysis
    sample_rate  - sampling rate of the analysed signal in Hz
    """

    def __init__(self, data, config, sample_rate):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3:
            raise ValidationError("Spectrogram data must have shape "
                                  "(channels, frames, bins)")
        if data.shape[2] != config.num_bins:
            raise ValidationError("Spectrogram has %d bins, config implies %d"
                                  % (data.shape[2], config.num_bins))
        self.data = data
        self.config = config
        self.sample_rate = int(sample_rate)

    @property
    def num_channels(self):
        return self.data.shape[0]

    @property
    def num_frames(self):
        return self.data.shape[1]

    @property
    def num_bins(self):
        return self.data.shape[2]

    def channel(self, m):
        check_channel(m, self.num_channels)
        return Spectrogram(self.data[m:m + 1], self.config, self.sample_rate)


def _check_config(cfg):
    if not isinstance(cfg, StftConfig):
        raise TypeError("cfg must be a StftConfig, not %s" %
                        type(cfg).__name__)
    cfg.validate()


def stft(w, cfg=None, workers=1):
    """
    Analyse every channel of a Waveform.

    The signal is preceded by fft_size - hop zeros and zero-filled at the end
    so that T = 1 + ceil(N / hop) frames cover it.
    """
    cfg = StftConfig() if cfg is None else cfg
    _check_config(cfg)
    if w.num_frames < 1:
        raise ValidationError("cannot analyse an empty waveform")

    n = w.num_frames
    n_fft, hop = cfg.fft_size, cfg.hop
    n_frames = cfg.num_frames(n)
    pad_front = n_fft - hop
    padded_len = (n_frames - 1) * hop + n_fft
    padded = np.zeros((w.num_channels, padded_len))
    padded[:, pad_front:pad_front + n] = w.samples

    frames = np.lib.stride_tricks.sliding_window_view(
        padded, n_fft, axis=1)[:, ::hop]
    frames = frames * cfg.get_window()
    data = spfft.rfft(frames, n=n_fft, axis=-1, workers=workers)
    return Spectrogram(data, cfg, w.sample_rate)


def istft(s, cfg=None, out_len=None, workers=1):
    """
    Weighted overlap-add synthesis, normalized by the accumulated squared
    window, truncated or zero-padded to out_len samples.
    """
    cfg = s.config if cfg is None else cfg
    _check_config(cfg)
    if cfg != s.config:
        raise ConfigError("STFT config %r does not match the spectrogram "
                          "config %r" % (cfg, s.config))
    if not cfg.is_cola():
        warn("Window '%s' with hop %d is not COLA; synthesis relies on "
             "least-squares window normalization." % (cfg.window, cfg.hop))

    n_fft, hop = cfg.fft_size, cfg.hop
    n_frames = s.num_frames
    pad_front = n_fft - hop
    padded_len = (n_frames - 1) * hop + n_fft
    if out_len is None:
        out_len = padded_len - pad_front
    if out_len < 0:
        raise ValidationError("out_len must be nonnegative")

    win = cfg.get_window()
    frames = spfft.irfft(s.data, n=n_fft, axis=-1, workers=workers) * win

    out = np.zeros((s.num_channels, padded_len))
    norm = np.zeros(padded_len)
    win_sq = win ** 2
    for t in range(n_frames):
        out[:, t * hop:t * hop + n_fft] += frames[:, t]
        norm[t * hop:t * hop + n_fft] += win_sq

    # samples never covered by a nonzero window stay zero
    covered = norm > np.finfo(np.float64).tiny
    out[:, covered] /= norm[covered]

    out = out[:, pad_front:]
    if out.shape[1] >= out_len:
        out = out[:, :out_len]
    else:
        out = np.pad(out, ((0, 0), (0, out_len - out.shape[1])))
    return Waveform(out, s.sample_rate)


def magnitude(s, channel=0):
    """Entrywise modulus of one channel, shape (T, B)"""
    check_channel(channel, s.num_channels)
    return np.abs(s.data[channel])
