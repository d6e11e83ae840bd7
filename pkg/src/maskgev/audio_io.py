"""
Multichannel waveforms and RIFF/WAVE input/output
"""
import os.path
import struct
import numpy as np
from scipy.io import wavfile

from maskgev.utils import (ValidationError, WavFormatError,
                           UnsupportedEncodingError, check_channel)


PCM16_SCALE = 32768.0
ENCODINGS = ('pcm16', 'float32')


class Waveform(object):
    """
    Multichannel time-domain signal

    Attributes
    ----------
    samples      - real array of shape (channels M, frames N)
    sample_rate  - sampling rate in Hz
    """

    def __init__(self, samples, sample_rate):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ValidationError("samples must be a (channels, frames) "
                                  "array, got %d dimensions" % samples.ndim)
        if samples.shape[0] < 1:
            raise ValidationError("a waveform needs at least one channel")
        if isinstance(sample_rate, bool) or \
                int(sample_rate) != sample_rate or sample_rate <= 0:
            raise ValidationError("sample_rate must be a positive integer")
        self.samples = samples
        self.sample_rate = int(sample_rate)

    @property
    def num_channels(self):
        return self.samples.shape[0]

    @property
    def num_frames(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.num_frames / float(self.sample_rate)

    def channel(self, m):
        """Single channel view as a new Waveform"""
        check_channel(m, self.num_channels)
        return Waveform(self.samples[m:m + 1], self.sample_rate)

    def __eq__(self, other):
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and \
            self.samples.shape == other.samples.shape and \
            np.array_equal(self.samples, other.samples)

    def __repr__(self):
        return "Waveform(channels=%d, frames=%d, sample_rate=%d)" % \
            (self.num_channels, self.num_frames, self.sample_rate)


def read_wav(path):
    """
    Read a PCM-16 or IEEE float-32 WAV file of any channel count.

    PCM-16 samples are divided by 32768 so that -32768 maps to -1.0.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError("No such WAV file: '%s'" % path)
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        message = str(e)
        if message.startswith(('Unknown wave file format',
                               'Unsupported bit depth')):
            raise UnsupportedEncodingError("%s: %s" % (path, message))
        raise WavFormatError("%s: %s" % (path, message))
    except (EOFError, struct.error) as e:
        raise WavFormatError("%s: truncated file (%s)" % (path, e))

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            "%s: %s samples are not supported (PCM-16 and float-32 only)" %
            (path, data.dtype))

    # wavfile returns (frames,) or (frames, channels)
    if samples.ndim == 1:
        samples = samples[np.newaxis, :]
    else:
        samples = samples.T
    return Waveform(samples, rate)


def write_wav(path, w, encoding='float32'):
    """
    Write a Waveform as a standard RIFF/WAVE file.

    pcm16 rounds to nearest and clips at full scale; float32 is lossless for
    float32-representable samples. A zero-length waveform gives a valid
    zero-length file.
    """
    if not isinstance(w, Waveform):
        raise TypeError("w must be a Waveform, not %s" % type(w).__name__)
    if encoding not in ENCODINGS:
        raise UnsupportedEncodingError("Unknown encoding '%s', expected one "
                                       "of %s" % (encoding, ENCODINGS))

    if encoding == 'pcm16':
        data = np.clip(np.round(w.samples * PCM16_SCALE), -32768, 32767)
        data = data.astype(np.int16)
    else:
        data = w.samples.astype(np.float32)

    if w.num_channels == 1:
        data = data[0]
    else:
        data = np.ascontiguousarray(data.T)
    wavfile.write(path, w.sample_rate, data)
