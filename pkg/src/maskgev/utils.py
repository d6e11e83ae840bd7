"""Common utility functions"""
from __future__ import print_function
import sys
import numpy as np


class ValidationError(ValueError):
    code = 'validation'


class ShapeMismatchError(ValidationError):
    code = 'shape-mismatch'


class ConfigError(ValidationError):
    code = 'config'


class SampleRateMismatchError(ValidationError):
    code = 'sample-rate-mismatch'


class WavFormatError(ValueError):
    """Malformed RIFF/WAVE container"""
    code = 'wav-format'


class UnsupportedEncodingError(ValueError):
    code = 'unsupported-encoding'


class NetFormatError(ValueError):
    """Weight manifest or blob does not describe a valid mask network"""
    code = 'net-format'


def error_code(exc):
    """
    Short machine readable code for an exception raised by the toolkit
    """
    code = getattr(exc, 'code', None)
    if code is not None:
        return code
    if isinstance(exc, FileNotFoundError):
        return 'missing-file'
    if isinstance(exc, OSError):
        return 'io'
    if isinstance(exc, np.linalg.LinAlgError):
        return 'linalg'
    if isinstance(exc, (ValueError, TypeError)):
        return 'validation'
    return 'internal'


def pop_settings(kwargs, defaults, owner):
    """
    Pop known settings from kwargs (falling back to defaults) and reject
    anything left over
    """
    values = {}
    for key, default in defaults.items():
        values[key] = kwargs.pop(key, default)
    if kwargs:
        raise ConfigError("Unknown %s setting(s): %s" %
                          (owner, ", ".join(sorted(kwargs))))
    return values


def rng(seed, *stream):
    """
    Portable counter-based generator (Philox) for a seed and optional
    sub-stream indices
    """
    if stream:
        seq = np.random.SeedSequence([int(seed)] + [int(s) for s in stream])
    else:
        seq = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seq))


def check_shape(name, array, shape):
    if tuple(array.shape) != tuple(shape):
        raise ShapeMismatchError("%s has shape %s, expected %s" %
                                 (name, tuple(array.shape), tuple(shape)))


def check_finite(name, array):
    if not np.all(np.isfinite(array)):
        raise ValidationError("%s contains non-finite entries" % name)


def check_channel(channel, n_channels):
    if not isinstance(channel, (int, np.integer)) or isinstance(channel, bool):
        raise TypeError("channel index must be an integer, not %s" %
                        type(channel).__name__)
    if channel < 0 or channel >= n_channels:
        raise ValidationError("channel %d out of range for %d channel(s)" %
                              (channel, n_channels))


def progress(message, verbose, stream=None):
    """
    Print a progress message without newline (completed by `done`)
    """
    if verbose:
        stream = sys.stderr if stream is None else stream
        stream.write(message)
        stream.flush()


def done(verbose, stream=None):
    if verbose:
        stream = sys.stderr if stream is None else stream
        print("[done]", file=stream)
