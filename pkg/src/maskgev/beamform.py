"""
Mask-based beamforming

PSD matrices are stored per frequency bin with shape (B, M, M); filters
with shape (B, M). The output of a filter f(b) is f(b)^H y(t, b).
"""
from warnings import warn
from multiprocessing.pool import ThreadPool
import numpy as np
import scipy.fft as spfft
import scipy.linalg as sla

from maskgev.audio_io import Waveform
from maskgev.stft import Spectrogram
from maskgev.utils import (ShapeMismatchError, ValidationError, ConfigError,
                           check_channel, check_finite, pop_settings)


HERMITIAN_TOL = 1e-10
DIAG_LOADING = 1e-6
ABSOLUTE_FLOOR = 1e-10
BAN_GUARD = 1e-12
PHAT_GUARD = 1e-20


class BeamformerSettings(object):
    """
    Beamformer settings

    Attributes
    ----------
    diag_loading  [1e-6]      - noise PSD loading relative to its mean
                                diagonal
    ban           [False]     - apply blind analytic normalization
    condense      ['median']  - combine per-channel masks: median or mean
    phase_ref     [0]         - channel whose filter entry is made real
                                (None keeps the largest-modulus convention)
    workers       [1]         - threads used to solve frequency bins
    """

    def __init__(self, **kwargs):
        values = pop_settings(kwargs, {'diag_loading': DIAG_LOADING,
                                       'ban': False,
                                       'condense': 'median',
                                       'phase_ref': 0,
                                       'workers': 1}, 'beamformer')
        for key, value in values.items():
            setattr(self, key, value)
        if not np.isfinite(self.diag_loading) or self.diag_loading < 0:
            raise ConfigError("diag_loading must be nonnegative")
        if self.ban not in (True, False):
            raise ConfigError("ban should be either True or False")
        if self.condense not in ('median', 'mean'):
            raise ConfigError("condense must be 'median' or 'mean'")
        if self.phase_ref is not None and self.phase_ref < 0:
            raise ConfigError("phase_ref must be a channel index or None")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def to_dict(self):
        return {'diag_loading': self.diag_loading, 'ban': self.ban,
                'condense': self.condense, 'phase_ref': self.phase_ref}


class PsdPair(object):
    """
    Speech and noise PSD matrices, complex arrays of shape (B, M, M)
    """

    def __init__(self, speech, noise):
        speech = np.asarray(speech, dtype=np.complex128)
        noise = np.asarray(noise, dtype=np.complex128)
        if speech.ndim != 3 or speech.shape[1] != speech.shape[2] or \
                speech.shape != noise.shape:
            raise ShapeMismatchError("PSD matrices must share a (bins, M, M) "
                                     "shape, got %s and %s" %
                                     (speech.shape, noise.shape))
        self.speech = speech
        self.noise = noise

    @property
    def num_bins(self):
        return self.speech.shape[0]

    @property
    def num_channels(self):
        return self.speech.shape[1]


class BeamformerWeights(object):
    """
    Per-bin filters f(b) (B, M) and top generalized eigenvalues lambda(b)
    """

    def __init__(self, filters, eigenvalues):
        filters = np.asarray(filters, dtype=np.complex128)
        eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        if filters.ndim != 2 or eigenvalues.shape != filters.shape[:1]:
            raise ShapeMismatchError("filters must be (bins, M) with one "
                                     "eigenvalue per bin")
        self.filters = filters
        self.eigenvalues = eigenvalues

    @property
    def num_bins(self):
        return self.filters.shape[0]

    @property
    def num_channels(self):
        return self.filters.shape[1]


def hermitian_error(phi):
    """
    ||Phi - Phi^H||_F / max(1, ||Phi||_F) per matrix
    """
    diff = np.linalg.norm(phi - np.conj(np.swapaxes(phi, -1, -2)),
                          axis=(-2, -1))
    return diff / np.maximum(1., np.linalg.norm(phi, axis=(-2, -1)))


def estimate_psd(s, masks):
    """
    Mask-weighted PSD matrices

        Phi_v(b) = sum_t w_v(t, b) y(t, b) y(t, b)^H

    without normalization by the mask sum, symmetrized as (Phi + Phi^H) / 2.
    """
    shape = (s.num_frames, s.num_bins)
    if masks.shape != shape:
        raise ShapeMismatchError("masks %s do not match spectrogram "
                                 "frames x bins %s" % (masks.shape, shape))
    y = s.data

    def weighted(w):
        phi = np.einsum('tb,mtb,ntb->bmn', w, y, np.conj(y), optimize=True)
        return 0.5 * (phi + np.conj(np.swapaxes(phi, -1, -2)))

    return PsdPair(weighted(masks.speech), weighted(masks.noise))


def _phase_normalize(f):
    """Unit norm, largest-modulus entry real and nonnegative"""
    f = f / np.linalg.norm(f)
    k = int(np.argmax(np.abs(f)))
    if np.abs(f[k]) > 0:
        f = f * (np.conj(f[k]) / np.abs(f[k]))
    f[k] = np.abs(f[k])
    return f


def _gev_bin(phi_s, phi_n, diag_loading):
    """
    Principal generalized eigenvector of one bin via Cholesky whitening of
    the loaded noise PSD. Returns (f, lambda, used_floor).
    """
    M = phi_s.shape[0]
    eye = np.eye(M)
    loading = diag_loading * np.real(np.trace(phi_n)) / M
    phi_n = phi_n + loading * eye
    used_floor = False
    try:
        L = sla.cholesky(phi_n, lower=True)
    except np.linalg.LinAlgError:
        used_floor = True
        phi_n = phi_n + ABSOLUTE_FLOOR * eye
        L = sla.cholesky(phi_n, lower=True)

    # C = L^-1 Phi_s L^-H is Hermitian with the same spectrum as
    # Phi_n^-1 Phi_s
    tmp = sla.solve_triangular(L, phi_s, lower=True)
    C = sla.solve_triangular(L, np.conj(tmp.T), lower=True)
    C = 0.5 * (C + np.conj(C.T))
    eigvals, eigvecs = sla.eigh(C)
    lam = eigvals[-1]
    f = sla.solve_triangular(L, eigvecs[:, -1], lower=True, trans='C')
    return _phase_normalize(f), float(lam), used_floor


def gev_solve(psd, diag_loading=DIAG_LOADING, workers=1):
    """
    Per-bin GEV filters maximizing f^H Phi_s f / f^H Phi_n f.

    The noise PSD is loaded with diag_loading * tr(Phi_n) / M before the
    Cholesky factorization, and with an absolute floor of 1e-10 if that
    still fails. Bins are independent, so the result does not depend on
    the number of workers.
    """
    if psd.num_channels < 1:
        raise ValidationError("PSD matrices need at least one channel")
    for name, phi in (('speech', psd.speech), ('noise', psd.noise)):
        check_finite("%s PSD" % name, phi)
        err = hermitian_error(phi)
        if np.any(err > HERMITIAN_TOL):
            b = int(np.argmax(err))
            raise ValidationError("%s PSD of bin %d is not Hermitian "
                                  "(relative error %.2e)" % (name, b, err[b]))

    def solve_bin(b):
        try:
            return _gev_bin(psd.speech[b], psd.noise[b], diag_loading)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                'Noise PSD of bin {} is not positive definite after '
                'loading\nphi_nn: {}'.format(b, psd.noise[b]))

    bins = range(psd.num_bins)
    if workers > 1:
        pool = ThreadPool(workers)
        try:
            results = pool.map(solve_bin, bins)
        finally:
            pool.close()
    else:
        results = [solve_bin(b) for b in bins]

    filters = np.array([r[0] for r in results]).reshape(
        psd.num_bins, psd.num_channels)
    eigenvalues = np.array([r[1] for r in results])
    n_floor = sum(r[2] for r in results)
    if n_floor:
        warn("Noise PSD needed the absolute loading floor in %d of %d "
             "bins." % (n_floor, psd.num_bins))
    return BeamformerWeights(filters, eigenvalues)


def align_phase(w, ref_channel=0):
    """
    Rotate each filter so that its ref_channel entry is real and
    nonnegative. The per-bin SNR is unchanged; the beamformer output becomes
    phase-aligned with the reference microphone.
    """
    check_channel(ref_channel, w.num_channels)
    ref = w.filters[:, ref_channel]
    mag = np.abs(ref)
    rotation = np.ones(w.num_bins, dtype=np.complex128)
    nonzero = mag > 0
    rotation[nonzero] = np.conj(ref[nonzero]) / mag[nonzero]
    filters = w.filters * rotation[:, np.newaxis]
    filters[:, ref_channel] = np.abs(filters[:, ref_channel])
    return BeamformerWeights(filters, w.eigenvalues.copy())


def apply_beamformer(s, w):
    """Single-channel output f(b)^H y(t, b)"""
    if w.num_bins != s.num_bins or w.num_channels != s.num_channels:
        raise ShapeMismatchError("weights for %d bins x %d channels do not "
                                 "fit a spectrogram with %d bins x %d "
                                 "channels" % (w.num_bins, w.num_channels,
                                               s.num_bins, s.num_channels))
    out = np.einsum('bm,mtb->tb', np.conj(w.filters), s.data)
    return Spectrogram(out[np.newaxis], s.config, s.sample_rate)


def ban_postfilter(w, psd):
    """
    Blind analytic normalization

        g(b) = sqrt(f^H Phi_n Phi_n f / M) / (f^H Phi_n f)

    with g(b) = 1 where the denominator does not exceed 1e-12.
    """
    if w.num_bins != psd.num_bins or w.num_channels != psd.num_channels:
        raise ShapeMismatchError("weights and PSD matrices disagree in shape")
    M = w.num_channels
    f = w.filters
    phi_f = np.einsum('bmn,bn->bm', psd.noise, f)
    numerator = np.sqrt(np.sum(np.abs(phi_f) ** 2, axis=1) / M)
    denominator = np.real(np.einsum('bm,bm->b', np.conj(f), phi_f))
    gains = np.ones(w.num_bins)
    ok = denominator > BAN_GUARD
    gains[ok] = numerator[ok] / denominator[ok]
    return BeamformerWeights(f * gains[:, np.newaxis], w.eigenvalues.copy())


def mask_enhance_1ch(s, channel, speech_mask):
    """Hadamard product of one channel with the speech mask"""
    check_channel(channel, s.num_channels)
    speech_mask = np.asarray(speech_mask, dtype=np.float64)
    if speech_mask.shape != (s.num_frames, s.num_bins):
        raise ShapeMismatchError("speech mask %s does not match frames x "
                                 "bins %s" % (speech_mask.shape,
                                              (s.num_frames, s.num_bins)))
    if speech_mask.size and (speech_mask.min() < 0 or speech_mask.max() > 1):
        raise ValidationError("speech mask entries must lie in [0, 1]")
    out = speech_mask * s.data[channel]
    return Spectrogram(out[np.newaxis], s.config, s.sample_rate)


def _as_channel(x):
    if isinstance(x, Waveform):
        if x.num_channels != 1:
            raise ValidationError("expected a single channel waveform")
        return x.samples[0]
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("expected a single channel signal")
    return x


def gcc_phat_delay(ref, other, max_lag):
    """
    Integer delay of other relative to ref by GCC-PHAT, searched over
    [-max_lag, max_lag]: lag = d when other[n] = ref[n - d].

    Ties go to the smaller |lag|, then to the negative lag. Returns
    (lag, degenerate) where degenerate flags an all-zero input (lag 0).
    """
    x = _as_channel(other)
    y = _as_channel(ref)
    if x.shape != y.shape:
        raise ShapeMismatchError("GCC-PHAT inputs must have equal lengths")
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ValidationError("max_lag must be nonnegative")
    n = x.shape[0]
    if n < 2 * max_lag or n == 0:
        raise ValidationError("signals of %d samples are too short for "
                              "max_lag %d" % (n, max_lag))
    if not np.any(x) or not np.any(y):
        warn("GCC-PHAT on an all-zero signal; returning lag 0.")
        return 0, True

    n_fft = spfft.next_fast_len(2 * n)
    cross = spfft.rfft(x, n_fft) * np.conj(spfft.rfft(y, n_fft))
    mag = np.abs(cross)
    phat = np.zeros_like(cross)
    keep = mag > PHAT_GUARD
    phat[keep] = cross[keep] / mag[keep]
    cc = spfft.irfft(phat, n_fft)

    lags = np.arange(-max_lag, max_lag + 1)
    values = cc[lags % n_fft]
    # primary key: largest value, then smallest |lag|, then negative first
    order = np.lexsort((lags, np.abs(lags), -values))
    return int(lags[order[0]]), False


def align_channels(w, lags):
    """
    Undo integer delays: channel m is advanced by lags[m] samples with zero
    fill
    """
    lags = [int(l) for l in lags]
    if len(lags) != w.num_channels:
        raise ShapeMismatchError("need one lag per channel")
    N = w.num_frames
    out = np.zeros_like(w.samples)
    for m, lag in enumerate(lags):
        if lag >= 0:
            out[m, :N - lag] = w.samples[m, lag:]
        else:
            out[m, -lag:] = w.samples[m, :N + lag]
    return Waveform(out, w.sample_rate)


def delay_and_sum(w, ref_channel=0, max_lag=32, return_lags=False):
    """
    Align every channel to ref_channel with its GCC-PHAT lag and average
    with weight 1/M
    """
    check_channel(ref_channel, w.num_channels)
    ref = w.samples[ref_channel]
    lags = []
    for m in range(w.num_channels):
        if m == ref_channel:
            lags.append(0)
        else:
            lags.append(gcc_phat_delay(ref, w.samples[m], max_lag)[0])
    aligned = align_channels(w, lags)
    out = Waveform(np.mean(aligned.samples, axis=0), w.sample_rate)
    if return_lags:
        return out, lags
    return out
