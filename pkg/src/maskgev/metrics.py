"""
Objective enhancement scores: SDR, STOI and extended STOI

PESQ is not computed here; reports carry an optional externally computed
value.
"""
from __future__ import print_function
import json
from math import gcd
from multiprocessing.pool import ThreadPool
import numpy as np
import scipy.fft as spfft
from scipy import signal

from maskgev.audio_io import Waveform
from maskgev.utils import (ValidationError, SampleRateMismatchError,
                           ShapeMismatchError)


SDR_CAP = 100.
SDR_FLOOR = -100.
SDR_MAX_DELAY = 160

# Resampler
KAISER_BETA = 14.
TAPS_PER_BRANCH = 64

# STOI constants
STOI_RATE = 10000
STOI_FRAME = 256
STOI_HOP = 128
STOI_NFFT = 512
STOI_BANDS = 15
STOI_MIN_FREQ = 150.
STOI_SEGMENT = 30
STOI_BETA = -15.
STOI_DYN_RANGE = 40.
EPS = np.finfo(np.float64).eps

MEAN_ID = '__mean__'


def resample(w, target_rate):
    """
    Polyphase windowed-sinc resampling (Kaiser beta 14, 64 taps per
    branch); the result has round(N * target / source) samples.
    """
    if isinstance(target_rate, bool) or int(target_rate) != target_rate or \
            target_rate <= 0:
        raise ValidationError("target_rate must be a positive integer")
    target_rate = int(target_rate)
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)

    g = gcd(target_rate, w.sample_rate)
    up, down = target_rate // g, w.sample_rate // g
    max_rate = max(up, down)
    h = signal.firwin(TAPS_PER_BRANCH * max_rate + 1, 1. / max_rate,
                      window=('kaiser', KAISER_BETA))
    out_len = int(round(w.num_frames * float(up) / down))
    if w.num_frames == 0:
        return Waveform(np.zeros((w.num_channels, 0)), target_rate)
    y = signal.resample_poly(w.samples, up, down, axis=1, window=h)
    if y.shape[1] >= out_len:
        y = y[:, :out_len]
    else:
        y = np.pad(y, ((0, 0), (0, out_len - y.shape[1])))
    return Waveform(y, target_rate)


def _single(x, name):
    if not isinstance(x, Waveform):
        raise TypeError("%s must be a Waveform, not %s" %
                        (name, type(x).__name__))
    if x.num_channels != 1:
        raise ValidationError("%s must be single channel" % name)
    return x.samples[0]


def _check_rates(reference, estimate):
    if reference.sample_rate != estimate.sample_rate:
        raise SampleRateMismatchError(
            "reference at %d Hz and estimate at %d Hz" %
            (reference.sample_rate, estimate.sample_rate))


def _shift(x, d):
    """x delayed by d samples (advanced for d < 0), zero fill"""
    out = np.zeros_like(x)
    n = x.shape[0]
    if d >= 0:
        out[d:] = x[:n - d]
    else:
        out[:n + d] = x[-d:]
    return out


def sdr(reference, estimate, max_delay=SDR_MAX_DELAY):
    """
    Scale-invariant, delay-searched signal-to-distortion ratio in dB.

    For every integer delay d in [-max_delay, max_delay] the delayed
    reference x_d is scaled by alpha = <x_d, s>/||x_d||^2; the best
    10 log10(||alpha x_d||^2 / ||alpha x_d - s||^2) is returned, capped at
    +100 dB. An estimate with no component along the reference (e.g. all
    zeros) scores the floor of -100 dB.
    """
    _check_rates(reference, estimate)
    x = _single(reference, 'reference')
    s = _single(estimate, 'estimate')
    max_delay = int(max_delay)
    if max_delay < 0:
        raise ValidationError("max_delay must be nonnegative")
    if abs(x.shape[0] - s.shape[0]) > max_delay:
        raise ShapeMismatchError("reference (%d samples) and estimate (%d "
                                 "samples) differ by more than the delay "
                                 "window" % (x.shape[0], s.shape[0]))
    n = max(x.shape[0], s.shape[0])
    x = np.pad(x, (0, n - x.shape[0]))
    s = np.pad(s, (0, n - s.shape[0]))
    if not np.any(x):
        raise ValidationError("reference has zero energy")

    best = None
    max_delay = min(max_delay, n - 1)
    for d in range(-max_delay, max_delay + 1):
        x_d = _shift(x, d)
        energy = np.dot(x_d, x_d)
        if energy <= 0:
            continue
        alpha = np.dot(x_d, s) / energy
        target = alpha * x_d
        err = np.dot(target - s, target - s)
        num = np.dot(target, target)
        if num <= 0:
            value = SDR_FLOOR
        elif err <= 0:
            value = SDR_CAP
        else:
            value = min(SDR_CAP, max(SDR_FLOOR, 10. * np.log10(num / err)))
        if best is None or value > best:
            best = value
    if best is None:
        return SDR_FLOOR
    return float(best)


def third_octave_bands(rate=STOI_RATE, nfft=STOI_NFFT,
                       num_bands=STOI_BANDS, min_freq=STOI_MIN_FREQ):
    """
    Rectangular one-third octave band matrix (num_bands, nfft/2 + 1) with
    centers min_freq * 2^(k/3); edges snap to the nearest FFT bins
    """
    f = np.linspace(0, rate, nfft + 1)[:nfft // 2 + 1]
    k = np.arange(num_bands, dtype=np.float64)
    low = min_freq * 2. ** ((2 * k - 1) / 6.)
    high = min_freq * 2. ** ((2 * k + 1) / 6.)
    obm = np.zeros((num_bands, f.shape[0]))
    for i in range(num_bands):
        fl = int(np.argmin((f - low[i]) ** 2))
        fh = int(np.argmin((f - high[i]) ** 2))
        obm[i, fl:fh] = 1.
    return obm


def _stoi_envelopes(reference, estimate):
    """
    Shared front end: resample to 10 kHz, frame, drop frames more than
    40 dB below the loudest reference frame (same frames in both), and
    return one-third octave band envelopes (bands, frames) of both
    """
    _check_rates(reference, estimate)
    _single(reference, 'reference')
    _single(estimate, 'estimate')
    if reference.num_frames != estimate.num_frames:
        raise ShapeMismatchError("reference (%d samples) and estimate (%d "
                                 "samples) must have equal lengths" %
                                 (reference.num_frames, estimate.num_frames))
    x = resample(reference, STOI_RATE).samples[0]
    y = resample(estimate, STOI_RATE).samples[0]

    if x.shape[0] < STOI_FRAME:
        raise ValidationError("signal too short for STOI")
    win = np.hanning(STOI_FRAME + 2)[1:-1]
    n_frames = 1 + (x.shape[0] - STOI_FRAME) // STOI_HOP
    idx = np.arange(STOI_FRAME)[np.newaxis, :] + \
        STOI_HOP * np.arange(n_frames)[:, np.newaxis]
    x_frames = x[idx] * win
    y_frames = y[idx] * win

    energies = 20. * np.log10(np.linalg.norm(x_frames, axis=1) + EPS)
    keep = energies > np.max(energies) - STOI_DYN_RANGE
    x_frames = x_frames[keep]
    y_frames = y_frames[keep]
    if x_frames.shape[0] < STOI_SEGMENT:
        raise ValidationError("STOI needs at least %d non-silent frames "
                              "(384 ms), got %d" %
                              (STOI_SEGMENT, x_frames.shape[0]))

    obm = third_octave_bands()
    x_spec = np.abs(spfft.rfft(x_frames, n=STOI_NFFT, axis=1)) ** 2
    y_spec = np.abs(spfft.rfft(y_frames, n=STOI_NFFT, axis=1)) ** 2
    x_tob = np.sqrt(obm.dot(x_spec.T))
    y_tob = np.sqrt(obm.dot(y_spec.T))
    return x_tob, y_tob


def _segments(tob):
    n = tob.shape[1]
    return np.array([tob[:, m - STOI_SEGMENT:m]
                     for m in range(STOI_SEGMENT, n + 1)])


def stoi(reference, estimate):
    """
    Short-time objective intelligibility of estimate against reference
    """
    x_tob, y_tob = _stoi_envelopes(reference, estimate)
    x_seg = _segments(x_tob)
    y_seg = _segments(y_tob)

    # normalize the estimate envelope to the reference energy per band and
    # clip it at the -15 dB SDR bound
    norm_const = np.linalg.norm(x_seg, axis=2, keepdims=True) / \
        (np.linalg.norm(y_seg, axis=2, keepdims=True) + EPS)
    y_norm = y_seg * norm_const
    clip_value = 10. ** (-STOI_BETA / 20.)
    y_prime = np.minimum(y_norm, x_seg * (1. + clip_value))

    x_c = x_seg - np.mean(x_seg, axis=2, keepdims=True)
    y_c = y_prime - np.mean(y_prime, axis=2, keepdims=True)
    x_c /= np.linalg.norm(x_c, axis=2, keepdims=True) + EPS
    y_c /= np.linalg.norm(y_c, axis=2, keepdims=True) + EPS
    corr = np.sum(x_c * y_c, axis=2)
    return float(np.clip(np.mean(corr), -1., 1.))


def _row_col_normalize(seg):
    seg = seg - np.mean(seg, axis=2, keepdims=True)
    seg = seg / (np.linalg.norm(seg, axis=2, keepdims=True) + EPS)
    seg = seg - np.mean(seg, axis=1, keepdims=True)
    seg = seg / (np.linalg.norm(seg, axis=1, keepdims=True) + EPS)
    return seg


def estoi(reference, estimate):
    """
    Extended STOI: no clipping, spectro-temporal segments normalized over
    time then over bands, averaged inner-product correlation
    """
    x_tob, y_tob = _stoi_envelopes(reference, estimate)
    x_n = _row_col_normalize(_segments(x_tob))
    y_n = _row_col_normalize(_segments(y_tob))
    value = np.sum(x_n * y_n) / (STOI_SEGMENT * x_n.shape[0])
    return float(np.clip(value, -1., 1.))


class MetricReport(object):
    """
    Scores of one utterance

    Attributes
    ----------
    id       - utterance id
    method   - enhancement method label
    track    - track label (e.g. '1ch', '6ch'), optional
    sdr_db   - SDR in dB (capped at +100)
    stoi     - STOI in [-1, 1]
    estoi    - eSTOI in [-1, 1]
    pesq     - externally computed PESQ or None
    """

    def __init__(self, id, method, sdr_db, stoi, estoi, pesq=None,
                 track=None):
        self.id = str(id)
        self.method = str(method)
        self.track = track
        self.sdr_db = float(sdr_db)
        self.stoi = float(stoi)
        self.estoi = float(estoi)
        self.pesq = None if pesq is None else float(pesq)
        if not np.isfinite(self.sdr_db):
            raise ValidationError("sdr_db must be finite")
        for name in ('stoi', 'estoi'):
            if not -1. <= getattr(self, name) <= 1.:
                raise ValidationError("%s must lie in [-1, 1]" % name)

    def to_dict(self):
        d = {'id': self.id, 'method': self.method, 'sdr_db': self.sdr_db,
             'stoi': self.stoi, 'estoi': self.estoi, 'pesq': self.pesq}
        if self.track is not None:
            d['track'] = self.track
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(d['id'], d['method'], d['sdr_db'], d['stoi'], d['estoi'],
                   pesq=d.get('pesq'), track=d.get('track'))

    def __eq__(self, other):
        if not isinstance(other, MetricReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return "MetricReport(%r)" % self.to_dict()


def report(reference, estimate, id='utt', method='unknown', track=None,
           pesq=None):
    """SDR (max delay 160 samples), STOI and eSTOI of one utterance"""
    return MetricReport(id, method,
                        sdr(reference, estimate, SDR_MAX_DELAY),
                        stoi(reference, estimate),
                        estoi(reference, estimate),
                        pesq=pesq, track=track)


def mean_report(reports, method=None):
    """Arithmetic mean record, accumulated in list order"""
    reports = list(reports)
    if not reports:
        raise ValidationError("cannot average an empty report list")
    n = float(len(reports))
    sdr_sum = stoi_sum = estoi_sum = 0.
    for r in reports:
        sdr_sum += r.sdr_db
        stoi_sum += r.stoi
        estoi_sum += r.estoi
    pesq = None
    if all(r.pesq is not None for r in reports):
        pesq = sum(r.pesq for r in reports) / n
    if method is None:
        methods = set(r.method for r in reports)
        method = methods.pop() if len(methods) == 1 else 'mixed'
    return MetricReport(MEAN_ID, method, sdr_sum / n, stoi_sum / n,
                        estoi_sum / n, pesq=pesq)


def report_batch(items, workers=1):
    """
    Score a list of dicts with keys reference, estimate and optionally id,
    method, track, pesq. Returns the per-utterance reports followed by the
    mean record.
    """
    items = list(items)
    if not items:
        raise ValidationError("empty batch")

    def score(item):
        return report(item['reference'], item['estimate'],
                      id=item.get('id', 'utt'),
                      method=item.get('method', 'unknown'),
                      track=item.get('track'), pesq=item.get('pesq'))

    if workers > 1:
        pool = ThreadPool(workers)
        try:
            reports = pool.map(score, items)
        finally:
            pool.close()
    else:
        reports = [score(item) for item in items]
    return reports + [mean_report(reports)]


def reports_to_json(reports):
    """A single report as an object, several as an array"""
    if isinstance(reports, MetricReport):
        return json.dumps(reports.to_dict(), indent=2, allow_nan=False)
    return json.dumps([r.to_dict() for r in reports], indent=2,
                      allow_nan=False)


def reports_from_json(text):
    data = json.loads(text)
    if isinstance(data, dict):
        return MetricReport.from_dict(data)
    return [MetricReport.from_dict(d) for d in data]
