"""
Seeded synthetic multichannel scenes

A scene is an anechoic fractional-delay image of a clean source on every
microphone plus an independent noise realization per microphone, scaled so
that channel 0 has the requested SNR. All randomness comes from the Philox
counter-based generator (see maskgev.utils.rng): stream 0 draws noise,
stream 1 draws circular offsets into a given noise recording.
"""
import json
import os
import numpy as np
import scipy.fft as spfft
from scipy.special import i0

from maskgev.audio_io import Waveform, read_wav, write_wav
from maskgev.stft import StftConfig, stft
from maskgev.mask import oracle_ibm, oracle_irm
from maskgev.utils import (ValidationError, ConfigError,
                           SampleRateMismatchError, rng)


MAX_DELAY = 32
DELAY_TAPS = 64
DELAY_BETA = 8.
NOISE_KINDS = ('white', 'pink')
SCENE_FILES = ('mixture.wav', 'clean.wav', 'noise.wav')
SIDECAR = 'scene.json'


class Scene(object):
    """
    Simulated multichannel recording

    Attributes
    ----------
    mixture        - Waveform (M channels), clean_image + noise_image
    clean_image    - Waveform (M channels), delayed clean source
    noise_image    - Waveform (M channels), scaled noise
    source_delays  - per-channel delays in samples
    snr_db         - SNR at channel 0 in dB
    seed           - generator seed
    stft_config    - STFT config recorded with the scene (or None)
    """

    def __init__(self, mixture, clean_image, noise_image, source_delays,
                 snr_db, seed, stft_config=None):
        shapes = set(w.samples.shape for w in
                     (mixture, clean_image, noise_image))
        if len(shapes) != 1:
            raise ValidationError("scene components differ in shape: %s" %
                                  sorted(shapes))
        self.mixture = mixture
        self.clean_image = clean_image
        self.noise_image = noise_image
        self.source_delays = [float(d) for d in source_delays]
        self.snr_db = float(snr_db)
        self.seed = int(seed)
        self.stft_config = stft_config

    @property
    def num_channels(self):
        return self.mixture.num_channels

    @property
    def sample_rate(self):
        return self.mixture.sample_rate

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return self.mixture == other.mixture and \
            self.clean_image == other.clean_image and \
            self.noise_image == other.noise_image and \
            self.source_delays == other.source_delays and \
            self.snr_db == other.snr_db and self.seed == other.seed


def speech_like(duration=2.0, sample_rate=16000, seed=0):
    """
    Speech-shaped test source: syllables of harmonic voicing with a gliding
    pitch (80 to 240 Hz), 1/k harmonic roll-off with random formant-like
    emphasis, a raised-cosine syllable envelope, weak breath noise and
    pauses. Peak amplitude is 0.5.
    """
    n = int(round(duration * sample_rate))
    if n <= 0:
        raise ValidationError("duration must be positive")
    gen = rng(seed, 0)

    f0 = np.zeros(n)
    env = np.zeros(n)
    start = int(gen.integers(0, max(1, sample_rate // 20)))
    while start < n:
        length = int(gen.uniform(0.12, 0.30) * sample_rate)
        stop = min(n, start + length)
        f_start, f_end = gen.uniform(80., 240., size=2)
        f0[start:stop] = np.linspace(f_start, f_end, stop - start)
        env[start:stop] = np.hanning(length + 2)[1:stop - start + 1]
        env[start:stop] *= gen.uniform(0.4, 1.0)
        start = stop + int(gen.uniform(0.04, 0.18) * sample_rate)

    phase = 2. * np.pi * np.cumsum(f0) / sample_rate
    n_harmonics = int(0.45 * sample_rate / 80.)
    formants = gen.uniform(300., 3500., size=3)
    x = np.zeros(n)
    for k in range(1, n_harmonics + 1):
        fk = k * f0
        emphasis = 1. + sum(2. * np.exp(-((fk - f) / 250.) ** 2)
                            for f in formants)
        audible = fk < 0.45 * sample_rate
        x += np.where(audible, emphasis / k * np.sin(k * phase), 0.)
    x *= env
    x += 0.01 * env * gen.standard_normal(n)
    peak = np.max(np.abs(x))
    if peak > 0:
        x *= 0.5 / peak
    return Waveform(x, sample_rate)


def fractional_delay_filter(delay):
    """
    64-tap Kaiser-windowed sinc for the fractional part of delay; returns
    (taps, integer part). Taps are indexed j = -31 .. 32, so an integer
    delay gives a unit impulse.
    """
    whole = int(np.floor(delay))
    frac = delay - whole
    j = np.arange(-(DELAY_TAPS // 2 - 1), DELAY_TAPS // 2 + 1,
                  dtype=np.float64)
    t = j - frac
    half = DELAY_TAPS / 2.
    arg = np.clip(1. - (t / half) ** 2, 0., None)
    window = i0(DELAY_BETA * np.sqrt(arg)) / i0(DELAY_BETA)
    if frac == 0:
        return (j == 0).astype(np.float64), whole
    return np.sinc(t) * window, whole


def delay_signal(x, delay):
    """x (1-D) delayed by a possibly fractional number of samples"""
    h, whole = fractional_delay_filter(delay)
    n = x.shape[0]
    full = np.convolve(x, h)
    # full[n' ] holds sum_j h_j x[n' - 31 - j]; output sample n needs
    # n' = n - whole + 31
    offset = DELAY_TAPS // 2 - 1 - whole
    out = np.zeros(n)
    lo = max(0, -offset)
    hi = min(n, full.shape[0] - offset)
    if hi > lo:
        out[lo:hi] = full[lo + offset:hi + offset]
    return out


def _check_geometry(geometry, M):
    if geometry is None:
        return [0.] * M
    delays = [float(d) for d in geometry]
    if len(delays) != M:
        raise ValidationError("geometry lists %d delays for %d channels" %
                              (len(delays), M))
    for d in delays:
        if not np.isfinite(d) or abs(d) > MAX_DELAY:
            raise ValidationError("source delay %g exceeds %d samples" %
                                  (d, MAX_DELAY))
    return delays


def _pink(white):
    """-3 dB/octave shaping of white noise rows, DC removed"""
    n = white.shape[-1]
    spec = spfft.rfft(white, axis=-1)
    k = np.arange(spec.shape[-1], dtype=np.float64)
    shape = np.zeros_like(k)
    shape[1:] = 1. / np.sqrt(k[1:])
    return spfft.irfft(spec * shape, n=n, axis=-1)


def _noise_channels(noise, M, n, sample_rate, seed):
    if isinstance(noise, str):
        if noise not in NOISE_KINDS:
            raise ValidationError("Unknown noise type '%s', expected a "
                                  "Waveform or one of %s" %
                                  (noise, NOISE_KINDS))
        white = rng(seed, 0).standard_normal((M, n))
        return _pink(white) if noise == 'pink' else white

    if not isinstance(noise, Waveform):
        raise TypeError("noise must be a Waveform or a noise type name")
    if noise.num_channels != 1:
        raise ValidationError("noise recording must be single channel")
    if noise.sample_rate != sample_rate:
        raise SampleRateMismatchError("clean at %d Hz and noise at %d Hz" %
                                      (sample_rate, noise.sample_rate))
    if noise.num_frames == 0:
        raise ValidationError("noise recording is empty")
    source = noise.samples[0]
    if source.shape[0] < n:
        source = np.tile(source, -(-n // source.shape[0]))
    # each microphone reads the recording from its own circular offset
    offsets = rng(seed, 1).integers(0, source.shape[0], size=M)
    return np.stack([np.roll(source, -int(o))[:n] for o in offsets])


def make_scene(clean, noise='white', M=1, snr_db=0., geometry=None, seed=0):
    """
    Build a Scene from a single-channel clean source.

    Parameters
    ----------
    clean     - Waveform (1 channel), must not be silent
    noise     - Waveform (1 channel) or 'white' / 'pink'
    M         - number of microphones
    snr_db    - SNR of clean_image over noise_image at channel 0
    geometry  - per-channel source delays in samples, |d| <= 32
                (default: no delays)
    seed      - generator seed
    """
    if not isinstance(clean, Waveform):
        raise TypeError("clean must be a Waveform, not %s" %
                        type(clean).__name__)
    if clean.num_channels != 1:
        raise ValidationError("clean source must be single channel")
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise ValidationError("number of channels must be a positive "
                              "integer")
    M = int(M)
    if not np.isfinite(snr_db):
        raise ValidationError("snr_db must be finite")
    delays = _check_geometry(geometry, M)
    x = clean.samples[0]
    if not np.any(x):
        raise ValidationError("clean source is silent")

    n = x.shape[0]
    clean_image = np.stack([delay_signal(x, d) for d in delays])
    raw = _noise_channels(noise, M, n, clean.sample_rate, seed)

    clean_energy = np.dot(clean_image[0], clean_image[0])
    noise_energy = np.dot(raw[0], raw[0])
    if clean_energy <= 0:
        raise ValidationError("clean image at channel 0 is silent")
    if noise_energy <= 0:
        raise ValidationError("noise at channel 0 is silent")
    gain = np.sqrt(clean_energy / (noise_energy * 10. ** (snr_db / 10.)))
    noise_image = gain * raw
    mixture = clean_image + noise_image

    rate = clean.sample_rate
    return Scene(Waveform(mixture, rate), Waveform(clean_image, rate),
                 Waveform(noise_image, rate), delays, snr_db, seed)


def scene_to_oracle_masks(scene, cfg=None, kind='irm'):
    """Oracle masks from the channel-0 clean and noise images"""
    cfg = StftConfig() if cfg is None else cfg
    clean = stft(scene.clean_image.channel(0), cfg)
    noise = stft(scene.noise_image.channel(0), cfg)
    if kind == 'irm':
        return oracle_irm(clean, noise)
    if kind == 'ibm':
        return oracle_ibm(clean, noise)
    raise ConfigError("Unknown oracle mask kind '%s', expected 'ibm' or "
                      "'irm'" % kind)


def save_scene(scene, directory, cfg=None):
    """
    Write mixture.wav, clean.wav and noise.wav (float32) and the scene.json
    sidecar into directory
    """
    cfg = scene.stft_config if cfg is None else cfg
    cfg = StftConfig() if cfg is None else cfg
    if not os.path.isdir(directory):
        os.makedirs(directory)
    for name, w in zip(SCENE_FILES, (scene.mixture, scene.clean_image,
                                     scene.noise_image)):
        write_wav(os.path.join(directory, name), w, 'float32')
    sidecar = {'seed': scene.seed,
               'snr_db': scene.snr_db,
               'delays': scene.source_delays,
               'M': scene.num_channels,
               'sample_rate': scene.sample_rate,
               'stft': cfg.to_dict()}
    with open(os.path.join(directory, SIDECAR), 'w') as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write('\n')


def load_scene(directory):
    """Read a scene written by save_scene"""
    sidecar_path = os.path.join(directory, SIDECAR)
    if not os.path.isfile(sidecar_path):
        raise FileNotFoundError("No scene sidecar: '%s'" % sidecar_path)
    with open(sidecar_path) as f:
        try:
            sidecar = json.load(f)
        except ValueError as e:
            raise ValidationError("%s is not valid JSON: %s" %
                                  (sidecar_path, e))
    for key in ('seed', 'snr_db', 'delays', 'M'):
        if key not in sidecar:
            raise ValidationError("%s lacks '%s'" % (sidecar_path, key))
    mixture, clean, noise = [read_wav(os.path.join(directory, name))
                             for name in SCENE_FILES]
    if mixture.num_channels != sidecar['M']:
        raise ValidationError("%s declares %d channels, mixture has %d" %
                              (sidecar_path, sidecar['M'],
                               mixture.num_channels))
    cfg = StftConfig(**sidecar['stft']) if 'stft' in sidecar else None
    return Scene(mixture, clean, noise, sidecar['delays'],
                 sidecar['snr_db'], sidecar['seed'], stft_config=cfg)
