"""
Speech/noise time-frequency masks

Oracle masks computed from separated components, and a BLSTM mask
estimator (BLSTM -> FF ReLU -> FF clipped ReLU -> FF sigmoid) with forward
inference, exact backpropagation through time and plain SGD training.
"""
from __future__ import print_function
import json
import os.path
import sys
import time
from multiprocessing.pool import ThreadPool
import numpy as np
from scipy.special import expit

from maskgev import utils
from maskgev.utils import (ShapeMismatchError, ValidationError, ConfigError,
                           NetFormatError, check_channel)


# Network dimensions of the reference configuration
INPUT_DIM = 513
HIDDEN_DIM = 256

DROPOUT = 0.5
PROB_CLAMP = 1e-7
GRAD_CLIP_NORM = 5.0
FEATURE_EPS = 1e-8

TENSOR_NAMES = ('l1.fwd.w_ih', 'l1.fwd.w_hh', 'l1.fwd.b',
                'l1.bwd.w_ih', 'l1.bwd.w_hh', 'l1.bwd.b',
                'l2.w', 'l2.b', 'l3.w', 'l3.b', 'l4.w', 'l4.b')

MANIFEST_FORMAT = 'maskgev-net'


class MaskPair(object):
    """
    Speech and noise masks of shape (frames T, bins B), entries in [0, 1]
    """

    def __init__(self, speech, noise):
        speech = np.asarray(speech, dtype=np.float64)
        noise = np.asarray(noise, dtype=np.float64)
        if speech.ndim != 2 or speech.shape != noise.shape:
            raise ShapeMismatchError("speech mask %s and noise mask %s must "
                                     "share a (frames, bins) shape" %
                                     (speech.shape, noise.shape))
        for name, m in (('speech', speech), ('noise', noise)):
            if m.size and (np.min(m) < 0. or np.max(m) > 1.):
                raise ValidationError("%s mask entries must lie in [0, 1]" %
                                      name)
        self.speech = speech
        self.noise = noise

    @property
    def shape(self):
        return self.speech.shape


def _component_magnitudes(clean, noise, channel):
    if clean.data.shape != noise.data.shape:
        raise ShapeMismatchError("clean spectrogram %s and noise spectrogram "
                                 "%s differ in shape" %
                                 (clean.data.shape, noise.data.shape))
    check_channel(channel, clean.num_channels)
    return np.abs(clean.data[channel]), np.abs(noise.data[channel])


def oracle_ibm(clean, noise, channel=0, threshold_db=0.0):
    """
    Ideal binary mask: speech = 1 iff the local SNR strictly exceeds
    threshold_db. Zero noise with nonzero speech counts as speech, two zero
    components count as noise.
    """
    c, n = _component_magnitudes(clean, noise, channel)
    with np.errstate(divide='ignore', invalid='ignore'):
        local_snr = 20. * np.log10(c / n)
    speech = np.zeros(c.shape)
    both = (c > 0) & (n > 0)
    speech[both] = local_snr[both] > threshold_db
    speech[(c > 0) & (n == 0)] = 1.
    return MaskPair(speech, 1. - speech)


def oracle_irm(clean, noise, channel=0):
    """
    Ideal ratio mask from component powers; 0/0 is treated as noise
    """
    c, n = _component_magnitudes(clean, noise, channel)
    pc, pn = c ** 2, n ** 2
    total = pc + pn
    speech = np.zeros(c.shape)
    nonzero = total > 0
    speech[nonzero] = pc[nonzero] / total[nonzero]
    noise_mask = np.ones(c.shape)
    noise_mask[nonzero] = pn[nonzero] / total[nonzero]
    return MaskPair(speech, noise_mask)


def condense(per_channel, method='median'):
    """
    Combine per-channel mask estimates entrywise (median or mean), speech
    and noise independently
    """
    per_channel = list(per_channel)
    if not per_channel:
        raise ValidationError("condense needs at least one MaskPair")
    shape = per_channel[0].shape
    for pair in per_channel[1:]:
        if pair.shape != shape:
            raise ShapeMismatchError("cannot condense masks of shapes %s "
                                     "and %s" % (shape, pair.shape))
    if method == 'median':
        reduce = np.median
    elif method == 'mean':
        reduce = np.mean
    else:
        raise ConfigError("Unknown condense method '%s'" % method)
    if len(per_channel) == 1:
        return MaskPair(per_channel[0].speech.copy(),
                        per_channel[0].noise.copy())
    speech = reduce(np.stack([p.speech for p in per_channel]), axis=0)
    noise = reduce(np.stack([p.noise for p in per_channel]), axis=0)
    return MaskPair(speech, noise)


def bce_loss(pred, target):
    """
    Mean binary cross-entropy over both masks and all entries, with
    predictions clamped to [1e-7, 1 - 1e-7]
    """
    if pred.shape != target.shape:
        raise ShapeMismatchError("prediction %s and target %s differ in "
                                 "shape" % (pred.shape, target.shape))
    p = np.clip(np.concatenate([pred.speech, pred.noise], axis=1),
                PROB_CLAMP, 1. - PROB_CLAMP)
    y = np.concatenate([target.speech, target.noise], axis=1)
    if p.size == 0:
        return 0.
    loss = -(y * np.log(p) + (1. - y) * np.log(1. - p))
    return float(np.mean(loss))


class MaskNet(object):
    """
    BLSTM mask estimator parameters

    Attributes
    ----------
    params      - dict of float64 arrays keyed by TENSOR_NAMES
    input_dim   - feature width D (513 for a 1024-point STFT)
    hidden_dim  - BLSTM units per direction H

    Shapes: l1.*.w_ih (4H, D), l1.*.w_hh (4H, H), l1.*.b (4H,) with gate
    rows ordered input, forget, cell, output; l2.w (D, 2H); l3.w (D, D);
    l4.w (2D, D). The first D outputs are the speech mask.
    """

    def __init__(self, params, input_dim=INPUT_DIM, hidden_dim=HIDDEN_DIM):
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        expected = tensor_shapes(self.input_dim, self.hidden_dim)
        unknown = set(params) - set(expected)
        if unknown:
            raise NetFormatError("Unknown tensor name(s): %s" %
                                 ", ".join(sorted(unknown)))
        self.params = {}
        for name, shape in expected.items():
            if name not in params:
                raise NetFormatError("Tensor '%s' is missing" % name)
            value = np.array(params[name], dtype=np.float64)
            if value.shape != shape:
                raise NetFormatError("Tensor '%s' has shape %s, expected %s "
                                     "for input %d / hidden %d" %
                                     (name, value.shape, shape,
                                      self.input_dim, self.hidden_dim))
            self.params[name] = value

    @property
    def num_parameters(self):
        return int(sum(p.size for p in self.params.values()))

    def copy(self):
        return MaskNet(self.params, self.input_dim, self.hidden_dim)

    def __eq__(self, other):
        if not isinstance(other, MaskNet):
            return NotImplemented
        return self.input_dim == other.input_dim and \
            self.hidden_dim == other.hidden_dim and \
            all(np.array_equal(self.params[k], other.params[k])
                for k in TENSOR_NAMES)


def tensor_shapes(input_dim=INPUT_DIM, hidden_dim=HIDDEN_DIM):
    D, H = input_dim, hidden_dim
    shapes = {}
    for direction in ('fwd', 'bwd'):
        shapes['l1.%s.w_ih' % direction] = (4 * H, D)
        shapes['l1.%s.w_hh' % direction] = (4 * H, H)
        shapes['l1.%s.b' % direction] = (4 * H,)
    shapes['l2.w'] = (D, 2 * H)
    shapes['l2.b'] = (D,)
    shapes['l3.w'] = (D, D)
    shapes['l3.b'] = (D,)
    shapes['l4.w'] = (2 * D, D)
    shapes['l4.b'] = (2 * D,)
    return shapes


def init_net(input_dim=INPUT_DIM, hidden_dim=HIDDEN_DIM, seed=0):
    """
    Glorot-uniform weights, zero biases (forget gate bias 1). Values are
    rounded to float32 so a saved copy reloads bit-exactly.
    """
    gen = utils.rng(seed)
    params = {}
    for name, shape in tensor_shapes(input_dim, hidden_dim).items():
        if len(shape) == 2:
            limit = np.sqrt(6. / (shape[0] + shape[1]))
            value = gen.uniform(-limit, limit, size=shape)
        else:
            value = np.zeros(shape)
            if name.startswith('l1.'):
                value[hidden_dim:2 * hidden_dim] = 1.
        params[name] = value.astype(np.float32).astype(np.float64)
    return MaskNet(params, input_dim, hidden_dim)


def zero_net(input_dim=INPUT_DIM, hidden_dim=HIDDEN_DIM):
    params = {name: np.zeros(shape) for name, shape in
              tensor_shapes(input_dim, hidden_dim).items()}
    return MaskNet(params, input_dim, hidden_dim)


def mask_features(spec, channel=0):
    """
    Magnitude spectrum of one channel normalized per bin over the utterance
    to zero mean and unit variance
    """
    check_channel(channel, spec.num_channels)
    mag = np.abs(spec.data[channel])
    mean = np.mean(mag, axis=0, keepdims=True)
    std = np.std(mag, axis=0, keepdims=True)
    return (mag - mean) / np.maximum(std, FEATURE_EPS)


#
# BLSTM forward / backward
#

def _lstm_forward(x, w_ih, w_hh, b):
    """
    Unidirectional LSTM over x (T, D) from zero state; returns hidden
    states (T, H) and the cache for backpropagation
    """
    T = x.shape[0]
    H = w_hh.shape[1]
    proj = x.dot(w_ih.T) + b
    h = np.zeros((T + 1, H))
    c = np.zeros((T + 1, H))
    gates = np.zeros((T, 4 * H))
    for t in range(T):
        z = proj[t] + w_hh.dot(h[t])
        i = expit(z[:H])
        f = expit(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = expit(z[3 * H:])
        c[t + 1] = f * c[t] + i * g
        h[t + 1] = o * np.tanh(c[t + 1])
        gates[t] = np.concatenate([i, f, g, o])
    return h[1:], (x, h, c, gates)


def _lstm_backward(dh, cache, w_ih, w_hh):
    x, h, c, gates = cache
    T = x.shape[0]
    H = w_hh.shape[1]
    dz = np.zeros((T, 4 * H))
    dw_hh = np.zeros_like(w_hh)
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        tc = np.tanh(c[t + 1])
        dh_t = dh[t] + dh_next
        dc = dc_next + dh_t * o * (1. - tc ** 2)
        dz[t, :H] = dc * g * i * (1. - i)
        dz[t, H:2 * H] = dc * c[t] * f * (1. - f)
        dz[t, 2 * H:3 * H] = dc * i * (1. - g ** 2)
        dz[t, 3 * H:] = dh_t * tc * o * (1. - o)
        dw_hh += np.outer(dz[t], h[t])
        dh_next = w_hh.T.dot(dz[t])
        dc_next = dc * f
    dw_ih = dz.T.dot(x)
    db = dz.sum(axis=0)
    return dw_ih, dw_hh, db


def _dropout_masks(shapes, rng_seed, train_mode):
    if not train_mode:
        return [None] * len(shapes)
    keep = 1. - DROPOUT
    masks = []
    for layer, shape in enumerate(shapes):
        gen = utils.rng(rng_seed, layer)
        masks.append((gen.random(shape) < keep) / keep)
    return masks


def _check_features(net, features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != net.input_dim:
        raise ShapeMismatchError("features must have shape (frames, %d), got "
                                 "%s" % (net.input_dim, features.shape))
    return features


def _forward(net, features, train_mode, rng_seed):
    p = net.params
    D, H = net.input_dim, net.hidden_dim
    T = features.shape[0]

    h_fwd, cache_fwd = _lstm_forward(features, p['l1.fwd.w_ih'],
                                     p['l1.fwd.w_hh'], p['l1.fwd.b'])
    h_rev, cache_bwd = _lstm_forward(features[::-1], p['l1.bwd.w_ih'],
                                     p['l1.bwd.w_hh'], p['l1.bwd.b'])
    h1 = np.concatenate([h_fwd, h_rev[::-1]], axis=1)

    m1, m2, m3 = _dropout_masks([(T, 2 * H), (T, D), (T, D)], rng_seed,
                                train_mode)
    a1 = h1 if m1 is None else h1 * m1
    z2 = a1.dot(p['l2.w'].T) + p['l2.b']
    r2 = np.maximum(z2, 0.)
    a2 = r2 if m2 is None else r2 * m2
    z3 = a2.dot(p['l3.w'].T) + p['l3.b']
    r3 = np.clip(z3, 0., 1.)
    a3 = r3 if m3 is None else r3 * m3
    z4 = a3.dot(p['l4.w'].T) + p['l4.b']
    out = expit(z4)

    cache = (cache_fwd, cache_bwd, (m1, m2, m3), a1, z2, a2, z3, a3, out)
    return out, cache


def forward(net, features, train_mode=False, rng_seed=0):
    """
    Estimate speech and noise masks from features (T, D). Dropout is only
    active in train_mode, driven by rng_seed.
    """
    features = _check_features(net, features)
    out, _ = _forward(net, features, train_mode, rng_seed)
    D = net.input_dim
    return MaskPair(out[:, :D], out[:, D:])


def loss_and_grads(net, features, target, train_mode=False, rng_seed=0):
    """
    BCE loss of one utterance and its exact gradient for every tensor
    """
    features = _check_features(net, features)
    p = net.params
    D, H = net.input_dim, net.hidden_dim
    T = features.shape[0]
    if target.shape != (T, D):
        raise ShapeMismatchError("target %s does not match features %s" %
                                 (target.shape, features.shape))

    out, cache = _forward(net, features, train_mode, rng_seed)
    cache_fwd, cache_bwd, (m1, m2, m3), a1, z2, a2, z3, a3, _ = cache
    y = np.concatenate([target.speech, target.noise], axis=1)
    loss = bce_loss(MaskPair(out[:, :D], out[:, D:]), target)

    grads = {}
    # d(mean BCE)/dz4 is (p - y) / n away from the clamp, zero inside it
    clamped = (out < PROB_CLAMP) | (out > 1. - PROB_CLAMP)
    dz4 = np.where(clamped, 0., (out - y) / max(out.size, 1))
    grads['l4.w'] = dz4.T.dot(a3)
    grads['l4.b'] = dz4.sum(axis=0)
    da3 = dz4.dot(p['l4.w'])

    dr3 = da3 if m3 is None else da3 * m3
    dz3 = dr3 * ((z3 > 0.) & (z3 < 1.))
    grads['l3.w'] = dz3.T.dot(a2)
    grads['l3.b'] = dz3.sum(axis=0)
    da2 = dz3.dot(p['l3.w'])

    dr2 = da2 if m2 is None else da2 * m2
    dz2 = dr2 * (z2 > 0.)
    grads['l2.w'] = dz2.T.dot(a1)
    grads['l2.b'] = dz2.sum(axis=0)
    da1 = dz2.dot(p['l2.w'])

    dh1 = da1 if m1 is None else da1 * m1
    dw_ih, dw_hh, db = _lstm_backward(dh1[:, :H], cache_fwd,
                                      p['l1.fwd.w_ih'], p['l1.fwd.w_hh'])
    grads['l1.fwd.w_ih'], grads['l1.fwd.w_hh'], grads['l1.fwd.b'] = \
        dw_ih, dw_hh, db
    dw_ih, dw_hh, db = _lstm_backward(dh1[::-1, H:], cache_bwd,
                                      p['l1.bwd.w_ih'], p['l1.bwd.w_hh'])
    grads['l1.bwd.w_ih'], grads['l1.bwd.w_hh'], grads['l1.bwd.b'] = \
        dw_ih, dw_hh, db
    return loss, grads


def global_norm(grads):
    return float(np.sqrt(sum(np.sum(g ** 2) for g in grads.values())))


def _batch_loss_and_grads(net, batch, rng_seed, workers):
    def utterance(k):
        features, target = batch[k]
        return loss_and_grads(net, features, target, train_mode=True,
                              rng_seed=int(utils.rng(rng_seed, k)
                                           .integers(2 ** 62)))

    if workers > 1 and len(batch) > 1:
        pool = ThreadPool(workers)
        try:
            results = pool.map(utterance, range(len(batch)))
        finally:
            pool.close()
    else:
        results = [utterance(k) for k in range(len(batch))]

    # fixed summation order keeps results independent of the worker count
    loss = 0.
    grads = {name: np.zeros_like(v) for name, v in net.params.items()}
    for utt_loss, utt_grads in results:
        loss += utt_loss
        for name in TENSOR_NAMES:
            grads[name] += utt_grads[name]
    scale = 1. / len(batch)
    for name in TENSOR_NAMES:
        grads[name] *= scale
    return loss * scale, grads


def train_step(net, batch, learning_rate, rng_seed=0, workers=1):
    """
    One SGD step on the mean BCE of the batch, gradient clipped at global
    norm 5. Returns the updated copy of the network and the pre-update loss.
    """
    batch = list(batch)
    if not batch:
        raise ValidationError("train_step needs a nonempty batch")
    if not np.isfinite(learning_rate) or learning_rate < 0:
        raise ValidationError("learning_rate must be a nonnegative number")

    loss, grads = _batch_loss_and_grads(net, batch, rng_seed, workers)
    new_net = net.copy()
    if learning_rate == 0:
        return new_net, loss

    norm = global_norm(grads)
    scale = learning_rate
    if norm > GRAD_CLIP_NORM:
        scale = learning_rate * GRAD_CLIP_NORM / norm
    for name in TENSOR_NAMES:
        # stored at float32 precision, as in the weight files
        new_net.params[name] = (net.params[name] - scale * grads[name]) \
            .astype(np.float32).astype(np.float64)
    return new_net, loss


def evaluate(net, dataset, workers=1):
    """Mean inference-mode BCE over (features, target) pairs"""
    dataset = list(dataset)
    if not dataset:
        raise ValidationError("cannot evaluate on an empty dataset")

    def utterance(item):
        features, target = item
        return bce_loss(forward(net, features), target)

    if workers > 1 and len(dataset) > 1:
        pool = ThreadPool(workers)
        try:
            losses = pool.map(utterance, dataset)
        finally:
            pool.close()
    else:
        losses = [utterance(item) for item in dataset]
    total = 0.
    for value in losses:
        total += value
    return total / len(dataset)


class TrainSettings(object):
    """
    Mask network training settings

    Attributes
    ----------
    steps          [200]   - number of SGD steps
    learning_rate  [5.0]   - SGD step size
    batch_size     [None]  - utterances per step (None: whole dataset)
    seed           [0]     - seed for minibatch order and dropout
    workers        [1]     - threads computing per-utterance gradients
    verbose        [False] - print a progress table
    """

    def __init__(self, **kwargs):
        values = utils.pop_settings(kwargs, {'steps': 200,
                                             'learning_rate': 5.0,
                                             'batch_size': None,
                                             'seed': 0,
                                             'workers': 1,
                                             'verbose': False}, 'training')
        for key, value in values.items():
            setattr(self, key, value)
        if self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be nonnegative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")


def train(net, dataset, settings=None, stream=None):
    """
    Run settings.steps SGD steps over dataset, a list of
    (features, target MaskPair). Minibatches walk the dataset cyclically.

    Returns the trained network and the history [(step, loss), ...] where
    loss is the dropout-free batch loss before the step's update.
    """
    settings = TrainSettings() if settings is None else settings
    dataset = list(dataset)
    if not dataset:
        raise ValidationError("Training dataset is empty")
    stream = sys.stderr if stream is None else stream
    batch_size = settings.batch_size or len(dataset)
    batch_size = min(batch_size, len(dataset))

    if settings.verbose:
        print("mask network: input %d, hidden %d, %d parameters" %
              (net.input_dim, net.hidden_dim, net.num_parameters),
              file=stream)
        print("training: %d utterances, batch %d, lr = %.2e, steps = %d" %
              (len(dataset), batch_size, settings.learning_rate,
               settings.steps), file=stream)
        print("step   loss         time", file=stream)

    history = []
    tic = time.time()
    for step in range(settings.steps):
        start = (step * batch_size) % len(dataset)
        batch = [dataset[(start + j) % len(dataset)]
                 for j in range(batch_size)]
        step_seed = int(utils.rng(settings.seed, step).integers(2 ** 62))
        loss = evaluate(net, batch, workers=settings.workers)
        net, _ = train_step(net, batch, settings.learning_rate,
                            rng_seed=step_seed, workers=settings.workers)
        history.append((step, loss))
        if settings.verbose and (step % 10 == 0 or
                                 step == settings.steps - 1):
            print("%4i   %.6e   %8.2es" % (step, loss, time.time() - tic),
                  file=stream)
    return net, history


def estimate_masks(net, spec, method='median'):
    """
    Run the network on every channel of a spectrogram (inference mode) and
    condense the per-channel masks
    """
    if spec.num_bins != net.input_dim:
        raise ShapeMismatchError("spectrogram has %d bins but the mask "
                                 "network expects %d" %
                                 (spec.num_bins, net.input_dim))
    per_channel = [forward(net, mask_features(spec, m))
                   for m in range(spec.num_channels)]
    return condense(per_channel, method)


#
# Weight files
#

def _blob_path(manifest_path, blob_name):
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)),
                        blob_name)


def save_net(net, path):
    """
    Write a JSON manifest at path and the little-endian float32 blob next
    to it (same stem, '.bin')
    """
    blob_name = os.path.splitext(os.path.basename(path))[0] + '.bin'
    tensors = []
    chunks = []
    offset = 0
    for name in TENSOR_NAMES:
        data = np.ascontiguousarray(net.params[name], dtype='<f4').tobytes()
        tensors.append({'name': name,
                        'shape': list(net.params[name].shape),
                        'dtype': 'f32',
                        'byte_offset': offset})
        chunks.append(data)
        offset += len(data)
    manifest = {'format': MANIFEST_FORMAT,
                'version': 1,
                'input_dim': net.input_dim,
                'hidden_dim': net.hidden_dim,
                'blob': blob_name,
                'tensors': tensors}
    with open(_blob_path(path, blob_name), 'wb') as f:
        f.write(b''.join(chunks))
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2)
        f.write('\n')


def load_net(path):
    """
    Read a manifest written by save_net and validate it structurally
    against the declared network dimensions
    """
    if not os.path.isfile(path):
        raise FileNotFoundError("No such weight manifest: '%s'" % path)
    try:
        with open(path) as f:
            manifest = json.load(f)
    except ValueError as e:
        raise NetFormatError("%s is not valid JSON: %s" % (path, e))
    if not isinstance(manifest, dict) or \
            manifest.get('format', MANIFEST_FORMAT) != MANIFEST_FORMAT:
        raise NetFormatError("%s is not a mask network manifest" % path)

    input_dim = manifest.get('input_dim', INPUT_DIM)
    hidden_dim = manifest.get('hidden_dim', HIDDEN_DIM)
    expected = tensor_shapes(input_dim, hidden_dim)
    blob_name = manifest.get(
        'blob', os.path.splitext(os.path.basename(path))[0] + '.bin')
    blob_path = _blob_path(path, blob_name)
    if not os.path.isfile(blob_path):
        raise FileNotFoundError("No such weight blob: '%s'" % blob_path)
    with open(blob_path, 'rb') as f:
        blob = f.read()

    tensors = manifest.get('tensors', [])
    if not isinstance(tensors, list):
        raise NetFormatError("'tensors' must be a list of tensor entries")
    params = {}
    spans = []
    for entry in tensors:
        if not isinstance(entry, dict):
            raise NetFormatError("Tensor entry %r is not an object" % (entry,))
        name = entry.get('name')
        if name not in expected:
            raise NetFormatError("Unknown tensor name '%s'" % name)
        if name in params:
            raise NetFormatError("Tensor '%s' listed twice" % name)
        if entry.get('dtype', 'f32') != 'f32':
            raise NetFormatError("Tensor '%s' has dtype %s, only f32 is "
                                 "supported" % (name, entry.get('dtype')))
        shape = tuple(entry.get('shape', ()))
        if shape != expected[name]:
            raise NetFormatError("Tensor '%s' has shape %s, expected %s for "
                                 "input %d / hidden %d" %
                                 (name, shape, expected[name], input_dim,
                                  hidden_dim))
        offset = int(entry.get('byte_offset', -1))
        nbytes = 4 * int(np.prod(shape))
        if offset < 0 or offset + nbytes > len(blob):
            raise NetFormatError("Tensor '%s' needs bytes [%d, %d) but the "
                                 "blob holds %d bytes" %
                                 (name, offset, offset + nbytes, len(blob)))
        params[name] = np.frombuffer(blob, dtype='<f4', count=nbytes // 4,
                                     offset=offset).reshape(shape) \
            .astype(np.float64)
        spans.append((offset, nbytes, name))
    missing = [n for n in TENSOR_NAMES if n not in params]
    if missing:
        raise NetFormatError("Manifest lacks tensor(s): %s" %
                             ", ".join(missing))
    end = 0
    for offset, nbytes, name in sorted(spans):
        if offset != end:
            raise NetFormatError("Tensor '%s' starts at byte %d, expected %d "
                                 "(tensors must be packed back to back)" %
                                 (name, offset, end))
        end = offset + nbytes
    if end != len(blob):
        raise NetFormatError("Manifest describes %d bytes but the blob holds "
                             "%d" % (end, len(blob)))
    return MaskNet(params, input_dim, hidden_dim)
