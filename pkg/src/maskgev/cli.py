"""
maskgev command line: simulate, enhance, metrics, train-mask

Every command reads its parameters from built-in defaults, then from an
optional JSON config file (--config), then from command-line flags.
"""
from __future__ import print_function
import argparse
import json
import os
import sys
import numpy as np

from maskgev import utils
from maskgev.audio_io import read_wav, write_wav
from maskgev.stft import StftConfig, WINDOWS, stft, istft
from maskgev.mask import (MaskPair, TrainSettings, forward, mask_features,
                          estimate_masks, init_net, load_net, save_net,
                          train)
from maskgev.beamform import (BeamformerSettings, estimate_psd, gev_solve,
                              align_phase, ban_postfilter, apply_beamformer,
                              mask_enhance_1ch, delay_and_sum)
from maskgev.metrics import (report, report_batch, resample,
                             reports_to_json)
from maskgev.simulate import (SCENE_FILES, SIDECAR, make_scene, speech_like,
                              save_scene, load_scene, scene_to_oracle_masks)
from maskgev.utils import (ConfigError, ValidationError,
                           SampleRateMismatchError)


METHODS = ('gev-oracle', 'gev-net', 'ds', 'mask1ch-oracle', 'mask1ch-net')
DEFAULT_DELAY_STEP = 1.5

_STFT = {'fft_size': 1024, 'hop': 256, 'window': 'hann'}

DEFAULTS = {
    'simulate': dict(_STFT, clean=None, noise='white', channels=6,
                     snr_db=0.0, seed=0, delays=None, duration=2.0,
                     sample_rate=16000, out=None),
    'enhance': dict(_STFT, method='gev-oracle', scene=None, input=None,
                    weights=None, out=None, ban=False, mask_kind='irm',
                    mask_override=None, condense='median', ref_channel=0,
                    max_lag=32, diag_loading=1e-6, dump_weights=None,
                    encoding='float32', workers=1, verbose=False),
    'metrics': dict(reference=None, estimate=None, out=None, resample=False,
                    id=None, method='unknown', track=None, workers=1),
    'train-mask': dict(_STFT, scenes=None, auto_generate=None, seed=0,
                       steps=200, lr=5.0, batch_size=None, hidden=256,
                       snr_db=-5.0, duration=2.0, sample_rate=16000,
                       noise='white', mask_kind='ibm', out=None,
                       loss_log=None, workers=1, verbose=False),
}


class JobConfig(object):
    """
    Parameters of one CLI command

    Attributes
    ----------
    command  - subcommand name
    values   - dict of parameters, keys as in DEFAULTS[command]
    """

    def __init__(self, command, **kwargs):
        if command not in DEFAULTS:
            raise ConfigError("Unknown command '%s'" % command)
        self.command = command
        self.values = utils.pop_settings(kwargs, DEFAULTS[command],
                                         command)

    @classmethod
    def from_sources(cls, command, config_path=None, overrides=None):
        """Defaults < JSON config file < non-None overrides"""
        values = {}
        if config_path is not None:
            values.update(read_config(config_path))
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        return cls(command, **values)

    def __getitem__(self, key):
        return self.values[key]

    def stft_config(self):
        return StftConfig(fft_size=self['fft_size'], hop=self['hop'],
                          window=self['window'])

    def to_dict(self):
        return dict(self.values)


def read_config(path):
    if not os.path.isfile(path):
        raise FileNotFoundError("No such config file: '%s'" % path)
    with open(path) as f:
        try:
            values = json.load(f)
        except ValueError as e:
            raise ConfigError("%s is not valid JSON: %s" % (path, e))
    if not isinstance(values, dict):
        raise ConfigError("%s must hold a JSON object" % path)
    # config files may use the flag spelling
    return {key.replace('-', '_'): value for key, value in values.items()}


def _require(job, *keys):
    for key in keys:
        if job[key] is None:
            raise ConfigError("%s: '%s' is required" % (job.command, key))


def _check_file(path):
    if not os.path.isfile(path):
        raise FileNotFoundError("No such file: '%s'" % path)


def _check_dir(path):
    if not os.path.isdir(path):
        raise FileNotFoundError("No such directory: '%s'" % path)


def _prepare_output(path):
    """Create the parent directory of an output file"""
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        os.makedirs(parent)


def _write_json(path, data):
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


#
# simulate
#

def cmd_simulate(job, stream=None):
    """Generate a scene and write it to job['out']"""
    _require(job, 'out')
    if job['clean'] is not None:
        _check_file(job['clean'])
    if job['noise'] not in ('white', 'pink'):
        _check_file(job['noise'])
    M = job['channels']
    if isinstance(M, bool) or not isinstance(M, int) or M < 1:
        raise ValidationError("--channels must be a positive integer, got "
                              "%r" % (M,))
    cfg = job.stft_config()

    if job['clean'] is None:
        clean = speech_like(job['duration'], job['sample_rate'], job['seed'])
    else:
        clean = read_wav(job['clean'])
        if clean.num_channels > 1:
            clean = clean.channel(0)
    noise = job['noise']
    if noise not in ('white', 'pink'):
        noise = read_wav(noise)
    delays = job['delays']
    if delays is None:
        delays = [DEFAULT_DELAY_STEP * m for m in range(M)]
    scene = make_scene(clean, noise, M, job['snr_db'], delays, job['seed'])
    save_scene(scene, job['out'], cfg)
    return scene


#
# enhance
#

def _load_enhance_input(job):
    if (job['scene'] is None) == (job['input'] is None):
        raise ConfigError("enhance needs exactly one of --scene and --input")
    if job['scene'] is not None:
        _check_dir(job['scene'])
        for name in SCENE_FILES + (SIDECAR,):
            _check_file(os.path.join(job['scene'], name))
        scene = load_scene(job['scene'])
        return scene.mixture, scene
    _check_file(job['input'])
    return read_wav(job['input']), None


def _oracle_masks(job, scene, spec):
    if job['mask_override'] == 'ones':
        return MaskPair(np.ones((spec.num_frames, spec.num_bins)),
                        np.zeros((spec.num_frames, spec.num_bins)))
    if scene is None:
        raise ConfigError("oracle masks need a --scene with clean and noise "
                          "images")
    return scene_to_oracle_masks(scene, spec.config, job['mask_kind'])


def cmd_enhance(job, stream=None):
    """
    Enhance a multichannel recording; returns the output Waveform and the
    sidecar dict
    """
    method = job['method']
    if method not in METHODS:
        raise ConfigError("Unknown method '%s', expected one of %s" %
                          (method, METHODS))
    if job['mask_override'] not in (None, 'ones'):
        raise ConfigError("--mask-override only accepts 'ones'")
    _require(job, 'out')
    if method.endswith('-net'):
        if job['weights'] is None:
            raise ConfigError("method %s needs --weights" % method)
        _check_file(job['weights'])
    if job['dump_weights'] is not None and not method.startswith('gev'):
        raise ConfigError("--dump-weights is only available for GEV methods")
    cfg = job.stft_config()
    _prepare_output(job['out'])
    if job['dump_weights'] is not None:
        _prepare_output(job['dump_weights'])
    settings = BeamformerSettings(diag_loading=job['diag_loading'],
                                  ban=job['ban'], condense=job['condense'],
                                  phase_ref=job['ref_channel'],
                                  workers=job['workers'])
    mixture, scene = _load_enhance_input(job)
    net = load_net(job['weights']) if method.endswith('-net') else None
    utils.check_channel(job['ref_channel'], mixture.num_channels)
    verbose = job['verbose']

    sidecar = {'method': method, 'stft': cfg.to_dict(),
               'sample_rate': mixture.sample_rate,
               'channels': mixture.num_channels,
               'ref_channel': job['ref_channel']}

    if method == 'ds':
        utils.progress("Delay-and-sum ... \t\t\t\t", verbose, stream)
        out, lags = delay_and_sum(mixture, job['ref_channel'],
                                  job['max_lag'], return_lags=True)
        utils.done(verbose, stream)
        sidecar['lags'] = lags
        sidecar['max_lag'] = job['max_lag']
    else:
        utils.progress("STFT ... \t\t\t\t\t", verbose, stream)
        spec = stft(mixture, cfg, workers=job['workers'])
        utils.done(verbose, stream)

        utils.progress("Estimating masks ... \t\t\t\t", verbose, stream)
        if method.startswith('mask1ch'):
            if net is not None:
                masks = forward(net, mask_features(spec, job['ref_channel']))
            else:
                masks = _oracle_masks(job, scene, spec)
        elif net is not None:
            masks = estimate_masks(net, spec, settings.condense)
        else:
            masks = _oracle_masks(job, scene, spec)
        utils.done(verbose, stream)

        if method.startswith('mask1ch'):
            out_spec = mask_enhance_1ch(spec, job['ref_channel'],
                                        masks.speech)
        else:
            utils.progress("Solving %d GEV problems ... \t\t\t" %
                           spec.num_bins, verbose, stream)
            psd = estimate_psd(spec, masks)
            weights = gev_solve(psd, settings.diag_loading,
                                workers=settings.workers)
            if settings.phase_ref is not None:
                weights = align_phase(weights, settings.phase_ref)
            if settings.ban:
                weights = ban_postfilter(weights, psd)
            out_spec = apply_beamformer(spec, weights)
            utils.done(verbose, stream)
            sidecar['beamformer'] = settings.to_dict()
            lam = weights.eigenvalues
            sidecar['eigenvalues'] = {'min': float(np.min(lam)),
                                      'median': float(np.median(lam)),
                                      'max': float(np.max(lam))}
            if job['dump_weights'] is not None:
                np.savez(job['dump_weights'], filters=weights.filters,
                         eigenvalues=weights.eigenvalues)
        if method.endswith('oracle'):
            sidecar['mask'] = job['mask_override'] or job['mask_kind']
        out = istft(out_spec, cfg, out_len=mixture.num_frames,
                    workers=job['workers'])

    write_wav(job['out'], out, job['encoding'])
    _write_json(os.path.splitext(job['out'])[0] + '.json', sidecar)
    return out, sidecar


#
# metrics
#

def _pair_paths(job):
    ref, est = job['reference'], job['estimate']
    if os.path.isdir(ref) or os.path.isdir(est):
        _check_dir(ref)
        _check_dir(est)
        names = sorted(n for n in os.listdir(ref) if n.endswith('.wav'))
        if not names:
            raise ValidationError("no WAV files in '%s'" % ref)
        for name in names:
            _check_file(os.path.join(est, name))
        return [(os.path.splitext(n)[0], os.path.join(ref, n),
                 os.path.join(est, n)) for n in names], True
    _check_file(ref)
    _check_file(est)
    uid = job['id'] or os.path.splitext(os.path.basename(est))[0]
    return [(uid, ref, est)], False


def _load_pair(job, ref_path, est_path):
    reference = read_wav(ref_path)
    estimate = read_wav(est_path)
    if reference.num_channels > 1:
        reference = reference.channel(0)
    if estimate.num_channels > 1:
        estimate = estimate.channel(0)
    if reference.sample_rate != estimate.sample_rate:
        if not job['resample']:
            raise SampleRateMismatchError(
                "%s is at %d Hz but %s is at %d Hz (use --resample)" %
                (ref_path, reference.sample_rate, est_path,
                 estimate.sample_rate))
        estimate = resample(estimate, reference.sample_rate)
    return reference, estimate


def cmd_metrics(job, stream=None):
    """Score one pair or two directories of equally named WAV files"""
    _require(job, 'reference', 'estimate')
    if job['out'] is not None:
        _prepare_output(job['out'])
    pairs, batch = _pair_paths(job)
    items = []
    for uid, ref_path, est_path in pairs:
        reference, estimate = _load_pair(job, ref_path, est_path)
        items.append({'id': uid, 'reference': reference,
                      'estimate': estimate, 'method': job['method'],
                      'track': job['track']})
    if batch:
        result = report_batch(items, workers=job['workers'])
    else:
        item = items[0]
        result = report(item['reference'], item['estimate'], id=item['id'],
                        method=item['method'], track=item['track'])
    text = reports_to_json(result)
    if job['out'] is not None:
        with open(job['out'], 'w') as f:
            f.write(text + '\n')
    else:
        print(text)
    return result


#
# train-mask
#

def _auto_scenes(job):
    count = job['auto_generate']
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ValidationError("--auto-generate must be a positive integer")
    scenes = []
    for k in range(count):
        scene_seed = int(utils.rng(job['seed'], k).integers(2 ** 31))
        clean = speech_like(job['duration'], job['sample_rate'], scene_seed)
        scenes.append(make_scene(clean, job['noise'], 1, job['snr_db'],
                                 [0.], scene_seed))
    return scenes


def _scene_dirs(root):
    _check_dir(root)
    return sorted(os.path.join(root, n) for n in os.listdir(root)
                  if os.path.isfile(os.path.join(root, n, SIDECAR)))


def training_data(scenes, cfg, mask_kind):
    """(features, oracle target) pairs from channel 0 of every scene"""
    dataset = []
    for scene in scenes:
        spec = stft(scene.mixture.channel(0), cfg)
        dataset.append((mask_features(spec, 0),
                        scene_to_oracle_masks(scene, cfg, mask_kind)))
    return dataset


def cmd_train_mask(job, stream=None):
    """Train a mask network; returns the network and the loss history"""
    _require(job, 'out')
    if (job['scenes'] is None) == (job['auto_generate'] is None):
        raise ConfigError("train-mask needs exactly one of --scenes and "
                          "--auto-generate")
    _prepare_output(job['out'])
    if job['loss_log'] is not None:
        _prepare_output(job['loss_log'])
    cfg = job.stft_config()
    settings = TrainSettings(steps=job['steps'], learning_rate=job['lr'],
                             batch_size=job['batch_size'], seed=job['seed'],
                             workers=job['workers'], verbose=job['verbose'])
    if job['scenes'] is not None:
        scenes = [load_scene(d) for d in _scene_dirs(job['scenes'])]
    else:
        scenes = _auto_scenes(job)
    if not scenes:
        raise ValidationError("training dataset is empty")

    utils.progress("Computing features of %d scenes ... \t\t" % len(scenes),
                   job['verbose'], stream)
    dataset = training_data(scenes, cfg, job['mask_kind'])
    utils.done(job['verbose'], stream)

    net = init_net(cfg.num_bins, job['hidden'], seed=job['seed'])
    net, history = train(net, dataset, settings, stream)

    save_net(net, job['out'])
    if job['loss_log'] is not None:
        with open(job['loss_log'], 'w') as f:
            for step, loss in history:
                f.write(json.dumps({'step': step, 'loss': loss}) + '\n')
    return net, history


#
# Argument parsing
#

COMMANDS = {'simulate': cmd_simulate, 'enhance': cmd_enhance,
            'metrics': cmd_metrics, 'train-mask': cmd_train_mask}


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as a single `error: usage: ...` line"""

    def error(self, message):
        self.exit(2, "error: usage: %s: %s\n" % (self.prog, message))


def _default_help(text, command, key):
    return "%s (default: %s)" % (text, DEFAULTS[command][key])


def _add(parser, command, flag, text, **kwargs):
    key = flag.lstrip('-').replace('-', '_')
    if kwargs.get('action') == 'store_true':
        kwargs['action'] = 'store_const'
        kwargs['const'] = True
    parser.add_argument(flag, dest=key, default=None,
                        help=_default_help(text, command, key), **kwargs)


def _add_stft(parser, command):
    _add(parser, command, '--fft-size', 'STFT frame length', type=int)
    _add(parser, command, '--hop', 'STFT hop size', type=int)
    _add(parser, command, '--window', 'STFT window', choices=WINDOWS)


def build_parser():
    parser = ArgumentParser(
        prog='maskgev',
        description='Mask-based GEV beamforming speech enhancement.')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('simulate', help='generate a synthetic scene')
    c = 'simulate'
    _add(p, c, '--clean', 'single channel clean WAV (synthetic speech if '
         'omitted)')
    _add(p, c, '--noise', "'white', 'pink' or a single channel noise WAV")
    _add(p, c, '--channels', 'number of microphones', type=int)
    _add(p, c, '--snr-db', 'SNR at channel 0 in dB', type=float)
    _add(p, c, '--seed', 'random seed', type=int)
    _add(p, c, '--delays', 'per-channel source delays in samples (%.1f * m '
         'if omitted)' % DEFAULT_DELAY_STEP, type=float, nargs='+')
    _add(p, c, '--duration', 'synthetic speech duration in seconds',
         type=float)
    _add(p, c, '--sample-rate', 'synthetic speech sample rate', type=int)
    _add(p, c, '--out', 'output scene directory')
    _add_stft(p, c)

    p = sub.add_parser('enhance', help='enhance a multichannel recording')
    c = 'enhance'
    _add(p, c, '--method', 'enhancement method', choices=METHODS)
    _add(p, c, '--scene', 'scene directory written by simulate')
    _add(p, c, '--input', 'multichannel mixture WAV')
    _add(p, c, '--weights', 'mask network manifest (net methods)')
    _add(p, c, '--out', 'enhanced WAV')
    _add(p, c, '--ban', 'apply blind analytic normalization',
         action='store_true')
    _add(p, c, '--mask-kind', 'oracle mask type', choices=('irm', 'ibm'))
    _add(p, c, '--mask-override', 'force the speech mask', choices=('ones',))
    _add(p, c, '--condense', 'combine per-channel network masks',
         choices=('median', 'mean'))
    _add(p, c, '--ref-channel', 'reference microphone', type=int)
    _add(p, c, '--max-lag', 'delay-and-sum lag search range in samples',
         type=int)
    _add(p, c, '--diag-loading', 'relative noise PSD loading', type=float)
    _add(p, c, '--dump-weights', 'write GEV filters and eigenvalues (.npz)')
    _add(p, c, '--encoding', 'output WAV encoding',
         choices=('float32', 'pcm16'))
    _add(p, c, '--workers', 'threads for per-bin solves and FFTs', type=int)
    _add(p, c, '--verbose', 'print progress to stderr', action='store_true')
    _add_stft(p, c)

    p = sub.add_parser('metrics', help='score enhanced speech')
    c = 'metrics'
    _add(p, c, '--reference', 'reference WAV or directory')
    _add(p, c, '--estimate', 'estimate WAV or directory')
    _add(p, c, '--out', 'JSON output (stdout if omitted)')
    _add(p, c, '--resample', 'resample the estimate to the reference rate',
         action='store_true')
    _add(p, c, '--id', 'utterance id (single pair)')
    _add(p, c, '--method', 'method label')
    _add(p, c, '--track', 'track label')
    _add(p, c, '--workers', 'threads scoring utterances', type=int)

    p = sub.add_parser('train-mask', help='train the mask network')
    c = 'train-mask'
    _add(p, c, '--scenes', 'directory of scene directories')
    _add(p, c, '--auto-generate', 'number of synthetic scenes', type=int)
    _add(p, c, '--seed', 'random seed', type=int)
    _add(p, c, '--steps', 'SGD steps', type=int)
    _add(p, c, '--lr', 'learning rate', type=float)
    _add(p, c, '--batch-size', 'utterances per step (all if omitted)',
         type=int)
    _add(p, c, '--hidden', 'BLSTM units per direction', type=int)
    _add(p, c, '--snr-db', 'SNR of generated scenes', type=float)
    _add(p, c, '--duration', 'duration of generated scenes in seconds',
         type=float)
    _add(p, c, '--sample-rate', 'sample rate of generated scenes', type=int)
    _add(p, c, '--noise', "noise of generated scenes, 'white' or 'pink'",
         choices=('white', 'pink'))
    _add(p, c, '--mask-kind', 'oracle target type', choices=('irm', 'ibm'))
    _add(p, c, '--out', 'weight manifest to write')
    _add(p, c, '--loss-log', 'JSON-lines loss log')
    _add(p, c, '--workers', 'threads computing gradients', type=int)
    _add(p, c, '--verbose', 'print the training table to stderr',
         action='store_true')
    _add_stft(p, c)

    for p in sub.choices.values():
        p.add_argument('--config', default=None,
                       help='JSON config file; flags take precedence')
    return parser


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop('command')
    config_path = args.pop('config')
    try:
        job = JobConfig.from_sources(command, config_path, args)
        COMMANDS[command](job)
    except (ValueError, TypeError, OSError, np.linalg.LinAlgError) as e:
        print("error: %s: %s" % (utils.error_code(e), e), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
