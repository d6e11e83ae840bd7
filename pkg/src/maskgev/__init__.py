# The _version.py file is managed by setuptools-scm
#   and is not in version control.
try:
    from ._version import version as __version__
except ImportError:
    __version__ = '0.0.0.dev0'

from maskgev.audio_io import Waveform, read_wav, write_wav
from maskgev.stft import StftConfig, Spectrogram, stft, istft
from maskgev.mask import MaskPair, MaskNet, load_net, save_net
from maskgev.beamform import (BeamformerSettings, PsdPair,
                              BeamformerWeights, estimate_psd, gev_solve,
                              apply_beamformer, delay_and_sum)
from maskgev.metrics import MetricReport, sdr, stoi, estoi
from maskgev.simulate import (Scene, make_scene, speech_like,
                              scene_to_oracle_masks)
