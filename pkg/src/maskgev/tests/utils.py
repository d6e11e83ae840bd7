import numpy as np

from maskgev.utils import rng
from maskgev.simulate import speech_like


rel_tol = 1e-08
abs_tol = 1e-10
reconstruction_tol = 1e-10
metric_tol = 1e-06


def random_psd(M, gen, rank=None, scale=1.):
    """Random Hermitian positive (semi)definite M x M matrix"""
    rank = M if rank is None else rank
    a = gen.standard_normal((M, rank)) + 1j * gen.standard_normal((M, rank))
    return scale * a.dot(a.conj().T)


def random_psd_pair(M, seed):
    """Speech PSD of random rank, full rank noise PSD"""
    gen = rng(seed)
    rank = int(gen.integers(1, M + 1))
    return random_psd(M, gen, rank), random_psd(M, gen, M + 2)


def speech(duration=1.0, sample_rate=16000, seed=0):
    return speech_like(duration, sample_rate, seed)


def rayleigh_quotient(f, phi_s, phi_n):
    return np.real(f.conj().dot(phi_s).dot(f)) / \
        np.real(f.conj().dot(phi_n).dot(f))
