# Test enhancement metrics
import json
import numpy as np

from maskgev.audio_io import Waveform
from maskgev.metrics import (resample, sdr, stoi, estoi, report,
                             report_batch, mean_report, MetricReport,
                             reports_to_json, reports_from_json,
                             third_octave_bands, MEAN_ID, SDR_FLOOR)
from maskgev.simulate import make_scene
from maskgev.utils import (SampleRateMismatchError, ShapeMismatchError,
                           ValidationError, rng)
from maskgev.tests.utils import speech, metric_tol

# Unit Test
import unittest
import numpy.testing as nptest


def rms(x):
    return np.sqrt(np.mean(x ** 2))


def sine(freq, duration, rate):
    t = np.arange(int(duration * rate)) / float(rate)
    return Waveform(np.sin(2 * np.pi * freq * t), rate)


class resample_tests(unittest.TestCase):

    def test_length(self):
        w = Waveform(np.zeros(16001), 16000)
        self.assertEqual(resample(w, 10000).num_frames,
                         int(round(16001 * 10000 / 16000.)))
        self.assertEqual(resample(w, 10000).sample_rate, 10000)

    def test_dc(self):
        w = Waveform(np.full(16000, 0.3), 16000)
        r = resample(w, 10000)
        interior = r.samples[0, 1000:-1000]
        nptest.assert_allclose(interior, 0.3, rtol=0, atol=1e-6)

    def test_passband_sine(self):
        w = sine(440., 1.0, 16000)
        r = resample(w, 10000)
        ratio = rms(r.samples[0, 500:-500]) / rms(w.samples[0, 800:-800])
        self.assertAlmostEqual(ratio, 1., delta=0.01)

    def test_stopband_sine(self):
        w = sine(7900., 1.0, 16000)
        r = resample(w, 10000)
        self.assertLess(rms(r.samples[0]), 0.01 * rms(w.samples[0]))

    def test_identity_rate(self):
        w = Waveform(rng(0).standard_normal(100), 8000)
        self.assertEqual(resample(w, 8000), w)

    def test_invalid_rate(self):
        with self.assertRaises(ValidationError):
            resample(Waveform(np.zeros(10), 8000), 0)


class sdr_tests(unittest.TestCase):

    def setUp(self):
        self.x = Waveform(rng(1).standard_normal(8000), 8000)

    def test_identity_hits_cap(self):
        self.assertEqual(sdr(self.x, self.x), 100.)

    def test_scale_invariance(self):
        half = Waveform(0.5 * self.x.samples, 8000)
        self.assertEqual(sdr(self.x, half), 100.)

    def test_orthogonal_noise(self):
        x = self.x.samples[0]
        n = rng(2).standard_normal(8000)
        n -= np.dot(n, x) / np.dot(x, x) * x
        n *= np.linalg.norm(x) / np.linalg.norm(n)
        value = sdr(self.x, Waveform(x + n, 8000))
        self.assertAlmostEqual(value, 0., delta=0.1)

    def test_delay_search(self):
        x = self.x.samples[0]
        for d in (-160, -7, 42, 160):
            shifted = np.zeros_like(x)
            if d >= 0:
                shifted[d:] = x[:8000 - d]
            else:
                shifted[:8000 + d] = x[-d:]
            self.assertEqual(sdr(self.x, Waveform(shifted, 8000)), 100.)

    def test_zero_estimate_hits_floor(self):
        zeros = Waveform(np.zeros(8000), 8000)
        self.assertEqual(sdr(self.x, zeros), SDR_FLOOR)
        self.assertEqual(SDR_FLOOR, -100.)

    def test_zero_reference(self):
        with self.assertRaises(ValidationError):
            sdr(Waveform(np.zeros(100), 8000), Waveform(np.ones(100), 8000))

    def test_rate_mismatch(self):
        with self.assertRaises(SampleRateMismatchError):
            sdr(self.x, Waveform(self.x.samples, 16000))

    def test_length_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            sdr(self.x, Waveform(np.ones(7000), 8000), max_delay=160)


class stoi_tests(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.x = speech(2.0, 16000, seed=11)

    def test_identity(self):
        self.assertAlmostEqual(stoi(self.x, self.x), 1., delta=metric_tol)
        self.assertAlmostEqual(estoi(self.x, self.x), 1., delta=metric_tol)

    def test_scaling_invariance(self):
        noisy = make_scene(self.x, 'white', 1, 0., seed=3).mixture
        scaled = Waveform(3.7 * noisy.samples, 16000)
        self.assertAlmostEqual(stoi(self.x, noisy), stoi(self.x, scaled),
                               delta=metric_tol)
        self.assertAlmostEqual(estoi(self.x, noisy), estoi(self.x, scaled),
                               delta=metric_tol)

    def test_independent_noise(self):
        noise = Waveform(rng(5).standard_normal(self.x.num_frames), 16000)
        self.assertLess(abs(stoi(self.x, noise)), 0.2)
        self.assertLess(abs(estoi(self.x, noise)), 0.2)

    def test_too_short(self):
        short = speech(0.3, 16000, seed=1)
        with self.assertRaises(ValidationError):
            stoi(short, short)
        with self.assertRaises(ValidationError):
            estoi(short, short)

    def test_length_and_rate_checks(self):
        with self.assertRaises(ShapeMismatchError):
            stoi(self.x, Waveform(self.x.samples[:, :-10], 16000))
        with self.assertRaises(SampleRateMismatchError):
            stoi(self.x, Waveform(self.x.samples, 8000))

    def test_band_matrix(self):
        obm = third_octave_bands()
        self.assertEqual(obm.shape, (15, 257))
        self.assertTrue(np.all(obm.sum(axis=1) > 0))
        # bands do not overlap
        self.assertLessEqual(np.max(obm.sum(axis=0)), 1.)

    def test_determinism(self):
        noisy = make_scene(self.x, 'pink', 1, 0., seed=4).mixture
        self.assertEqual(stoi(self.x, noisy), stoi(self.x, noisy))
        self.assertEqual(estoi(self.x, noisy), estoi(self.x, noisy))


class monotonicity_tests(unittest.TestCase):

    def test_snr_sweep(self):
        for seed in range(10):
            clean = speech(1.5, 16000, seed=100 + seed)
            values = []
            for snr_db in (-10, -5, 0, 5, 10):
                scene = make_scene(clean, 'white', 1, snr_db, seed=seed)
                est = scene.mixture
                values.append((sdr(clean, est), stoi(clean, est),
                               estoi(clean, est)))
            for k in range(3):
                series = [v[k] for v in values]
                self.assertTrue(all(a <= b for a, b in
                                    zip(series, series[1:])),
                                msg="metric %d seed %d: %s" %
                                (k, seed, series))


class report_tests(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.x = speech(1.0, 16000, seed=21)

    def test_identity_report(self):
        r = report(self.x, self.x, id='u1', method='none')
        self.assertEqual(r.sdr_db, 100.)
        self.assertAlmostEqual(r.stoi, 1., delta=metric_tol)
        self.assertAlmostEqual(r.estoi, 1., delta=metric_tol)
        self.assertIsNone(r.pesq)

    def test_json_round_trip(self):
        r = MetricReport('u2', 'gev', 12.5, 0.9, 0.8, pesq=2.5, track='6ch')
        self.assertEqual(reports_from_json(reports_to_json(r)), r)
        d = r.to_dict()
        self.assertEqual(set(d), {'id', 'method', 'sdr_db', 'stoi', 'estoi',
                                  'pesq', 'track'})

    def test_batch(self):
        items = []
        for k in range(3):
            noisy = make_scene(self.x, 'white', 1, 5. * k, seed=k).mixture
            items.append({'id': 'u%d' % k, 'reference': self.x,
                          'estimate': noisy, 'method': 'noisy'})
        reports = report_batch(items)
        self.assertEqual(len(reports), 4)
        mean = reports[-1]
        self.assertEqual(mean.id, MEAN_ID)
        self.assertAlmostEqual(mean.sdr_db,
                               sum(r.sdr_db for r in reports[:3]) / 3.)
        self.assertAlmostEqual(mean.stoi,
                               sum(r.stoi for r in reports[:3]) / 3.)
        parallel = report_batch(items, workers=3)
        self.assertEqual(parallel, reports)
        text = reports_to_json(reports)
        self.assertEqual(reports_from_json(text), reports)

    def test_range_validation(self):
        with self.assertRaises(ValidationError):
            MetricReport('u', 'm', 0., 1.5, 0.)
        with self.assertRaises(ValidationError):
            mean_report([])

    def test_zero_estimate_report_is_strict_json(self):
        zeros = Waveform(np.zeros(self.x.num_frames), 16000)
        r = report(self.x, zeros, id='silent', method='mask1ch-oracle')
        self.assertEqual(r.sdr_db, SDR_FLOOR)

        def reject(token):
            raise ValueError("non-finite JSON number %s" % token)

        data = json.loads(reports_to_json(r), parse_constant=reject)
        self.assertEqual(data['sdr_db'], -100.)

    def test_non_finite_sdr_rejected(self):
        with self.assertRaises(ValidationError):
            MetricReport('u', 'm', -np.inf, 0., 0.)
