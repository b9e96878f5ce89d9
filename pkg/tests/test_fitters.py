import json
import unittest

import numpy as np

from purcellsim import cavity
from purcellsim.fitters import *
from purcellsim.sequence_sim import DecayCurve


RES_B = cavity.Resonator(omega0=7.305e9, Q=1.1e5, kappa1=7.305e9/1.1e5/6, kappa2=5*7.305e9/1.1e5/6, g0=58.)


def test_levenberg_marquardt_linear():
    x = np.linspace(0., 10., 21)
    y = 3. - 0.5*x
    result = levenberg_marquardt(lambda p, xx: p[0] + p[1]*xx, [0., 0.], (x, y), names=['a', 'b'])
    assert result.converged
    assert result.iterations <= 2
    assert np.isclose(result.params['a'], 3.)
    assert np.isclose(result.params['b'], -0.5)
    assert result.residual_norm < 1e-20


def test_levenberg_marquardt_rosenbrock():
    rosenbrock = lambda p, _: np.array([10*(p[1] - p[0]**2), 1 - p[0]])
    result = levenberg_marquardt(rosenbrock, [-1.2, 1.], (None, np.zeros(2)))
    assert result.converged
    assert np.allclose([result.params['p0'], result.params['p1']], 1., atol=1e-6)

    ## accepted steps never raise the cost
    start = rosenbrock(np.array([-1.2, 1.]), None)
    assert result.residual_norm <= start @ start


def test_levenberg_marquardt_errors():
    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaises(FitError):
                _ = levenberg_marquardt(lambda p, x: np.log(p[0])*x, [-1.], (np.ones(3), np.ones(3)))

    t = _Test()
    t._test()


def test_jacobian():
    fun = lambda p: np.array([p[0]**2*p[1], np.sin(p[0])])
    p = np.array([1.3, 0.7])
    exact = np.array([
        [2*p[0]*p[1], p[0]**2],
        [np.cos(p[0]), 0.]
    ])
    assert np.allclose(jacobian(fun, p), exact, rtol=0, atol=1e-6)
    assert np.allclose(jacobian(fun, p, central=True), exact, rtol=0, atol=1e-6)


def test_fit_exponential():
    t = np.linspace(0.02, 2., 30)
    result = fit_exponential(DecayCurve(t, 1 - 2*np.exp(-t/0.35)))
    assert result.converged
    assert np.isclose(result.params['T1'], 0.35, rtol=1e-5)
    assert np.isclose(result.params['A'], 2., rtol=1e-5)
    assert np.isclose(result.params['offset'], 1., rtol=1e-5)

    ## rescaling time rescales T1 only
    scaled = fit_exponential(DecayCurve(10*t, 1 - 2*np.exp(-t/0.35)))
    assert np.isclose(scaled.params['T1'], 3.5, rtol=1e-5)
    assert np.isclose(scaled.params['A'], result.params['A'], rtol=1e-5)

    ## flat data leaves T1 unconstrained
    flat = fit_exponential(DecayCurve(t, np.ones_like(t)))
    assert abs(flat.params['A']) < 1e-8
    assert np.isinf(flat.stderr['T1'])

    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaises(FitError):
                _ = fit_exponential(DecayCurve(t[:3], np.ones(3)))

    t_ = _Test()
    t_._test()


def test_fit_double_exponential():
    t = np.geomspace(0.5, 2000., 60)
    y = 1 - 0.5*np.exp(-t/10.) - 1.5*np.exp(-t/300.)
    result = fit_double_exponential(DecayCurve(t, y))
    assert result.converged
    assert np.isclose(result.params['T1a'], 10., rtol=1e-3)
    assert np.isclose(result.params['T1b'], 300., rtol=1e-3)
    assert np.isclose(result.params['A1'], 0.5, rtol=1e-3)
    assert np.isclose(result.params['A2'], 1.5, rtol=1e-3)
    assert 'indistinguishable_time_constants' not in result.flags

    ## a single exponential gets flagged
    t = np.linspace(0.02, 3., 40)
    result = fit_double_exponential(DecayCurve(t, 1 - 2*np.exp(-t/0.35)))
    assert 'indistinguishable_time_constants' in result.flags

    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaises(FitError):
                _ = fit_double_exponential(DecayCurve(t[:6], np.ones(6)))

    t_ = _Test()
    t_._test()


def test_single_exponential_suffices():
    assert single_exponential_suffices(1e-30, 1e-31, 40, 5, 1.)
    assert not single_exponential_suffices(1., 1e-3, 40, 5, 1.)
    assert single_exponential_suffices(1.01e-2, 1e-2, 40, 5, 1.)


def test_fit_purcell_t1():
    deltas = np.linspace(0., 4e6, 22)
    t1 = cavity.t1_of_delta(1.68, 82e3, deltas, gamma_nr=1/1600)
    result = fit_purcell_t1(list(zip(deltas, t1)), 1.68, 82e3)
    assert result.converged
    assert np.isclose(1/result.params['gamma_nr'], 1600., rtol=0.01)
    assert 'gamma_nr_unbounded' not in result.flags

    ## 10% log-normal noise
    fitted = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        noisy = t1*np.exp(0.1*rng.standard_normal(len(t1)))
        fitted.append(1/fit_purcell_t1(list(zip(deltas, noisy)), 1.68, 82e3).params['gamma_nr'])
    assert abs(np.median(fitted) - 1600.) < 300.

    ## points near resonance cannot see the non-radiative floor
    near = np.linspace(0., 1e5, 10)
    t1_near = cavity.t1_of_delta(1.68, 82e3, near, gamma_nr=1/1600)
    flagged = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        noisy = t1_near*np.exp(0.1*rng.standard_normal(len(near)))
        flagged += 'gamma_nr_unbounded' in fit_purcell_t1(list(zip(near, noisy)), 1.68, 82e3).flags
    assert flagged >= 15

    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaises(FitError):
                _ = fit_purcell_t1([(0., 1.68)], 1.68, 82e3)
            with self.assertRaises(FitError):
                _ = fit_purcell_t1([(0., 1.68), (1e5, -1.)], 1.68, 82e3)

    t = _Test()
    t._test()


def test_fit_rabi():
    c = cavity.mean_photon_number(1., RES_B)
    P = np.linspace(0., 1e-10, 201)
    A = np.sin(2*np.pi*58.*5e-6*np.sqrt(c*P))**2
    result = fit_rabi(list(zip(P, A)), RES_B, 5e-6)
    assert result.converged
    assert np.isclose(result.params['g'], 58., rtol=0.01)
    assert np.isclose(result.params['a'], 1., rtol=0.01)

    ## less than one oscillation
    P = np.linspace(0., 1e-13, 20)
    A = np.sin(2*np.pi*58.*5e-6*np.sqrt(c*P))**2
    result = fit_rabi(list(zip(P, A)), RES_B, 5e-6)
    assert not result.converged
    assert 'undersampled_oscillation' in result.flags

    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaises(FitError):
                _ = fit_rabi([(p, 0.) for p in np.linspace(0., 1e-10, 10)], RES_B, 5e-6)
            with self.assertRaises(FitError):
                _ = fit_rabi([(0., 0.), (1e-10, 1.)], RES_B, 5e-6)
            with self.assertRaisesRegex(FitError, 'non-zero power'):
                _ = fit_rabi([(0., a) for a in (0.1, 0.5, 0.9, 0.3)], RES_B, 5e-6)

    t = _Test()
    t._test()


def test_fit_result_to_dict():
    result = FitResult(params={'a': 1.}, stderr={'a': np.inf}, residual_norm=0., converged=True, iterations=3, flags=('undersampled_oscillation',))
    report = result.to_dict()
    assert report['stderr']['a'] == 'inf'
    assert report['flags'] == ['undersampled_oscillation']
    assert json.loads(json.dumps(report)) == report
