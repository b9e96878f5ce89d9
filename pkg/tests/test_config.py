import json
import unittest

import numpy as np

from purcellsim.config import *


def _write(path, data):
    with open(path, 'w') as f:
        json.dump(data, f)
    return path


def test_config():
    cfg = Config()
    assert cfg.spin_system['I'] == 4.5
    assert cfg.seed == 0
    assert np.isclose(cfg.resonators['A']['kappa1_Hz'], 7.245e9/3.2e5/6)
    assert np.isclose(cfg.resonators['A']['kappa2_Hz'], 5*7.245e9/3.2e5/6)
    assert cfg.protocols['rabi']['n_powers'] == 201

    ## partial sections merge over the defaults
    cfg = Config(
        resonators = {'B': {'Q': 1e5}, 'C': {'omega0_Hz': 7e9, 'Q': 1e5, 'g0_Hz': 10.}},
        protocols = {'inversion': {'n_times': 10}}
    )
    assert cfg.resonators['B']['Q'] == 1e5
    assert cfg.resonators['B']['g0_Hz'] == 58.
    assert np.isclose(cfg.resonators['C']['kappa1_Hz'], 7e4/6)
    assert cfg.protocols['inversion']['n_times'] == 10
    assert cfg.protocols['inversion']['t_pi_s'] == 100e-6


def test_config_validation_error():

    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaises(ConfigValidationError):
                _ = Config(spin_system={'I': 4.3})
            with self.assertRaises(ConfigValidationError):
                _ = Config(spin_system={'J': 1})
            with self.assertRaises(ConfigValidationError):
                _ = Config(resonators={'A': {'Q': 0.}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(resonators={'A': {'kappa1_Hz': 1e5, 'kappa2_Hz': 1e5}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(coupling={'transition': [4,-4]})
            with self.assertRaises(ConfigValidationError):
                _ = Config(line={'fwhm_Hz': 0.})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'echo': {}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'rabi': {'resonator': 'D'}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'saturation': {'mode': 'chirped'}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'inversion': {'n_times': 3}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'saturation': {'n_times': 6}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'fieldsweep': {'B_max_T': 0.1}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(protocols={'purcell': {'delta_min_Hz': 1e7}})
            with self.assertRaises(ConfigValidationError):
                _ = Config(seed=-1)
            with self.assertRaises(ConfigValidationError):
                _ = Config(seed=2**64)
            with self.assertRaises(ConfigValidationError):
                _ = Config(seed=1.5)
            with self.assertRaises(ConfigValidationError):
                _ = Config(min_matrix_element=0.7)
            with self.assertRaises(ConfigValidationError):
                _ = Config(B0_T=0.1)
            with self.assertRaises(ConfigValidationError):
                _ = Config(output_dir=3)

    t = _Test()
    t._test()


def test_config_from_file(tmp_path):
    data = {section: {} for section in SECTIONS}
    data['seed'] = 5
    cfg = Config.from_file(_write(tmp_path/'cfg.json', data))
    assert cfg.seed == 5
    assert cfg.to_dict()['line'] == Config().line

    ## command line options override the file, unset ones do not
    cfg = Config.from_file(tmp_path/'cfg.json', seed=9, output_dir=None)
    assert cfg.seed == 9
    assert cfg.output_dir is None

    class _Test(unittest.TestCase):
        def _test(self):
            with self.assertRaisesRegex(ConfigValidationError, 'coupling'):
                _ = Config.from_file(_write(tmp_path/'missing.json', {k: {} for k in SECTIONS if k != 'coupling'}))
            with self.assertRaises(ConfigValidationError):
                _ = Config.from_file(_write(tmp_path/'unknown.json', dict(data, colour='red')))
            with self.assertRaises(ConfigValidationError):
                _ = Config.from_file(tmp_path/'nonexistent.json')
            with self.assertRaises(ConfigValidationError):
                _ = Config.from_file(_write(tmp_path/'list.json', [1,2]))

    t = _Test()
    t._test()

    with open(tmp_path/'bad.json', 'w') as f:
        f.write('{"spin_system": ')
    try:
        _ = Config.from_file(tmp_path/'bad.json')
    except ConfigValidationError:
        assert True
    else:
        assert False


def test_config_sha256():
    assert Config().sha256 == Config().sha256
    assert Config(output_dir='somewhere').sha256 == Config().sha256
    assert Config(seed=1).sha256 != Config().sha256
    assert Config(line={'fwhm_Hz': 1e6}).sha256 != Config().sha256
    assert len(Config().sha256) == 64
