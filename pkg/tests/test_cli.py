import json

import numpy as np
import pandas as pd

from purcellsim import __version__, cavity
from purcellsim.cli import *
from purcellsim.config import SECTIONS
from purcellsim.utils import write_csv


SMALL_PROTOCOLS = {
    'inversion': {'n_times': 10},
    'saturation': {'n_times': 8},
    'rabi': {'n_powers': 41},
    'fieldsweep': {'n_fields': 101},
    'purcell': {'n_deltas': 4},
    'theta': {'n_angles': 5}
}


def _config(tmp_path, name='cfg.json', **top):
    data = {section: {} for section in SECTIONS}
    data['protocols'] = SMALL_PROTOCOLS
    data.update(top)
    path = tmp_path/name
    with open(path, 'w') as f:
        json.dump(data, f)
    return str(path)


def _lines(path):
    with open(path) as f:
        return f.read().splitlines()


def test_transitions(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path/'out'
    assert main(['transitions', '--config', cfg, '--out', str(out)]) == EXIT_OK

    lines = _lines(out/'transitions.csv')
    assert lines[0] == f'# purcellsim {__version__} config_sha256={Config.from_file(cfg).sha256}'
    assert lines[1] == ','.join(TRANSITION_COLUMNS)

    df = pd.read_csv(out/'transitions.csv', comment='#')
    assert list(df.iloc[0][['fromF', 'frommF', 'toF', 'tomF']]) == [4, -4, 5, -5]
    assert abs(df['frequency_Hz'].iloc[0] - 7.300e9) < 1e6
    assert np.all(np.diff(df['frequency_Hz']) >= 0)
    assert len(list(out.glob('log_*.log'))) == 1

    ## weak transitions dropped
    cfg = _config(tmp_path, 'strong.json', min_matrix_element=0.25)
    assert main(['transitions', '--config', cfg, '--out', str(tmp_path/'strong')]) == EXIT_OK
    df = pd.read_csv(tmp_path/'strong'/'transitions.csv', comment='#')
    assert len(df) == 10
    assert np.all(df['matrix_element'] >= 0.25)

    ## field beyond the labeling range
    assert main(['transitions', '--config', cfg, '--out', str(out), '--B0', '0.2']) == EXIT_VALIDATION


def test_purcell(tmp_path):
    cfg = _config(tmp_path, gamma_nr_per_s=0.)
    out = tmp_path/'out'
    assert main(['purcell', '--config', cfg, '--out', str(out)]) == EXIT_OK

    df = pd.read_csv(out/'purcell.csv', comment='#')
    assert list(df.columns) == ['delta_Hz', 'T1_s']
    kappa = Config().resonators['B_run2']['omega0_Hz']/Config().resonators['B_run2']['Q']
    assert df['delta_Hz'].iloc[0] == 0.
    assert np.isclose(df['T1_s'].iloc[0], 1.68)
    at_kappa = df[np.isclose(df['delta_Hz'], kappa)]
    assert len(at_kappa) == 1
    assert np.isclose(at_kappa['T1_s'].iloc[0], 5*1.68)
    assert np.all(np.diff(df['T1_s']) > 0)


def test_simulate_and_fit(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path/'out'
    assert main(['simulate', 'inversion', '--config', cfg, '--out', str(out)]) == EXIT_OK
    assert _lines(out/'inversion.csv')[1] == 'time_s,A_Q'
    assert (out/'inversion_broadband.csv').exists()

    assert main(['fit', 'exp', '--config', cfg, '--out', str(out), '--input', str(out/'inversion.csv')]) == EXIT_OK
    with open(out/'fit_exp.json') as f:
        report = json.load(f)
    assert report['converged']
    assert abs(report['params']['T1'] - 0.35) < 0.1*0.35
    assert report['config_sha256'] == Config.from_file(cfg).sha256

    assert main(['simulate', 'rabi', '--config', cfg, '--out', str(out)]) == EXIT_OK
    df = pd.read_csv(out/'rabi.csv', comment='#')
    assert list(df.columns) == ['power_W', 'A_Q']
    assert len(df) == 41
    assert np.isclose(df['A_Q'].iloc[0], 0., atol=1e-12)

    assert main(['fit', 'rabi', '--config', cfg, '--out', str(out), '--input', str(out/'rabi.csv')]) == EXIT_OK
    with open(out/'fit_rabi.json') as f:
        assert abs(json.load(f)['params']['g'] - 58.) < 0.01*58.


def test_fit_dexp(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path/'out'
    t = np.geomspace(0.5, 2000., 60)
    write_csv(tmp_path/'two.csv', pd.DataFrame({'time_s': t, 'A_Q': 1 - 0.5*np.exp(-t/10.) - 1.5*np.exp(-t/300.)}), 'test')
    assert main(['fit', 'dexp', '--config', cfg, '--out', str(out), '--input', str(tmp_path/'two.csv')]) == EXIT_OK
    with open(out/'fit_dexp.json') as f:
        report = json.load(f)
    assert report['converged']
    assert abs(report['params']['T1a'] - 10.) < 0.01
    assert abs(report['params']['T1b'] - 300.) < 0.3
    assert report['flags'] == []

    t = np.linspace(0.02, 3., 40)
    write_csv(tmp_path/'one.csv', pd.DataFrame({'time_s': t, 'A_Q': 1 - 2*np.exp(-t/0.35)}), 'test')
    main(['fit', 'dexp', '--config', cfg, '--out', str(out), '--input', str(tmp_path/'one.csv')])
    with open(out/'fit_dexp.json') as f:
        assert 'indistinguishable_time_constants' in json.load(f)['flags']

    write_csv(tmp_path/'short.csv', pd.DataFrame({'time_s': t[:6], 'A_Q': np.ones(6)}), 'test')
    assert main(['fit', 'dexp', '--config', cfg, '--out', str(out), '--input', str(tmp_path/'short.csv')]) == EXIT_VALIDATION


def test_theta(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path/'out'
    assert main(['theta', '--config', cfg, '--out', str(out)]) == EXIT_OK
    df = pd.read_csv(out/'theta.csv', comment='#')
    assert list(df.columns) == ['theta_rad', 'g_Hz', 'T1_s']
    assert len(df) == 5
    assert np.isclose(df['theta_rad'].iloc[-1], np.pi)
    ## the field angle only matters through g
    kappa = 7.305e9/8.9e4
    assert np.allclose(df['T1_s'], cavity.purcell_t1(df['g_Hz'].to_numpy(), kappa, gamma_nr=1/1600))


def test_exit_codes(tmp_path, capsys):
    data = {section: {} for section in SECTIONS if section != 'coupling'}
    with open(tmp_path/'partial.json', 'w') as f:
        json.dump(data, f)
    assert main(['purcell', '--config', str(tmp_path/'partial.json'), '--out', str(tmp_path/'out')]) == EXIT_VALIDATION
    assert 'coupling' in capsys.readouterr().err

    cfg = _config(tmp_path)
    assert main(['purcell', '--config', cfg, '--out', str(tmp_path/'out'), '--seed', '-1']) == EXIT_VALIDATION
    assert main(['simulate', 'echo', '--config', cfg]) == EXIT_VALIDATION
    assert main(['purcell']) == EXIT_VALIDATION
    assert main([]) == EXIT_VALIDATION
    assert main(['--version']) == EXIT_OK
    assert main(['fit', 'exp', '--config', cfg, '--out', str(tmp_path/'out'), '--input', str(tmp_path/'missing.csv')]) == EXIT_VALIDATION

    ## a fit that cannot converge is a numerical failure
    c = cavity.mean_photon_number(1., cavity.Resonator.from_config(Config().resonators['B']))
    P = np.linspace(0., 1e-13, 20)
    write_csv(tmp_path/'short_rabi.csv', pd.DataFrame({'power_W': P, 'A_Q': np.sin(2*np.pi*58.*5e-6*np.sqrt(c*P))**2}), 'test')
    assert main(['fit', 'rabi', '--config', cfg, '--out', str(tmp_path/'out'), '--input', str(tmp_path/'short_rabi.csv')]) == EXIT_NUMERICAL


def test_determinism(tmp_path):
    cfg = _config(tmp_path, noise_std=0.01)
    for name, seed in [('a', '3'), ('b', '3'), ('c', '4')]:
        assert main(['simulate', 'rabi', '--config', cfg, '--out', str(tmp_path/name), '--seed', seed]) == EXIT_OK
    a, b, c = [_lines(tmp_path/name/'rabi.csv') for name in 'abc']
    assert a == b
    assert a[2:] != c[2:]


def test_reproduce(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path/'out'
    assert main(['reproduce', '--config', cfg, '--out', str(out)]) == EXIT_OK
    for name in [
        'transitions.csv', 'purcell.csv', 'theta.csv',
        'inversion.csv', 'inversion_broadband.csv', 'saturation.csv', 'rabi.csv', 'fieldsweep_A.csv', 'fieldsweep_B.csv',
        'fit_exp.json', 'fit_exp_broadband.json', 'fit_rabi.json', 't1_vs_detuning.csv', 'fit_purcell.json',
        'saturation_plain.csv', 'saturation_swept.csv', 'fit_dexp_plain.json', 'fit_exp_swept.json'
    ]:
        assert (out/name).exists(), name

    ## both detections overestimate T1, broadband more so
    with open(out/'fit_exp.json') as f:
        narrow = json.load(f)['params']['T1']
    with open(out/'fit_exp_broadband.json') as f:
        broad = json.load(f)['params']['T1']
    assert broad > narrow > cavity.purcell_t1(51., 7.245e9/3.2e5, gamma_nr=1/1600)

    ## plain and swept saturation side by side
    assert _lines(out/'saturation_plain.csv')[1] == _lines(out/'saturation_swept.csv')[1] == 'time_s,A_Q'
    with open(out/'fit_dexp_plain.json') as f:
        dexp = json.load(f)
    assert dexp['model'] == 'dexp'
    assert set(dexp['params']) == {'A1', 'T1a', 'A2', 'T1b', 'offset'}
    with open(out/'fit_exp_swept.json') as f:
        swept = json.load(f)
    assert swept['converged']
    assert abs(swept['params']['T1']/1.68 - 1) < 0.1
