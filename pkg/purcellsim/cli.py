"""Command-line front end.

```
purcellsim <command> --config <file> [--out <dir>] [--seed <u64>]
```

Commands:
- `transitions [--B0 <T>]` - Transition table at the static field.
- `purcell` - Analytic \\(T_1(\\delta)\\) curve.
- `simulate {inversion,saturation,rabi,fieldsweep}` - Simulated protocol data.
- `fit {exp,dexp,purcell,rabi} --input <csv>` - Fit report for a data file.
- `theta` - \\(T_1(\\theta)\\) for a rotated static field.
- `reproduce` - All of the above, plus the plain versus swept saturation comparison and the simulated \\(T_1\\) versus detuning experiment with its \\(\\Gamma_{NR}\\) fit.

Each run creates the output folder (`--out`, else `output_dir` of the config, else `./purcellsim_<uuid>`) and a log file `log_<uuid>.log` in it. Every CSV starts with a `# purcellsim <version> config_sha256=<hash>` line followed by a header row.

Exit codes: 0 on success, 1 on invalid input (config, arguments, data files), 2 on numerical failure (eigensolver, state labeling, non-converged fits).
"""


import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import shortuuid
from tqdm import tqdm

from purcellsim import __version__, cavity, fitters, sequence_sim, spin_model
from purcellsim.config import Config, ConfigValidationError
from purcellsim.utils import read_csv, set_seed, write_csv

__pdoc__ = {
    'Run': False
}

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

TRANSITION_COLUMNS = ['fromF', 'frommF', 'toF', 'tomF', 'frequency_Hz', 'matrix_element', 'dfdB_Hz_per_T', 'branch']
PROTOCOLS = ['inversion', 'saturation', 'rabi', 'fieldsweep']
FIT_MODELS = ['exp', 'dexp', 'purcell', 'rabi']


class Run():
    """State of one command invocation: validated config, output folder, log file and noise generator."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.uuid = shortuuid.uuid()
        self.output_folder = Path(cfg.output_dir if cfg.output_dir is not None else f'./purcellsim_{self.uuid}').resolve()
        self.output_folder.mkdir(parents=True, exist_ok=True)
        self.log_file = self.output_folder.joinpath(f'log_{self.uuid}.log')
        print(f'Log file = {self.log_file}')

        self.rng = set_seed(cfg.seed)
        self.system = spin_model.SpinSystem.from_config(cfg.spin_system)
        self.line = sequence_sim.SpectralLine.from_config(cfg.line)
        self.converged = True

        self.log(f'purcellsim {__version__}\nconfig_sha256 = {cfg.sha256}\nseed = {cfg.seed}\noutput folder = {self.output_folder}\n')

    @property
    def comment(self) -> str:
        return f'purcellsim {__version__} config_sha256={self.cfg.sha256}'

    @property
    def transition(self) -> tuple:
        return tuple((float(l[0]), float(l[1])) for l in self.cfg.coupling['transition'])

    def log(self, message):
        with open(self.log_file, 'a') as lf:
            lf.write(message + '\n')

    def resonator(self, name) -> cavity.Resonator:
        return cavity.Resonator.from_config(self.cfg.resonators[name])

    def write(self, name, df) -> Path:
        path = write_csv(self.output_folder.joinpath(name), df, self.comment)
        self.log(f'Wrote {path}')
        return path

    def write_report(self, name, result, required=True, **info) -> Path:
        path = self.output_folder.joinpath(name)
        report = {'purcellsim': __version__, 'config_sha256': self.cfg.sha256, **info, **result.to_dict()}
        with open(path, 'w') as f:
            json.dump(report, f, indent=2)
        self.log(f'Fit {info}: {result.to_dict()}')
        self.log(f'Wrote {path}')
        if not result.converged:
            self.log('WARNING: Fit did not converge')
            self.converged = self.converged and not required
        return path


## Helpers

def _detect(protocol, broadband=False) -> tuple:
    """ Hahn echo pulses of the inversion protocol. """
    prefix = 'broadband_' if broadband else ''
    return (
        sequence_sim.PulseSpec(protocol[f'{prefix}t_pi_half_s'], kind='pi_half', b1_spread=protocol['b1_spread']),
        sequence_sim.PulseSpec(protocol[f'{prefix}t_pi_s'], kind='pi', b1_spread=protocol['b1_spread'])
    )


def _times(protocol) -> np.ndarray:
    n = protocol['n_times']
    return np.linspace(protocol['t_max_s']/n, protocol['t_max_s'], n)


def _deltas(protocol) -> np.ndarray:
    return np.concatenate([[0.], np.geomspace(protocol['delta_min_Hz'], protocol['delta_max_Hz'], protocol['n_deltas']-1)])


def _addressed_slope(run) -> float:
    return spin_model.transition_slope(run.system, run.cfg.B0_T, run.transition, max_field=run.cfg.max_field_T)


def _saturation_scheme(run, dfdB) -> sequence_sim.SaturationScheme:
    sat = run.cfg.protocols['saturation']
    if sat['mode'] == 'plain':
        return sequence_sim.SaturationScheme(mode='plain', bandwidth=sat['bandwidth_Hz'])
    schedule = tuple(sat['schedule_T']) if sat['schedule_T'] is not None else sequence_sim.default_sweep_schedule(run.line, dfdB, sat['bandwidth_Hz'])
    return sequence_sim.SaturationScheme(mode='swept', bandwidth=sat['bandwidth_Hz'], schedule_T=schedule)


def _saturation_curve(run, scheme, dfdB) -> sequence_sim.DecayCurve:
    """ Saturation recovery of the `saturation` protocol with the given scheme, read out with the narrowband pulses of the `inversion` protocol. """
    cfg = run.cfg
    p = cfg.protocols['saturation']
    res = run.resonator(p['resonator'])
    return sequence_sim.simulate_saturation_recovery(
        run.line, res, res.g0, cfg.gamma_nr_per_s,
        saturation = scheme,
        field_pulse = sequence_sim.FieldPulse.from_detuning(p['delta_pulse_Hz'], dfdB, bandwidth_Hz=p['coil_bandwidth_Hz'], buffer_s=p['buffer_s']),
        detect = _detect(cfg.protocols['inversion']),
        times = _times(p),
        grid_step = cfg.line['grid_step_Hz'],
        noise_std = cfg.noise_std,
        rng = run.rng
    )


## Commands

def cmd_transitions(run, B0=None) -> Path:
    """Write `transitions.csv`, the table of allowed transitions at `B0` (default `B0_T` of the config).

    For \\(S = 1/2\\) the eigenvalues are cross-checked against the closed-form Breit-Rabi energies and the deviation is logged.
    """
    cfg = run.cfg
    B0 = cfg.B0_T if B0 is None else B0
    if not 0 <= B0 <= cfg.max_field_T:
        raise ValueError(f"Expected 0 <= B0 <= {cfg.max_field_T} T, instead found {B0}")
    table = spin_model.transition_table(run.system, B0, min_matrix_element=cfg.min_matrix_element, max_field=cfg.max_field_T)
    run.log(f'{len(table)} transitions at B0 = {B0} T with matrix element >= {cfg.min_matrix_element}')

    if np.isclose(run.system.S, 0.5) and run.system.A > 0:
        energies = spin_model.solve_spin_system(run.system, B0, max_field=cfg.max_field_T).energies
        deviation = float(np.max(np.abs(np.sort(energies) - spin_model.breit_rabi_energies(run.system, B0))))
        run.log(f'Max deviation from Breit-Rabi energies = {deviation} Hz')
        if deviation > 1e-6*abs(run.system.A):
            print(f"WARNING: Eigenvalues deviate from the Breit-Rabi energies by {deviation} Hz")

    df = pd.DataFrame(
        [[tr.from_label[0], tr.from_label[1], tr.to_label[0], tr.to_label[1], tr.frequency, tr.matrix_element, tr.dfdB, tr.branch] for tr in table],
        columns = TRANSITION_COLUMNS
    )
    return run.write('transitions.csv', df)


def cmd_purcell(run) -> Path:
    """Write `purcell.csv`, \\(T_1(\\delta)\\) from `purcellsim.cavity.t1_of_delta()` at \\(\\delta = 0\\), \\(\\delta = \\kappa\\) and log-spaced detunings of the `purcell` protocol."""
    p = run.cfg.protocols['purcell']
    kappa = run.resonator(p['resonator']).kappa
    deltas = np.unique(np.concatenate([_deltas(p), [kappa]]))
    t1 = cavity.t1_of_delta(p['t1_resonant_s'], kappa, deltas, run.cfg.gamma_nr_per_s)
    run.log(f'T1 vs detuning: T1(0) = {p["t1_resonant_s"]} s, kappa = {kappa} Hz, gamma_nr = {run.cfg.gamma_nr_per_s} 1/s')
    return run.write('purcell.csv', pd.DataFrame({'delta_Hz': deltas, 'T1_s': t1}))


def cmd_simulate(run, protocol) -> list[Path]:
    """Simulate one protocol and write its CSV(s).

    - `inversion` - `inversion.csv` (narrowband detection) and `inversion_broadband.csv`.
    - `saturation` - `saturation.csv`, detected with the narrowband pulses of the `inversion` protocol.
    - `rabi` - `rabi.csv`.
    - `fieldsweep` - `fieldsweep_<resonator>.csv` per resonator.
    """
    cfg = run.cfg
    p = cfg.protocols[protocol]
    grid_step = cfg.line['grid_step_Hz']
    run.log(f'Simulating {protocol} with {p}')

    if protocol == 'inversion':
        res = run.resonator(p['resonator'])
        paths = []
        for broadband, name in [(False, 'inversion.csv'), (True, 'inversion_broadband.csv')]:
            detect = _detect(p, broadband)
            curve = sequence_sim.simulate_inversion_recovery(
                run.line, res, res.g0, cfg.gamma_nr_per_s,
                invert = detect[1],
                detect = detect,
                times = _times(p),
                grid_step = grid_step,
                noise_std = cfg.noise_std,
                rng = run.rng
            )
            paths.append(run.write(name, curve.to_frame()))
        return paths

    if protocol == 'saturation':
        dfdB = _addressed_slope(run)
        curve = _saturation_curve(run, _saturation_scheme(run, dfdB), dfdB)
        return [run.write('saturation.csv', curve.to_frame())]

    if protocol == 'rabi':
        res = run.resonator(p['resonator'])
        points = sequence_sim.simulate_rabi(np.linspace(0., p['p_max_W'], p['n_powers']), p['t_p_s'], res.g0, res, b1_spread=p['b1_spread'], noise_std=cfg.noise_std, rng=run.rng)
        return [run.write('rabi.csv', pd.DataFrame(points, columns=['power_W', 'A_Q']))]

    if protocol == 'fieldsweep':
        B_values = np.linspace(p['B_min_T'], p['B_max_T'], p['n_fields'])
        paths = []
        for name in p['resonators']:
            points = sequence_sim.field_sweep_spectrum(run.system, run.line, run.resonator(name), B_values, max_field=cfg.max_field_T)
            paths.append(run.write(f'fieldsweep_{name}.csv', pd.DataFrame(points, columns=['B0_T', 'A_Q'])))
        return paths

    raise ValueError(f"Expected protocol to be either of {PROTOCOLS}, instead found {protocol}")


def cmd_fit(run, model, input_file, t1_resonant=None, kappa=None, report=None, required=True) -> fitters.FitResult:
    """Fit a data file and write a JSON fit report.

    ## Parameters
    - **run** (*Run*)

    - **model** (*str*) - `"exp"` / `"dexp"` read `time_s,A_Q`; `"purcell"` reads `delta_Hz,T1_s`; `"rabi"` reads `power_W,A_Q`.

    - **input_file** (*str / Path*)

    - **t1_resonant**, **kappa** (*float / None, optional*) - Fixed parameters of the `"purcell"` model. Default to `t1_resonant_s` and the resonator linewidth of the `purcell` protocol.

    - **report** (*str / None, optional*) - Report file name, default `fit_<model>.json`.

    - **required** (*bool, optional*) - If `False`, a fit that does not converge is reported and logged but does not turn the exit code into a numerical failure.
    """
    cfg = run.cfg
    if model in ['exp', 'dexp']:
        curve = sequence_sim.DecayCurve.from_frame(read_csv(input_file, ['time_s', 'A_Q']))
        result = fitters.fit_exponential(curve) if model == 'exp' else fitters.fit_double_exponential(curve)
        info = {'model': model}
    elif model == 'purcell':
        p = cfg.protocols['purcell']
        t1_resonant = p['t1_resonant_s'] if t1_resonant is None else t1_resonant
        kappa = run.resonator(p['resonator']).kappa if kappa is None else kappa
        df = read_csv(input_file, ['delta_Hz', 'T1_s'])
        result = fitters.fit_purcell_t1(df[['delta_Hz', 'T1_s']].to_numpy(dtype=float), t1_resonant, kappa)
        info = {'model': model, 't1_resonant_s': t1_resonant, 'kappa_Hz': kappa}
    elif model == 'rabi':
        p = cfg.protocols['rabi']
        df = read_csv(input_file, ['power_W', 'A_Q'])
        result = fitters.fit_rabi(df[['power_W', 'A_Q']].to_numpy(dtype=float), run.resonator(p['resonator']), p['t_p_s'])
        info = {'model': model, 'resonator': p['resonator'], 't_p_s': p['t_p_s']}
    else:
        raise ValueError(f"Expected model to be either of {FIT_MODELS}, instead found {model}")

    run.write_report(report or f'fit_{model}.json', result, required=required, input=str(Path(input_file).resolve()), **info)
    print(f'{model} fit: {result.params} +- {result.stderr}, converged = {result.converged}')
    return result


def cmd_theta(run) -> Path:
    """Write `theta.csv`: \\(g(\\theta)\\) and resonant \\(T_1(\\theta)\\) for \\(\\theta \\in [0, \\pi]\\), with the matrix element of the addressed transition at `B0_T`."""
    cfg = run.cfg
    p = cfg.protocols['theta']
    table = spin_model.transition_table(run.system, cfg.B0_T, max_field=cfg.max_field_T)
    match = [tr for tr in table if tr.key == run.transition]
    if not match:
        raise ValueError(f"Expected `coupling.transition` to be an allowed transition, instead found {cfg.coupling['transition']}")
    geom = cavity.CouplingGeometry(cfg.coupling['dB1y_T'], cfg.coupling['dB1z_T'], cfg.coupling['theta_rad'], matrix_element=min(match[0].matrix_element, 0.5))
    thetas = np.linspace(0., np.pi, p['n_angles'])
    kappa = run.resonator(p['resonator']).kappa
    g = np.array([cavity.coupling_g(replace(geom, theta=th), run.system.gamma_e) for th in thetas])
    t1 = cavity.t1_versus_theta(geom, run.system.gamma_e, kappa, thetas, gamma_nr=cfg.gamma_nr_per_s)
    run.log(f'T1 vs theta: matrix element = {geom.matrix_element}, kappa = {kappa} Hz')
    return run.write('theta.csv', pd.DataFrame({'theta_rad': thetas, 'g_Hz': g, 'T1_s': t1}))


def cmd_t1_vs_detuning(run) -> fitters.FitResult:
    """Simulate swept-saturation \\(T_1\\) measurements at the detunings of the `purcell` protocol, write `t1_vs_detuning.csv` and fit \\(\\Gamma_{NR}\\) to it."""
    cfg = run.cfg
    p = cfg.protocols['purcell']
    res = run.resonator(p['resonator'])
    sat = cfg.protocols['saturation']
    dfdB = _addressed_slope(run)
    points = sequence_sim.simulate_t1_vs_detuning(
        run.line, res, res.g0, cfg.gamma_nr_per_s,
        deltas = _deltas(p),
        dfdB = dfdB,
        detect = _detect(cfg.protocols['inversion']),
        saturation = _saturation_scheme(run, dfdB),
        coil_bandwidth = sat['coil_bandwidth_Hz'],
        buffer_s = sat['buffer_s'],
        grid_step = cfg.line['grid_step_Hz'],
        noise_std = cfg.noise_std,
        rng = run.rng
    )
    path = run.write('t1_vs_detuning.csv', pd.DataFrame(points, columns=['delta_Hz', 'T1_s']))
    return cmd_fit(run, 'purcell', path)


def cmd_saturation_comparison(run) -> tuple[fitters.FitResult, fitters.FitResult]:
    """Saturation recovery after plain and after swept saturation, with the field pulse of the `saturation` protocol.

    Writes `saturation_plain.csv` and `saturation_swept.csv`, fits the plain curve with a double exponential (`fit_dexp_plain.json`) and the swept one with a single exponential (`fit_exp_swept.json`).

    Spin diffusion is not simulated, so under narrowband readout both schemes recover alike and the double-exponential report normally carries the flag `"indistinguishable_time_constants"`. That fit does not decide the exit code.
    """
    p = run.cfg.protocols['saturation']
    dfdB = _addressed_slope(run)
    plain = sequence_sim.SaturationScheme(mode='plain', bandwidth=p['bandwidth_Hz'])
    swept = _saturation_scheme(run, dfdB)
    if swept.mode == 'plain':
        swept = sequence_sim.SaturationScheme(mode='swept', bandwidth=p['bandwidth_Hz'], schedule_T=sequence_sim.default_sweep_schedule(run.line, dfdB, p['bandwidth_Hz']))
    paths = {}
    for name, scheme in [('plain', plain), ('swept', swept)]:
        paths[name] = run.write(f'saturation_{name}.csv', _saturation_curve(run, scheme, dfdB).to_frame())
    return (
        cmd_fit(run, 'dexp', paths['plain'], report='fit_dexp_plain.json', required=False),
        cmd_fit(run, 'exp', paths['swept'], report='fit_exp_swept.json')
    )


def cmd_reproduce(run):
    """Run every command with the protocols of the config. Fits are written next to their data files."""
    folder = run.output_folder
    steps = [
        ('transitions', lambda: cmd_transitions(run)),
        ('purcell', lambda: cmd_purcell(run)),
        ('theta', lambda: cmd_theta(run)),
        *[(f'simulate {protocol}', lambda protocol=protocol: cmd_simulate(run, protocol)) for protocol in PROTOCOLS],
        ('fit inversion', lambda: cmd_fit(run, 'exp', folder.joinpath('inversion.csv'))),
        ('fit inversion broadband', lambda: cmd_fit(run, 'exp', folder.joinpath('inversion_broadband.csv'), report='fit_exp_broadband.json')),
        ('fit rabi', lambda: cmd_fit(run, 'rabi', folder.joinpath('rabi.csv'))),
        ('plain versus swept saturation', lambda: cmd_saturation_comparison(run)),
        ('T1 vs detuning', lambda: cmd_t1_vs_detuning(run))
    ]
    for name, step in tqdm(steps, desc='reproduce'):
        run.log(f'\n## {name}')
        step()


## Entry point

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, metavar='<file>', help='JSON run configuration with sections spin_system, resonators, coupling, line, protocols')
    common.add_argument('--out', metavar='<dir>', help='output folder (default: output_dir of the config, else ./purcellsim_<uuid>)')
    common.add_argument('--seed', type=int, metavar='<u64>', help='seed of the noise generator, overrides the config')

    parser = argparse.ArgumentParser(prog='purcellsim', description='Purcell-limited spin relaxation: transition tables, relaxation protocols and fits.')
    parser.add_argument('--version', action='version', version=f'purcellsim {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('transitions', parents=[common], help='transition table at the static field')
    p.add_argument('--B0', type=float, metavar='<T>', help='static field in T (default: B0_T of the config)')
    sub.add_parser('purcell', parents=[common], help='T1 versus detuning')
    p = sub.add_parser('simulate', parents=[common], help='simulate a protocol')
    p.add_argument('protocol', choices=PROTOCOLS)
    p = sub.add_parser('fit', parents=[common], help='fit a data file')
    p.add_argument('model', choices=FIT_MODELS)
    p.add_argument('--input', required=True, metavar='<csv>', help='data file')
    p.add_argument('--t1-resonant', type=float, metavar='<s>', help='fixed T1(0) of the purcell model')
    p.add_argument('--kappa', type=float, metavar='<Hz>', help='fixed cavity linewidth of the purcell model')
    sub.add_parser('theta', parents=[common], help='T1 versus static field angle')
    sub.add_parser('reproduce', parents=[common], help='run everything')
    return parser


def main(argv=None) -> int:
    """Parse `argv` (default `sys.argv[1:]`), run the command and return the exit code."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION

    run = None
    try:
        cfg = Config.from_file(args.config, output_dir=args.out, seed=args.seed)
        run = Run(cfg)
        run.log(f'Command: {vars(args)}')
        if args.command == 'transitions':
            cmd_transitions(run, args.B0)
        elif args.command == 'purcell':
            cmd_purcell(run)
        elif args.command == 'simulate':
            cmd_simulate(run, args.protocol)
        elif args.command == 'fit':
            cmd_fit(run, args.model, args.input, t1_resonant=args.t1_resonant, kappa=args.kappa)
        elif args.command == 'theta':
            cmd_theta(run)
        elif args.command == 'reproduce':
            cmd_reproduce(run)
    except (spin_model.ConvergenceError, spin_model.SpinModelError) as e:
        return _fail(run, e, EXIT_NUMERICAL)
    except (ConfigValidationError, fitters.FitError, ValueError, FileNotFoundError, KeyError) as e:
        return _fail(run, e, EXIT_VALIDATION)

    if not run.converged:
        print('ERROR: A fit did not converge, see the log file', file=sys.stderr)
        return EXIT_NUMERICAL
    run.log('Done')
    return EXIT_OK


def _fail(run, e, code) -> int:
    message = f'ERROR: {type(e).__name__}: {e}'
    print(message, file=sys.stderr)
    if run is not None:
        run.log(message)
    return code


if __name__ == '__main__':
    sys.exit(main())
