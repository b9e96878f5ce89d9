"""Configuration options"""


import copy
import json
import math
import numbers
from pathlib import Path

from purcellsim.utils import is_half_integer, sha256_of

__pdoc__ = {
    'ConfigValidationError': False
}


class ConfigValidationError(Exception):
    """Raised when config does not validate."""


DEFAULT_SPIN_SYSTEM = {
    'S': 0.5,
    'I': 4.5,
    'A_Hz': 1.4752e9,
    'gamma_e_Hz_per_T': 27.997e9,
    'gamma_n_Hz_per_T': 6.9e6
}

DEFAULT_RESONATORS = {
    'A': {'omega0_Hz': 7.245e9, 'Q': 3.2e5, 'kappa1_Hz': None, 'kappa2_Hz': None, 'g0_Hz': 51.},
    'B': {'omega0_Hz': 7.305e9, 'Q': 1.1e5, 'kappa1_Hz': None, 'kappa2_Hz': None, 'g0_Hz': 58.},
    'B_run2': {'omega0_Hz': 7.305e9, 'Q': 8.9e4, 'kappa1_Hz': None, 'kappa2_Hz': None, 'g0_Hz': 44.}
}

DEFAULT_COUPLING = {
    'dB1y_T': 4.18e-9,
    'dB1z_T': 1.28e-9,
    'theta_rad': 0.,
    'transition': [[4,-4], [5,-5]]
}

DEFAULT_LINE = {
    'center_Hz': 2e6,
    'splitting_Hz': 4e6,
    'fwhm_Hz': 2e6,
    'grid_step_Hz': None
}

DEFAULT_PROTOCOLS = {
    'inversion': {
        'resonator': 'A',
        't_pi_half_s': 50e-6,
        't_pi_s': 100e-6,
        'broadband_t_pi_half_s': 2.5e-6,
        'broadband_t_pi_s': 5e-6,
        't_max_s': 3.,
        'n_times': 40,
        'b1_spread': 0.
    },
    'saturation': {
        'resonator': 'B_run2',
        'mode': 'swept',
        'bandwidth_Hz': 250e3,
        'schedule_T': None,
        'coil_bandwidth_Hz': 1.,
        'buffer_s': 1.,
        'delta_pulse_Hz': 0.,
        't_max_s': 10.,
        'n_times': 40
    },
    'rabi': {
        'resonator': 'B',
        't_p_s': 5e-6,
        'p_max_W': 1e-10,
        'n_powers': 201,
        'b1_spread': 0.
    },
    'fieldsweep': {
        'resonators': ['A', 'B'],
        'B_min_T': 0.,
        'B_max_T': 6e-3,
        'n_fields': 1201
    },
    'purcell': {
        'resonator': 'B_run2',
        't1_resonant_s': 1.68,
        'delta_min_Hz': 20e3,
        'delta_max_Hz': 8e6,
        'n_deltas': 22
    },
    'theta': {
        'resonator': 'B_run2',
        'n_angles': 37
    }
}

SECTIONS = ['spin_system', 'resonators', 'coupling', 'line', 'protocols']


def _is_number(x) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool)

def _merge(name, given, defaults) -> dict:
    """ Merge `given` over `defaults`, rejecting keys that `defaults` does not have. """
    if given is None:
        return copy.deepcopy(defaults)
    if not isinstance(given, dict):
        raise ConfigValidationError(f'`{name}` must be a dict, instead found {given}')
    unknown = set(given).difference(defaults)
    if unknown:
        raise ConfigValidationError(f'`{name}` has unknown keys {sorted(unknown)}, allowed keys are {sorted(defaults)}')
    ret = copy.deepcopy(defaults)
    ret.update(copy.deepcopy(given))
    return ret

def _check_positive(name, x, allow_zero=False):
    if not _is_number(x) or not math.isfinite(x) or not (x >= 0 if allow_zero else x > 0):
        raise ConfigValidationError(f'`{name}` must be a {"non-negative" if allow_zero else "positive"} finite number, instead found {x}')

def _check_count(name, x, minimum):
    if type(x) != int or x < minimum:
        raise ConfigValidationError(f'`{name}` must be an integer >= {minimum}, instead found {x}')


class Config():
    """Configuration of a purcellsim run.

    Every section is merged over its defaults, so only the keys that differ need to be given. Unknown keys are rejected.

    ## Parameters
    - **spin_system** (*dict, optional*) - Keys `S`, `I` (half-integers), `A_Hz` (hyperfine constant as ordinary frequency), `gamma_e_Hz_per_T`, `gamma_n_Hz_per_T`.
        - The default `A_Hz = 1.4752e9` reproduces the transition frequencies at 3 mT within 1 MHz. The two published values `1.45e9` and `1.475e9` are both accepted.

    - **resonators** (*dict[str,dict], optional*) - Named resonators, each with keys `omega0_Hz`, `Q`, `kappa1_Hz`, `kappa2_Hz`, `g0_Hz`. Names given here are added to (or override) the defaults `"A"`, `"B"` and `"B_run2"`.
        - `kappa1_Hz` / `kappa2_Hz` left as `None` are set to \\(\\kappa/6\\) and \\(5\\kappa/6\\), where \\(\\kappa = \\omega_0/Q\\).

    - **coupling** (*dict, optional*) - Keys `dB1y_T`, `dB1z_T` (vacuum field components), `theta_rad` (static field angle) and `transition` (pair of `[F, mF]` labels whose matrix element sets \\(g\\)).

    - **line** (*dict, optional*) - Strain doublet of the spin line in detuning space. Keys `center_Hz` (doublet center relative to the cavity), `splitting_Hz`, `fwhm_Hz` (per component), `grid_step_Hz` (`None` picks the step from the narrowest feature).

    - **protocols** (*dict[str,dict], optional*) - Parameters of the `inversion`, `saturation`, `rabi`, `fieldsweep`, `purcell` and `theta` protocols. See `DEFAULT_PROTOCOLS` for the keys.

    - **gamma_nr_per_s** (*float, optional*) - Non-radiative relaxation rate \\(\\Gamma_{NR}\\).

    - **B0_T** (*float, optional*) - Static field for transition tables.

    - **min_matrix_element** (*float, optional*) - Transitions with a smaller \\(|\\langle S_x \\rangle|\\) are dropped from transition tables.

    - **output_dir** (*str / None, optional*) - Output folder. `None` creates `./purcellsim_<uuid>`.

    - **seed** (*int, optional*) - Seed of the noise generator.

    - **noise_std** (*float, optional*) - Standard deviation of Gaussian noise added to simulated \\(A_Q\\). `0` disables noise.

    - **max_field_T** (*float, optional*) - Upper validity bound of the \\((F, m_F)\\) labeling.
    """

    def __init__(self,
        spin_system = None,
        resonators = None,
        coupling = None,
        line = None,
        protocols = None,
        gamma_nr_per_s = 1/1600,
        B0_T = 3e-3,
        min_matrix_element = 0.,
        output_dir = None,
        seed = 0,
        noise_std = 0.,
        max_field_T = 0.05
    ):
        self.spin_system = _merge('spin_system', spin_system, DEFAULT_SPIN_SYSTEM)
        self.coupling = _merge('coupling', coupling, DEFAULT_COUPLING)
        self.line = _merge('line', line, DEFAULT_LINE)

        if resonators is not None and not isinstance(resonators, dict):
            raise ConfigValidationError(f'`resonators` must be a dict of named resonators, instead found {resonators}')
        self.resonators = copy.deepcopy(DEFAULT_RESONATORS)
        for name, res in (resonators or {}).items():
            self.resonators[name] = _merge(f'resonators.{name}', res, self.resonators.get(name, {k: None for k in DEFAULT_RESONATORS['A']}))

        if protocols is not None and not isinstance(protocols, dict):
            raise ConfigValidationError(f'`protocols` must be a dict, instead found {protocols}')
        unknown = set(protocols or {}).difference(DEFAULT_PROTOCOLS)
        if unknown:
            raise ConfigValidationError(f'`protocols` has unknown keys {sorted(unknown)}, allowed keys are {sorted(DEFAULT_PROTOCOLS)}')
        self.protocols = {k: _merge(f'protocols.{k}', (protocols or {}).get(k), v) for k,v in DEFAULT_PROTOCOLS.items()}

        self.gamma_nr_per_s = gamma_nr_per_s
        self.B0_T = B0_T
        self.min_matrix_element = min_matrix_element
        self.output_dir = output_dir
        self.seed = seed
        self.noise_std = noise_std
        self.max_field_T = max_field_T

        ## Spin system
        ss = self.spin_system
        for k in ['S', 'I']:
            if not is_half_integer(ss[k]):
                raise ConfigValidationError(f'`spin_system.{k}` must be a non-negative half-integer, instead found {ss[k]}')
        for k in ['A_Hz', 'gamma_n_Hz_per_T']:
            if not _is_number(ss[k]) or not math.isfinite(ss[k]):
                raise ConfigValidationError(f'`spin_system.{k}` must be a finite number, instead found {ss[k]}')
        _check_positive('spin_system.gamma_e_Hz_per_T', ss['gamma_e_Hz_per_T'])

        ## Resonators
        for name, res in self.resonators.items():
            for k in ['omega0_Hz', 'Q']:
                _check_positive(f'resonators.{name}.{k}', res[k])
            _check_positive(f'resonators.{name}.g0_Hz', res['g0_Hz'], allow_zero=True)
            kappa = res['omega0_Hz']/res['Q']
            if res['kappa1_Hz'] is None:
                res['kappa1_Hz'] = kappa/6
            if res['kappa2_Hz'] is None:
                res['kappa2_Hz'] = 5*kappa/6
            for k in ['kappa1_Hz', 'kappa2_Hz']:
                _check_positive(f'resonators.{name}.{k}', res[k], allow_zero=True)
            if res['kappa1_Hz'] + res['kappa2_Hz'] > 1.01*kappa:
                raise ConfigValidationError(f'`resonators.{name}` must have kappa1_Hz + kappa2_Hz <= omega0_Hz/Q = {kappa}, instead found {res["kappa1_Hz"] + res["kappa2_Hz"]}')

        ## Coupling
        for k in ['dB1y_T', 'dB1z_T']:
            _check_positive(f'coupling.{k}', self.coupling[k], allow_zero=True)
        if not _is_number(self.coupling['theta_rad']):
            raise ConfigValidationError(f'`coupling.theta_rad` must be a number, instead found {self.coupling["theta_rad"]}')
        tr = self.coupling['transition']
        if not (isinstance(tr, (list,tuple)) and len(tr) == 2 and all(isinstance(l, (list,tuple)) and len(l) == 2 and all(_is_number(x) for x in l) for l in tr)):
            raise ConfigValidationError(f'`coupling.transition` must be a pair of [F, mF] labels, instead found {tr}')

        ## Line
        if not _is_number(self.line['center_Hz']):
            raise ConfigValidationError(f'`line.center_Hz` must be a number, instead found {self.line["center_Hz"]}')
        _check_positive('line.splitting_Hz', self.line['splitting_Hz'], allow_zero=True)
        _check_positive('line.fwhm_Hz', self.line['fwhm_Hz'])
        if self.line['grid_step_Hz'] is not None:
            _check_positive('line.grid_step_Hz', self.line['grid_step_Hz'])

        ## Protocols
        self._validate_protocols()

        ## Top level
        _check_positive('gamma_nr_per_s', gamma_nr_per_s, allow_zero=True)
        _check_positive('B0_T', B0_T, allow_zero=True)
        if not _is_number(min_matrix_element) or not 0 <= min_matrix_element <= float(ss['S']):
            raise ConfigValidationError(f'`min_matrix_element` must be a number in [0, S], instead found {min_matrix_element}')
        if output_dir is not None and type(output_dir) != str:
            raise ConfigValidationError(f'`output_dir` must be either None or a string, instead found {output_dir}')
        if type(seed) != int or seed < 0 or seed >= 2**64:
            raise ConfigValidationError(f'`seed` must be an unsigned 64-bit integer, instead found {seed}')
        _check_positive('noise_std', noise_std, allow_zero=True)
        _check_positive('max_field_T', max_field_T)
        if B0_T > max_field_T:
            raise ConfigValidationError(f'`B0_T` must not exceed `max_field_T` = {max_field_T}, instead found {B0_T}')

    def _validate_protocols(self):
        p = self.protocols
        for name in ['inversion', 'saturation', 'rabi', 'purcell', 'theta']:
            if p[name]['resonator'] not in self.resonators:
                raise ConfigValidationError(f'`protocols.{name}.resonator` must be one of {sorted(self.resonators)}, instead found {p[name]["resonator"]}')
        for r in p['fieldsweep']['resonators']:
            if r not in self.resonators:
                raise ConfigValidationError(f'`protocols.fieldsweep.resonators` must only contain names from {sorted(self.resonators)}, instead found {r}')

        inv = p['inversion']
        for k in ['t_pi_half_s', 't_pi_s', 'broadband_t_pi_half_s', 'broadband_t_pi_s', 't_max_s']:
            _check_positive(f'protocols.inversion.{k}', inv[k])
        _check_count('protocols.inversion.n_times', inv['n_times'], 4)
        _check_positive('protocols.inversion.b1_spread', inv['b1_spread'], allow_zero=True)

        sat = p['saturation']
        if sat['mode'] not in ['plain', 'swept']:
            raise ConfigValidationError(f'`protocols.saturation.mode` must be either "plain" / "swept", instead found {sat["mode"]}')
        for k in ['bandwidth_Hz', 'coil_bandwidth_Hz', 't_max_s']:
            _check_positive(f'protocols.saturation.{k}', sat[k])
        _check_positive('protocols.saturation.buffer_s', sat['buffer_s'], allow_zero=True)
        if not _is_number(sat['delta_pulse_Hz']):
            raise ConfigValidationError(f'`protocols.saturation.delta_pulse_Hz` must be a number, instead found {sat["delta_pulse_Hz"]}')
        if sat['schedule_T'] is not None and not (isinstance(sat['schedule_T'], list) and len(sat['schedule_T']) > 0 and all(_is_number(x) for x in sat['schedule_T'])):
            raise ConfigValidationError(f'`protocols.saturation.schedule_T` must be either None or a non-empty list of field offsets, instead found {sat["schedule_T"]}')
        ## enough points for a double-exponential fit
        _check_count('protocols.saturation.n_times', sat['n_times'], 7)

        rabi = p['rabi']
        for k in ['t_p_s', 'p_max_W']:
            _check_positive(f'protocols.rabi.{k}', rabi[k])
        _check_count('protocols.rabi.n_powers', rabi['n_powers'], 4)
        _check_positive('protocols.rabi.b1_spread', rabi['b1_spread'], allow_zero=True)

        fs = p['fieldsweep']
        _check_positive('protocols.fieldsweep.B_min_T', fs['B_min_T'], allow_zero=True)
        _check_positive('protocols.fieldsweep.B_max_T', fs['B_max_T'])
        if not fs['B_min_T'] < fs['B_max_T'] <= self.max_field_T:
            raise ConfigValidationError(f'`protocols.fieldsweep` must have B_min_T < B_max_T <= max_field_T = {self.max_field_T}, instead found B_min_T = {fs["B_min_T"]}, B_max_T = {fs["B_max_T"]}')
        _check_count('protocols.fieldsweep.n_fields', fs['n_fields'], 2)

        pur = p['purcell']
        for k in ['t1_resonant_s', 'delta_min_Hz', 'delta_max_Hz']:
            _check_positive(f'protocols.purcell.{k}', pur[k])
        if pur['delta_min_Hz'] >= pur['delta_max_Hz']:
            raise ConfigValidationError(f'`protocols.purcell.delta_min_Hz` must be less than `delta_max_Hz`, instead found {pur["delta_min_Hz"]} >= {pur["delta_max_Hz"]}')
        _check_count('protocols.purcell.n_deltas', pur['n_deltas'], 2)

        _check_count('protocols.theta.n_angles', p['theta']['n_angles'], 2)

    @classmethod
    def from_file(cls, path, **overrides) -> 'Config':
        """Load a config from a JSON file.

        The file must be a JSON object containing all of the sections `spin_system`, `resonators`, `coupling`, `line` and `protocols` (keys inside them may be partial). Top-level options are optional.

        ## Parameters
        - **path** (*str / Path*) - JSON file.

        - **overrides** - Top-level options that take precedence over the file, e.g. `seed` or `output_dir` given on the command line.

        ## Returns
        **cfg** (*Config*)
        """
        path = Path(path)
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigValidationError(f"Config file '{path}' does not exist")
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"Config file '{path}' is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigValidationError(f"Config file '{path}' must contain a JSON object, instead found {type(data).__name__}")
        for section in SECTIONS:
            if section not in data:
                raise ConfigValidationError(f"Config file '{path}' is missing required section `{section}`")
        data.update({k:v for k,v in overrides.items() if v is not None})
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigValidationError(f"Config file '{path}' has an unknown top-level option: {e}")

    def to_dict(self) -> dict:
        """ All validated options as a plain JSON-serializable dict. """
        return {
            'spin_system': self.spin_system,
            'resonators': self.resonators,
            'coupling': self.coupling,
            'line': self.line,
            'protocols': self.protocols,
            'gamma_nr_per_s': self.gamma_nr_per_s,
            'B0_T': self.B0_T,
            'min_matrix_element': self.min_matrix_element,
            'output_dir': self.output_dir,
            'seed': self.seed,
            'noise_std': self.noise_std,
            'max_field_T': self.max_field_T
        }

    @property
    def sha256(self) -> str:
        """ Hash of the canonical JSON dump of `to_dict()`. `output_dir` is excluded so that identical physics hashes identically. """
        d = self.to_dict()
        del d['output_dir']
        return sha256_of(d)
