"""Pulse protocols over an inhomogeneously broadened spin ensemble.

The ensemble is a grid of spin detunings \\(\\delta\\) (spin frequency minus cavity frequency, in Hz) carrying the line density \\(\\rho(\\delta)\\) and the longitudinal polarization \\(s_z(\\delta) \\in [-1, 1]\\), with \\(+1\\) the thermal equilibrium.

- Pulses rotate the polarization by an angle filtered by the pulse response \\(R(\\delta)\\) of `pulse_response()`.
- Between pulses each spin relaxes towards \\(+1\\) at \\(\\Gamma(\\delta) = \\Gamma_P(\\delta) + \\Gamma_{NR}\\).
- A Hahn echo reads out the polarization weighted by \\(W(\\delta) = |R_{\\pi/2}(\\delta)|\\, R_\\pi(\\delta)^2\\).

Transverse coherence is not tracked between sequence blocks.
"""


from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import voigt_profile
from tqdm import tqdm

from purcellsim import cavity, fitters, spin_model
from purcellsim.utils import arrayize

FWHM_TO_SIGMA = 1/(2*np.sqrt(2*np.log(2)))
SATURATION_PULSE_S = 1.


## Types

@dataclass(frozen=True)
class GaussianComponent:
    """ One Gaussian of a spectral line: center and FWHM in Hz, relative weight. """
    center: float
    fwhm: float
    weight: float = 1.


@dataclass(frozen=True)
class SpectralLine:
    """Inhomogeneous density of spin detunings, a sum of Gaussians.

    ## Parameters
    **components** (*tuple[GaussianComponent]*) - Weights must be positive, FWHMs must be positive.

    ## Attributes
    **normalization** (*float*) - Total weight. `density()` divides by it so that it integrates to 1.
    """
    components: tuple

    def __post_init__(self):
        if len(self.components) == 0:
            raise ValueError("Expected at least one line component")
        for c in self.components:
            if not (c.weight > 0 and c.fwhm > 0):
                raise ValueError(f"Expected positive weight and fwhm, instead found {c}")

    @property
    def normalization(self) -> float:
        return float(sum(c.weight for c in self.components))

    @property
    def mean_center(self) -> float:
        return float(sum(c.weight*c.center for c in self.components))/self.normalization

    @classmethod
    def strain_doublet(cls, center, splitting, fwhm) -> 'SpectralLine':
        """ Two equal-weight Gaussians at `center` \\(\\pm\\) `splitting`/2. """
        return cls(components=(
            GaussianComponent(center=center-splitting/2, fwhm=fwhm),
            GaussianComponent(center=center+splitting/2, fwhm=fwhm)
        ))

    @classmethod
    def from_config(cls, section) -> 'SpectralLine':
        """ Build from the `line` section of a `purcellsim.config.Config`. """
        return cls.strain_doublet(center=section['center_Hz'], splitting=section['splitting_Hz'], fwhm=section['fwhm_Hz'])

    def density(self, delta) -> np.ndarray:
        delta = arrayize(delta)
        ret = np.zeros_like(delta)
        for c in self.components:
            sigma = c.fwhm*FWHM_TO_SIGMA
            ret += c.weight*np.exp(-(delta-c.center)**2/(2*sigma**2))/(sigma*np.sqrt(2*np.pi))
        return ret/self.normalization

    def span(self, n_fwhm=5) -> tuple[float, float]:
        """ Detuning interval covering every component \\(\\pm\\) `n_fwhm` FWHM. """
        return (
            min(c.center - n_fwhm*c.fwhm for c in self.components),
            max(c.center + n_fwhm*c.fwhm for c in self.components)
        )

    def centered(self) -> 'SpectralLine':
        """ Same shape, shifted so that the weighted mean center is 0. """
        shift = self.mean_center
        return SpectralLine(components=tuple(replace(c, center=c.center-shift) for c in self.components))


@dataclass(frozen=True)
class PulseSpec:
    """A microwave pulse.

    ## Parameters
    - **duration** (*float*) - In s.

    - **kind** (*str*) - `"pi"`, `"pi_half"` or `"saturation"`.

    - **carrier_offset** (*float, optional*) - Carrier frequency minus cavity frequency, in Hz.

    - **amplitude_scale** (*float, optional*) - Amplitude relative to the calibrated \\(\\pi\\) (or \\(\\pi/2\\)) amplitude for this duration. `0` switches the pulse off.

    - **bandwidth** (*float, optional*) - Width in Hz of the rectangular saturation profile, only used by `kind = "saturation"`.

    - **b1_spread** (*float, optional*) - Half-width of a uniform relative spread of the drive amplitude over the spins, e.g. `0.02` for \\(\\pm 2\\%\\).
    """
    duration: float
    kind: str = 'pi'
    carrier_offset: float = 0.
    amplitude_scale: float = 1.
    bandwidth: float = 250e3
    b1_spread: float = 0.

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"Expected 'duration' > 0, instead found {self.duration}")
        if self.kind not in ['pi', 'pi_half', 'saturation']:
            raise ValueError(f"Expected 'kind' to be either of 'pi' / 'pi_half' / 'saturation', instead found {self.kind}")
        if not 0 <= self.b1_spread < 1:
            raise ValueError(f"Expected 'b1_spread' in [0, 1), instead found {self.b1_spread}")

    @property
    def nominal_angle(self) -> float:
        return (np.pi if self.kind == 'pi' else np.pi/2) * self.amplitude_scale


@dataclass(frozen=True)
class FieldPulse:
    """A static field step that detunes the spins by \\(\\delta_{pulse} = (df/dB) B_\\delta\\).

    The coil follows the set point as a first-order low-pass, so the detuning rises as \\(\\delta_{pulse}(1 - e^{-t/\\tau})\\) and falls as \\(\\delta_{pulse} e^{-t/\\tau}\\) with \\(\\tau = 1/(2\\pi \\cdot\\) `bandwidth_Hz`\\()\\). Each edge lasts `buffer_s`.

    ## Parameters
    - **amplitude_T** (*float*) - \\(B_\\delta\\) in T.
    - **dfdB** (*float*) - Field slope of the addressed transition in Hz/T.
    - **bandwidth_Hz** (*float, optional*) - Coil bandwidth.
    - **buffer_s** (*float, optional*) - Settle time of each edge.
    """
    amplitude_T: float
    dfdB: float
    bandwidth_Hz: float = 1.
    buffer_s: float = 1.

    def __post_init__(self):
        if not self.bandwidth_Hz > 0:
            raise ValueError(f"Expected 'bandwidth_Hz' > 0, instead found {self.bandwidth_Hz}")
        if self.buffer_s < 0:
            raise ValueError(f"Expected 'buffer_s' >= 0, instead found {self.buffer_s}")

    @classmethod
    def from_detuning(cls, delta, dfdB, bandwidth_Hz=1., buffer_s=1.) -> 'FieldPulse':
        return cls(amplitude_T=delta/dfdB, dfdB=dfdB, bandwidth_Hz=bandwidth_Hz, buffer_s=buffer_s)

    @property
    def delta(self) -> float:
        return self.dfdB*self.amplitude_T

    @property
    def tau(self) -> float:
        return 1/(2*np.pi*self.bandwidth_Hz)


@dataclass(frozen=True)
class EnsembleState:
    """ Detuning grid (Hz, strictly increasing), line density on it, and polarization \\(s_z\\) with \\(|s_z| \\le 1\\). """
    detuning_grid: np.ndarray
    density: np.ndarray
    sz: np.ndarray

    def __post_init__(self):
        if not (self.detuning_grid.shape == self.density.shape == self.sz.shape and self.detuning_grid.ndim == 1):
            raise ValueError(f"Expected grid, density and sz of equal 1D shape, instead found {self.detuning_grid.shape}, {self.density.shape}, {self.sz.shape}")
        if np.any(np.diff(self.detuning_grid) <= 0):
            raise ValueError("Expected a strictly increasing detuning grid")
        if np.any(self.density < 0):
            raise ValueError("Expected non-negative density")
        if np.any(np.abs(self.sz) > 1 + 1e-12):
            raise ValueError("Expected |sz| <= 1")

    def with_sz(self, sz) -> 'EnsembleState':
        return EnsembleState(detuning_grid=self.detuning_grid, density=self.density, sz=np.clip(sz, -1., 1.))


@dataclass(frozen=True)
class DecayCurve:
    """ Echo amplitude \\(A_Q\\) (rescaled so that the thermal value is \\(+1\\)) at strictly increasing times (s). """
    times: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'times', arrayize(self.times))
        object.__setattr__(self, 'amplitudes', arrayize(self.amplitudes))
        if self.times.shape != self.amplitudes.shape or self.times.ndim != 1:
            raise ValueError(f"Expected times and amplitudes of equal 1D shape, instead found {self.times.shape} and {self.amplitudes.shape}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Expected strictly increasing times")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'time_s': self.times, 'A_Q': self.amplitudes})

    @classmethod
    def from_frame(cls, df) -> 'DecayCurve':
        return cls(times=df['time_s'].to_numpy(dtype=float), amplitudes=df['A_Q'].to_numpy(dtype=float))


@dataclass(frozen=True)
class SaturationScheme:
    """How the ensemble is saturated before a saturation recovery.

    ## Parameters
    - **mode** (*str*) - `"plain"` saturates a rectangular band of width `bandwidth` around the cavity. `"swept"` additionally steps the static field through `schedule_T`, so that the band visits detunings \\(-(df/dB) \\cdot b\\) for every step \\(b\\).

    - **bandwidth** (*float, optional*) - Saturation bandwidth in Hz.

    - **schedule_T** (*tuple[float] / None, optional*) - Field offsets in T of the swept mode.
    """
    mode: str = 'plain'
    bandwidth: float = 250e3
    schedule_T: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ['plain', 'swept']:
            raise ValueError(f"Expected 'mode' to be either of 'plain' / 'swept', instead found {self.mode}")
        if not self.bandwidth > 0:
            raise ValueError(f"Expected 'bandwidth' > 0, instead found {self.bandwidth}")
        if self.mode == 'swept' and not self.schedule_T:
            raise ValueError("Expected a non-empty 'schedule_T' for swept saturation")

    def detunings(self, dfdB) -> np.ndarray:
        """ Detunings brought to the cavity by each schedule step, sorted. """
        if self.mode == 'plain':
            return np.array([0.])
        return np.sort(-dfdB*arrayize(self.schedule_T))

    def validate(self, line, dfdB):
        """Reject schedules that leave unsaturated gaps or step beyond the line.

        The guard band beyond the line span is one saturation bandwidth.

        ## Raises
        **ValueError**
        """
        if self.mode == 'plain':
            return
        d = self.detunings(dfdB)
        lo, hi = line.span()
        if d[0] < lo - self.bandwidth or d[-1] > hi + self.bandwidth:
            raise ValueError(f"Saturation schedule reaches detunings [{d[0]}, {d[-1]}] Hz, beyond the line span [{lo}, {hi}] Hz plus a guard band of {self.bandwidth} Hz")
        gaps = np.diff(d)
        if np.any(gaps > self.bandwidth*(1 + 1e-9)):
            raise ValueError(f"Saturation schedule has detuning steps up to {np.max(gaps)} Hz, larger than the saturation bandwidth {self.bandwidth} Hz")

    def profile(self, delta, dfdB=0.) -> np.ndarray:
        """ Saturation \\(s(\\delta) \\in \\{0, 1\\}\\) on the detunings `delta`. """
        delta = arrayize(delta)
        d = self.detunings(dfdB)
        return ((delta >= d[0] - self.bandwidth/2) & (delta <= d[-1] + self.bandwidth/2)).astype(float)


def default_sweep_schedule(line, dfdB, bandwidth=250e3) -> tuple:
    """Field steps (T) that move every detuning of `line.span()` through a saturation band of width `bandwidth`.

    Consecutive steps are one bandwidth apart in detuning.
    """
    if dfdB == 0:
        raise ValueError("Expected a non-zero 'dfdB' to sweep the line with the field")
    lo, hi = line.span()
    n = int(np.ceil((hi - lo)/bandwidth)) + 1
    return tuple(float(-d/dfdB) for d in np.linspace(lo, hi, n))


## Ensemble

def make_ensemble(line, kappa, t_p_max=None, step=None, n_fwhm=5) -> EnsembleState:
    """Thermal ensemble on a uniform detuning grid.

    The grid covers `line.span(n_fwhm)` and at least \\(\\pm 20\\kappa\\) around the cavity. Its step is `step`, or else the finer of \\(\\kappa/50\\) and \\(1/(10\\, t_{p,max})\\) so that the narrowest excitation window is resolved.

    ## Parameters
    - **line** (*SpectralLine*)
    - **kappa** (*float*) - Cavity linewidth in Hz.
    - **t_p_max** (*float / None, optional*) - Longest pulse in s.
    - **step** (*float / None, optional*) - Grid step in Hz.
    - **n_fwhm** (*float, optional*) - Line span in units of component FWHM.
    """
    if step is None:
        step = kappa/50 if t_p_max is None else min(kappa/50, 1/(10*t_p_max))
    if not step > 0:
        raise ValueError(f"Expected a positive grid step, instead found {step}")
    lo, hi = line.span(n_fwhm)
    lo, hi = min(lo, -20*kappa), max(hi, 20*kappa)
    n = int(np.ceil((hi - lo)/step)) + 1
    grid = np.linspace(lo, lo + (n-1)*step, n)
    return EnsembleState(detuning_grid=grid, density=line.density(grid), sz=np.ones(n))


## Pulses

def pulse_response(t_p, kappa, omega_offset):
    """Normalized excitation amplitude of a rectangular pulse of length `t_p` through the cavity,
    $$R(\\Delta) = \\frac{\\sin(\\pi \\Delta t_p)}{\\pi \\Delta t_p} \\cdot \\frac{1}{1 + 4(\\Delta/\\kappa)^2}$$
    for an offset \\(\\Delta\\) in Hz from the carrier. \\(R(0) = 1\\).

    ## Parameters
    - **t_p** (*float*) - Pulse duration in s.
    - **kappa** (*float*) - Cavity linewidth in Hz.
    - **omega_offset** (*float / array-like*) - Offset in Hz.
    """
    if not (t_p > 0 and kappa > 0):
        raise ValueError(f"Expected 't_p' > 0 and 'kappa' > 0, instead found {t_p} and {kappa}")
    offset = arrayize(omega_offset)
    ret = np.sinc(offset*t_p)/(1 + 4*(offset/kappa)**2)
    return ret if ret.ndim else float(ret)


def _mean_cos(phi, spread) -> np.ndarray:
    """ Average of \\(\\cos(\\phi(1+\\epsilon))\\) over \\(\\epsilon\\) uniform in \\([-\\)spread, spread\\(]\\). """
    return np.cos(phi) * np.sinc(phi*spread/np.pi)


def apply_pulse(state, pulse, kappa, saturation=None, dfdB=0.) -> EnsembleState:
    """Apply a pulse to the ensemble.

    - `"pi"` / `"pi_half"`: each spin is rotated by \\(\\phi(\\delta) = \\phi_{nom} R(t_p, \\kappa, \\delta - \\delta_c)\\), so \\(s_z \\to s_z \\cos\\phi(\\delta)\\).
    - `"saturation"`: \\(s_z \\to s_z (1 - s(\\delta))\\), where \\(s\\) is the profile of `saturation` (a plain band of `pulse.bandwidth` around the carrier if `None`).

    ## Parameters
    - **state** (*EnsembleState*)
    - **pulse** (*PulseSpec*)
    - **kappa** (*float*) - Cavity linewidth in Hz.
    - **saturation** (*SaturationScheme / None, optional*) - Only used for saturation pulses.
    - **dfdB** (*float, optional*) - Field slope for swept saturation, in Hz/T.

    ## Returns
    **state** (*EnsembleState*) - Same grid and density.
    """
    delta = state.detuning_grid - pulse.carrier_offset
    if pulse.kind == 'saturation':
        if saturation is None:
            saturation = SaturationScheme(mode='plain', bandwidth=pulse.bandwidth)
        return state.with_sz(state.sz * (1 - saturation.profile(delta, dfdB)))
    phi = pulse.nominal_angle * pulse_response(pulse.duration, kappa, delta)
    return state.with_sz(state.sz * _mean_cos(phi, pulse.b1_spread))


## Relaxation

def _rates(rate_of_delta, delta) -> np.ndarray:
    return arrayize(rate_of_delta(delta)) if callable(rate_of_delta) else arrayize(rate_of_delta)


def relax(state, duration, rate_of_delta) -> EnsembleState:
    """Free relaxation towards thermal equilibrium, \\(s_z(T) = 1 - (1 - s_z(0)) e^{-\\Gamma(\\delta) T}\\).

    ## Parameters
    - **state** (*EnsembleState*)
    - **duration** (*float*) - \\(T\\) in s.
    - **rate_of_delta** (*callable / array-like*) - \\(\\Gamma\\) in \\(s^{-1}\\) as a function of the detuning grid, or its values on the grid.
    """
    if duration < 0:
        raise ValueError(f"Expected 'duration' >= 0, instead found {duration}")
    if duration == 0:
        return state
    rates = _rates(rate_of_delta, state.detuning_grid)
    return state.with_sz(1 - (1 - state.sz)*np.exp(-rates*duration))


def edge_exposure(grid, rate_of_delta, start, stop, tau, duration, n_steps=100) -> np.ndarray:
    """\\(\\int_0^{duration} \\Gamma(\\delta + \\delta(t))\\, dt\\) for a coil edge \\(\\delta(t) = stop + (start - stop) e^{-t/\\tau}\\).

    Trapezoidal quadrature on `n_steps` log-spaced times so that the fast start of the edge is resolved.
    """
    if duration == 0:
        return np.zeros_like(grid)
    t = np.concatenate([[0.], np.geomspace(duration*1e-6, duration, n_steps)])
    shifts = stop + (start - stop)*np.exp(-t/tau)
    exposure = np.zeros_like(grid)
    prev = _rates(rate_of_delta, grid + shifts[0])
    for k in range(1, len(t)):
        cur = _rates(rate_of_delta, grid + shifts[k])
        exposure += 0.5*(prev + cur)*(t[k] - t[k-1])
        prev = cur
    return exposure


## Readout

def detection_weight(delta, detect, kappa) -> np.ndarray:
    """ \\(W(\\delta) = |R(t_{\\pi/2}, \\kappa, \\delta)|\\, R(t_\\pi, \\kappa, \\delta)^2\\) for the Hahn echo pair `detect = (pi_half, pi)`. """
    pi_half, pi = detect
    return np.abs(pulse_response(pi_half.duration, kappa, delta - pi_half.carrier_offset)) * pulse_response(pi.duration, kappa, delta - pi.carrier_offset)**2


def echo_amplitude(state, detect, kappa, readout_offset=0.) -> float:
    """Echo-detected polarization
    $$A_Q = \\frac{\\int s_z \\rho W\\, d\\delta}{\\int \\rho W\\, d\\delta}$$
    so that a thermal ensemble gives \\(+1\\).

    ## Parameters
    - **state** (*EnsembleState*)
    - **detect** (*tuple[PulseSpec,PulseSpec]*) - The \\(\\pi/2\\) and \\(\\pi\\) pulses of the Hahn echo.
    - **kappa** (*float*) - Cavity linewidth in Hz.
    - **readout_offset** (*float, optional*) - Detuning brought to the cavity during readout, in Hz.
    """
    w = state.density * detection_weight(state.detuning_grid - readout_offset, detect, kappa)
    norm = trapezoid(w, state.detuning_grid)
    if norm <= 0:
        raise ValueError("Detection window holds no spins, cannot normalize the echo")
    return float(trapezoid(state.sz*w, state.detuning_grid)/norm)


def _add_noise(amplitudes, noise_std, rng) -> np.ndarray:
    if not noise_std:
        return amplitudes
    rng = rng if rng is not None else np.random.default_rng()
    return amplitudes + rng.normal(0., noise_std, size=amplitudes.shape)


def _rate_function(g, kappa, gamma_nr):
    return lambda delta: cavity.purcell_rate(g, kappa, delta) + gamma_nr


## Protocols

def simulate_inversion_recovery(line, resonator, g, gamma_nr, invert, detect, times, grid_step=None, noise_std=0., rng=None) -> DecayCurve:
    """Inversion recovery: \\(\\pi\\) pulse, free relaxation for each delay \\(T\\), Hahn echo readout.

    ## Parameters
    - **line** (*SpectralLine*)
    - **resonator** (*Resonator*)
    - **g** (*float*) - Spin-cavity coupling in Hz.
    - **gamma_nr** (*float*) - Non-radiative rate in \\(s^{-1}\\).
    - **invert** (*PulseSpec*) - Inversion pulse.
    - **detect** (*tuple[PulseSpec,PulseSpec]*) - Hahn echo pulses.
    - **times** (*array-like*) - Delays in s.
    - **grid_step** (*float / None, optional*) - See `make_ensemble()`.
    - **noise_std** (*float, optional*) - Gaussian noise added to \\(A_Q\\).
    - **rng** (*np.random.Generator / None, optional*) - Noise generator.

    ## Returns
    **curve** (*DecayCurve*)

    ## Example
    ```python
    narrow = (PulseSpec(50e-6, 'pi_half'), PulseSpec(100e-6, 'pi'))
    curve = simulate_inversion_recovery(line, res, g=51., gamma_nr=1/1600, invert=PulseSpec(100e-6, 'pi'), detect=narrow, times=np.linspace(0.05, 3, 40))
    fitters.fit_exponential(curve).params['T1'] # ~0.36
    ```
    """
    kappa = resonator.kappa
    state = make_ensemble(line, kappa, t_p_max=max(invert.duration, *(p.duration for p in detect)), step=grid_step)
    rate = _rate_function(g, kappa, gamma_nr)
    rates = rate(state.detuning_grid)
    inverted = apply_pulse(state, invert, kappa)
    amplitudes = np.array([echo_amplitude(relax(inverted, T, rates), detect, kappa) for T in arrayize(times)])
    return DecayCurve(times=arrayize(times), amplitudes=_add_noise(amplitudes, noise_std, rng))


def simulate_saturation_recovery(line, resonator, g, gamma_nr, saturation, field_pulse, detect, times, grid_step=None, noise_std=0., rng=None) -> DecayCurve:
    """Saturation recovery with an optional detuning field pulse.

    The sequence is: saturate (plain or swept), raise the field pulse (one coil edge), relax for \\(T\\) at \\(\\Gamma(\\delta + \\delta_{pulse})\\), lower the field pulse (one coil edge), read out with a Hahn echo.

    ## Parameters
    - **line**, **resonator**, **g**, **gamma_nr**, **detect**, **times**, **grid_step**, **noise_std**, **rng** - As in `simulate_inversion_recovery()`.
    - **saturation** (*SaturationScheme*)
    - **field_pulse** (*FieldPulse*) - Its `dfdB` also converts the swept schedule to detunings.

    ## Raises
    **ValueError** - If the swept schedule is rejected by `SaturationScheme.validate()`.
    """
    kappa = resonator.kappa
    saturation.validate(line, field_pulse.dfdB)
    state = make_ensemble(line, kappa, t_p_max=max(p.duration for p in detect), step=grid_step)
    rate = _rate_function(g, kappa, gamma_nr)

    ## Prepare
    saturated = apply_pulse(state, PulseSpec(duration=SATURATION_PULSE_S, kind='saturation', bandwidth=saturation.bandwidth), kappa, saturation=saturation, dfdB=field_pulse.dfdB)
    dp = field_pulse.delta
    rise = edge_exposure(state.detuning_grid, rate, 0., dp, field_pulse.tau, field_pulse.buffer_s)
    fall = edge_exposure(state.detuning_grid, rate, dp, 0., field_pulse.tau, field_pulse.buffer_s)
    plateau = rate(state.detuning_grid + dp)

    amplitudes = np.array([
        echo_amplitude(saturated.with_sz(1 - (1 - saturated.sz)*np.exp(-(rise + plateau*T + fall))), detect, kappa)
        for T in arrayize(times)
    ])
    return DecayCurve(times=arrayize(times), amplitudes=_add_noise(amplitudes, noise_std, rng))


def polarization_profile(state, readout_detunings, resonator, rate_of_delta, detect, coil_bandwidth=1., buffer_s=0.) -> np.ndarray:
    """Polarization scan \\(\\langle S_z(\\delta_s) \\rangle\\): for each readout detuning the field is stepped to bring \\(\\delta_s\\) to the cavity, the ensemble relaxes during that coil edge, and a Hahn echo reads out.

    With `buffer_s = 0` this is the polarization seen through the detection window. A finite buffer shows the partial relaxation that spins suffer while being swept through the cavity.

    ## Parameters
    - **state** (*EnsembleState*) - Ensemble right after the excitation.
    - **readout_detunings** (*array-like*) - \\(\\delta_s\\) in Hz.
    - **resonator** (*Resonator*)
    - **rate_of_delta** (*callable*) - \\(\\Gamma(\\delta)\\) in \\(s^{-1}\\).
    - **detect** (*tuple[PulseSpec,PulseSpec]*)
    - **coil_bandwidth** (*float, optional*) - In Hz.
    - **buffer_s** (*float, optional*) - Duration of the coil edge in s.

    ## Returns
    **A_Q** (*np.ndarray*) - One value per readout detuning.
    """
    kappa = resonator.kappa
    tau = 1/(2*np.pi*coil_bandwidth)
    ret = []
    for ds in arrayize(readout_detunings):
        ## the spin at ds is brought to the cavity by a shift of -ds
        exposure = edge_exposure(state.detuning_grid, rate_of_delta, 0., -ds, tau, buffer_s)
        relaxed = state.with_sz(1 - (1 - state.sz)*np.exp(-exposure))
        ret.append(echo_amplitude(relaxed, detect, kappa, readout_offset=ds))
    return np.array(ret)


def simulate_rabi(powers, pulse_duration, g, resonator, b1_spread=0., noise_std=0., rng=None) -> list[tuple[float, float]]:
    """Rabi oscillation of the echo versus the input power of the refocusing pulse.

    The refocusing angle is \\(\\theta_R = 2\\pi \\Omega_R t_p\\) with \\(\\Omega_R = 2g\\sqrt{\\bar{n}(P)}\\), and the echo is \\(A_Q = \\sin^2(\\theta_R/2)\\), averaged over the drive spread if `b1_spread > 0`.

    ## Parameters
    - **powers** (*array-like*) - Input powers in W.
    - **pulse_duration** (*float*) - \\(t_p\\) in s.
    - **g** (*float*) - Coupling in Hz.
    - **resonator** (*Resonator*)
    - **b1_spread** (*float, optional*) - Relative drive spread half-width.

    ## Returns
    **points** (*list[tuple[float,float]]*) - `(power_W, A_Q)`.
    """
    powers = arrayize(powers)
    if np.any(powers < 0):
        raise ValueError("Expected non-negative powers")
    theta = 2*np.pi*arrayize(cavity.rabi_frequency(g, cavity.mean_photon_number(powers, resonator)))*pulse_duration
    amplitudes = _add_noise((1 - _mean_cos(theta, b1_spread))/2, noise_std, rng)
    return list(zip(powers.tolist(), amplitudes.tolist()))


def field_sweep_spectrum(system, line, resonator, B_values, coarse_step=0.25e-3, max_field=0.05) -> list[tuple[float, float]]:
    """Echo-detected field sweep: overlap of the cavity line with every transition's strain doublet, weighted by \\(|\\langle S_x \\rangle|^2\\).

    Transition frequencies are computed on a coarse field grid and interpolated with cubic splines. The overlap of a Gaussian component (FWHM \\(\\Delta\\omega\\)) with the cavity Lorentzian (FWHM \\(\\kappa\\)) is a Voigt profile of the transition-cavity detuning.

    ## Parameters
    - **system** (*SpinSystem*)
    - **line** (*SpectralLine*) - Shape of each transition's line, its absolute center is ignored.
    - **resonator** (*Resonator*)
    - **B_values** (*array-like*) - Fields in T.
    - **coarse_step** (*float, optional*) - Spacing of the eigensolver grid in T.
    - **max_field** (*float, optional*) - Labeling validity bound in T.

    ## Returns
    **points** (*list[tuple[float,float]]*) - `(B0_T, A_Q)` with \\(A_Q\\) normalized to a maximum of 1.
    """
    B_values = arrayize(B_values)
    lo, hi = float(np.min(B_values)), float(np.max(B_values))
    n = max(int(np.ceil((hi - lo)/coarse_step)) + 1, 4)
    coarse = np.linspace(lo, hi, n)
    curves = spin_model.transition_frequency_curves(system, coarse, max_field=max_field)
    shape = line.centered()
    gamma = resonator.kappa/2

    signal = np.zeros_like(B_values)
    for freqs, mes in curves.values():
        f = CubicSpline(coarse, freqs)(B_values)
        me = CubicSpline(coarse, mes)(B_values)
        for c in shape.components:
            signal += me**2 * c.weight/shape.normalization * voigt_profile(f + c.center - resonator.omega0, c.fwhm*FWHM_TO_SIGMA, gamma)
    peak = np.max(signal)
    if peak > 0:
        signal = signal/peak
    return list(zip(B_values.tolist(), signal.tolist()))


def simulate_t1_vs_detuning(line, resonator, g, gamma_nr, deltas, dfdB, detect, saturation=None, coil_bandwidth=1., buffer_s=1., n_times=30, grid_step=None, noise_std=0., rng=None) -> list[tuple[float, float]]:
    """Measure \\(T_1\\) at each detuning with swept-saturation recovery and a single-exponential fit.

    Each delay grid spans five times the expected \\(T_1(\\delta)\\).

    ## Parameters
    - **deltas** (*array-like*) - Field-pulse detunings in Hz.
    - **dfdB** (*float*) - Field slope of the addressed transition in Hz/T.
    - **saturation** (*SaturationScheme / None, optional*) - Defaults to a swept scheme from `default_sweep_schedule()`.
    - Other parameters as in `simulate_saturation_recovery()`.

    ## Returns
    **points** (*list[tuple[float,float]]*) - `(delta_Hz, fitted T1_s)`, the input of `purcellsim.fitters.fit_purcell_t1()`.
    """
    if saturation is None:
        saturation = SaturationScheme(mode='swept', schedule_T=default_sweep_schedule(line, dfdB))
    ret = []
    for delta in tqdm(arrayize(deltas), desc='T1 vs detuning', leave=False):
        expected = cavity.purcell_t1(g, resonator.kappa, delta, gamma_nr)
        curve = simulate_saturation_recovery(
            line, resonator, g, gamma_nr,
            saturation = saturation,
            field_pulse = FieldPulse.from_detuning(delta, dfdB, bandwidth_Hz=coil_bandwidth, buffer_s=buffer_s),
            detect = detect,
            times = np.linspace(5*expected/n_times, 5*expected, n_times),
            grid_step = grid_step,
            noise_std = noise_std,
            rng = rng
        )
        ret.append((float(delta), float(fitters.fit_exponential(curve).params['T1'])))
    return ret
