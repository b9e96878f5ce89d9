"""Superconducting resonator and spin-cavity coupling.

All public signatures take ordinary frequencies in Hz (\\(\\omega/2\\pi\\), \\(\\kappa/2\\pi\\), \\(g/2\\pi\\)). The factors of \\(2\\pi\\) needed to turn them into rates in \\(s^{-1}\\) are applied inside `purcell_rate()` and `mean_photon_number()` only.
"""


import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar

from purcellsim.utils import arrayize, extract_item


@dataclass(frozen=True)
class Resonator:
    """Resonator parameters.

    ## Parameters
    - **omega0** (*float*) - Resonance frequency in Hz.

    - **Q** (*float*) - Loaded quality factor.

    - **kappa1** (*float*) - Input coupling rate in Hz.

    - **kappa2** (*float*) - Output coupling rate in Hz.

    - **g0** (*float, optional*) - Spin-cavity coupling constant of the addressed transition in Hz, if known.

    ## Attributes
    - **kappa** (*float*) - Linewidth \\(\\kappa = \\omega_0/Q\\) (FWHM) in Hz.

    ## Example
    ```python
    res = Resonator(omega0=7.245e9, Q=3.2e5, kappa1=3.7e3, kappa2=18.8e3)
    res.kappa # 22640.6...
    ```
    """
    omega0: float
    Q: float
    kappa1: float
    kappa2: float
    g0: float = 0.

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError(f"Expected 'omega0' > 0, instead found {self.omega0}")
        if not self.Q > 0:
            raise ValueError(f"Expected 'Q' > 0, instead found {self.Q}")
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError(f"Expected 'kappa1' and 'kappa2' >= 0, instead found {self.kappa1} and {self.kappa2}")
        #NOTE: 1% slack for round-off in measured coupling rates
        if self.kappa1 + self.kappa2 > 1.01*self.kappa:
            raise ValueError(f"Expected kappa1 + kappa2 <= kappa = {self.kappa}, instead found {self.kappa1 + self.kappa2}")
        if self.g0 < 0:
            raise ValueError(f"Expected 'g0' >= 0, instead found {self.g0}")

    @property
    def kappa(self) -> float:
        return self.omega0/self.Q

    @classmethod
    def from_config(cls, section) -> 'Resonator':
        """ Build from one entry of the `resonators` section of a `purcellsim.config.Config`. """
        return cls(
            omega0 = section['omega0_Hz'],
            Q = section['Q'],
            kappa1 = section['kappa1_Hz'],
            kappa2 = section['kappa2_Hz'],
            g0 = section['g0_Hz']
        )


@dataclass(frozen=True)
class CouplingGeometry:
    """Vacuum fluctuation field at the spin and the addressed transition.

    ## Parameters
    - **dB1y** (*float*) - Component of \\(\\delta B_1\\) along \\(y\\), in T.

    - **dB1z** (*float*) - Component of \\(\\delta B_1\\) along \\(z\\), in T. \\(\\delta B_{1x} = 0\\).

    - **theta** (*float*) - Angle of the static field in the \\(yz\\) plane, in radians.

    - **matrix_element** (*float*) - \\(|\\langle F, m_F | S_x | F+1, m_F' \\rangle|\\) of the addressed transition.
    """
    dB1y: float
    dB1z: float
    theta: float = 0.
    matrix_element: float = 0.5

    def __post_init__(self):
        if self.dB1y < 0 or self.dB1z < 0:
            raise ValueError(f"Expected 'dB1y' and 'dB1z' >= 0, instead found {self.dB1y} and {self.dB1z}")
        if not 0 <= self.matrix_element <= 0.5:
            raise ValueError(f"Expected 'matrix_element' in [0, 0.5], instead found {self.matrix_element}")


@dataclass(frozen=True)
class RelaxationChannels:
    """Purcell and non-radiative relaxation rates, both in \\(s^{-1}\\)."""
    gamma_p: float
    gamma_nr: float

    def __post_init__(self):
        if self.gamma_p < 0 or self.gamma_nr < 0:
            raise ValueError(f"Expected non-negative rates, instead found gamma_p = {self.gamma_p}, gamma_nr = {self.gamma_nr}")

    @property
    def total(self) -> float:
        return self.gamma_p + self.gamma_nr


def coupling_g(geom, gamma_e) -> float:
    """Spin-cavity coupling constant
    $$g(\\theta) = \\gamma_e \\langle S_x \\rangle \\sqrt{\\delta B_{1y}^2 \\cos^2\\theta + \\delta B_{1z}^2}$$

    ## Parameters
    - **geom** (*CouplingGeometry*)
    - **gamma_e** (*float*) - Electron gyromagnetic ratio in Hz/T.

    ## Returns
    **g** (*float*) - In Hz.
    """
    return gamma_e * geom.matrix_element * np.sqrt(geom.dB1y**2 * np.cos(geom.theta)**2 + geom.dB1z**2)


def coupling_constants_from_fit(g0, g_half_pi, gamma_e, matrix_element) -> CouplingGeometry:
    """Split measured couplings \\(g(0)\\) and \\(g(\\pi/2)\\) into the two field components.

    Since \\(g(\\pi/2)\\) only sees \\(\\delta B_{1z}\\), the \\(y\\) part of the coupling is \\(\\sqrt{g(0)^2 - g(\\pi/2)^2}\\).

    ## Returns
    **geom** (*CouplingGeometry*) - With `theta = 0`.
    """
    if g_half_pi > g0:
        raise ValueError(f"Expected g(pi/2) <= g(0), instead found {g_half_pi} > {g0}")
    if not matrix_element > 0:
        raise ValueError(f"Expected 'matrix_element' > 0, instead found {matrix_element}")
    scale = gamma_e * matrix_element
    return CouplingGeometry(
        dB1y = np.sqrt(g0**2 - g_half_pi**2)/scale,
        dB1z = g_half_pi/scale,
        theta = 0.,
        matrix_element = matrix_element
    )


def purcell_rate(g, kappa, delta=0.):
    """Purcell relaxation rate
    $$\\Gamma_P = \\frac{\\kappa g^2}{\\kappa^2/4 + \\delta^2}$$
    evaluated with angular frequencies \\(2\\pi\\kappa\\), \\(2\\pi g\\), \\(2\\pi\\delta\\). At \\(\\delta = 0\\) this is \\(2\\pi \\cdot 4g^2/\\kappa\\).

    ## Parameters
    - **g** (*float / array-like*) - Coupling in Hz.
    - **kappa** (*float*) - Cavity linewidth in Hz.
    - **delta** (*float / array-like, optional*) - Spin-cavity detuning in Hz.

    ## Returns
    **rate** (*float / np.ndarray*) - In \\(s^{-1}\\).
    """
    if not kappa > 0:
        raise ValueError(f"Expected 'kappa' > 0, instead found {kappa}")
    k, gg, d = 2*np.pi*kappa, 2*np.pi*arrayize(g), 2*np.pi*arrayize(delta)
    return extract_item(k*gg**2/(k**2/4 + d**2))


def purcell_t1(g, kappa, delta=0., gamma_nr=0.):
    """ \\(T_1 = (\\Gamma_P(\\delta) + \\Gamma_{NR})^{-1}\\) in s. """
    return extract_item(1/(arrayize(purcell_rate(g, kappa, delta)) + gamma_nr))


def resonant_coupling_from_t1(t1, kappa) -> float:
    """ Coupling \\(g\\) (Hz) for which the resonant Purcell time equals `t1`, inverting \\(T_1(0) = \\kappa/4g^2\\). """
    if not t1 > 0:
        raise ValueError(f"Expected 't1' > 0, instead found {t1}")
    return float(np.sqrt(kappa/(8*np.pi*t1)))


def t1_of_delta(t1_resonant, kappa, delta, gamma_nr=0.):
    """Relaxation time versus detuning,
    $$T_1(\\delta) = \\left[\\frac{1}{T_1(0)(1 + 4\\delta^2/\\kappa^2)} + \\Gamma_{NR}\\right]^{-1}$$

    ## Parameters
    - **t1_resonant** (*float*) - Purcell-limited \\(T_1(0)\\) in s.
    - **kappa** (*float*) - Cavity linewidth in Hz.
    - **delta** (*float / array-like*) - Detuning in Hz.
    - **gamma_nr** (*float, optional*) - Non-radiative rate in \\(s^{-1}\\).

    ## Returns
    **t1** (*float / np.ndarray*) - In s.
    """
    if not t1_resonant > 0:
        raise ValueError(f"Expected 't1_resonant' > 0, instead found {t1_resonant}")
    if not kappa > 0:
        raise ValueError(f"Expected 'kappa' > 0, instead found {kappa}")
    if gamma_nr < 0:
        raise ValueError(f"Expected 'gamma_nr' >= 0, instead found {gamma_nr}")
    delta = arrayize(delta)
    return extract_item(1/(1/(t1_resonant*(1 + 4*delta**2/kappa**2)) + gamma_nr))


def t1_versus_theta(geom, gamma_e, kappa, thetas, gamma_nr=0., delta=0.) -> np.ndarray:
    """ Resonant \\(T_1\\) (s) at each static field angle in `thetas`, following \\(g(\\theta)^2\\). """
    g = np.array([coupling_g(dataclasses.replace(geom, theta=float(th)), gamma_e) for th in arrayize(thetas)])
    return 1/(purcell_rate(g, kappa, delta) + gamma_nr)


def mean_photon_number(p_in, res):
    """Mean intracavity photon number for a drive at resonance,
    $$\\bar{n} = \\frac{4 \\kappa_1 P_{in}}{\\kappa^2 \\hbar \\omega_0}$$
    with angular \\(\\kappa_1\\), \\(\\kappa\\), \\(\\omega_0\\). This is the calibration convention of `fit_rabi()`, its absolute value is uncertain by the coupling-rate calibration.

    ## Parameters
    - **p_in** (*float / array-like*) - Input power in W.
    - **res** (*Resonator*)
    """
    p_in = arrayize(p_in)
    if np.any(p_in < 0):
        raise ValueError(f"Expected 'p_in' >= 0, instead found {p_in}")
    return extract_item(4*(2*np.pi*res.kappa1)*p_in / ((2*np.pi*res.kappa)**2 * hbar * 2*np.pi*res.omega0))


def rabi_frequency(g, n_photons):
    """ Rabi frequency \\(\\Omega_R = 2g\\sqrt{\\bar{n}}\\) in Hz. """
    n_photons = arrayize(n_photons)
    if np.any(n_photons < 0):
        raise ValueError(f"Expected 'n_photons' >= 0, instead found {n_photons}")
    return extract_item(2*g*np.sqrt(n_photons))


def cooperativity(n_spins, g, kappa, line_fwhm) -> float:
    """ Cooperativity \\(C = N g^2/(\\kappa \\Delta\\omega)\\). \\(C \\ll 1\\) rules out collective emission. """
    if n_spins < 0:
        raise ValueError(f"Expected 'n_spins' >= 0, instead found {n_spins}")
    if not (kappa > 0 and line_fwhm > 0):
        raise ValueError(f"Expected 'kappa' and 'line_fwhm' > 0, instead found {kappa} and {line_fwhm}")
    return n_spins * g**2/(kappa*line_fwhm)


def radiative_branching(channels) -> float:
    """ Fraction \\(\\Gamma_P/(\\Gamma_P + \\Gamma_{NR})\\) of relaxation events that emit a photon into the cavity. """
    if channels.total == 0:
        raise ValueError("Radiative branching is undefined when both rates are zero")
    return channels.gamma_p/channels.total
