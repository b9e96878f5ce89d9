"""Nonlinear least-squares fits of relaxation and Rabi data.

All fits run on `levenberg_marquardt()`. A fit that does not converge is returned with `converged = False` and a printed warning, it never raises. `FitError` is reserved for input that cannot be fitted at all.
"""


from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.stats

from purcellsim import cavity
from purcellsim.utils import arrayize

__pdoc__ = {
    'FitError': False
}

EPS = np.finfo(float).eps


class FitError(Exception):
    """Raised when the input of a fit is unusable, e.g. too few points or no signal."""


@dataclass(frozen=True)
class FitResult:
    """Outcome of a least-squares fit.

    ## Parameters
    - **params** (*dict[str,float]*) - Fitted values, best-so-far if not converged.

    - **stderr** (*dict[str,float]*) - Standard errors from the linearized covariance \\((J^T J)^{-1}\\sigma^2\\) at the optimum, with \\(\\sigma^2\\) = residual sum of squares / degrees of freedom. Parameters along a direction that the data does not constrain get `inf`.

    - **residual_norm** (*float*) - Residual sum of squares.

    - **converged** (*bool*)

    - **iterations** (*int*) - Number of accepted steps.

    - **flags** (*tuple[str]*) - Warning conditions, e.g. `"indistinguishable_time_constants"`, `"gamma_nr_unbounded"`, `"undersampled_oscillation"`.

    - **covariance** (*np.ndarray / None*) - Covariance matrix in the order of `params`.
    """
    params: dict
    stderr: dict
    residual_norm: float
    converged: bool
    iterations: int
    flags: tuple = ()
    covariance: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        """ JSON-serializable report. Infinite errors are written as the string `"inf"`. """
        def clean(v):
            return v if np.isfinite(v) else str(v)
        return {
            'params': {k: clean(float(v)) for k,v in self.params.items()},
            'stderr': {k: clean(float(v)) for k,v in self.stderr.items()},
            'residual_norm': clean(float(self.residual_norm)),
            'converged': bool(self.converged),
            'iterations': int(self.iterations),
            'flags': list(self.flags)
        }


## Solver

def jacobian(fun, p, central=False) -> np.ndarray:
    """Finite-difference Jacobian of the vector function `fun` at `p`.

    Forward differences use the step \\(h_j = \\sqrt{\\epsilon}\\, |p_j|\\) (\\(\\sqrt{\\epsilon}\\) if \\(p_j = 0\\)), central differences \\(h_j = \\epsilon^{1/3} |p_j|\\).
    """
    p = arrayize(p)
    f0 = None if central else arrayize(fun(p))
    scale = EPS**(1/3) if central else np.sqrt(EPS)
    cols = []
    for j in range(len(p)):
        h = scale*abs(p[j]) if p[j] != 0 else scale
        pp = p.copy()
        pp[j] += h
        h = pp[j] - p[j] # exactly representable step
        if central:
            pm = p.copy()
            pm[j] -= h
            cols.append((arrayize(fun(pp)) - arrayize(fun(pm)))/(2*h))
        else:
            cols.append((arrayize(fun(pp)) - f0)/h)
    return np.array(cols).T


def _covariance(J, ssr, dof) -> tuple[np.ndarray, np.ndarray]:
    """ Covariance and standard errors from the SVD of J. Directions with vanishing singular values get infinite errors. """
    n = J.shape[1]
    _, s, Vt = scipy.linalg.svd(J, full_matrices=True)
    s = np.concatenate([s, np.zeros(n - len(s))]) if len(s) < n else s
    tol = (s.max() if s.size else 0.)*max(J.shape)*EPS
    keep = s > tol
    cov = (Vt[keep].T / s[keep]**2) @ Vt[keep]
    sigma2 = ssr/dof if dof > 0 else np.inf
    with np.errstate(invalid='ignore'):
        cov = cov*sigma2 if np.isfinite(sigma2) else np.full_like(cov, np.inf)
    stderr = np.sqrt(np.abs(np.diag(cov)))
    null = np.any(np.abs(Vt[~keep]) > 1e-8, axis=0) if np.any(~keep) else np.zeros(n, dtype=bool)
    stderr[null] = np.inf
    stderr[np.isnan(stderr)] = np.inf
    return cov, stderr


def levenberg_marquardt(model, params0, data, names=None, max_iter=200, gtol=1e-10, xtol=1e-12, lambda0=1e-3, factor=10.) -> FitResult:
    """Damped Gauss-Newton minimization of \\(\\sum_i (\\text{model}(p, x_i) - y_i)^2\\).

    The first step is undamped (pure Gauss-Newton). Damping \\(\\lambda\\) scales the diagonal of \\(J^T J\\) (Marquardt). It is switched on at `lambda0` on the first rejected or singular step, multiplied by `factor` on every rejection, divided by `factor` on every acceptance, and switched off again once it falls below 1e-7. A step is accepted only if it lowers the cost, so the returned residual never exceeds the initial one.

    ## Parameters
    - **model** (*callable*) - `model(p, x)` returning predictions for the parameter vector `p`.

    - **params0** (*array-like*) - Initial parameters. The model must be finite there.

    - **data** (*tuple*) - `(x, y)`.

    - **names** (*list[str] / None, optional*) - Parameter names for the result. Defaults to `p0, p1, ...`.

    - **max_iter** (*int, optional*) - Maximum number of iterations.

    - **gtol** (*float, optional*) - Stop when \\(\\|J^T r\\|_\\infty\\) falls below this.

    - **xtol** (*float, optional*) - Stop when a step is smaller than `xtol` relative to \\(\\|p\\|\\).

    - **lambda0** (*float, optional*) - Initial damping.

    - **factor** (*float, optional*) - Damping adaptation factor.

    ## Returns
    **result** (*FitResult*)

    ## Raises
    **FitError** - If the model is not finite at `params0`.
    """
    x, y = data
    y = arrayize(y)
    p = arrayize(params0).copy()
    names = list(names) if names is not None else [f'p{j}' for j in range(len(p))]

    def residuals(q):
        return arrayize(model(q, x)) - y

    r = residuals(p)
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise FitError(f"Model is not finite at the initial parameters {dict(zip(names, p))}")

    lam = 0.
    iterations = 0
    converged = False
    for _ in range(max_iter):
        J = jacobian(residuals, p)
        g = J.T @ r
        if np.max(np.abs(g)) < gtol:
            converged = True
            break
        A = J.T @ J
        D = np.diag(A).copy()
        D = np.maximum(D, 1e-12*(D.max() if D.max() > 0 else 1.))

        accepted = False
        while True:
            try:
                step = scipy.linalg.solve(A + lam*np.diag(D), -g, assume_a='sym')
                ok = np.all(np.isfinite(step))
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
                ok = False
            if ok:
                if np.linalg.norm(step) <= xtol*(np.linalg.norm(p) + xtol):
                    converged = True
                    break
                p_new = p + step
                r_new = residuals(p_new)
                cost_new = float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new < cost:
                    p, r, cost = p_new, r_new, cost_new
                    iterations += 1
                    lam = lam/factor
                    if lam < 1e-7:
                        lam = 0.
                    accepted = True
                    break
            lam = lambda0 if lam == 0 else lam*factor
            if lam > 1e20:
                break
        if converged or not accepted:
            break

    J = jacobian(residuals, p)
    cov, stderr = _covariance(J, cost, len(y) - len(p))
    return FitResult(
        params = dict(zip(names, p.tolist())),
        stderr = dict(zip(names, stderr.tolist())),
        residual_norm = cost,
        converged = converged,
        iterations = iterations,
        covariance = cov
    )


def _warn_if_not_converged(result, what) -> FitResult:
    if not result.converged:
        print(f"WARNING: {what} did not converge after {result.iterations} accepted steps, returning best-so-far parameters {result.params}")
    return result


## Relaxation fits

def _loglinear(t, z) -> Optional[tuple[float, float]]:
    """ Fit log(z) = log(amp) - t/tau on the positive part of z. Returns (amp, tau), or None if impossible. """
    mask = z > 0
    if np.count_nonzero(mask) < 2:
        return None
    slope, intercept = np.polyfit(t[mask], np.log(z[mask]), 1)
    if not slope < 0:
        return None
    return float(np.exp(intercept)), float(-1/slope)


def _exponential_guess(t, y) -> list[float]:
    offset = float(y[-1])
    amp = offset - float(y[0])
    span = float(t[-1] - t[0]) if t[-1] > t[0] else 1.
    if amp == 0:
        return [0., span/3, offset]
    ## log-linearize the points that are still well away from the tail
    z = (offset - y)/amp
    keep = z > 0.05
    guess = _loglinear(t[keep], z[keep]) if np.count_nonzero(keep) >= 2 else None
    if guess is not None:
        return [amp*guess[0], guess[1], offset]
    ## fall back to the half-recovery crossing
    below = np.nonzero(z <= 0.5)[0]
    if len(below) > 0 and t[below[0]] > 0:
        return [amp, float(t[below[0]])/np.log(2), offset]
    return [amp, span/3, offset]


def _check_curve(curve, min_points, what):
    t, y = arrayize(curve.times), arrayize(curve.amplitudes)
    if len(t) < min_points:
        raise FitError(f"{what} needs at least {min_points} points, instead found {len(t)}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise FitError(f"{what} needs finite data")
    if np.any(np.diff(t) <= 0):
        raise FitError(f"{what} needs strictly increasing times")
    return t, y


def _exponential(p, t):
    A, T1, offset = p
    return offset - A*np.exp(-t/T1)


def fit_exponential(curve) -> FitResult:
    """Fit \\(A_Q(t) = \\text{offset} - A e^{-t/T_1}\\).

    ## Parameters
    **curve** (*DecayCurve*) - At least 4 points.

    ## Returns
    **result** (*FitResult*) - Parameters `A`, `T1`, `offset`. Flat data gives \\(A \\approx 0\\) with an infinite error on `T1`.

    ## Example
    ```python
    t = np.linspace(0.02, 2, 30)
    result = fit_exponential(DecayCurve(t, 1 - 2*np.exp(-t/0.35)))
    result.params # {'A': 2.0, 'T1': 0.35, 'offset': 1.0}
    ```
    """
    t, y = _check_curve(curve, 4, 'Single-exponential fit')
    result = levenberg_marquardt(_exponential, _exponential_guess(t, y), (t, y), names=['A', 'T1', 'offset'])
    return _warn_if_not_converged(result, 'Single-exponential fit')


def _double_exponential(p, t):
    A1, T1a, A2, T1b, offset = p
    return offset - A1*np.exp(-t/T1a) - A2*np.exp(-t/T1b)


def _double_exponential_starts(t, y) -> list[list[float]]:
    offset = float(y[-1])
    starts = []
    for frac in (1/4, 1/3, 1/2):
        k = min(max(int(round(len(t)*frac)), 2), len(t)-3)
        slow = _loglinear(t[k:-1], offset - y[k:-1]) or _loglinear(t[k:-1], y[k:-1] - offset)
        if slow is None:
            slow = (offset - float(y[0]))/2, float(t[-1] - t[0])/3
        A_slow, T_slow = slow
        if np.mean(offset - y[k:-1]) < 0:
            A_slow = -A_slow
        head = offset - A_slow*np.exp(-t[:k]/T_slow) - y[:k]
        fast = _loglinear(t[:k], head) or _loglinear(t[:k], -head)
        if fast is None or fast[1] >= T_slow:
            fast = (offset - float(y[0]) - A_slow)/2 or 1e-3, T_slow/5
        A_fast, T_fast = fast
        if np.mean(head) < 0:
            A_fast = -A_fast
        starts.append([A_fast, T_fast, A_slow, T_slow, offset])
    return starts


def single_exponential_suffices(ssr_single, ssr_double, n, n_params, scale, alpha=0.05) -> bool:
    """Nested-model F-test of a double- against a single-exponential fit.

    ## Parameters
    - **ssr_single**, **ssr_double** (*float*) - Residual sums of squares of the two fits.
    - **n** (*int*) - Number of points.
    - **n_params** (*int*) - Parameters of the double-exponential model. The single one has two fewer.
    - **scale** (*float*) - Signal scale. A single-exponential fit with rms residual below \\(10^{-8}\\) of it is exact.
    - **alpha** (*float, optional*) - Significance level.

    ## Returns
    **suffices** (*bool*) - `True` if the extra component is not significant at level `alpha`.
    """
    if np.sqrt(ssr_single/n) <= 1e-8*scale:
        return True
    dof = n - n_params
    if ssr_double <= 0 or dof <= 0:
        return False
    F = ((ssr_single - ssr_double)/2)/(ssr_double/dof)
    return bool(scipy.stats.f.sf(F, 2, dof) > alpha)


def fit_double_exponential(curve) -> FitResult:
    """Fit \\(A_Q(t) = \\text{offset} - A_1 e^{-t/T_{1a}} - A_2 e^{-t/T_{1b}}\\).

    Three starting points are derived by fitting the slow component on the tail and the fast one on the remaining head, with the split at 1/4, 1/3 and 1/2 of the points. The best converged fit is kept and ordered so that \\(T_{1a} \\le T_{1b}\\).

    The flag `"indistinguishable_time_constants"` is raised (and a warning printed) if the second component does not lower the residual significantly against a single-exponential fit (see `single_exponential_suffices()`), if the 95% confidence interval of \\(T_{1b}/T_{1a}\\) includes 1, if either time constant is unconstrained, or if one component carries less than 0.1% of the amplitude. A single exponential then suffices.

    ## Parameters
    **curve** (*DecayCurve*) - At least 7 points.

    ## Returns
    **result** (*FitResult*) - Parameters `A1`, `T1a`, `A2`, `T1b`, `offset`.
    """
    t, y = _check_curve(curve, 7, 'Double-exponential fit')
    names = ['A1', 'T1a', 'A2', 'T1b', 'offset']
    results = [levenberg_marquardt(_double_exponential, p0, (t, y), names=names) for p0 in _double_exponential_starts(t, y)]
    pool = [r for r in results if r.converged] or results
    best = min(pool, key=lambda r: r.residual_norm)
    single = levenberg_marquardt(_exponential, _exponential_guess(t, y), (t, y), names=['A', 'T1', 'offset'])

    params, stderr, cov = dict(best.params), dict(best.stderr), best.covariance
    if params['T1a'] > params['T1b']:
        order = [2, 3, 0, 1, 4]
        params = dict(zip(names, [best.params[names[k]] for k in order]))
        stderr = dict(zip(names, [best.stderr[names[k]] for k in order]))
        cov = cov[np.ix_(order, order)] if cov is not None else None

    flags = []
    Ta, Tb = params['T1a'], params['T1b']
    amps = abs(params['A1']) + abs(params['A2'])
    ratio = Tb/Ta if Ta != 0 else np.inf
    if single_exponential_suffices(single.residual_norm, best.residual_norm, len(t), len(names), float(np.max(np.abs(y)))):
        flags.append('indistinguishable_time_constants')
    elif not (np.isfinite(stderr['T1a']) and np.isfinite(stderr['T1b'])) or ratio < 1 + 1e-3 or amps == 0 or min(abs(params['A1']), abs(params['A2'])) < 1e-3*amps:
        flags.append('indistinguishable_time_constants')
    else:
        grad = np.array([-ratio/Ta, 1/Ta])
        sub = cov[np.ix_([1,3], [1,3])]
        ratio_err = float(np.sqrt(max(grad @ sub @ grad, 0.)))
        if ratio - 1.96*ratio_err <= 1:
            flags.append('indistinguishable_time_constants')
    if flags:
        print(f"WARNING: Double-exponential fit cannot distinguish T1a = {Ta} and T1b = {Tb}, a single exponential suffices")

    result = FitResult(
        params = params,
        stderr = stderr,
        residual_norm = best.residual_norm,
        converged = best.converged,
        iterations = best.iterations,
        flags = tuple(flags),
        covariance = cov
    )
    return _warn_if_not_converged(result, 'Double-exponential fit')


def fit_purcell_t1(points, t1_resonant, kappa) -> FitResult:
    """Fit the non-radiative rate \\(\\Gamma_{NR}\\) in
    $$T_1(\\delta) = \\left[\\frac{1}{T_1(0)(1 + 4\\delta^2/\\kappa^2)} + \\Gamma_{NR}\\right]^{-1}$$
    with \\(T_1(0)\\) and \\(\\kappa\\) fixed.

    Residuals are taken on \\(\\log T_1\\), since the data spans decades.

    ## Parameters
    - **points** (*list[tuple[float,float]]*) - `(delta_Hz, T1_s)` pairs.
    - **t1_resonant** (*float*) - \\(T_1(0)\\) in s.
    - **kappa** (*float*) - Cavity linewidth in Hz.

    ## Returns
    **result** (*FitResult*) - Parameter `gamma_nr` in \\(s^{-1}\\). Flag `"gamma_nr_unbounded"` is raised if the interval of two standard errors below the fitted value reaches zero, as happens when all points sit close to resonance.
    """
    pts = np.array(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise FitError(f"Purcell fit needs at least 2 points, instead found {len(pts)}")
    delta, t1 = pts[:,0], pts[:,1]
    if np.any(t1 <= 0) or not np.all(np.isfinite(pts)):
        raise FitError("Purcell fit needs finite, positive T1 values")
    gamma_p = 1/(t1_resonant*(1 + 4*delta**2/kappa**2))

    def model(p, d):
        total = gamma_p + p[0]
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.where(total > 0, -np.log(np.where(total > 0, total, 1.)), np.inf)

    far = np.argsort(-np.abs(delta))[:3]
    gamma0 = max(float(np.median(1/t1[far] - gamma_p[far])), 0.)
    result = levenberg_marquardt(model, [gamma0], (delta, np.log(t1)), names=['gamma_nr'])

    g, err = result.params['gamma_nr'], result.stderr['gamma_nr']
    if not np.isfinite(err) or g - 2*err <= 0:
        result = replace(result, flags=result.flags + ('gamma_nr_unbounded',))
        print(f"WARNING: Purcell fit leaves gamma_nr = {g} +- {err} 1/s unbounded, the detunings do not reach the non-radiative floor")
    return _warn_if_not_converged(result, 'Purcell fit')


## Rabi fit

def fit_rabi(points, resonator, pulse_duration) -> FitResult:
    """Fit the coupling \\(g\\) to a Rabi oscillation of the echo versus input power,
    $$A_Q(P) = a \\sin^2\\left(2\\pi g\\, t_p \\sqrt{c P}\\right)$$
    where \\(c = \\bar{n}/P\\) is the photon number calibration of `purcellsim.cavity.mean_photon_number()`. This follows from \\(\\theta_R = 2\\pi \\Omega_R t_p\\), \\(\\Omega_R = 2g\\sqrt{\\bar{n}}\\) and \\(A_Q = \\sin^2(\\theta_R/2)\\).

    The initial \\(g\\) comes from a scan between one oscillation over the sampled range and the sampling limit.

    ## Parameters
    - **points** (*list[tuple[float,float]]*) - `(power_W, A_Q)` pairs.
    - **resonator** (*Resonator*)
    - **pulse_duration** (*float*) - \\(t_p\\) in s.

    ## Returns
    **result** (*FitResult*) - Parameters `a` and `g` (Hz). If the fitted oscillation does not complete one period over the data, `converged` is `False` and the flag `"undersampled_oscillation"` is raised.

    ## Raises
    **FitError** - If the data holds no signal or every power is zero.
    """
    pts = np.array(points, dtype=float).reshape(-1, 2)
    if len(pts) < 4:
        raise FitError(f"Rabi fit needs at least 4 points, instead found {len(pts)}")
    P, y = pts[:,0], pts[:,1]
    if np.any(P < 0) or not np.all(np.isfinite(pts)):
        raise FitError("Rabi fit needs finite, non-negative powers")
    if not np.any(P > 0):
        raise FitError("Rabi fit needs at least one non-zero power, instead found all powers = 0")
    if np.max(np.abs(y)) < 1e-12:
        raise FitError("Rabi data holds no signal, no coupling can be extracted")

    c = cavity.mean_photon_number(1., resonator)
    x = 2*np.pi*pulse_duration*np.sqrt(c*P)

    def model(p, xx):
        return p[0]*np.sin(p[1]*xx)**2

    ## scan g for the starting point
    xs = np.unique(x)
    g_lo = np.pi/xs[-1]/4
    g_hi = np.pi/(2*np.min(np.diff(xs))) if len(xs) > 1 else 10*g_lo
    best = (np.inf, 1., g_lo)
    for g in np.geomspace(g_lo, max(g_hi, 2*g_lo), 4000):
        s = np.sin(g*x)**2
        a = float(s @ y)/float(s @ s) if s @ s > 0 else 0.
        ssr = float(np.sum((a*s - y)**2))
        if ssr < best[0]:
            best = (ssr, a, g)

    result = levenberg_marquardt(model, [best[1], best[2]], (x, y), names=['a', 'g'])
    if result.params['g']*xs[-1] < np.pi:
        result = replace(result, converged=False, flags=result.flags + ('undersampled_oscillation',))
        print("WARNING: Rabi data covers less than one full oscillation, the fitted coupling is not reliable")
        return result
    return _warn_if_not_converged(result, 'Rabi fit')
