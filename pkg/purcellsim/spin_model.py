"""Electro-nuclear spin Hamiltonian of a donor spin, its eigenstates and the allowed ESR transitions.

The Hamiltonian (in Hz) is
$$H/h = \\vec{B} \\cdot (\\gamma_e \\vec{S} \\otimes \\mathbb{1} - \\gamma_n \\mathbb{1} \\otimes \\vec{I}) + A\\, \\vec{S} \\cdot \\vec{I}$$
Eigenstates are labeled by the quantum numbers \\((F, m_F)\\) of the zero-field coupled basis, which is valid for weak fields (\\(B \\lesssim 50\\) mT for Si:Bi).

All frequencies are ordinary frequencies in Hz, all fields are in T.
"""


from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan

from purcellsim.utils import arrayize, is_half_integer

__pdoc__ = {
    'SpinModelError': False,
    'ConvergenceError': False
}


class SpinModelError(Exception):
    """Raised when eigenstates cannot be labeled by \\((F, m_F)\\)."""


class ConvergenceError(Exception):
    """Raised when the eigensolver does not converge within its sweep limit."""


@dataclass(frozen=True)
class SpinSystem:
    """Quantum numbers and coupling constants of an electron spin coupled to a nuclear spin.

    ## Parameters
    - **S** (*float*) - Electron spin, a non-negative half-integer.

    - **I** (*float*) - Nuclear spin, a non-negative half-integer.

    - **A** (*float*) - Hyperfine constant \\(A/h\\) in Hz.

    - **gamma_e** (*float*) - Electron gyromagnetic ratio \\(\\gamma_e/2\\pi\\) in Hz/T. Must be positive.

    - **gamma_n** (*float*) - Nuclear gyromagnetic ratio \\(\\gamma_n/2\\pi\\) in Hz/T.

    ## Example
    ```python
    # Si:Bi
    system = SpinSystem(S=0.5, I=4.5, A=1.4752e9, gamma_e=27.997e9, gamma_n=6.9e6)
    system.dim # 20
    ```
    """
    S: float
    I: float
    A: float
    gamma_e: float
    gamma_n: float

    def __post_init__(self):
        for name in ['S', 'I']:
            if not is_half_integer(getattr(self, name)):
                raise ValueError(f"Expected '{name}' to be a non-negative half-integer, instead found {getattr(self, name)}")
        for name in ['A', 'gamma_e', 'gamma_n']:
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"Expected '{name}' to be finite, instead found {getattr(self, name)}")
        if self.gamma_e <= 0:
            raise ValueError(f"Expected 'gamma_e' > 0, instead found {self.gamma_e}")

    @property
    def dim(self) -> int:
        """ Hilbert space dimension \\((2S+1)(2I+1)\\). """
        return int(round(2*self.S+1)) * int(round(2*self.I+1))

    @property
    def F_values(self) -> list[float]:
        """ Total angular momenta \\(|I-S|, \\ldots, I+S\\). """
        Fmin = abs(Fraction(self.I).limit_denominator(2) - Fraction(self.S).limit_denominator(2))
        Fmax = Fraction(self.I).limit_denominator(2) + Fraction(self.S).limit_denominator(2)
        return [float(Fmin + k) for k in range(int(Fmax - Fmin) + 1)]

    @classmethod
    def from_config(cls, section) -> 'SpinSystem':
        """ Build from the `spin_system` section of a `purcellsim.config.Config`. """
        return cls(
            S = section['S'],
            I = section['I'],
            A = section['A_Hz'],
            gamma_e = section['gamma_e_Hz_per_T'],
            gamma_n = section['gamma_n_Hz_per_T']
        )


@dataclass(frozen=True)
class SpinOperatorSet:
    """Angular momentum matrices \\(j_x, j_y, j_z\\) for a spin \\(j\\) (\\(\\hbar = 1\\)).

    Basis order is \\(m = j, j-1, \\ldots, -j\\), so `jz` is real diagonal with descending entries.
    """
    j: float
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray

    @property
    def jp(self) -> np.ndarray:
        """ Raising operator \\(j_+ = j_x + i j_y\\). """
        return self.jx + 1j*self.jy

    @property
    def jm(self) -> np.ndarray:
        """ Lowering operator \\(j_- = j_x - i j_y\\). """
        return self.jx - 1j*self.jy


@dataclass(frozen=True)
class EigenSolution:
    """Spectral decomposition of a Hamiltonian.

    ## Parameters
    - **energies** (*np.ndarray, shape=(n,)*) - Eigenvalues in Hz, ascending.

    - **states** (*np.ndarray, shape=(n,n)*) - Orthonormal eigenvectors as columns, in the product basis \\(|m_S\\rangle \\otimes |m_I\\rangle\\).

    - **labels** (*tuple[tuple[float,float]] / None*) - \\((F, m_F)\\) of each column, `None` until `label_states()` has been applied.
    """
    energies: np.ndarray
    states: np.ndarray
    labels: Optional[tuple] = None

    def index(self, label) -> int:
        """ Column index of the state with \\((F, m_F)\\) = `label`. """
        if self.labels is None:
            raise SpinModelError("Eigenstates are not labeled, call 'label_states()' first")
        label = (float(label[0]), float(label[1]))
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"Expected 'label' to be one of {self.labels}, instead found {label}")

    def state(self, label) -> np.ndarray:
        return self.states[:, self.index(label)]

    def energy(self, label) -> float:
        return float(self.energies[self.index(label)])


@dataclass(frozen=True)
class Transition:
    """One allowed ESR transition \\(|F, m_F\\rangle \\leftrightarrow |F+1, m_F \\pm 1\\rangle\\).

    ## Parameters
    - **from_label** (*tuple[float,float]*) - \\((F, m_F)\\) of the lower multiplet state.
    - **to_label** (*tuple[float,float]*) - \\((F+1, m_F')\\) of the upper multiplet state.
    - **frequency** (*float*) - Transition frequency in Hz.
    - **matrix_element** (*float*) - \\(|\\langle F, m_F | S_x | F+1, m_F' \\rangle|\\).
    - **dfdB** (*float*) - Field slope of the frequency in Hz/T.
    - **branch** (*int*) - \\(\\Delta F \\Delta m_F\\), either `+1` or `-1`.
    """
    from_label: tuple
    to_label: tuple
    frequency: float
    matrix_element: float
    dfdB: float
    branch: int

    @property
    def key(self) -> tuple:
        return (self.from_label, self.to_label)


## Angular momentum

@lru_cache(maxsize=None)
def _operators(twice_j) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    j = twice_j/2
    m = j - np.arange(twice_j+1)
    jp = np.diag(np.sqrt(j*(j+1) - m[1:]*(m[1:]+1)), k=1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm)/2
    jy = (jp - jm)/2j
    jz = np.diag(m).astype(complex)
    for op in (jx, jy, jz):
        op.setflags(write=False)
    return jx, jy, jz


def angular_momentum_operators(j) -> SpinOperatorSet:
    """Spin matrices for angular momentum `j` from the ladder operators, \\(\\langle m+1 | j_+ | m \\rangle = \\sqrt{j(j+1) - m(m+1)}\\).

    ## Parameters
    **j** (*float*) - Non-negative half-integer.

    ## Returns
    **ops** (*SpinOperatorSet*) - Read-only complex matrices of size \\(2j+1\\).

    ## Example
    ```python
    ops = angular_momentum_operators(0.5)
    ops.jz # diag(0.5, -0.5)
    ```
    """
    if not is_half_integer(j):
        raise ValueError(f"Expected 'j' to be a non-negative half-integer, instead found {j}")
    jx, jy, jz = _operators(int(round(2*j)))
    return SpinOperatorSet(j=float(j), jx=jx, jy=jy, jz=jz)


## Hamiltonian

def _field_vector(B) -> np.ndarray:
    B = np.atleast_1d(arrayize(B))
    if B.size == 1:
        B = np.array([0., 0., B[0]])
    if B.shape != (3,):
        raise ValueError(f"Expected 'B' to be a scalar (field along z) or a 3-vector, instead found shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ValueError(f"Expected 'B' to be finite, instead found {B}")
    return B


def build_hamiltonian(system, B) -> np.ndarray:
    """Hamiltonian of `system` in field `B`, in Hz.

    ## Parameters
    - **system** (*SpinSystem*)

    - **B** (*float / array-like*) - Field in T. A scalar is taken as a field along \\(z\\).

    ## Returns
    **H** (*np.ndarray, shape=(dim,dim)*) - Complex Hermitian matrix in the product basis \\(|m_S\\rangle \\otimes |m_I\\rangle\\), both with descending \\(m\\).
    """
    B = _field_vector(B)
    s = angular_momentum_operators(system.S)
    i = angular_momentum_operators(system.I)
    eye_s = np.eye(s.jz.shape[0])
    eye_i = np.eye(i.jz.shape[0])
    Sv = (s.jx, s.jy, s.jz)
    Iv = (i.jx, i.jy, i.jz)

    H = system.gamma_e * np.kron(sum(b*op for b,op in zip(B,Sv)), eye_i)
    H -= system.gamma_n * np.kron(eye_s, sum(b*op for b,op in zip(B,Iv)))
    H += system.A * sum(np.kron(so, io) for so,io in zip(Sv,Iv))
    return H


def electron_sx(system) -> np.ndarray:
    """ \\(S_x \\otimes \\mathbb{1}\\) in the product basis. """
    return np.kron(angular_momentum_operators(system.S).jx, np.eye(int(round(2*system.I+1))))


## Eigensolver

def eigensolve(H, tol=1e-13, max_sweeps=50) -> EigenSolution:
    """Diagonalize a Hermitian matrix by cyclic complex Jacobi rotations.

    Each rotation first removes the phase of the pivot \\(H_{pq}\\) and then applies a real Jacobi rotation, so the pair \\((p, q)\\) is annihilated by the unitary
    $$G = \\begin{pmatrix} c & s \\\\ -s\\, e^{-i\\alpha} & c\\, e^{-i\\alpha} \\end{pmatrix}, \\quad H_{pq} = |H_{pq}| e^{i\\alpha}$$

    ## Parameters
    - **H** (*array-like, shape=(n,n)*) - Hermitian matrix.

    - **tol** (*float, optional*) - Iteration stops once the off-diagonal Frobenius norm is below `tol` times the Frobenius norm of `H`.

    - **max_sweeps** (*int, optional*) - Maximum number of sweeps over all pairs \\(p < q\\).

    ## Returns
    **eig** (*EigenSolution*) - Unlabeled solution with ascending eigenvalues.

    ## Raises
    - **ValueError** - If `H` is not square or not Hermitian within `1e-12` relative.
    - **ConvergenceError** - If the off-diagonal norm is still above tolerance after `max_sweeps` sweeps.
    """
    A = np.array(H, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"Expected 'H' to be a square matrix, instead found shape {A.shape}")
    n = A.shape[0]
    norm = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > 1e-12*max(norm, np.finfo(float).tiny):
        raise ValueError("Expected 'H' to be Hermitian within 1e-12 relative")
    A = (A + A.conj().T)/2
    V = np.eye(n, dtype=complex)

    def off(M):
        return np.linalg.norm(M - np.diag(np.diag(M)))

    target = tol*norm
    skip = 1e-18*norm
    converged = norm == 0. or n < 2
    for _ in range(max_sweeps):
        if converged or off(A) < target:
            converged = True
            break
        for p in range(n-1):
            for q in range(p+1, n):
                apq = A[p,q]
                mag = abs(apq)
                if mag <= skip:
                    continue
                phase = apq/mag
                app, aqq = A[p,p].real, A[q,q].real
                theta = (aqq - app)/(2*mag)
                t = (1. if theta >= 0 else -1.)/(abs(theta) + np.sqrt(theta**2 + 1))
                c = 1/np.sqrt(t**2 + 1)
                s = t*c
                gpp, gpq, gqp, gqq = c, s, -s*np.conj(phase), c*np.conj(phase)

                ## A <- A G
                cp, cq = A[:,p].copy(), A[:,q].copy()
                A[:,p] = cp*gpp + cq*gqp
                A[:,q] = cp*gpq + cq*gqq
                ## A <- G^H A
                rp, rq = A[p,:].copy(), A[q,:].copy()
                A[p,:] = np.conj(gpp)*rp + np.conj(gqp)*rq
                A[q,:] = np.conj(gpq)*rp + np.conj(gqq)*rq
                A[p,p] = app - t*mag
                A[q,q] = aqq + t*mag
                A[p,q] = A[q,p] = 0.
                ## V <- V G
                vp, vq = V[:,p].copy(), V[:,q].copy()
                V[:,p] = vp*gpp + vq*gqp
                V[:,q] = vp*gpq + vq*gqq
    else:
        converged = converged or off(A) < target

    if not converged:
        raise ConvergenceError(f"Jacobi eigensolver did not converge within {max_sweeps} sweeps, off-diagonal norm = {off(A)}, target = {target}")

    energies = np.diag(A).real
    order = np.argsort(energies, kind='stable')
    return EigenSolution(energies=energies[order], states=V[:,order])


## Labeling

def _rational(x) -> Rational:
    return Rational(int(round(2*x)), 2)

@lru_cache(maxsize=None)
def _zero_field_basis(twice_S, twice_I) -> tuple[np.ndarray, tuple]:
    S, I = twice_S/2, twice_I/2
    mS = S - np.arange(twice_S+1)
    mI = I - np.arange(twice_I+1)
    Fs = [abs(I-S) + k for k in range(int(round(I+S-abs(I-S)))+1)]

    cols, labels = [], []
    for F in Fs:
        for mF in np.arange(-F, F+1):
            col = np.zeros(len(mS)*len(mI))
            for a, ms in enumerate(mS):
                mi = mF - ms
                if abs(mi) > I:
                    continue
                b = int(round(I - mi))
                col[a*len(mI) + b] = float(clebsch_gordan(_rational(S), _rational(I), _rational(F), _rational(ms), _rational(mi), _rational(mF)))
            cols.append(col)
            labels.append((float(F), float(mF)))
    Z = np.array(cols).T
    Z.setflags(write=False)
    return Z, tuple(labels)


def zero_field_basis(system) -> tuple[np.ndarray, tuple]:
    """Coupled basis \\(|F, m_F\\rangle = \\sum_{m_S} \\langle S\\, m_S; I\\, m_F - m_S | F\\, m_F \\rangle\\, |m_S\\rangle \\otimes |m_F - m_S\\rangle\\) from exact Clebsch-Gordan coefficients.

    ## Returns
    - **Z** (*np.ndarray, shape=(dim,dim)*) - Real orthogonal matrix, columns are the coupled states in the product basis.
    - **labels** (*tuple[tuple[float,float]]*) - \\((F, m_F)\\) of each column, ordered by \\(F\\) then \\(m_F\\).
    """
    return _zero_field_basis(int(round(2*system.S)), int(round(2*system.I)))


def _degenerate_groups(energies, deg_tol) -> list[list[int]]:
    groups = [[0]]
    for k in range(1, len(energies)):
        if energies[k] - energies[k-1] <= deg_tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def label_states(eig, system, B, max_field=0.05) -> EigenSolution:
    """Assign \\((F, m_F)\\) labels by maximum squared overlap with the zero-field coupled basis.

    Within a degenerate eigenspace the eigenvectors are arbitrary, so they are first replaced by the projections of the best-matching zero-field states onto that eigenspace, orthonormalized (Lowdin).

    ## Parameters
    - **eig** (*EigenSolution*) - Output of `eigensolve()` for `build_hamiltonian(system, B)`.

    - **system** (*SpinSystem*)

    - **B** (*float / array-like*) - Field in T at which `eig` was computed. Only its magnitude is used for the validity check.

    - **max_field** (*float, optional*) - Labeling validity bound in T.

    ## Returns
    **eig** (*EigenSolution*) - Labeled solution. Every label is used exactly once.

    ## Raises
    **SpinModelError** - If \\(|B|\\) exceeds `max_field`, or if the best overlap of any state is below 0.5.
    """
    Bmag = float(np.linalg.norm(_field_vector(B)))
    if Bmag > max_field:
        raise SpinModelError(f"Field |B| = {Bmag} T is above the labeling validity bound of {max_field} T")
    Z, ref_labels = zero_field_basis(system)
    E = np.array(eig.energies, dtype=float)
    V = np.array(eig.states, dtype=complex)
    if V.shape != Z.shape:
        raise ValueError(f"Expected eigenvectors of shape {Z.shape} for this spin system, instead found {V.shape}")

    ## Resolve degenerate eigenspaces
    deg_tol = 1e-9*max(1., np.max(np.abs(E)))
    for group in _degenerate_groups(E, deg_tol):
        if len(group) == 1:
            continue
        Vg = V[:,group]
        proj = Vg @ (Vg.conj().T @ Z)
        best = np.argsort(-np.linalg.norm(proj, axis=0), kind='stable')[:len(group)]
        W, _ = scipy.linalg.polar(proj[:,best])
        weights = np.abs(Vg.conj().T @ W)**2
        E[group] = weights.T @ E[group]
        V[:,group] = W
    order = np.argsort(E, kind='stable')
    E, V = E[order], V[:,order]

    ## Assign
    overlaps = np.abs(Z.T @ V)**2
    best = np.argmax(overlaps, axis=0)
    best_overlap = overlaps[best, np.arange(V.shape[1])]
    if np.min(best_overlap) < 0.5:
        k = int(np.argmin(best_overlap))
        raise SpinModelError(f"Ambiguous labeling at |B| = {Bmag} T: state {k} (E = {E[k]} Hz) has best overlap {best_overlap[k]:.3f} < 0.5 with any |F,mF> state")
    if len(set(best)) != len(best):
        raise SpinModelError(f"Labeling at |B| = {Bmag} T is not a bijection")

    return EigenSolution(energies=E, states=V, labels=tuple(ref_labels[b] for b in best))


def solve_spin_system(system, B, max_field=0.05) -> EigenSolution:
    """ Build, diagonalize and label in one step. """
    return label_states(eigensolve(build_hamiltonian(system, B)), system, B, max_field=max_field)


## Transitions

def _allowed_pairs(system) -> list[tuple[tuple,tuple,int]]:
    """ All (lower, upper, branch) label pairs with dF = +1 and dmF = +-1. """
    pairs = []
    Fs = system.F_values
    for F, Fu in zip(Fs[:-1], Fs[1:]):
        for m in np.arange(-F, F+1):
            for dm in (-1, +1):
                if abs(m+dm) <= Fu:
                    pairs.append(((float(F), float(m)), (float(Fu), float(m+dm)), dm))
    return pairs


def _transitions_at(sol, system) -> dict:
    """ {(from, to): (frequency, matrix_element, branch)} for a labeled solution. """
    sx = electron_sx(system)
    ret = {}
    for lo, up, branch in _allowed_pairs(system):
        i, j = sol.index(lo), sol.index(up)
        freq = abs(sol.energies[j] - sol.energies[i])
        me = abs(sol.states[:,i].conj() @ sx @ sol.states[:,j])
        ret[(lo,up)] = (float(freq), float(me), branch)
    return ret


def _slope_fields(B0, h) -> tuple[float, float]:
    return (B0 - h, B0 + h) if B0 >= h else (B0, B0 + h)


def transition_table(system, B0, min_matrix_element=0., h=10e-6, max_field=0.05) -> list[Transition]:
    """All \\(\\Delta F \\Delta m_F = \\pm 1\\) transitions at field `B0` along \\(z\\).

    ## Parameters
    - **system** (*SpinSystem*)

    - **B0** (*float*) - Static field in T.

    - **min_matrix_element** (*float, optional*) - Transitions with \\(|\\langle S_x \\rangle|\\) below this are dropped. An empty result is valid.

    - **h** (*float, optional*) - Field step for the slope, see `transition_slope()`.

    - **max_field** (*float, optional*) - Labeling validity bound in T.

    ## Returns
    **transitions** (*list[Transition]*) - Sorted by frequency.

    ## Example
    ```python
    table = transition_table(system, B0=3e-3, min_matrix_element=0.25)
    len(table) # 10
    table[0].frequency # ~7.300e9
    ```
    """
    if B0 < 0:
        raise ValueError(f"Expected 'B0' >= 0, instead found {B0}")
    center = _transitions_at(solve_spin_system(system, B0, max_field=max_field), system)
    Blo, Bhi = _slope_fields(B0, h)
    lo = center if Blo == B0 else _transitions_at(solve_spin_system(system, Blo, max_field=max_field), system)
    hi = _transitions_at(solve_spin_system(system, Bhi, max_field=max_field), system)

    table = [
        Transition(
            from_label = key[0],
            to_label = key[1],
            frequency = freq,
            matrix_element = me,
            dfdB = (hi[key][0] - lo[key][0])/(Bhi - Blo),
            branch = branch
        )
        for key, (freq, me, branch) in center.items()
        if me >= min_matrix_element
    ]
    return sorted(table, key=lambda tr: tr.frequency)


def transition_slope(system, B0, transition, h=10e-6, max_field=0.05) -> float:
    """Field slope \\(df/dB\\) of a transition in Hz/T, by central difference with labels tracked at \\(B_0 \\pm h\\).

    A forward difference is used when \\(B_0 < h\\).

    ## Parameters
    - **system** (*SpinSystem*)
    - **B0** (*float*) - Static field in T.
    - **transition** (*tuple*) - Label pair `((F, mF), (F+1, mF'))`, or a `Transition`.
    - **h** (*float, optional*) - Field step in T.
    - **max_field** (*float, optional*) - Labeling validity bound in T.

    ## Raises
    **SpinModelError** - If labels cannot be assigned at either evaluation field.
    """
    key = transition.key if isinstance(transition, Transition) else tuple((float(l[0]), float(l[1])) for l in transition)
    Blo, Bhi = _slope_fields(B0, h)
    freqs = []
    for B in (Blo, Bhi):
        sol = solve_spin_system(system, B, max_field=max_field)
        freqs.append(abs(sol.energy(key[1]) - sol.energy(key[0])))
    return (freqs[1] - freqs[0])/(Bhi - Blo)


def transition_frequency_curves(system, B_values, labels=None, max_field=0.05) -> dict:
    """Label-tracked transition frequencies and matrix elements over a grid of fields along \\(z\\).

    ## Parameters
    - **system** (*SpinSystem*)

    - **B_values** (*array-like*) - Fields in T.

    - **labels** (*list / None, optional*) - Label pairs `((F, mF), (F+1, mF'))` to keep. `None` keeps all allowed transitions.

    - **max_field** (*float, optional*) - Labeling validity bound in T.

    ## Returns
    **curves** (*dict*) - Maps each label pair to a tuple `(frequency, matrix_element)` of arrays of length `len(B_values)`.
    """
    B_values = arrayize(B_values)
    keys = None if labels is None else [tuple((float(l[0]), float(l[1])) for l in pair) for pair in labels]
    freqs, mes = {}, {}
    for B in B_values:
        tr = _transitions_at(solve_spin_system(system, B, max_field=max_field), system)
        for key in (keys if keys is not None else tr.keys()):
            if key not in tr:
                raise ValueError(f"Expected transition labels among the allowed transitions, instead found {key}")
            freqs.setdefault(key, []).append(tr[key][0])
            mes.setdefault(key, []).append(tr[key][1])
    return {key: (np.array(freqs[key]), np.array(mes[key])) for key in freqs}


def crossing_field(system, transition, frequency, B_bracket, max_field=0.05) -> float:
    """Field at which a transition is resonant with `frequency`, e.g. a resonator.

    ## Parameters
    - **system** (*SpinSystem*)
    - **transition** (*tuple*) - Label pair `((F, mF), (F+1, mF'))`.
    - **frequency** (*float*) - Target frequency in Hz.
    - **B_bracket** (*tuple[float,float]*) - Fields in T between which the crossing is searched.
    - **max_field** (*float, optional*) - Labeling validity bound in T.

    ## Raises
    **ValueError** - If the transition does not cross `frequency` inside `B_bracket`.
    """
    key = tuple((float(l[0]), float(l[1])) for l in transition)

    def detuning(B):
        sol = solve_spin_system(system, B, max_field=max_field)
        return abs(sol.energy(key[1]) - sol.energy(key[0])) - frequency

    a, b = B_bracket
    da, db = detuning(a), detuning(b)
    if np.sign(da) == np.sign(db):
        raise ValueError(f"Transition {key} does not cross {frequency} Hz between {a} T and {b} T (detunings {da} Hz and {db} Hz)")
    return brentq(detuning, a, b, xtol=1e-12)


def breit_rabi_energies(system, B) -> np.ndarray:
    """Closed-form energies for \\(S = 1/2\\) with the field along \\(z\\), ascending.

    $$E_\\pm(m) = -\\frac{A}{4} - \\gamma_n B m \\pm \\frac{\\Delta W}{2}\\sqrt{1 + \\frac{4 m x}{2I+1} + x^2}, \\quad \\Delta W = A(I+1/2), \\quad x = \\frac{(\\gamma_e + \\gamma_n) B}{\\Delta W}$$

    The two stretched states \\(m = \\pm(I+1/2)\\) only occur on the upper branch and stay linear in \\(B\\).

    ## Raises
    **ValueError** - If \\(S \\neq 1/2\\) or \\(A \\leq 0\\).
    """
    if not np.isclose(system.S, 0.5):
        raise ValueError(f"Breit-Rabi formula needs S = 1/2, instead found S = {system.S}")
    if system.A <= 0:
        raise ValueError(f"Breit-Rabi formula needs A > 0, instead found A = {system.A}")
    B = float(B)
    I = system.I
    dW = system.A*(I + 0.5)
    x = (system.gamma_e + system.gamma_n)*B/dW
    energies = []
    for m in np.arange(-I-0.5, I+1.):
        base = -system.A/4 - system.gamma_n*B*m
        if np.isclose(abs(m), I+0.5):
            sign = np.sign(1 - x) if m < 0 else 1.
            energies.append(base + sign*dW/2*np.sqrt(1 + 4*m*x/(2*I+1) + x**2))
        else:
            root = dW/2*np.sqrt(1 + 4*m*x/(2*I+1) + x**2)
            energies.extend([base + root, base - root])
    return np.sort(np.array(energies))
