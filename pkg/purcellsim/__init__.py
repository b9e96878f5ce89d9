"""Welcome to the documentation and API reference for purcellsim - a Python package to simulate and analyze cavity-controlled (Purcell) relaxation of bismuth donor spins in silicon.

The package is organized as:

- `purcellsim.spin_model` - electro-nuclear spin Hamiltonian, (F, mF) labeling and the allowed-transition table.
- `purcellsim.cavity` - resonator, spin-cavity coupling, Purcell rate, photon number, Rabi frequency, cooperativity.
- `purcellsim.sequence_sim` - pulse protocols (inversion recovery, saturation recovery, Rabi, field sweep) over an inhomogeneous spin line.
- `purcellsim.fitters` - Levenberg-Marquardt solver and the decay / Purcell / Rabi fits.
- `purcellsim.cli` - the `purcellsim` batch front end.
"""

__version__ = "0.3.0"
