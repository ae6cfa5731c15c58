"""Spectrally disordered Tavis-Cummings-Hubbard cavity arrays.

Single-excitation effective-Hamiltonian spectra, participation metrics,
closed-form bands, a Lindblad master-equation emission solver and
disorder-ensemble sweeps.  Rates and energies are angular frequencies in
rad/ns throughout; configuration files quote ``x / 2pi`` in GHz.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DimensionGuardError, EigensolveError, IntegrationError,
                     NumericalError, SteadyStateError, TCHMError)
from .model import (Realization, SystemParams, build_basis, derive_realization_seed,
                    load_config, parse_config, sample_disorder)
from .effective import EigenState, build_h_eff, eigensolve, occupancies
from .metrics import (classify_bands, most_polaritonic_state, nodal_participation,
                      polaritonic_participation)
from .analytic import band_table, open_momenta, periodic_momenta, polariton_bands
from .lindblad import build_liouvillian, correlation, emission_spectra, steady_state
from .ensemble import SweepResult, SweepSpec, figure_preset, run_sweep
from .kernels import BACKEND

__all__ = [
    "__version__", "BACKEND",
    "TCHMError", "ConfigError", "NumericalError", "EigensolveError", "SteadyStateError",
    "IntegrationError", "DimensionGuardError",
    "SystemParams", "Realization", "build_basis", "sample_disorder", "derive_realization_seed",
    "parse_config", "load_config",
    "EigenState", "build_h_eff", "eigensolve", "occupancies",
    "nodal_participation", "polaritonic_participation", "classify_bands",
    "most_polaritonic_state",
    "polariton_bands", "open_momenta", "periodic_momenta", "band_table",
    "build_liouvillian", "steady_state", "correlation", "emission_spectra",
    "SweepSpec", "SweepResult", "run_sweep", "figure_preset",
]
