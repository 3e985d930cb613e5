"""Exact-diagonalization toolkit for the blockade-constrained chain.

Builds the constrained configuration space and its translation/inversion
sectors, assembles sparse chain Hamiltonians with uniform or site-modulated
chemical potentials, evolves states exactly or with adaptive Lanczos
stepping, and computes the quench, thermal-ensemble, semiclassical-manifold,
spectroscopic, and state-preparation diagnostics exposed through the
``scarsim`` command line.
"""

__version__ = "0.1.0"

from .basis import (BoundaryCondition, ConstrainedBasis, SymmetrySector,
                    build_sector, dimension, enumerate_basis)
from .ensembles import CanonicalResult, diagonal_ensemble_n, ensemble_gap, solve_beta
from .errors import ScarsimError
from .observables import (QuenchRecord, WindowSpec, delta_F, entanglement_entropy,
                          excitation_density, fidelity, ipr, msd_n,
                          revival_peak_density, run_quench)
from .operators import (HamiltonianParams, ModulatedParams, SparseOperator,
                        apply_phase_pulse, apply_pi_reflection, build_modulated,
                        build_pxp, neel_state, neel_superposition, polarized_state)
from .propagation import (EigDecomposition, TimeGrid, eig_decompose, evolve_exact,
                          evolve_krylov, evolve_time_dependent)
from .ramping import RampSchedule, mu_of_t, ramp_prepare, ramp_time_curve
from .spectroscopy import (DispersionBand, OverlapSpectrum, dispersion, ground_state,
                           overlap_spectrum, two_magnon_prediction)
from .sweep import SweepCell, SweepConfig, run_sweep, write_outputs
from .tdvp import (AnsatzParams, TdvpOrbit, TdvpPoint, antipodal_point, energy_density,
                   eom_rhs, integrate_orbit, leakage, mps_state,
                   optimize_ansatz_params, project_to_manifold)

__all__ = [name for name in dir() if not name.startswith("_")]
