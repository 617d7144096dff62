"""helidiff: classification of antisymmetric field tensors and simulation
of the conservative diffusion they generate, by particle ensembles and by a
grid Fokker-Planck solver."""

__version__ = "0.1.0"

from .classify import ClassificationReport, SampleSpec, classify
from .diagnostics import (ComparisonReport, EntropyTrace, compare, compare_on,
                          deposit_histogram, entropy, entropy_production_rate)
from .fokker_planck import (DiffusionRHS, EquilibriumSpec, FullRHS,
                            compute_beta, evolve, fp_rhs_diffusion3d,
                            fp_rhs_full, fp_rhs_pointwise, fp_step,
                            make_equilibrium, stable_dt, stationary_residual)
from .geometry import (VolumeWeight, closure_test, cocurrent_residual,
                       curl_decomposition_residual,
                       extend_to_measure_preserving, field_charge_3d,
                       field_charge_nd, field_force, helicity_density,
                       jacobi_residual)
from .grid import DensityGrid, flat_grid, random_positive_grid
from .operators import (CoordinateMap, Hamiltonian, OperatorField,
                        VectorField3, catalog_hamiltonian, catalog_operator,
                        operator_apply)
from .sde import (DomainSpec, Ensemble, EnsembleHistory, FrictionSpec,
                  NoiseSpec, advance, initial_ensemble, run_scenario,
                  step_stratonovich)

__all__ = [name for name in dir() if not name.startswith("_")]
