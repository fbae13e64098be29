"""Numerical workbench for the self-gravitating Levy-Leblond equation.

The package covers the plane-wave (Bargmann) geometry carrying the system,
the 12-parameter symmetry group of the coupled equations with its projective
spinor representation, spectral field utilities, Poisson solvers for the
gravitational sector, split-step and RK4 propagators, and the conserved
charge ledger.
"""

from .fields import (
    BispinorField,
    GridSpec,
    Snapshot,
    SnapshotDataError,
    band_limited_noise,
    gaussian_packet,
    load_snapshot,
    observables,
    save_potentials,
    save_snapshot,
)
from .geometry import (
    DENSITY_WEIGHT,
    AnalyticPotential,
    GridPotential,
    TimeMap,
    brinkmann_metric,
    brinkmann_metric_inverse,
    chirality_matrix,
    christoffels,
    christoffels_fd,
    clifford_residual,
    dirac_residual,
    flat_potential,
    gamma_set,
    lie_derivative_spinor_density,
    ricci_constraint_residual,
    schwarzian,
    spin_connection,
)
from .gravity import (
    constraint_potential,
    coriolis_preset,
    mass_density,
    poisson_isolated,
    poisson_periodic,
    taub_nut_varpi,
)
from .sngroup import (
    LieParams,
    SnGroupElement,
    compose,
    element_from_dict,
    element_to_dict,
    exp_element,
    infinitesimal_action,
    inverse,
    lie_vector,
    load_element,
    represent,
    represent_fn,
    represent_pair,
    save_element,
    transform_potentials,
)
from .evolve import (
    GroundStateResult,
    RunConfig,
    RunResult,
    StabilityError,
    apply_hamiltonian,
    chi_from_phi,
    current_and_continuity,
    energy_expectation,
    gauge_transform,
    ground_state,
    hamiltonian_mismatch,
    run,
    spin_commutator_residual,
)
from .charges import (
    CSV_COLUMNS,
    ChargeRecord,
    charge_monitor,
    compute_charges,
    covariance_test,
    drift_stats,
    read_csv,
    write_csv,
)

__version__ = "0.1.0"
