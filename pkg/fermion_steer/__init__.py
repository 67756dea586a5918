__version__ = "0.1.0"

from .errors import (FermionSteerError, DimensionError, NotUnitaryError, CorruptStateError, GapClosedError,
    OrthogonalityError, ConfigError, SchemaVersionError, TrajectoryError)
from .gaussian import ModeVector, SingleParticleUnitary, RandomStream, CorrelationMatrix
from .fock import (ManyBodyOperator, FockState, construct_fermionic_operators, quadratic_operator,
    gaussian_operator, evolve_gaussian, correlation_of, mode_number, project_mode, weak_measure_mode,
    fswap_generator, majorana_operators)
from .lattice import LatticeSpec, AlphaField, domain_wall_strips
from .chern_model import (Orbital, Band, OWMode, OWModeSet, bloch_vector, band_projectors, build_ow_mode,
    truncate, ground_state_correlation, ground_state_correlation_field, lattice_hamiltonian, form_factor,
    form_factor_zeros, overcomplete_rank)
from .observables import (TripleRegionPartition, StripRegions, chern_real_space, chern_marker,
    entanglement_entropy, mutual_information, entanglement_contour, correlation_decay, fit_decay,
    spectral_gap, regularize, regularized_chern, ow_occupations)
from .config import (RunConfig, ProtocolConfig, DomainWallConfig, SweepConfig, LindbladConfig, SymmetryConfig,
    PovmConfig, SelftestConfig, parse_config, SCHEMA_VERSION)
from .report import TrajectoryReport, EnsembleReport, Manifest, ArtifactWriter, load_report
from .protocol import (BilayerState, init_bilayer, step_measure_feedforward, ancilla_redistribute, apply_noise,
    run_cycle, run_trajectory, run_ensemble)
from .symmetry import (SymmetryKind, ClassLabel, SymmetryAction, check_meo_symmetry, sample_stm_algebra,
    verify_correspondence, verify_table)
from .povm import povm_elements, povm_check_construction, povm_witness_inadmissible
from .lindblad import (LindbladParams, BandOccupations, eom_rhs, integrate, convergence_time, bound_rates)
from .ow_serializer import ModeSetSerializer, ModeSetSerializerV1, load_mode_set, cached_mode_set
from .selftest import oracle_battery, selftest
from .experiments import run
