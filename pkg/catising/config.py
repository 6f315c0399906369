from typing import Final
from math import ceil, log, sqrt


# Truncation and state-norm tolerances (hbar = 1, one inverse-time unit everywhere).
LEAK_TOL: Final[float] = 1e-8
OPERATOR_HERMITIAN_TOL: Final[float] = 1e-10
DENSITY_HERMITIAN_TOL: Final[float] = 1e-9
DENSITY_TRACE_TOL: Final[float] = 1e-9
DENSITY_POSITIVITY_TOL: Final[float] = 1e-7
EVOLVE_TRACE_TOL: Final[float] = 1e-8

# Eigenvalues with |lambda| below ZERO_EIG_FACTOR * spectral radius form the kernel.
ZERO_EIG_FACTOR: Final[float] = 1e-10
STEADY_RESIDUAL_FACTOR: Final[float] = 1e-8

# Above this vectorized size, evolve switches from the exponential action
# to implicit BDF steps on the sparse Liouvillian.
EXPM_MAX_DIM2: Final[int] = 4096
INTEGRATOR_RTOL: Final[float] = 1e-9
INTEGRATOR_ATOL: Final[float] = 1e-12
JUMP_RTOL: Final[float] = 1e-10

RWA_CONVERGENCE_TOL: Final[float] = 1e-6
RWA_CONVERGENCE_STEP: Final[int] = 10  # Fock levels

MEANFIELD_RESIDUAL_TOL: Final[float] = 1e-12
DEGENERATE_DENOMINATOR_TOL: Final[float] = 1e-12

EVENT_CAP: Final[int] = 10**9  # events per trajectory
MAX_EXACT_LATTICE: Final[int] = 3  # 2^9 = 512 classical states
MAX_QUANTUM_LATTICE: Final[int] = 2  # 2^4 = 16-dimensional Hilbert space

BETA_C: Final[float] = log(1 + sqrt(2)) / 2
ORACLE_TV_TOL: Final[float] = 1e-10
ORACLE_BALANCE_TOL: Final[float] = 1e-12

# Protocol defaults, in units of 1/kappa (Ising) or 1/kappa2 (cavities).
QUENCH_TIME: Final[float] = 800.0
SETTLE_TIME: Final[float] = 200.0
TOY_T_NOISY: Final[float] = 15.0
TOY_T_RECOVERY: Final[float] = 15.0
CUTOFF_CHECK_STEP: Final[int] = 10  # Fock levels added by the scan cutoff guard
CUTOFF_CHECK_TOL: Final[float] = 1e-6
# Below this kappa1/kappa2 the settled overlap of a scan must grow with N.
WEAK_LOSS_RATIO: Final[float] = 1e-2

# Mean-field defaults for the phase diagram.
MF_KAPPA_NN: Final[float] = 0.3
MF_LAMBDA: Final[float] = 1.0
MF_KAPPA2: Final[float] = 1.0

WORKERS_ENV: Final[str] = "CATISING_WORKERS"
RESULT_SCHEMA_VERSION: Final[int] = 1


def default_fock_cutoff(photon_number: float) -> int:
    # keeps the coherent-state tail below ~1e-10
    return ceil(photon_number + 8 * sqrt(photon_number) + 10)


def quench_time(kappa: float) -> float:
    return QUENCH_TIME / kappa
