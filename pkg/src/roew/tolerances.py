"""Shared numerical tolerances.

Every cutoff used by the linear-algebra kernel, the trainers, and the
witness checks lives here so that library code, tests, and docs agree on
one set of numbers.
"""

# Hermiticity / spectral checks
HERMITIAN_ATOL = 1e-10      # max |M - M^dag| entry allowed before rejection
EIG_RESIDUAL_RTOL = 1e-9    # ||M x - lam x|| <= rtol * ||M|| per eigenpair
PSD_CLAMP = 1e-10           # eigenvalues in [-PSD_CLAMP, 0) are treated as 0
PSD_MIN_EIG = -1e-6         # below this the matrix is rejected as not PSD
SQRT_RESIDUAL_ATOL = 1e-8   # Frobenius tolerance on R @ R == S

# Density matrices
TRACE_ATOL = 1e-10          # |tr(rho) - 1| allowed
DENSITY_EIG_FLOOR = -1e-10  # most negative admissible density eigenvalue
PPT_EIG_FLOOR = -1e-10      # partial-transpose eigenvalue cutoff for separability

# Measurement features
IMAG_FEATURE_ATOL = 1e-8    # largest imaginary residual before rejection
MU_BOUND = 1.5              # noisy feature means must stay inside [-1.5, 1.5]

# Solver
NORM_SMOOTHING = 1e-9       # eps in sqrt(v' S v + eps^2) - eps
ACTIVE_MARGIN_ATOL = 1e-5   # |margin| below this counts as an active constraint
DEFAULT_TOL_FEAS = 1e-6
DEFAULT_TOL_OBJ = 1e-6

# Witness verification
WITNESS_GRID_TOL = 1e-9     # grid minima above -tol keep the valid-witness flag
