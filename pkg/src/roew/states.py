"""Two-qubit state generators and the exact separability oracle.

States are 4x4 density matrices in the computational basis
|00>, |01>, |10>, |11>, with the first qubit as the left tensor factor.
For two qubits the positive-partial-transpose (PPT) test is an exact
separability criterion, so labels produced here are ground truth.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import (
    DimMismatchError,
    NotHermitianError,
    OutOfRangeError,
    RetryExhaustedError,
)
from .tolerances import DENSITY_EIG_FLOOR, HERMITIAN_ATOL, PPT_EIG_FLOOR, TRACE_ATOL

SEPARABLE = 1
ENTANGLED = -1


class BellLabel(enum.Enum):
    """Two-bit tags for the four Bell states."""

    PHI_PLUS = "00"
    PHI_MINUS = "01"
    PSI_PLUS = "10"
    PSI_MINUS = "11"

    @property
    def code(self):
        return self.value


GROUP_ORDER = (
    BellLabel.PHI_PLUS,
    BellLabel.PHI_MINUS,
    BellLabel.PSI_PLUS,
    BellLabel.PSI_MINUS,
)

_SQ2 = 1.0 / np.sqrt(2.0)
BELL_VECTORS = {
    BellLabel.PHI_PLUS: np.array([_SQ2, 0.0, 0.0, _SQ2], dtype=complex),
    BellLabel.PHI_MINUS: np.array([_SQ2, 0.0, 0.0, -_SQ2], dtype=complex),
    BellLabel.PSI_PLUS: np.array([0.0, _SQ2, _SQ2, 0.0], dtype=complex),
    BellLabel.PSI_MINUS: np.array([0.0, _SQ2, -_SQ2, 0.0], dtype=complex),
}


@dataclass
class LabeledState:
    """A density matrix with its separability label.

    ``group`` is the Bell tag for entangled samples and None for
    separable ones. ``seed`` records the per-record generator seed so a
    dataset row can be regenerated in isolation.
    """

    rho: np.ndarray
    label: int
    group: BellLabel | None = None
    seed: int | None = None


# ============================================================
# Constructors
# ============================================================


def bell_state(tag):
    """Density matrix of the Bell state named by ``tag``."""
    vec = BELL_VECTORS[BellLabel(tag) if not isinstance(tag, BellLabel) else tag]
    return np.outer(vec, vec.conj())


def qubit_state(theta, phi):
    """Single-qubit pure state cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>."""
    return np.array([np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)])


def product_state(theta_a, phi_a, theta_b, phi_b):
    """Projector onto a pure product state given Bloch angles per qubit.

    Angles outside the canonical ranges simply wrap; no error is raised.
    """
    vec = np.kron(qubit_state(theta_a, phi_a), qubit_state(theta_b, phi_b))
    return np.outer(vec, vec.conj())


def werner_state(gamma):
    """Singlet-weighted Werner state gamma*|Psi->< Psi-| + (1-gamma)/4 * I.

    Valid for gamma in [-1/3, 1]; entangled exactly when gamma > 1/3.
    """
    if not -1.0 / 3.0 <= gamma <= 1.0:
        raise OutOfRangeError(f"gamma={gamma} outside [-1/3, 1]")
    return gamma * bell_state(BellLabel.PSI_MINUS) + (1.0 - gamma) / 4.0 * np.eye(4)


# ============================================================
# Validation and the PPT oracle
# ============================================================


def validate_density(rho):
    """Raise if ``rho`` is not a valid 4x4 density matrix."""
    a = np.asarray(rho, dtype=complex)
    if a.shape != (4, 4):
        raise DimMismatchError(f"expected shape (4, 4), got {a.shape}")
    asym = np.abs(a - a.conj().T).max()
    if asym > HERMITIAN_ATOL:
        raise NotHermitianError(f"asymmetry {asym:.3e}")
    tr = a.trace()
    if abs(tr - 1.0) > TRACE_ATOL:
        raise OutOfRangeError(f"trace {tr} is not 1")
    min_eig = np.linalg.eigvalsh(a)[0]
    if min_eig < DENSITY_EIG_FLOOR:
        raise OutOfRangeError(f"negative eigenvalue {min_eig:.3e}")


def is_valid_density(rho):
    try:
        validate_density(rho)
    except (DimMismatchError, NotHermitianError, OutOfRangeError):
        return False
    return True


def partial_transpose(rho):
    """Partial transpose over the second qubit."""
    a = np.asarray(rho, dtype=complex)
    if a.shape != (4, 4):
        raise DimMismatchError(f"expected shape (4, 4), got {a.shape}")
    return a.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def ppt_separable(rho):
    """Exact two-qubit separability test via the partial transpose."""
    return bool(np.linalg.eigvalsh(partial_transpose(rho))[0] >= PPT_EIG_FLOOR)


# ============================================================
# Random samplers
# ============================================================


def _haar_angles(rng):
    # cos(theta) uniform on [-1, 1] gives the rotation-invariant measure
    theta = np.arccos(rng.uniform(-1.0, 1.0))
    phi = rng.uniform(0.0, 2.0 * np.pi)
    return theta, phi


def random_separable(rng, max_terms=4):
    """Random separable state: a short mixture of product projectors.

    Draws 1..max_terms product projectors with Dirichlet(1, ..., 1)
    weights. Separable by construction.
    """
    if max_terms < 1:
        raise OutOfRangeError(f"max_terms={max_terms} must be >= 1")
    n_terms = int(rng.integers(1, max_terms + 1))
    weights = rng.dirichlet(np.ones(n_terms))
    rho = np.zeros((4, 4), dtype=complex)
    for w in weights:
        ta, pa = _haar_angles(rng)
        tb, pb = _haar_angles(rng)
        rho += w * product_state(ta, pa, tb, pb)
    return 0.5 * (rho + rho.conj().T)


def random_entangled(rng, group, gamma_min=0.4):
    """Random entangled state around one Bell projector.

    Mixes the group's Bell projector with white noise at weight
    gamma ~ Uniform(gamma_min, 1]. gamma_min must exceed 1/3 so the
    result is entangled; the PPT guard re-checks and retries anyway.
    """
    if not 1.0 / 3.0 < gamma_min < 1.0:
        raise OutOfRangeError(f"gamma_min={gamma_min} must lie in (1/3, 1)")
    proj = bell_state(group)
    for _ in range(100):
        gamma = 1.0 - rng.uniform(0.0, 1.0 - gamma_min)
        rho = gamma * proj + (1.0 - gamma) / 4.0 * np.eye(4)
        if not ppt_separable(rho):
            return rho
    raise RetryExhaustedError("no entangled draw in 100 attempts")


def generate_states(n_sep, n_ent, base_seed, gamma_min=0.4, max_terms=4):
    """Labeled dataset: n_sep separable then n_ent entangled samples.

    Entangled samples cycle through the four Bell groups in fixed order.
    Record i uses its own generator seeded with (base_seed + i, 0) so
    generation order never couples records.
    """
    if n_sep < 0 or n_ent < 0:
        raise OutOfRangeError("sample counts must be nonnegative")
    records = []
    for i in range(n_sep):
        seed = base_seed + i
        rng = np.random.default_rng((seed, 0))
        records.append(LabeledState(random_separable(rng, max_terms), SEPARABLE, None, seed))
    for j in range(n_ent):
        seed = base_seed + n_sep + j
        rng = np.random.default_rng((seed, 0))
        group = GROUP_ORDER[j % 4]
        rho = random_entangled(rng, group, gamma_min)
        records.append(LabeledState(rho, ENTANGLED, group, seed))
    return records


# ============================================================
# Serialization (JSON lines, one state per line)
# ============================================================


def save_states(path, records):
    rows = []
    for rec in records:
        a = np.asarray(rec.rho, dtype=complex).reshape(-1)
        rows.append(
            {
                "rho_re": [float(x) for x in a.real],
                "rho_im": [float(x) for x in a.imag],
                "label": int(rec.label),
                "group": rec.group.code if rec.group is not None else None,
                "seed": rec.seed,
            }
        )
    jsonio.write_jsonl(path, rows)


def load_states(path):
    records = []
    for row in jsonio.read_jsonl(path):
        rho = (np.array(row["rho_re"]) + 1j * np.array(row["rho_im"])).reshape(4, 4)
        group = BellLabel(row["group"]) if row["group"] is not None else None
        records.append(LabeledState(rho, int(row["label"]), group, row["seed"]))
    return records
