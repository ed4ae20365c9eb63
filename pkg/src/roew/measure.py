"""Pauli expectation features and noisy measurement moments.

A two-qubit state maps to the 15 real expectations <sigma_i x sigma_j>
with i, j in {x, y, z, I}, the identity-identity slot excluded (it is
always 1 and is absorbed into the classifier bias). Repeated noisy
measurements of one state yield a mean vector and a sample covariance,
the inputs of the robust trainer.
"""

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import LengthMismatchError, NonRealExpectationError, OutOfRangeError
from .qlin import PAULI_BY_INDEX, kron, trace_prod
from .states import BellLabel
from .tolerances import IMAG_FEATURE_ATOL, MU_BOUND

# Feature ordering: (i, j) row-major over {1..4} x {1..4} minus (4, 4).
FEATURE_PAIRS = tuple(
    (i, j) for i in range(1, 5) for j in range(1, 5) if (i, j) != (4, 4)
)

OBSERVABLES = tuple(kron(PAULI_BY_INDEX[i], PAULI_BY_INDEX[j]) for i, j in FEATURE_PAIRS)

# Stacked observables so a batch of feature vectors is one einsum.
_OBS_STACK = np.stack(OBSERVABLES)


@dataclass(frozen=True)
class GaussianNoise:
    """Additive iid Gaussian noise on every feature component."""

    sigma: float = 0.05

    def __post_init__(self):
        if self.sigma < 0:
            raise OutOfRangeError(f"sigma={self.sigma} must be >= 0")


@dataclass(frozen=True)
class ShotNoise:
    """Finite-count readout: n_+ ~ Binomial(n, (1+x)/2), estimate (n_+ - n_-)/n."""

    n_shots: int = 1000

    def __post_init__(self):
        if self.n_shots < 1:
            raise OutOfRangeError(f"n_shots={self.n_shots} must be >= 1")


@dataclass
class MomentSample:
    """First and second moments of one state's noisy features.

    ``mu`` is the mean over repeats, ``sigma`` the unbiased sample
    covariance of a single measurement (eigenvalue-clamped to PSD).
    The dimension is free so trainers also accept synthetic data;
    pipeline samples are 15-dimensional.
    """

    mu: np.ndarray
    sigma: np.ndarray
    label: int
    group: BellLabel | None = None
    seed: int | None = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        d = self.mu.shape[0]
        if self.mu.ndim != 1 or self.sigma.shape != (d, d):
            raise LengthMismatchError(
                f"mu shape {self.mu.shape} vs sigma shape {self.sigma.shape}"
            )
        if self.label not in (-1, 1):
            raise OutOfRangeError(f"label={self.label} must be +1 or -1")


def exact_moment(features, label, group=None):
    """MomentSample with zero covariance, for noise-free data."""
    x = np.asarray(features, dtype=float)
    return MomentSample(x, np.zeros((x.shape[0], x.shape[0])), label, group)


# ============================================================
# Feature extraction
# ============================================================


def pauli_features(rho):
    """The 15 Pauli expectations of a state, in fixed order."""
    vals = [trace_prod(rho, obs) for obs in OBSERVABLES]
    worst = max(abs(v.imag) for v in vals)
    if worst > IMAG_FEATURE_ATOL:
        raise NonRealExpectationError(f"imaginary residual {worst:.3e}")
    return np.array([v.real for v in vals])


def pauli_features_many(rhos):
    """Feature matrix (n, 15) for a stack of states."""
    stack = np.asarray(rhos, dtype=complex)
    vals = np.einsum("sij,kji->sk", stack, _OBS_STACK)
    worst = np.abs(vals.imag).max(initial=0.0)
    if worst > IMAG_FEATURE_ATOL:
        raise NonRealExpectationError(f"imaginary residual {worst:.3e}")
    return vals.real


# ============================================================
# Noise models
# ============================================================


def _noisy_draws(x, noise, rng, repeats):
    """(repeats, d) matrix of independent noisy reads of exact features x."""
    if isinstance(noise, GaussianNoise):
        return x[None, :] + rng.normal(0.0, noise.sigma, size=(repeats, x.shape[0]))
    if isinstance(noise, ShotNoise):
        p = np.clip((1.0 + x) / 2.0, 0.0, 1.0)
        n = noise.n_shots
        plus = rng.binomial(n, p, size=(repeats, x.shape[0]))
        return (2.0 * plus - n) / float(n)
    raise TypeError(f"unknown noise model {type(noise).__name__}")


def noisy_features(rho, noise, rng):
    """One noisy read of the feature vector of ``rho``."""
    return _noisy_draws(pauli_features(rho), noise, rng, 1)[0]


def estimate_moments(rho, noise, repeats, rng, label, group=None):
    """Mean and clamped sample covariance over ``repeats`` noisy reads."""
    if repeats < 2:
        raise OutOfRangeError(f"repeats={repeats} must be >= 2")
    draws = _noisy_draws(pauli_features(rho), noise, rng, repeats)
    mu = draws.mean(axis=0)
    if np.abs(mu).max() > MU_BOUND:
        raise OutOfRangeError(
            f"|mu| = {np.abs(mu).max():.3g} exceeds {MU_BOUND}; "
            "noise level and repeat count are incompatible"
        )
    sigma = np.cov(draws, rowvar=False)
    sigma = _clamp_psd(np.atleast_2d(sigma))
    return MomentSample(mu, sigma, label, group)


def _clamp_psd(s):
    sym = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= 0.0:
        return sym
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


# ============================================================
# Dataset assembly
# ============================================================


def build_moments(records, noise, repeats, pooled=False):
    """MomentSamples for labeled states, one independent noise stream each.

    Record measurement randomness is seeded with (record.seed, 1), a
    stream distinct from the one that generated the state. With
    ``pooled`` the per-sample covariances are replaced by their
    class average, a coarser but lower-variance estimate.
    """
    samples = []
    for rec in records:
        rng = np.random.default_rng((rec.seed, 1))
        ms = estimate_moments(rec.rho, noise, repeats, rng, rec.label, rec.group)
        ms.seed = rec.seed
        samples.append(ms)
    if pooled:
        for lab in (-1, 1):
            members = [s for s in samples if s.label == lab]
            if not members:
                continue
            avg = _clamp_psd(np.mean([s.sigma for s in members], axis=0))
            for s in members:
                s.sigma = avg.copy()
    return samples


def save_moments(path, samples):
    rows = []
    for s in samples:
        rows.append(
            {
                "mu": [float(x) for x in s.mu],
                "sigma": [float(x) for x in s.sigma.reshape(-1)],
                "label": int(s.label),
                "group": s.group.code if s.group is not None else None,
                "seed": s.seed,
            }
        )
    jsonio.write_jsonl(path, rows)


def load_moments(path):
    samples = []
    for row in jsonio.read_jsonl(path):
        mu = np.array(row["mu"])
        d = mu.shape[0]
        sigma = np.array(row["sigma"]).reshape(d, d)
        group = BellLabel(row["group"]) if row["group"] is not None else None
        samples.append(MomentSample(mu, sigma, int(row["label"]), group, row["seed"]))
    return samples
