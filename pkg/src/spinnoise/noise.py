"""Transit-noise generator: per-step stochastic increments of the density matrix.

Atoms wander in and out of the probed volume at the transit rate, so the
populations and Zeeman coherences of the ground manifold fluctuate.  Each
integration step receives an additive Hermitian increment whose upper-level
row and column are zero: the excited state is too short-lived for its
occupation noise to matter.

Per step of length dt the diagonal (population) entries are independent
zero-mean Gaussians of variance

    sigma^2 = 2 * gamma_t * dt / (3 * n_atoms)

and the real and imaginary parts of each ground coherence entry are
independent zero-mean Gaussians of variance 3 sigma^2 / 4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

#: Index pairs (i < j) of the ground-coherence entries, in sampling order.
OFFDIAG_PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class NoiseStats:
    """Variance budget of one stochastic step."""

    sigma_sq: float
    offdiag_var: float
    step_dt: float


@dataclass(frozen=True)
class NoiseIncrement:
    """One sampled Hermitian increment (dimensionless, already times dt)."""

    entries: np.ndarray
    step_dt: float


def noise_stats(gamma_t: float, dt: float, n_atoms: float) -> NoiseStats:
    """Variances of the per-step increment for the given transit rate.

    gamma_t may be zero (noise switches off); dt and n_atoms must be
    positive.
    """
    if gamma_t < 0:
        raise DomainError(f"gamma_t must be >= 0, got {gamma_t}")
    if dt <= 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    if n_atoms <= 0:
        raise DomainError(f"n_atoms must be > 0, got {n_atoms}")
    sigma_sq = 2.0 * gamma_t * dt / (3.0 * n_atoms)
    return NoiseStats(sigma_sq=sigma_sq, offdiag_var=0.75 * sigma_sq, step_dt=dt)


def sample_increment_block(
    stats: NoiseStats, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n steps of noise at once.

    Returns ``(diag, offdiag)`` with shapes (n, 3) real and (n, 3) complex;
    offdiag columns follow OFFDIAG_PAIRS.  Each block consumes one (n, 9)
    standard-normal draw (columns: three populations, three real parts,
    three imaginary parts), so a given generator state yields a
    reproducible stream for a given blocking.
    """
    if stats.sigma_sq == 0.0:
        return np.zeros((n, 3)), np.zeros((n, 3), dtype=complex)
    draws = rng.standard_normal((n, 9))
    diag = draws[:, 0:3] * np.sqrt(stats.sigma_sq)
    offdiag = np.sqrt(stats.offdiag_var) * (draws[:, 3:6] + 1j * draws[:, 6:9])
    return diag, offdiag


def increment_matrix(diag: np.ndarray, offdiag: np.ndarray) -> np.ndarray:
    """Assemble the 4x4 Hermitian increment from sampled entries."""
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0], m[1, 1], m[2, 2] = diag
    for col, (i, j) in enumerate(OFFDIAG_PAIRS):
        m[i, j] = np.conj(offdiag[col])
        m[j, i] = offdiag[col]
    return m


def sample_increment(stats: NoiseStats, rng: np.random.Generator) -> NoiseIncrement:
    """Draw a single per-step increment matrix.

    Hermitian by construction, with the excited row and column identically
    zero; deterministic for a given generator state.
    """
    diag, offdiag = sample_increment_block(stats, rng, 1)
    return NoiseIncrement(entries=increment_matrix(diag[0], offdiag[0]), step_dt=stats.step_dt)
