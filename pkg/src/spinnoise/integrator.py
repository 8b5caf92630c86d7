"""Time evolution of the noisy density matrix and related deterministic solves.

The drift -i[H, rho] + D(rho) is linear (affine, through the transit
feeding term) and constant within a run, so one step of length dt is
advanced with the exact propagator of the vectorized system,

    vec(rho') = E vec(rho) + c,      E = exp(A dt),

precomputed once per parameter set.  The transit-noise increment is then
added per step, exactly as in a first-order Euler-Maruyama scheme; the two
agree to O(dt^2) in the drift but the exponential form stays stable for
stiff optical rates (gamma_opt * dt >> 1), which the bench-like presets
require.  Within a step the optical coherences relax onto the adiabatic
response to the current ground state, which is the physically correct
behaviour at sampling intervals much longer than 1/gamma_opt.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    DIM,
    JX_EIGENVALUES,
    JX_EIGENVECTORS,
    SystemParams,
    build_hamiltonian,
    equilibrium_rho,
    hermitize,
    require_hermitian,
    _rhs_unchecked,
)
from .exceptions import ConfigError, DomainError, NumericError, SteadyStateError
from .noise import NoiseStats, noise_stats, sample_increment, sample_increment_block

logger = logging.getLogger(__name__)

VEC_DIM = DIM * DIM

# Row-major vec(rho) positions touched by the noise increment.
_DIAG_VEC_IDX = np.array([0, 5, 10])
_UPPER_VEC_IDX = np.array([1, 2, 6])   # (0,1) (0,2) (1,2)
_LOWER_VEC_IDX = np.array([4, 8, 9])   # conjugate partners

# Optical coherences rho[3,0] and rho[3,2] in vec(rho).
COHERENCE_VEC_IDX = np.array([12, 14])

_NOISE_CHUNK = 4096


@dataclass(frozen=True)
class TrajectoryConfig:
    """Stepping, burn-in, and recording layout of one trajectory."""

    dt: float
    n_steps: int
    burn_in_steps: int = 0
    record_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.burn_in_steps < 0:
            raise ConfigError(f"burn_in_steps must be >= 0, got {self.burn_in_steps}")
        if self.n_steps < self.burn_in_steps:
            raise ConfigError(
                f"n_steps ({self.n_steps}) must be >= burn_in_steps ({self.burn_in_steps})"
            )
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def n_recorded(self) -> int:
        span = self.n_steps - self.burn_in_steps
        return (span + self.record_stride - 1) // self.record_stride


def superoperator(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized drift: vec(rhs(rho)) = A vec(rho) + b, row-major vec.

    Built by probing the right-hand side with unit matrices, so it is the
    same map the rest of the package differentiates against.
    """
    h = build_hamiltonian(params)
    b = _rhs_unchecked(np.zeros((DIM, DIM), dtype=complex), h, params).reshape(VEC_DIM)
    a = np.empty((VEC_DIM, VEC_DIM), dtype=complex)
    probe = np.zeros((DIM, DIM), dtype=complex)
    for k in range(VEC_DIM):
        probe.reshape(VEC_DIM)[k] = 1.0
        a[:, k] = _rhs_unchecked(probe, h, params).reshape(VEC_DIM) - b
        probe.reshape(VEC_DIM)[k] = 0.0
    return a, b


class Propagator:
    """Exact one-step advance of the deterministic drift for fixed (params, dt).

    The affine step (E, c) comes from one 17x17 matrix exponential of the
    augmented system [[A, b], [0, 0]] * dt, which is well defined even when
    A is singular.
    """

    def __init__(self, params: SystemParams, dt: float):
        if dt <= 0:
            raise ConfigError(f"dt must be > 0, got {dt}")
        self.params = params
        self.dt = dt
        a, b = superoperator(params)
        aug = np.zeros((VEC_DIM + 1, VEC_DIM + 1), dtype=complex)
        aug[:VEC_DIM, :VEC_DIM] = a * dt
        aug[:VEC_DIM, VEC_DIM] = b * dt
        exp_aug = scipy.linalg.expm(aug)
        self.matrix = np.ascontiguousarray(exp_aug[:VEC_DIM, :VEC_DIM])
        self.offset = np.ascontiguousarray(exp_aug[:VEC_DIM, VEC_DIM])
        self._matrix_t = np.ascontiguousarray(self.matrix.T)

    def step_vec(self, v: np.ndarray) -> np.ndarray:
        """Advance vec states one step; v has shape (16,) or (batch, 16)."""
        return v @ self._matrix_t + self.offset


@functools.lru_cache(maxsize=32)
def _cached_propagator(params: SystemParams, dt: float) -> Propagator:
    return Propagator(params, dt)


def _hermitize_vec(v: np.ndarray) -> np.ndarray:
    m = v.reshape(v.shape[:-1] + (DIM, DIM))
    return hermitize(m).reshape(v.shape)


def step(
    rho: np.ndarray,
    params: SystemParams,
    dt: float,
    rng: np.random.Generator,
    with_noise: bool = True,
) -> np.ndarray:
    """Advance rho by one step of drift plus one transit-noise increment.

    The result is re-symmetrized, (rho' + rho'^dagger)/2.  With
    ``with_noise=False`` the generator is not consumed.
    """
    rho = np.asarray(rho, dtype=complex)
    require_hermitian(rho)
    prop = _cached_propagator(params, dt)
    v = prop.step_vec(rho.reshape(VEC_DIM))
    out = v.reshape(DIM, DIM)
    if with_noise:
        stats = noise_stats(params.gamma_t, dt, params.n_atoms)
        out = out + sample_increment(stats, rng).entries
    out = hermitize(out)
    if not np.all(np.isfinite(out.view(float))):
        raise NumericError("non-finite density matrix after step")
    return out


def evolve(
    rho0: np.ndarray,
    params: SystemParams,
    cfg: TrajectoryConfig,
    rng: np.random.Generator,
    with_noise: bool = True,
) -> np.ndarray:
    """Run cfg.n_steps steps from rho0 and return the recorded states.

    States are recorded after each step once burn-in has elapsed, every
    ``record_stride`` steps; shape (n_recorded, 4, 4).  Deterministic for a
    given generator state.
    """
    rho = np.asarray(rho0, dtype=complex)
    require_hermitian(rho0)
    _warn_if_aliasing(params, cfg.dt)
    out = np.empty((cfg.n_recorded, DIM, DIM), dtype=complex)
    pos = 0
    for k in range(cfg.n_steps):
        rho = step(rho, params, cfg.dt, rng, with_noise=with_noise)
        rec = k - cfg.burn_in_steps
        if rec >= 0 and rec % cfg.record_stride == 0:
            out[pos] = rho
            pos += 1
    return out


def evolve_ensemble_coherences(
    params: SystemParams,
    cfg: TrajectoryConfig,
    seed_keys: list,
    rho0: np.ndarray | None = None,
    with_noise: bool = True,
) -> np.ndarray:
    """Batched trajectories, recording only the two optical coherences.

    Each entry of ``seed_keys`` seeds one trajectory's independent
    generator (any value np.random.default_rng accepts).  Noise is drawn
    per trajectory in fixed-size chunks, so a trajectory's stream depends
    only on its own seed, not on the batch composition.

    Returns (n_recorded, n_traj, 2) complex: columns are rho[3,0] and
    rho[3,2] after each recorded step.
    """
    n_traj = len(seed_keys)
    if n_traj == 0:
        raise DomainError("need at least one trajectory seed")
    _warn_if_aliasing(params, cfg.dt)
    if rho0 is None:
        rho0 = equilibrium_rho()
    require_hermitian(rho0)

    rngs = [np.random.default_rng(key) for key in seed_keys]
    stats = noise_stats(params.gamma_t, cfg.dt, params.n_atoms)
    noisy = with_noise and stats.sigma_sq > 0.0
    prop = _cached_propagator(params, cfg.dt)
    matrix_t = prop._matrix_t
    offset = prop.offset

    v = np.tile(np.asarray(rho0, dtype=complex).reshape(VEC_DIM), (n_traj, 1))
    w = np.empty_like(v)
    out = np.empty((cfg.n_recorded, n_traj, 2), dtype=complex)
    pos = 0
    done = 0
    while done < cfg.n_steps:
        chunk = min(_NOISE_CHUNK, cfg.n_steps - done)
        if noisy:
            diag, off = _draw_noise_chunk(stats, rngs, chunk)
            off_conj = np.conj(off)
        for k in range(chunk):
            np.matmul(v, matrix_t, out=w)
            w += offset
            if noisy:
                w[:, _DIAG_VEC_IDX] += diag[k]
                w[:, _LOWER_VEC_IDX] += off[k]
                w[:, _UPPER_VEC_IDX] += off_conj[k]
            step_index = done + k
            # Drift off the Hermitian manifold is ~1e-16/step; resymmetrize
            # periodically instead of every step.
            if step_index % 64 == 63:
                w = _hermitize_vec(w)
            rec = step_index - cfg.burn_in_steps
            if rec >= 0 and rec % cfg.record_stride == 0:
                out[pos] = w[:, COHERENCE_VEC_IDX]
                pos += 1
            v, w = w, v
        done += chunk
        if not np.all(np.isfinite(v.view(float))):
            raise NumericError(f"non-finite state in ensemble after {done} steps")
    return out


def _draw_noise_chunk(
    stats: NoiseStats, rngs: list, chunk: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pre-draw chunk noise for every trajectory: (chunk, n_traj, 3) blocks."""
    diags = []
    offs = []
    for rng in rngs:
        d, o = sample_increment_block(stats, rng, chunk)
        diags.append(d)
        offs.append(o)
    return np.stack(diags, axis=1), np.stack(offs, axis=1)


def _warn_if_aliasing(params: SystemParams, dt: float) -> None:
    nyquist = np.pi / dt  # rad/s
    if 2.0 * params.omega_L > 0.9 * nyquist:
        logger.warning(
            "2*omega_L = %.3g rad/s is above 90%% of the Nyquist band for dt=%.3g s; "
            "spin-noise peaks will alias",
            2.0 * params.omega_L,
            dt,
        )


def steady_state(params: SystemParams) -> np.ndarray:
    """Stationary density matrix of the deterministic drift, unit trace.

    Solves the vectorized linear system with a trace constraint, after
    rescaling time by the largest rate so the reported residual is
    dimensionless.  Raises SteadyStateError if the state is not unique
    (e.g. all relaxation rates zero) or the residual exceeds 1e-10.
    """
    if params.gamma0 == 0.0 and params.gamma_t == 0.0:
        raise SteadyStateError(
            "no unique steady state: gamma0 and gamma_t are both zero"
        )
    a, b = superoperator(params)
    scale = params.rate_scale()
    trace_row = np.zeros(VEC_DIM, dtype=complex)
    trace_row[[0, 5, 10, 15]] = 1.0
    m = np.vstack([a / scale, trace_row[None, :]])
    rhs = np.concatenate([-b / scale, [1.0]])
    solution, _, rank, _ = np.linalg.lstsq(m, rhs, rcond=None)
    if rank < VEC_DIM:
        raise SteadyStateError(
            f"steady state is not unique (rank {rank} < {VEC_DIM})"
        )
    rho = hermitize(solution.reshape(DIM, DIM))
    residual = steady_state_residual(rho, params)
    if residual > 1e-10:
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} exceeds 1e-10"
        )
    return rho


def steady_state_residual(rho: np.ndarray, params: SystemParams) -> float:
    """Dimensionless stationarity defect ||rhs(rho)|| / rate_scale."""
    rhs = _rhs_unchecked(np.asarray(rho, dtype=complex), build_hamiltonian(params), params)
    return float(np.linalg.norm(rhs)) / params.rate_scale()


def free_evolve_ground(
    state0: np.ndarray, omega_L: float, t_grid: np.ndarray
) -> np.ndarray:
    """Unitary Larmor evolution of the bare spin-1 ground manifold.

    ``state0`` is either a 3-component ket or a 3x3 density matrix over
    {|-1>_z, |0>_z, |+1>_z}.  Uses the exact Jx eigendecomposition
    (eigenvalues -omega_L, 0, +omega_L); no decay, no noise.  Returns
    density matrices of shape (len(t_grid), 3, 3).
    """
    if omega_L < 0:
        raise DomainError(f"omega_L must be >= 0, got {omega_L}")
    state0 = np.asarray(state0, dtype=complex)
    if state0.ndim == 1:
        norm = np.linalg.norm(state0)
        if norm == 0:
            raise DomainError("initial ket must be nonzero")
        psi = state0 / norm
        rho0 = np.outer(psi, np.conj(psi))
    elif state0.shape == (3, 3):
        require_hermitian(state0, what="ground state")
        if abs(np.trace(state0).real - 1.0) > 1e-9:
            raise DomainError("ground-state density matrix must have unit trace")
        if np.linalg.eigvalsh(state0).min() < -1e-9:
            raise DomainError("ground-state density matrix must be positive semidefinite")
        rho0 = state0
    else:
        raise DomainError(f"state0 must be shape (3,) or (3, 3), got {state0.shape}")

    t = np.asarray(t_grid, dtype=float)
    phases = np.exp(-1j * omega_L * np.outer(t, JX_EIGENVALUES))  # (nt, 3)
    v = JX_EIGENVECTORS
    rho_eig = np.conj(v.T) @ rho0 @ v
    evolved = phases[:, :, None] * rho_eig[None, :, :] * np.conj(phases)[:, None, :]
    return np.einsum("ij,tjk,lk->til", v, evolved, np.conj(v))
