"""Level structure, Hamiltonian, and relaxation for the probed transition.

The system is the spin-1 ground manifold plus a single J=0 excited level,
represented by a 4x4 complex density matrix in the fixed basis

    index 0: |-1>_z    index 1: |0>_z    index 2: |+1>_z    index 3: |e>

with the quantization axis z along the light propagation direction and the
static magnetic field along x.  All frequencies and rates are angular
(rad/s) throughout the package; configuration files use Hz and convert on
load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolationError, DomainError

#: Zeeman shift of the m = +-1 ground sublevels, Hz per gauss.
ZEEMAN_HZ_PER_GAUSS = 2.8e6

#: Number of ground sublevels / index of the excited level.
N_GROUND = 3
EXCITED = 3
DIM = 4

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)

#: Spin-1 Jx in the z basis {|-1>, |0>, |+1>} (dimensionless).
SPIN1_JX = np.array(
    [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], dtype=complex
) / SQRT2

#: Eigenvectors of SPIN1_JX as columns, for eigenvalues (-1, 0, +1).
JX_EIGENVECTORS = np.array(
    [
        [0.5, -1.0 / SQRT2, 0.5],
        [-1.0 / SQRT2, 0.0, 1.0 / SQRT2],
        [0.5, 1.0 / SQRT2, 0.5],
    ],
    dtype=complex,
)
JX_EIGENVALUES = np.array([-1.0, 0.0, 1.0])


def larmor_from_field(b_gauss: float) -> float:
    """Angular Larmor frequency (rad/s) for a magnetic field in gauss."""
    if b_gauss < 0:
        raise DomainError(f"magnetic field must be >= 0 gauss, got {b_gauss}")
    return 2.0 * np.pi * ZEEMAN_HZ_PER_GAUSS * b_gauss


@dataclass(frozen=True)
class CircularCouplings:
    """Rabi couplings of the sigma+ and sigma- transitions (rad/s)."""

    omega_plus: complex
    omega_minus: complex


def decompose_polarization(rabi: float, theta: float) -> CircularCouplings:
    """Split a linear polarization into circular coupling amplitudes.

    The probe is linearly polarized at angle ``theta`` from the magnetic
    field axis x, in the plane transverse to the propagation axis z.  With
    circular unit vectors e+- = -+(x +- iy)/sqrt(2) and the sign of the
    m = +-1 transition amplitudes folded in (both circular branches of a
    J=1 -> J=0 line carry the same Clebsch-Gordan sign), the couplings of a
    unit polarization vector at angle theta are

        omega_plus  = -(rabi/sqrt(2)) * exp(-i theta)
        omega_minus = -(rabi/sqrt(2)) * exp(+i theta)

    so that |omega_plus|^2 + |omega_minus|^2 == rabi^2 for every theta.
    This pairing makes light at theta = 0 drive the m_x = 0 sublevel alone
    and light at the 54.7-degree magic angle drive all three equally, which
    fixes the one physical sign the convention must get right.
    """
    if rabi < 0:
        raise DomainError(f"rabi magnitude must be >= 0, got {rabi}")
    amp = rabi / SQRT2
    return CircularCouplings(
        omega_plus=-amp * np.exp(-1j * theta),
        omega_minus=-amp * np.exp(1j * theta),
    )


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of one simulation point.

    Attributes
    ----------
    omega_L : float
        Larmor angular frequency (rad/s).
    rabi : float
        Total probe Rabi magnitude Omega (rad/s).
    theta : float
        Probe polarization angle from the B-field axis (radians).
    delta : float
        Optical detuning from the transition (rad/s).
    gamma0 : float
        Excited-state population decay rate (rad/s).
    gamma_opt : float
        Optical coherence decay rate; stands in for the Doppler width (rad/s).
    gamma_t : float
        Transit rate of atoms through the beam (rad/s).
    gamma_R : float
        Ground-state (Raman/Zeeman) coherence decay rate (rad/s).
    n_atoms : float
        Mean number of atoms in the probed volume (dimensionless).
    kappa : float
        Coherence-to-radiated-field coupling scale (arbitrary units).
    """

    omega_L: float
    rabi: float
    theta: float
    delta: float
    gamma0: float
    gamma_opt: float
    gamma_t: float
    gamma_R: float
    n_atoms: float
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("omega_L", "rabi", "gamma0", "gamma_opt", "gamma_t", "gamma_R", "kappa"):
            value = getattr(self, name)
            if value < 0:
                raise DomainError(f"{name} must be >= 0, got {value}")
        if self.n_atoms <= 0:
            raise DomainError(f"n_atoms must be > 0, got {self.n_atoms}")

    @classmethod
    def from_lab_units(
        cls,
        b_gauss: float = 1.0,
        rabi_hz: float = 40e6,
        theta_deg: float = 0.0,
        delta_hz: float = 1.5e9,
        gamma0_hz: float = 1.6e6,
        gamma_opt_hz: float = 0.8e9,
        gamma_t_hz: float = 30e3,
        gamma_r_hz: float = 30e3,
        n_atoms: float = 3.4e9,
        kappa: float = 1.0,
    ) -> "SystemParams":
        """Build params from bench-style units (gauss, Hz, degrees)."""
        twopi = 2.0 * np.pi
        return cls(
            omega_L=larmor_from_field(b_gauss),
            rabi=twopi * rabi_hz,
            theta=np.deg2rad(theta_deg),
            delta=twopi * delta_hz,
            gamma0=twopi * gamma0_hz,
            gamma_opt=twopi * gamma_opt_hz,
            gamma_t=twopi * gamma_t_hz,
            gamma_R=twopi * gamma_r_hz,
            n_atoms=n_atoms,
            kappa=kappa,
        )

    def couplings(self) -> CircularCouplings:
        return decompose_polarization(self.rabi, self.theta)

    def rate_scale(self) -> float:
        """Largest angular frequency in the problem; used to nondimensionalize."""
        return max(
            self.omega_L, self.rabi, abs(self.delta), self.gamma0,
            self.gamma_opt, self.gamma_t, self.gamma_R, 1.0,
        )


def equilibrium_rho() -> np.ndarray:
    """Isotropic ground-state mixture: the no-light, transit-relaxed state."""
    return np.diag([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]).astype(complex)


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (m + m^dagger)/2; supports a leading batch axis."""
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def require_hermitian(rho: np.ndarray, tol: float = 1e-9, what: str = "rho") -> None:
    """Raise ContractViolationError unless rho is Hermitian within tol."""
    rho = np.asarray(rho)
    scale = max(1.0, float(np.max(np.abs(rho)))) if rho.size else 1.0
    dev = float(np.max(np.abs(rho - np.conj(rho.T))))
    if dev > tol * scale:
        raise ContractViolationError(
            f"{what} must be Hermitian: max asymmetry {dev:.3e} exceeds tolerance"
        )


def build_hamiltonian(params: SystemParams) -> np.ndarray:
    """Hamiltonian of the driven, magnetized four-level system (rad/s).

    The ground 3x3 block is omega_L * Jx.  The probe couples |-1> to |e>
    through omega_plus and |+1> to |e> through -omega_minus, each reduced
    by the 1/sqrt(3) transition amplitude of the J=1 -> J=0 line, and the
    excited level carries the detuning on the diagonal.
    """
    c = params.couplings()
    h = np.zeros((DIM, DIM), dtype=complex)
    wl = params.omega_L / SQRT2
    h[0, 1] = h[1, 0] = h[1, 2] = h[2, 1] = wl
    h[0, 3] = np.conj(c.omega_plus) / SQRT3
    h[3, 0] = c.omega_plus / SQRT3
    h[2, 3] = -np.conj(c.omega_minus) / SQRT3
    h[3, 2] = -c.omega_minus / SQRT3
    h[3, 3] = params.delta
    return h


def _dissipator_unchecked(rho: np.ndarray, params: SystemParams) -> np.ndarray:
    out = np.empty_like(rho, dtype=complex)
    g0, gt = params.gamma0, params.gamma_t
    ree = rho[3, 3]
    # Populations: closed decay branches equally into the three ground
    # sublevels; transit pulls the ground populations toward 1/3 each.
    for j in range(N_GROUND):
        out[j, j] = (g0 / 3.0) * ree - gt * (rho[j, j] - 1.0 / 3.0)
    out[3, 3] = -(g0 + gt) * ree
    # Optical coherences decay at the (Doppler-wide) optical rate.
    out[:3, 3] = -params.gamma_opt * rho[:3, 3]
    out[3, :3] = -params.gamma_opt * rho[3, :3]
    # Ground Zeeman coherences decay at the Raman rate.
    for i in range(N_GROUND):
        for j in range(N_GROUND):
            if i != j:
                out[i, j] = -params.gamma_R * rho[i, j]
    return out


def apply_dissipator(rho: np.ndarray, params: SystemParams) -> np.ndarray:
    """Relaxation superoperator D(rho), entrywise (rad/s).

    Satisfies Tr D(rho) = -gamma_t (Tr rho - 1): transit is the only
    channel that exchanges atoms with the reservoir.
    """
    rho = np.asarray(rho, dtype=complex)
    require_hermitian(rho)
    return _dissipator_unchecked(rho, params)


def _rhs_unchecked(rho: np.ndarray, h: np.ndarray, params: SystemParams) -> np.ndarray:
    comm = h @ rho - rho @ h
    return -1j * comm + _dissipator_unchecked(rho, params)


def liouville_rhs(rho: np.ndarray, params: SystemParams) -> np.ndarray:
    """Deterministic time derivative -i[H, rho] + D(rho).

    The stochastic term is added separately by the integrator, so this is
    the drift alone.  Output is Hermitian for Hermitian input.
    """
    rho = np.asarray(rho, dtype=complex)
    require_hermitian(rho)
    return _rhs_unchecked(rho, build_hamiltonian(params), params)
