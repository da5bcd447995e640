"""Lattice Schwinger model in purely fermionic form.

Physical parameters, momentum-space quantities (dispersion, Bogoliubov
angles, single-mode Hamiltonians) and the long-range density-density
interaction that replaces the gauge field.

Conventions shared by the whole package
---------------------------------------
* Qubit ``k`` is the ``k``-th most significant bit of a basis index.
* An occupied fermion mode is the qubit state ``|0>``, so the occupation
  operator is ``n = (1 + Z) / 2`` and the Fock vacuum is ``|1...1>``.
* The Jordan-Wigner string of site ``n`` runs over sites ``0 .. n-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "MomentumMode",
    "InteractionTerms",
    "dispersion",
    "bogoliubov_angles",
    "bogoliubov_matrix",
    "mode_hamiltonian",
    "momenta",
    "modes",
    "interaction_coefficient",
    "interaction_hamiltonian_terms",
    "staggered_charge_offsets",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the lattice model.

    Parameters
    ----------
    N : int
        Number of lattice sites, a positive multiple of 4.
    m : float
        Fermion mass.
    e : float
        Electric coupling. ``e = 0`` is the free theory.
    a : float
        Lattice spacing.
    theta : float
        Topological angle; enters only through the effective mass
        ``m cos(theta)``.
    N_T : int
        Number of Trotter steps used when ``e > 0``.
    """

    N: int
    m: float
    e: float = 0.0
    a: float = 1.0
    theta: float = 0.0
    N_T: int = 1

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("invalid ModelParams: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not isinstance(self.N, (int, np.integer)) or self.N < 4 or self.N % 4:
            out.append(f"N must be a multiple of 4 and >= 4 (got {self.N})")
        if not self.a > 0:
            out.append(f"lattice spacing must be positive (got {self.a})")
        if not isinstance(self.N_T, (int, np.integer)) or self.N_T < 1:
            out.append(f"N_T must be an integer >= 1 (got {self.N_T})")
        for name in ("m", "e", "a", "theta"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        return out

    @property
    def mass(self) -> float:
        """Effective mass ``m cos(theta)``."""
        return self.m * math.cos(self.theta)

    @property
    def n_modes(self) -> int:
        """Number of momentum modes, each carried by a pair of qubits."""
        return self.N // 2

    def with_mass(self, m: float) -> "ModelParams":
        return ModelParams(self.N, m, self.e, self.a, self.theta, self.N_T)

    def with_coupling(self, e: float) -> "ModelParams":
        return ModelParams(self.N, self.m, e, self.a, self.theta, self.N_T)

    def to_dict(self) -> dict:
        return {"N": int(self.N), "m": self.m, "e": self.e, "a": self.a,
                "theta": self.theta, "N_T": int(self.N_T)}


@dataclass(frozen=True)
class MomentumMode:
    """Momentum-space data of a single mode ``q``."""

    q: int
    alpha: float
    omega: float
    beta_plus: float
    beta_minus: float


def momenta(N: int) -> list[int]:
    """Wavenumbers ``q`` in ``[-N/4, N/4 - 1]``, ascending."""
    return list(range(-N // 4, N // 4))


def _check_q(params: ModelParams, q: int) -> None:
    if not -params.N // 4 <= q <= params.N // 4 - 1:
        raise ValueError(f"wavenumber q={q} outside [-N/4, N/4-1] for N={params.N}")


def dispersion(params: ModelParams, q: int) -> float:
    """Single-particle energy of mode ``q``.

    Returns ``sqrt((m cos(theta))**2 + cos(2 pi q / N)**2 / a**2)``.
    """
    _check_q(params, q)
    p = math.cos(2 * math.pi * q / params.N) / params.a
    return math.sqrt(params.mass ** 2 + p * p)


def bogoliubov_angles(params: ModelParams, q: int, mass_sign: int = 1) -> tuple[float, float]:
    """Phase angle ``alpha`` and mixing angle ``beta`` of mode ``q``.

    Parameters
    ----------
    mass_sign : {+1, -1}
        Selects the eigenbasis of ``H(+|m|)`` or ``H(-|m|)``; the mass used is
        ``mass_sign * |m cos(theta)|``.
    """
    if mass_sign not in (1, -1):
        raise ValueError("mass_sign must be +1 or -1")
    omega = dispersion(params, q)
    if omega == 0.0:
        raise ValueError("degenerate mode: zero mass at a zero of the dispersion")
    mass = mass_sign * abs(params.mass)
    alpha = 2 * math.pi * q / params.N
    beta = math.atan2(math.sqrt(max(omega - mass, 0.0)), math.sqrt(max(omega + mass, 0.0)))
    return alpha, beta


def mode_hamiltonian(params: ModelParams, q: int, mass_sign: int = 1) -> np.ndarray:
    """2x2 Bloch Hamiltonian of mode ``q`` on its (even, odd) sublattice pair."""
    _check_q(params, q)
    mass = mass_sign * abs(params.mass)
    alpha = 2 * math.pi * q / params.N
    p = np.exp(1j * alpha) * math.cos(alpha) / params.a
    return np.array([[mass, p], [np.conj(p), -mass]])


def bogoliubov_matrix(params: ModelParams, q: int, mass_sign: int = 1) -> np.ndarray:
    """Unitary whose columns are the positive and negative energy spinors.

    ``U.conj().T @ mode_hamiltonian(...) @ U == diag(omega, -omega)``.
    """
    alpha, beta = bogoliubov_angles(params, q, mass_sign)
    c, s = math.cos(beta), math.sin(beta)
    return np.array([[c, -np.exp(1j * alpha) * s],
                     [np.exp(-1j * alpha) * s, c]])


def modes(params: ModelParams) -> list[MomentumMode]:
    out = []
    for q in momenta(params.N):
        alpha, bp = bogoliubov_angles(params, q, 1)
        _, bm = bogoliubov_angles(params, q, -1)
        out.append(MomentumMode(q, alpha, dispersion(params, q), bp, bm))
    return out


def interaction_coefficient(N: int, d: int) -> float:
    """Distance kernel of the density-density interaction.

    Parameters
    ----------
    N : int
        Site count.
    d : int
        Periodic distance ``min(|n - m|, N - |n - m|)``, ``0 <= d <= N/2``.
    """
    if not 0 <= d <= N // 2:
        raise ValueError(f"distance d={d} outside [0, N/2]")
    pref = (3 - N) / (4 * (N - 2))
    if d == N // 2:
        return pref * (N * N - 8) / (4 * (N - 3))
    if d <= 1:
        return pref * d
    return pref * (d + (d * d - 3 * d + 2) / (3 - N))


def site_distance(N: int, n: int, m: int) -> int:
    d = abs(n - m)
    return min(d, N - d)


def staggered_charge_offsets(N: int) -> np.ndarray:
    """Constant parts of the staggered charge in Pauli form.

    With ``n = (1 + Z)/2`` the staggered charge is
    ``Q_n = Z_n / 2 + (-1)**n / 2``; this returns the ``(-1)**n / 2`` column.
    """
    return 0.5 * (-1.0) ** np.arange(N)


@dataclass(frozen=True)
class InteractionTerms:
    """Pauli-Z expansion of the interaction Hamiltonian.

    ``H_I = constant + sum_i z[i] Z_i + sum_(i<j) zz[(i, j)] Z_i Z_j``.
    """

    constant: float
    z: dict = field(default_factory=dict)
    zz: dict = field(default_factory=dict)

    @property
    def terms(self) -> list[tuple[float, tuple[int, ...]]]:
        return ([(c, (i,)) for i, c in self.z.items()]
                + [(c, pair) for pair, c in self.zz.items()])

    def diagonal(self, N: int) -> np.ndarray:
        """Dense diagonal of ``H_I`` over all ``2**N`` basis states."""
        bits = ((np.arange(2 ** N)[:, None] >> (N - 1 - np.arange(N))) & 1)
        zval = 1.0 - 2.0 * bits
        out = np.full(2 ** N, self.constant, dtype=float)
        for i, c in self.z.items():
            out += c * zval[:, i]
        for (i, j), c in self.zz.items():
            out += c * zval[:, i] * zval[:, j]
        return out


def interaction_hamiltonian_terms(params: ModelParams) -> InteractionTerms:
    """Expand ``a e^2 sum_(n,m) nu(d_nm) Q_n Q_m`` into Z and ZZ terms.

    Every structural term is listed when ``e != 0`` even if its coefficient
    vanishes for the given ``N``; this keeps the gate layout independent of
    accidental cancellations. ``e == 0`` gives an empty expansion.
    """
    N = params.N
    if params.e == 0:
        return InteractionTerms(0.0, {}, {})
    g = params.a * params.e ** 2
    nu = np.array([[interaction_coefficient(N, site_distance(N, n, k)) for k in range(N)]
                   for n in range(N)])
    off = staggered_charge_offsets(N)
    # Q_n = Z_n / 2 + off_n; the ordered double sum counts each pair twice
    constant = g * float(off @ nu @ off)
    z = {n: g * float(nu[n] @ off) for n in range(N)}
    zz = {(n, k): g * 0.5 * nu[n, k] for n in range(N) for k in range(n + 1, N)}
    return InteractionTerms(constant, z, zz)
