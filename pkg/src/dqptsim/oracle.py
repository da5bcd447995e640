"""Ground-truth engines.

Closed-form free-fermion results and dense exact diagonalization of the
Jordan-Wigner mapped Hamiltonian. Every circuit-based estimate in the package
is checked against these functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .model import (ModelParams, bogoliubov_angles, dispersion, interaction_hamiltonian_terms,
                    momenta)

__all__ = [
    "DENSE_LIMIT",
    "CorrelationMatrix",
    "SchmidtSpectrum",
    "creation_operators",
    "position_hamiltonian",
    "single_particle_hamiltonian",
    "prequench_state",
    "exact_evolve",
    "loschmidt_exact",
    "loschmidt_trotter",
    "loschmidt_analytic",
    "necf_analytic",
    "correlation_matrix",
    "correlation_matrix_t0",
    "free_entanglement_spectrum",
    "reduced_density_matrix",
    "schmidt_probabilities",
    "renyi2_bits",
    "rate_function",
]

#: Largest site count handled by dense evolution.
DENSE_LIMIT = 12

_SIGMA_PLUS = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))  # |0><1|: fills a mode
_MINUS_Z = sp.csr_matrix(np.diag([-1.0 + 0j, 1.0]))
_ID = sp.identity(2, dtype=complex, format="csr")


@dataclass(frozen=True)
class CorrelationMatrix:
    """Equal-time correlations ``entries[i, j] = <psi_i^dag psi_j>`` at time ``t``."""

    entries: np.ndarray
    t: float

    def restrict(self, sites) -> np.ndarray:
        sites = list(sites)
        return self.entries[np.ix_(sites, sites)]


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Descending eigenvalues of a reduced density matrix."""

    probabilities: np.ndarray

    @property
    def purity(self) -> float:
        return float(np.sum(self.probabilities ** 2))

    @property
    def renyi2(self) -> float:
        return -math.log2(self.purity)


@lru_cache(maxsize=8)
def creation_operators(N: int) -> tuple:
    """Sparse Jordan-Wigner creation operators ``psi_n^dag`` for ``n < N``."""
    out = []
    for n in range(N):
        op = sp.identity(1, dtype=complex, format="csr")
        for k in range(N):
            factor = _MINUS_Z if k < n else (_SIGMA_PLUS if k == n else _ID)
            op = sp.kron(op, factor, format="csr")
        out.append(op)
    return tuple(out)


def single_particle_hamiltonian(params: ModelParams, mass_sign: int = 1) -> np.ndarray:
    """``N x N`` hopping matrix of the free theory with periodic boundaries."""
    N = params.N
    mass = mass_sign * abs(params.mass)
    h = np.zeros((N, N), dtype=complex)
    for n in range(N):
        h[n, (n + 1) % N] += 1 / (2 * params.a)
        h[(n + 1) % N, n] += 1 / (2 * params.a)
        h[n, n] = mass * (-1) ** n
    return h


def position_hamiltonian(params: ModelParams, mass_sign: int = 1,
                         interacting: bool = True) -> sp.csr_matrix:
    """Many-body Hamiltonian ``H(mass_sign * |m|)`` in the site basis.

    The interaction includes its constant part, so the spectrum is exact.
    """
    N = params.N
    if N > DENSE_LIMIT:
        raise ValueError(f"N={N} exceeds the dense limit {DENSE_LIMIT}")
    cd = creation_operators(N)
    h1 = single_particle_hamiltonian(params, mass_sign)
    H = sp.csr_matrix((2 ** N, 2 ** N), dtype=complex)
    for i in range(N):
        for j in range(N):
            if h1[i, j] != 0:
                H = H + h1[i, j] * (cd[i] @ cd[j].conj().T)
    if interacting and params.e != 0:
        H = H + sp.diags(interaction_hamiltonian_terms(params).diagonal(N))
    return H.tocsr()


@lru_cache(maxsize=32)
def _eigensystem(params: ModelParams, mass_sign: int, interacting: bool):
    H = position_hamiltonian(params, mass_sign, interacting).toarray()
    w, v = np.linalg.eigh(H)
    return w, v


def prequench_state(params: ModelParams) -> np.ndarray:
    """Ground state of the free Hamiltonian at mass ``+|m|``.

    The circuits prepare the free ground state for every coupling, so the
    oracle does the same.
    """
    w, v = _eigensystem(params.with_coupling(0.0), 1, False)
    if w[1] - w[0] < 1e-9:
        raise ValueError("free ground state is degenerate")
    return v[:, 0].copy()


def exact_evolve(params: ModelParams, t: float) -> np.ndarray:
    """``exp(-i H(-|m|) t)`` applied to the prequench state, by eigendecomposition."""
    w, v = _eigensystem(params, -1, True)
    psi0 = prequench_state(params)
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0))


def loschmidt_exact(params: ModelParams, t: float) -> complex:
    """Overlap of the prequench state with its evolved copy (dense)."""
    return complex(np.vdot(prequench_state(params), exact_evolve(params, t)))


def loschmidt_trotter(params: ModelParams, t: float) -> complex:
    """Overlap after ``N_T`` dense first-order steps, free part first.

    Each step is ``exp(-i H_I dt) exp(-i H_0 dt)`` with ``H_0`` the free
    Hamiltonian at mass ``-|m|`` and ``H_I`` the diagonal interaction.
    """
    dt = t / params.N_T
    H0 = position_hamiltonian(params, -1, interacting=False).toarray()
    HI = (interaction_hamiltonian_terms(params).diagonal(params.N) if params.e
          else np.zeros(2 ** params.N))
    step = np.exp(-1j * dt * HI)[:, None] * expm(-1j * dt * H0)
    psi0 = prequench_state(params)
    psi = psi0
    for _ in range(params.N_T):
        psi = step @ psi
    return complex(np.vdot(psi0, psi))


def _require_free(params: ModelParams) -> None:
    if params.e != 0:
        raise ValueError("closed-form result only holds at e = 0; use exact_evolve")


def necf_analytic(params: ModelParams, q: int, t: float) -> complex:
    """Per-mode factor of the free Loschmidt echo.

    ``g_q(t) = cos(w t) + i (1 - 2 m^2 / w^2) sin(w t)``; the weight of the
    sine term is the population difference of the two paired states the
    quench produces in the mode.
    """
    _require_free(params)
    w = dispersion(params, q)
    contrast = 1.0 - 2.0 * params.mass ** 2 / w ** 2
    return complex(math.cos(w * t), contrast * math.sin(w * t))


def loschmidt_analytic(params: ModelParams, t: float) -> complex:
    """Free-theory Loschmidt echo as a product of per-mode factors."""
    _require_free(params)
    out = 1.0 + 0j
    for q in momenta(params.N):
        out *= necf_analytic(params, q, t)
    return out


def correlation_matrix(params: ModelParams, t: float) -> CorrelationMatrix:
    """Free-fermion correlations ``<psi_i^dag(t) psi_j(t)>`` after the quench."""
    _require_free(params)
    w, v = np.linalg.eigh(single_particle_hamiltonian(params, 1))
    occupied = v[:, w < 0]
    if occupied.shape[1] != params.N // 2:
        raise ValueError("free ground state is not at half filling")
    wm, vm = np.linalg.eigh(single_particle_hamiltonian(params, -1))
    prop = vm @ np.diag(np.exp(-1j * wm * t)) @ vm.conj().T
    orbitals = prop @ occupied
    G = orbitals.conj() @ orbitals.T
    return CorrelationMatrix(G, float(t))


def correlation_matrix_t0(params: ModelParams) -> np.ndarray:
    """Closed-form correlations at ``t = 0`` from the Bogoliubov angles.

    Sublattice-resolved sums over modes of ``sin^2``, ``cos^2`` and
    ``-sin cos`` of the mixing angle at mass ``+|m|``.
    """
    _require_free(params)
    N = params.N
    G = np.zeros((N, N), dtype=complex)
    for q in momenta(N):
        _, b = bogoliubov_angles(params, q, 1)
        s, c = math.sin(b), math.cos(b)
        alpha = 2 * math.pi * q / N
        for n1 in range(N):
            for n2 in range(N):
                phase = np.exp(1j * alpha * (n1 - n2))
                if n1 % 2 == 0 and n2 % 2 == 0:
                    amp = s * s
                elif n1 % 2 == 1 and n2 % 2 == 1:
                    amp = c * c
                else:
                    amp = -s * c
                G[n1, n2] += phase * amp
    return G / (N // 2)


def free_entanglement_spectrum(G_A: np.ndarray, clip: float = 1e-12):
    """Entanglement levels and Schmidt probabilities of a Gaussian state.

    Parameters
    ----------
    G_A : ndarray
        Correlation matrix restricted to the subsystem.
    clip : float
        Occupations within ``clip`` of 0 or 1 are treated as exact; their
        levels are infinite and left out of the returned level list.

    Returns
    -------
    levels : ndarray
        Single-particle entanglement energies ``-log(g / (1 - g))``.
    spectrum : SchmidtSpectrum
    """
    G_A = np.asarray(G_A)
    occ = np.clip(np.linalg.eigvalsh(0.5 * (G_A + G_A.conj().T)), 0.0, 1.0)
    occ = np.where(occ < clip, 0.0, np.where(occ > 1 - clip, 1.0, occ))
    finite = occ[(occ > 0) & (occ < 1)]
    levels = -np.log(finite / (1 - finite))
    probs = np.ones(1)
    for g in occ:
        probs = np.concatenate([probs * g, probs * (1 - g)])
    return levels, SchmidtSpectrum(np.sort(probs)[::-1])


def reduced_density_matrix(state: np.ndarray, keep, n_qubits: int) -> np.ndarray:
    """Partial trace of a pure state (vector) or density matrix onto ``keep``."""
    keep = list(keep)
    rest = [k for k in range(n_qubits) if k not in keep]
    state = np.asarray(state)
    if state.ndim == 1:
        psi = state.reshape((2,) * n_qubits).transpose(keep + rest)
        psi = psi.reshape(2 ** len(keep), -1)
        return psi @ psi.conj().T
    rho = state.reshape((2,) * (2 * n_qubits))
    perm = keep + rest
    rho = rho.transpose(perm + [n_qubits + k for k in perm])
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    return np.einsum("arbr->ab", rho.reshape(dk, dr, dk, dr))


def schmidt_probabilities(state: np.ndarray, keep, n_qubits: int) -> SchmidtSpectrum:
    rho = reduced_density_matrix(state, keep, n_qubits)
    p = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    return SchmidtSpectrum(np.sort(p)[::-1] / p.sum())


def renyi2_bits(purity: float) -> float:
    """Second Renyi entropy in bits from a purity."""
    if purity <= 0:
        raise ValueError("non-positive purity")
    return -math.log2(purity)


def rate_function(L: complex, N: int) -> float:
    """Finite-size rate function ``-(1/N) ln |L|``; ``inf`` at ``L = 0``."""
    mod = abs(L)
    if mod == 0:
        return math.inf
    return -math.log(mod) / N
