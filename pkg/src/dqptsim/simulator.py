"""State-vector and density-matrix execution of circuits.

Pure states are updated in place gate by gate by the kernels in
:mod:`dqptsim._kernels`. Noise is a channel on the final density matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .circuit import Circuit, Gate, ONE_QUBIT_KINDS, target_matrix

__all__ = [
    "DENSITY_LIMIT",
    "NoiseParams",
    "zero_state",
    "apply",
    "circuit_unitary",
    "probabilities",
    "marginal",
    "sample_shots",
    "to_density",
    "apply_channel",
    "apply_noise",
    "density_probabilities",
    "apply_unitary_layer_density",
    "apply_with_trajectory_noise",
]

#: Widest register for density-matrix work.
DENSITY_LIMIT = 10

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])


@dataclass(frozen=True)
class NoiseParams:
    """Per-qubit weights of the depolarizing, bit-flip and phase channels."""

    p1: float = 0.0
    p2: float = 0.0
    p3: float = 0.0

    def check(self, n: int) -> None:
        for name in ("p1", "p2", "p3"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0 / n + 1e-15:
                raise ValueError(f"{name}={p} outside [0, 1/{n}]")

    @property
    def is_zero(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.p3 == 0


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    return psi


def _apply_gate(state: np.ndarray, n: int, g: Gate, backend) -> None:
    kind = g.kind
    if kind in ONE_QUBIT_KINDS:
        _kernels.apply_1q(state, n, g.qubits[0], (), target_matrix(g), backend)
    elif kind in ("RZZ", "CRZZ"):
        controls = g.qubits[:1] if kind == "CRZZ" else ()
        i, j = g.qubits[-2:]
        even = complex(np.exp(-0.5j * g.angle))
        _kernels.apply_zz_phase(state, n, i, j, controls, even, even.conjugate(), backend)
    else:
        _kernels.apply_1q(state, n, g.qubits[1], (g.qubits[0],), target_matrix(g), backend)


def apply(circuit: Circuit, state: np.ndarray | None = None, backend: str | None = None,
          include_phase: bool = False) -> np.ndarray:
    """Run ``circuit`` on ``state`` (default ``|0...0>``) and return a new vector.

    Parameters
    ----------
    include_phase : bool
        Multiply by ``exp(1j * circuit.phase)``. Only meaningful without an
        ancilla, where the phase is global.
    """
    n = circuit.width
    if state is None:
        state = zero_state(n)
    state = np.array(state, dtype=complex, copy=True)
    if state.shape != (2 ** n,):
        raise ValueError(f"state of length {state.shape} does not match width {n}")
    for g in circuit.gates:
        _apply_gate(state, n, g, backend)
    if include_phase and circuit.phase:
        state *= np.exp(1j * circuit.phase)
    return state


def circuit_unitary(circuit: Circuit, include_phase: bool = False) -> np.ndarray:
    """Dense matrix of a circuit by running it on every basis state."""
    dim = 2 ** circuit.width
    cols = [apply(circuit, np.eye(dim, dtype=complex)[:, k], include_phase=include_phase)
            for k in range(dim)]
    return np.stack(cols, axis=1)


def probabilities(state: np.ndarray) -> np.ndarray:
    """Born probabilities over all basis states (density matrices accepted)."""
    state = np.asarray(state)
    p = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diagonal(state)).copy()
    return np.clip(p, 0.0, None)


def marginal(p: np.ndarray, n: int, keep) -> np.ndarray:
    """Marginal distribution of the qubits in ``keep`` (in the given order)."""
    keep = list(keep)
    rest = tuple(k for k in range(n) if k not in keep)
    t = np.asarray(p).reshape((2,) * n).sum(axis=rest)
    # remaining axes are in ascending qubit order; reorder to ``keep``
    order = np.argsort(np.argsort(keep))
    return np.transpose(t, order).reshape(-1) if keep else t.reshape(-1)


def sample_shots(p_or_state: np.ndarray, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial count table over basis states.

    Shots are drawn by inverse-CDF lookup of ``n_shots`` uniforms, so the
    random stream consumed does not depend on the probabilities and
    last-bit differences between backends leave the counts unchanged.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    arr = np.asarray(p_or_state)
    p = probabilities(arr) if np.iscomplexobj(arr) or arr.ndim == 2 else arr.astype(float)
    p = np.clip(p, 0.0, None)
    cdf = np.cumsum(p / p.sum())
    # pin the top at the last possible outcome so zero-probability bins have zero width
    cdf[np.flatnonzero(p)[-1]:] = 1.0
    outcome = np.searchsorted(cdf, rng.random(n_shots), side="right")
    return np.bincount(outcome, minlength=len(p))


def to_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def _n_qubits(rho: np.ndarray) -> int:
    n = int(round(math.log2(rho.shape[0])))
    if rho.shape != (2 ** n, 2 ** n):
        raise ValueError("density matrix must be 2^n x 2^n")
    if n > DENSITY_LIMIT:
        raise ValueError(f"density matrices are limited to {DENSITY_LIMIT} qubits")
    return n


def _conjugate_local(rho: np.ndarray, n: int, qubit: int, u: np.ndarray) -> np.ndarray:
    t = rho.reshape((2,) * (2 * n))
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [qubit])), 0, qubit)
    t = np.moveaxis(np.tensordot(u.conj(), t, axes=([1], [n + qubit])), 0, n + qubit)
    return t.reshape(rho.shape)


def _replace_by_mixed(rho: np.ndarray, n: int, qubit: int) -> np.ndarray:
    """``Tr_q(rho) (x) I/2`` with the identity put back on ``qubit``."""
    t = rho.reshape((2,) * (2 * n))
    reduced = np.trace(t, axis1=qubit, axis2=n + qubit)
    out = np.zeros_like(t)
    for a in (0, 1):
        idx = [slice(None)] * (2 * n)
        idx[qubit] = idx[n + qubit] = a
        out[tuple(idx)] = 0.5 * reduced
    return out.reshape(rho.shape)


def apply_channel(rho: np.ndarray, noise: NoiseParams, kind: str, qubits=None) -> np.ndarray:
    """Local channel ``(1 - p n) rho + p sum_i E_i[rho]`` over the listed qubits.

    ``kind`` selects ``E_i``: ``"depol"`` replaces qubit ``i`` by the
    maximally mixed state (weight ``p1``), ``"bitflip"`` conjugates by
    ``X_i`` (``p2``), ``"phase"`` by ``Z_i`` (``p3``).
    """
    n = _n_qubits(rho)
    qubits = list(range(n)) if qubits is None else list(qubits)
    noise.check(len(qubits))
    p = {"depol": noise.p1, "bitflip": noise.p2, "phase": noise.p3}.get(kind)
    if p is None:
        raise ValueError(f"unknown channel {kind!r}")
    if p == 0:
        return rho.copy()
    out = (1 - p * len(qubits)) * rho
    for q in qubits:
        if kind == "depol":
            term = _replace_by_mixed(rho, n, q)
        elif kind == "bitflip":
            term = _conjugate_local(rho, n, q, _X)
        else:
            term = _conjugate_local(rho, n, q, _Z)
        out = out + p * term
    return out


def apply_noise(rho: np.ndarray, noise: NoiseParams, qubits=None) -> np.ndarray:
    """All three channels in sequence (depolarizing, bit flip, phase)."""
    for kind in ("depol", "bitflip", "phase"):
        rho = apply_channel(rho, noise, kind, qubits)
    return rho


def apply_unitary_layer_density(rho: np.ndarray, unitaries, qubits) -> np.ndarray:
    """``U rho U^dag`` for a product of single-qubit unitaries."""
    n = _n_qubits(rho)
    for q, u in zip(qubits, unitaries):
        rho = _conjugate_local(rho, n, q, np.asarray(u, dtype=complex))
    return rho


def density_probabilities(rho: np.ndarray) -> np.ndarray:
    return probabilities(rho)


def apply_with_trajectory_noise(circuit: Circuit, p: float, rng: np.random.Generator,
                                state: np.ndarray | None = None) -> np.ndarray:
    """One stochastic trajectory with a random Pauli after each gate.

    Each qubit a gate touches receives X, Y or Z with total probability
    ``p``. Averaging many trajectories approximates per-gate depolarization.
    """
    n = circuit.width
    state = zero_state(n) if state is None else np.array(state, dtype=complex)
    paulis = (_X, _Y, _Z)
    for g in circuit.gates:
        _apply_gate(state, n, g, None)
        for q in g.qubits:
            if rng.random() < p:
                _kernels.apply_1q(state, n, q, (), paulis[rng.integers(3)])
    return state
