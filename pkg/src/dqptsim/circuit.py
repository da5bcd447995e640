"""Gate-level circuits.

A :class:`Circuit` is an immutable, ordered list of :class:`Gate` records.
Builders here emit every sub-circuit of the quench pipeline: Bogoliubov and
Fourier basis changes, the quench gate, free and interacting evolution,
Ramsey interferometry assemblies and random single-qubit layers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from .model import ModelParams, bogoliubov_angles, dispersion, interaction_hamiltonian_terms, momenta

__all__ = [
    "Gate",
    "Circuit",
    "ONE_QUBIT_KINDS",
    "gate_matrix",
    "inverse",
    "gate_counts",
    "build_bogoliubov",
    "build_bogoliubov_layer",
    "build_fswap",
    "build_fourier_block",
    "build_fourier",
    "build_basis_change",
    "build_quench",
    "build_quench_mode",
    "build_preparation",
    "build_free_evolution",
    "build_interaction_evolution",
    "build_trotter_evolution",
    "build_ramsey_loschmidt",
    "build_ramsey_necf",
    "necf_components",
    "build_cue_layer",
    "cue_angles",
    "sample_cue",
    "to_json",
    "from_json",
    "to_qasm",
]

ONE_QUBIT_KINDS = frozenset({"X", "Y", "Z", "H", "S", "SDG", "RX", "RY", "RZ", "PHASE"})
TWO_QUBIT_KINDS = frozenset({"CNOT", "CZ", "CY", "CH", "CRY", "CRZ", "RZZ"})
THREE_QUBIT_KINDS = frozenset({"CRZZ"})
ROTATIONS = frozenset({"RX", "RY", "RZ", "PHASE", "CRY", "CRZ", "RZZ", "CRZZ"})

# (one-qubit, two-qubit) cost of each kind once controlled gates are written
# with CNOTs. CH/CZ/CY are a CNOT dressed by a basis change on the target.
_RAW_COST = {
    **{k: (1, 0) for k in ONE_QUBIT_KINDS},
    "CNOT": (0, 1),
    "CZ": (2, 1),
    "CY": (2, 1),
    "CH": (2, 1),
    "CRY": (2, 2),
    "CRZ": (2, 2),
    "RZZ": (1, 2),
    "CRZZ": (2, 4),
}


@dataclass(frozen=True)
class Gate:
    """One gate.

    For controlled kinds the control comes first in ``qubits``; ``CRZZ`` is
    ``(control, i, j)``.
    """

    kind: str
    qubits: tuple
    angle: float | None = None

    def __post_init__(self):
        kind = self.kind
        arity = 1 if kind in ONE_QUBIT_KINDS else 2 if kind in TWO_QUBIT_KINDS else \
            3 if kind in THREE_QUBIT_KINDS else None
        if arity is None:
            raise ValueError(f"unknown gate kind {kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if len(qubits) != arity or len(set(qubits)) != arity:
            raise ValueError(f"{kind} needs {arity} distinct qubits, got {qubits}")
        if kind in ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{kind} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{kind} takes no angle")


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over ``width`` qubits.

    ``phase`` is a classical phase dropped from the gates: the intended
    operator is ``exp(1j * phase)`` times the gate product. When a Ramsey
    ancilla is present the phase applies to the controlled branch.
    """

    width: int
    gates: tuple = ()
    ancilla: int | None = None
    phase: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.width or min(g.qubits) < 0:
                raise ValueError(f"gate {g} outside width {self.width}")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise ValueError("width mismatch")
        anc = self.ancilla if self.ancilla is not None else other.ancilla
        return Circuit(self.width, self.gates + other.gates, anc, self.phase + other.phase,
                       {**self.meta, **other.meta})

    def __len__(self):
        return len(self.gates)

    def widen(self, width: int, offset: int = 0, ancilla: int | None = None) -> "Circuit":
        """Embed into a wider register, shifting qubit indices by ``offset``."""
        gates = [Gate(g.kind, tuple(q + offset for q in g.qubits), g.angle) for g in self.gates]
        anc = ancilla if ancilla is not None else (
            None if self.ancilla is None else self.ancilla + offset)
        return Circuit(width, gates, anc, self.phase, dict(self.meta))


class _Builder:
    def __init__(self, width: int, ancilla: int | None = None):
        self.width = width
        self.ancilla = ancilla
        self.gates: list[Gate] = []
        self.phase = 0.0
        self.meta: dict = {}

    def add(self, kind, *qubits, angle=None):
        self.gates.append(Gate(kind, qubits, angle))
        return self

    def extend(self, circuit: Circuit):
        self.gates.extend(circuit.gates)
        self.phase += circuit.phase
        return self

    def build(self) -> Circuit:
        return Circuit(self.width, self.gates, self.ancilla, self.phase, self.meta)


# ---------------------------------------------------------------- matrices

_I2 = np.eye(2, dtype=complex)
_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0 + 0j, -1.0]),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "S": np.diag([1.0 + 0j, 1j]),
    "SDG": np.diag([1.0 + 0j, -1j]),
}
_CONTROLLED_BASE = {"CNOT": "X", "CZ": "Z", "CY": "Y", "CH": "H", "CRY": "RY", "CRZ": "RZ"}


def single_qubit_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """2x2 matrix of a one-qubit kind; rotations are ``exp(-i angle P / 2)``."""
    if kind in _FIXED:
        return _FIXED[kind]
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    if kind == "PHASE":
        return np.diag([1.0 + 0j, np.exp(1j * angle)])
    raise ValueError(kind)


def target_matrix(gate: Gate) -> np.ndarray:
    """Matrix acting on the target of a (possibly controlled) single-target gate."""
    base = _CONTROLLED_BASE.get(gate.kind, gate.kind)
    return single_qubit_matrix(base, gate.angle)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense matrix on the gate's own qubits, first listed qubit most significant."""
    if gate.kind in ONE_QUBIT_KINDS:
        return single_qubit_matrix(gate.kind, gate.angle)
    if gate.kind in _CONTROLLED_BASE:
        u = target_matrix(gate)
        out = np.eye(4, dtype=complex)
        out[2:, 2:] = u
        return out
    zz = np.array([1, -1, -1, 1])
    diag = np.exp(-0.5j * gate.angle * zz)
    if gate.kind == "RZZ":
        return np.diag(diag)
    return np.diag(np.concatenate([np.ones(4), diag]))  # CRZZ


_SELF_INVERSE = {"X", "Y", "Z", "H", "CNOT", "CZ", "CY", "CH"}


def inverse(circuit: Circuit) -> Circuit:
    """Adjoint circuit; the classical phase flips sign."""
    gates = []
    for g in reversed(circuit.gates):
        if g.kind in _SELF_INVERSE:
            gates.append(g)
        elif g.kind == "S":
            gates.append(Gate("SDG", g.qubits))
        elif g.kind == "SDG":
            gates.append(Gate("S", g.qubits))
        else:
            gates.append(Gate(g.kind, g.qubits, -g.angle))
    return Circuit(circuit.width, gates, circuit.ancilla, -circuit.phase, dict(circuit.meta))


def gate_counts(circuit: Circuit, decomposed: bool = True) -> tuple[int, int]:
    """Number of one- and two-qubit gates.

    Parameters
    ----------
    decomposed : bool
        If true, controlled gates are costed after rewriting them with CNOTs
        and single-qubit rotations (CRZ and CRY cost two of each). Otherwise
        every gate counts once by its arity, three-qubit gates as two-qubit.
    """
    one = two = 0
    for g in circuit.gates:
        if decomposed:
            a, b = _RAW_COST[g.kind]
        else:
            a, b = (1, 0) if g.kind in ONE_QUBIT_KINDS else (0, 1)
        one += a
        two += b
    return one, two


# ---------------------------------------------------------------- builders

def _pair_builder(pair, width):
    q0, q1 = pair
    return _Builder(width if width is not None else max(pair) + 1), q0, q1


def build_bogoliubov(params: ModelParams, q: int, mass_sign: int = -1,
                     qubit_pair=(0, 1), width: int | None = None) -> Circuit:
    """Two-qubit Bogoliubov rotation of mode ``q``.

    On the pair basis (both occupied, first only, second only, empty) this is
    ``[[0, 1, 0, 0], [c, 0, 0, -e^{-ia} s], [e^{ia} s, 0, 0, c], [0, 0, 1, 0]]``
    up to a global phase, with ``c = cos(beta)``, ``s = sin(beta)``.
    """
    alpha, beta = bogoliubov_angles(params, q, mass_sign)
    b, q0, q1 = _pair_builder(qubit_pair, width)
    b.add("RZ", q1, angle=-alpha).add("X", q1)
    b.add("CNOT", q1, q0)
    b.add("CRY", q0, q1, angle=-2 * beta)
    b.add("CNOT", q1, q0)
    b.add("X", q1).add("RZ", q1, angle=alpha).add("X", q1)
    return b.build()


def mode_pairs(N: int) -> list[tuple[int, int]]:
    """Qubit pair carrying each momentum mode, in ascending ``q`` order."""
    return [(2 * i, 2 * i + 1) for i in range(N // 2)]


def build_bogoliubov_layer(params: ModelParams, mass_sign: int = -1) -> Circuit:
    b = _Builder(params.N)
    for q, pair in zip(momenta(params.N), mode_pairs(params.N)):
        b.extend(build_bogoliubov(params, q, mass_sign, pair, params.N))
    return b.build()


def build_fswap(pair=(0, 1), width: int | None = None) -> Circuit:
    """Fermionic swap: exchanges two adjacent modes, sign -1 if both occupied."""
    b, q0, q1 = _pair_builder(pair, width)
    h = math.pi / 2
    b.add("X", q0).add("X", q1)
    b.add("RX", q0, angle=h).add("RX", q1, angle=h)
    b.add("CNOT", q0, q1)
    b.add("RX", q0, angle=h).add("RZ", q1, angle=h)
    b.add("CNOT", q0, q1)
    b.add("RX", q0, angle=-h).add("RX", q1, angle=-h)
    b.add("RZ", q0, angle=h).add("RZ", q1, angle=h)
    b.add("X", q0).add("X", q1)
    return b.build()


def build_fourier_block(k: int, size: int, pair=(0, 1), width: int | None = None) -> Circuit:
    """Two-mode Fourier butterfly with twiddle ``exp(-2 pi i k / size)``."""
    b, q0, q1 = _pair_builder(pair, width)
    b.add("X", q0).add("X", q1)
    b.add("PHASE", q1, angle=-2 * math.pi * k / size)
    b.add("CNOT", q1, q0)
    b.add("CH", q0, q1)
    b.add("CNOT", q1, q0)
    b.add("CZ", q1, q0)
    b.add("X", q0).add("X", q1)
    return b.build()


def _bit_reverse(i: int, bits: int) -> int:
    return int(format(i, f"0{bits}b")[::-1], 2) if bits else 0


def _sublattice_fourier(qubits: Sequence[int], width: int) -> Circuit:
    """Fermionic FFT on ``len(qubits)`` modes (a power of two), recursively.

    The outermost level splits into two halves with a fermionic-swap
    network, transforms each half and merges with butterflies.
    """
    n = len(qubits)
    b = _Builder(width)
    if n == 1:
        return b.build()
    if n == 2:
        return b.extend(build_fourier_block(0, 2, qubits, width)).build()
    half = n // 2
    # interleave the two halves so butterflies act on neighbours
    sw = _interleave_network(qubits, width)
    b.extend(inverse_network(sw, width))
    b.extend(_sublattice_fourier(qubits[:half], width))
    b.extend(_sublattice_fourier(qubits[half:], width))
    b.extend(sw)
    # twiddles exp(+2 pi i j / n): the momentum label then matches the phase
    # convention of the Bogoliubov and quench gates
    for j in range(half):
        b.extend(build_fourier_block(-j, n, (qubits[2 * j], qubits[2 * j + 1]), width))
    b.extend(inverse_network(sw, width))
    return b.build()


def _interleave_network(qubits: Sequence[int], width: int) -> Circuit:
    """fSWAP ladder taking ``[x0..x_{h-1}, y0..y_{h-1}]`` to ``[x0, y0, x1, y1, ...]``."""
    n = len(qubits)
    half = n // 2
    b = _Builder(width)
    # layer l swaps the positions (half - l + 2k - 1, half - l + 2k)
    for layer in range(1, half):
        start = half - layer
        for k in range(layer):
            i = start + 2 * k
            b.extend(build_fswap((qubits[i], qubits[i + 1]), width))
    return b.build()


def inverse_network(network: Circuit, width: int) -> Circuit:
    """A network of fSWAPs run in reverse order (each fSWAP is its own inverse up to phase)."""
    blocks = [network.gates[i:i + 14] for i in range(0, len(network.gates), 14)]
    gates = [g for blk in reversed(blocks) for g in blk]
    return Circuit(width, gates)


def build_fourier(params: ModelParams, direction: str = "to_position") -> Circuit:
    """Staggered fermionic Fourier transform between momentum and site modes.

    The momentum register interleaves the two sublattice modes of each ``q``
    (``[e_q0, o_q0, e_q1, o_q1, ...]``); the site register is ordered by site.

    Parameters
    ----------
    direction : {"to_position", "to_momentum"}
    """
    N = params.N
    if N % 4 or N < 4 or (N // 2) & (N // 2 - 1):
        raise ValueError(f"unsupported N={N}: need N/2 a power of two")
    qubits = list(range(N))
    b = _Builder(N)
    sep = _interleave_network(qubits, N)
    b.extend(inverse_network(sep, N))  # momentum pairs -> even block, odd block
    half = N // 2
    b.extend(_half_fourier(qubits[:half], N))
    b.extend(_half_fourier(qubits[half:], N))
    for i in range(1, half, 2):
        b.add("Z", qubits[i])
        b.add("Z", qubits[half + i])
    b.extend(sep)
    circ = b.build()
    if direction == "to_position":
        return circ
    if direction == "to_momentum":
        return inverse(circ)
    raise ValueError(f"unknown direction {direction!r}")


def _half_fourier(qubits: Sequence[int], width: int) -> Circuit:
    return _sublattice_fourier(list(qubits), width)


def build_basis_change(params: ModelParams, direction: str = "to_position") -> Circuit:
    """Mode register of ``H(-|m|)`` to site register (Bogoliubov then Fourier), or back."""
    fwd = build_bogoliubov_layer(params, -1) + build_fourier(params, "to_position")
    if direction == "to_position":
        return fwd
    if direction == "to_momentum":
        return inverse(fwd)
    raise ValueError(f"unknown direction {direction!r}")


def build_preparation(params: ModelParams, width: int | None = None) -> Circuit:
    """Flip ``|0...0>`` to the mode vacuum ``|1...1>``."""
    b = _Builder(width or params.N)
    for i in range(params.N):
        b.add("X", i)
    return b.build()


def _quench_mode(b: _Builder, params: ModelParams, q: int, q0: int, q1: int) -> None:
    alpha, beta = bogoliubov_angles(params, q, 1)
    g1 = 2 * beta - math.pi / 2
    g2 = -alpha - math.pi / 2
    b.add("X", q0).add("RZ", q1, angle=g2)
    b.add("CNOT", q0, q1)
    b.add("RX", q0, angle=g1).add("H", q0)
    b.add("CNOT", q0, q1)
    b.add("S", q0).add("H", q0).add("RZ", q1, angle=-g1)
    b.add("CNOT", q0, q1)
    b.add("RX", q0, angle=-math.pi / 2).add("X", q0)
    b.add("RX", q1, angle=math.pi / 2).add("RZ", q1, angle=-g2)


def build_quench_mode(params: ModelParams, q: int) -> Circuit:
    """Quench gate of a single mode on a two-qubit register."""
    b = _Builder(2)
    _quench_mode(b, params, q, 0, 1)
    return b.build()


def build_quench(params: ModelParams, width: int | None = None) -> Circuit:
    """Quench gate: ``+|m|`` ground state expressed in the ``-|m|`` mode basis.

    Per mode ``Q_q`` acts on the pair basis as
    ``[[sin2b, 0, 0, e^{-ia} cos2b], [0, 1, 0, 0], [0, 0, 1, 0], [-e^{ia} cos2b, 0, 0, sin2b]]``
    up to a global phase.
    """
    b = _Builder(width or params.N)
    for q, (q0, q1) in zip(momenta(params.N), mode_pairs(params.N)):
        _quench_mode(b, params, q, q0, q1)
    return b.build()


def build_free_evolution(params: ModelParams, t: float, controlled: bool = False,
                         ancilla: int | None = None, width: int | None = None) -> Circuit:
    """``exp(-i H_0(-|m|) t)`` in the mode register.

    With ``n = (1 + Z)/2`` the free Hamiltonian of a mode pair is
    ``w (Z_a + Z_b) / 2`` exactly, so the evolution is ``RZ(w t)`` on both
    qubits with no leftover phase.
    """
    N = params.N
    if controlled and ancilla is None:
        ancilla = N
    width = width or (N + 1 if controlled else N)
    b = _Builder(width, ancilla if controlled else None)
    for q, pair in zip(momenta(N), mode_pairs(N)):
        angle = dispersion(params, q) * t
        for qb in pair:
            if controlled:
                b.add("CRZ", ancilla, qb, angle=angle)
            else:
                b.add("RZ", qb, angle=angle)
    return b.build()


def build_interaction_evolution(params: ModelParams, dt: float, controlled: bool = False,
                                ancilla: int | None = None, width: int | None = None) -> Circuit:
    """``exp(-i H_I dt)`` in the site register.

    The constant part of ``H_I`` is not emitted as gates; it is stored as the
    circuit's classical phase.
    """
    N = params.N
    if controlled and ancilla is None:
        ancilla = N
    width = width or (N + 1 if controlled else N)
    b = _Builder(width, ancilla if controlled else None)
    terms = interaction_hamiltonian_terms(params)
    for i, c in terms.z.items():
        if controlled:
            b.add("CRZ", ancilla, i, angle=2 * c * dt)
        else:
            b.add("RZ", i, angle=2 * c * dt)
    for (i, j), c in terms.zz.items():
        if controlled:
            b.add("CRZZ", ancilla, i, j, angle=2 * c * dt)
        else:
            b.add("RZZ", i, j, angle=2 * c * dt)
    b.phase = -terms.constant * dt
    return b.build()


def build_trotter_evolution(params: ModelParams, t: float, controlled: bool = False,
                            ancilla: int | None = None, width: int | None = None) -> Circuit:
    """``N_T`` steps of free evolution followed by the interaction in the site basis.

    Basis changes are never controlled. At ``e = 0`` the result is exactly
    :func:`build_free_evolution`.
    """
    N = params.N
    if params.e == 0:
        return build_free_evolution(params, t, controlled, ancilla, width)
    if controlled and ancilla is None:
        ancilla = N
    width = width or (N + 1 if controlled else N)
    dt = t / params.N_T
    V = build_basis_change(params, "to_position").widen(width)
    Vd = inverse(V)
    b = _Builder(width, ancilla if controlled else None)
    for _ in range(params.N_T):
        b.extend(build_free_evolution(params, dt, controlled, ancilla, width))
        b.extend(V)
        b.extend(build_interaction_evolution(params, dt, controlled, ancilla, width))
        b.extend(Vd)
    return b.build()


def _basis_rotation(b: _Builder, qubit: int, basis: str) -> None:
    if basis == "x":
        b.add("H", qubit)
    elif basis == "y":
        b.add("RX", qubit, angle=math.pi / 2)
    else:
        raise ValueError(f"basis must be 'x' or 'y', got {basis!r}")


def build_ramsey_loschmidt(params: ModelParams, t: float, basis: str = "x",
                           measure_sites: bool | None = None) -> Circuit:
    """Interferometric circuit whose ancilla reads out ``Re L`` (x) or ``Im L`` (y).

    The ancilla is the last qubit. For ``e > 0`` the system register is
    rotated to the site basis before measurement unless ``measure_sites`` is
    false, so that particle-number postselection can be applied.
    """
    N = params.N
    anc = N
    b = _Builder(N + 1, anc)
    b.extend(build_preparation(params, N + 1))
    b.add("H", anc)
    b.extend(build_quench(params, N + 1))
    b.extend(build_trotter_evolution(params, t, True, anc, N + 1))
    _basis_rotation(b, anc, basis)
    if measure_sites is None:
        measure_sites = params.e != 0
    if measure_sites:
        b.extend(build_basis_change(params, "to_position").widen(N + 1))
    b.meta = {"observable": "loschmidt", "basis": basis, "t": float(t),
              "register": "sites" if measure_sites else "modes"}
    return b.build()


# weights of the controlled-Pauli correlators <s_mu(t) s_nu(0)> that add up to
# a^dag(t) a(0) on the first qubit of a pair and b(t) b^dag(0) on the second
_NECF_WEIGHTS = {
    "a": {("x", "x"): 0.25, ("x", "y"): -0.25j, ("y", "x"): 0.25j, ("y", "y"): 0.25},
    "b": {("x", "x"): 0.25, ("x", "y"): 0.25j, ("y", "x"): -0.25j, ("y", "y"): 0.25},
}


def necf_components() -> list[tuple[str, str, str]]:
    """All (channel, later Pauli, earlier Pauli) combinations of one mode."""
    return [(ch, mu, nu) for ch in "ab" for mu in "xy" for nu in "xy"]


def build_ramsey_necf(params: ModelParams, q: int, t: float, component: tuple,
                      basis: str = "x") -> Circuit:
    """Three-qubit circuit for one Pauli correlator of mode ``q``.

    Qubits are ``(a_q, b_q, ancilla)``. The Jordan-Wigner string of ``b_q``
    commutes with the free evolution and cancels between the two insertions,
    so only the mode's own pair is needed. The evolution runs backward then
    forward, which makes the recombined correlator equal the mode's factor
    of the Loschmidt echo.

    ``meta["weight"]`` is the complex weight of ``<sigma_x> + i <sigma_y>``
    of this component in the recombination.
    """
    if params.e != 0:
        raise ValueError("per-mode correlator circuits require e = 0")
    channel, mu, nu = component
    target = {"a": 0, "b": 1}[channel]
    anc = 2
    w = dispersion(params, q)
    b = _Builder(3, anc)
    b.add("X", 0).add("X", 1)
    b.add("H", anc)
    _quench_mode(b, params, q, 0, 1)
    pauli = {"x": "CNOT", "y": "CY"}
    b.add(pauli[nu], anc, target)
    b.add("RZ", 0, angle=-w * t).add("RZ", 1, angle=-w * t)
    b.add(pauli[mu], anc, target)
    b.add("RZ", 0, angle=w * t).add("RZ", 1, angle=w * t)
    _basis_rotation(b, anc, basis)
    b.meta = {"observable": "necf", "q": int(q), "t": float(t), "component": list(component),
              "basis": basis, "weight": _NECF_WEIGHTS[channel][(mu, nu)]}
    return b.build()


def necf_weight(component: tuple) -> complex:
    channel, mu, nu = component
    return _NECF_WEIGHTS[channel][(mu, nu)]


# ---------------------------------------------------------------- random layers

def sample_cue(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary."""
    return unitary_group.rvs(2, random_state=rng)


def cue_angles(u: np.ndarray, atol: float = 1e-10) -> tuple[float, float, float]:
    """Angles with ``u = phase * RZ(g1) @ RY(g2) @ RZ(g3)``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, np.eye(2), atol=atol):
        raise ValueError("input is not a 2x2 unitary")
    v = u / np.sqrt(np.linalg.det(u))
    x, y = v[0, 0], v[0, 1]
    g2 = 2 * math.atan2(abs(y), abs(x))
    s = -2 * np.angle(x) if abs(x) > 1e-15 else 0.0
    d = -2 * np.angle(-y) if abs(y) > 1e-15 else 0.0
    return float((s + d) / 2), float(g2), float((s - d) / 2)


def build_cue_layer(unitaries: Sequence[np.ndarray], qubits: Iterable[int] | None = None,
                    width: int | None = None) -> Circuit:
    """One ``RZ RY RZ`` triple per qubit reproducing each unitary up to phase."""
    qubits = list(range(len(unitaries))) if qubits is None else list(qubits)
    b = _Builder(width or (max(qubits) + 1))
    angles = []
    for qb, u in zip(qubits, unitaries):
        g1, g2, g3 = cue_angles(u)
        angles.append((g1, g2, g3))
        b.add("RZ", qb, angle=g3).add("RY", qb, angle=g2).add("RZ", qb, angle=g1)
    b.meta = {"angles": angles}
    return b.build()


# ---------------------------------------------------------------- export

def to_json(circuit: Circuit) -> str:
    doc = {
        "width": circuit.width,
        "ancilla": circuit.ancilla,
        "phase": circuit.phase,
        "gates": [{"kind": g.kind, "qubits": list(g.qubits),
                   **({"angle": g.angle} if g.angle is not None else {})}
                  for g in circuit.gates],
        "meta": {k: (v if not isinstance(v, complex) else [v.real, v.imag])
                 for k, v in circuit.meta.items()},
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> Circuit:
    doc = json.loads(text)
    gates = [Gate(g["kind"], tuple(g["qubits"]), g.get("angle")) for g in doc["gates"]]
    return Circuit(doc["width"], gates, doc.get("ancilla"), doc.get("phase", 0.0),
                   doc.get("meta", {}))


_QASM_NAMES = {"X": "x", "Y": "y", "Z": "z", "H": "h", "S": "s", "SDG": "sdg",
               "RX": "rx", "RY": "ry", "RZ": "rz", "PHASE": "u1", "CNOT": "cx",
               "CZ": "cz", "CY": "cy", "CH": "ch", "CRY": "cry", "CRZ": "crz", "RZZ": "rzz"}


def to_qasm(circuit: Circuit) -> str:
    """OpenQASM 2.0 text. ``CRZZ`` is written as ``cx; crz; cx``."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.width}];",
             f"creg c[{circuit.width}];"]
    if circuit.phase:
        lines.append(f"// classical phase {circuit.phase!r}")
    for g in circuit.gates:
        if g.kind == "CRZZ":
            c, i, j = g.qubits
            lines += [f"cx q[{i}],q[{j}];", f"crz({g.angle!r}) q[{c}],q[{j}];",
                      f"cx q[{i}],q[{j}];"]
            continue
        args = ",".join(f"q[{q}]" for q in g.qubits)
        name = _QASM_NAMES[g.kind]
        lines.append(f"{name}({g.angle!r}) {args};" if g.angle is not None else f"{name} {args};")
    lines.append(f"measure q -> c;")
    return "\n".join(lines) + "\n"
