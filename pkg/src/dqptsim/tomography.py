"""Randomized-measurement tomography and entanglement-Hamiltonian fits.

Outcome tables measured after layers of Haar-random single-qubit rotations
give purities, Renyi entropies, fidelities and state overlaps. A local
(Bisognano-Wichmann style) ansatz for the entanglement Hamiltonian is fitted
to the same tables.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import circuit as C
from .circuit import build_cue_layer, cue_angles, sample_cue, single_qubit_matrix
from .model import ModelParams
from .oracle import SchmidtSpectrum, creation_operators
from .simulator import (NoiseParams, apply, apply_channel, apply_unitary_layer_density,
                        probabilities)

__all__ = [
    "MeasurementRecord",
    "pipeline_state",
    "EHAnsatz",
    "FitResult",
    "EntropyEstimate",
    "angles_to_unitary",
    "random_angles",
    "measure_random",
    "marginal_table",
    "estimate_overlap",
    "purity",
    "renyi2",
    "total_renyi",
    "fidelity",
    "loschmidt_from_overlap",
    "bootstrap",
    "make_ansatz",
    "bw_density",
    "model_probabilities",
    "chi2",
    "fit_entanglement_hamiltonian",
    "fit_with_noise_channel",
    "bhattacharyya",
    "records_to_json",
    "records_from_json",
]


def angles_to_unitary(g1: float, g2: float, g3: float) -> np.ndarray:
    """``RZ(g1) @ RY(g2) @ RZ(g3)``."""
    return (single_qubit_matrix("RZ", g1) @ single_qubit_matrix("RY", g2)
            @ single_qubit_matrix("RZ", g3))


@dataclass
class MeasurementRecord:
    """Outcomes of one random-basis setting.

    ``table`` is indexed by the measured bitstring (qubit 0 most
    significant) and holds probabilities when ``n_shots`` is ``None``,
    otherwise counts.
    """

    unitary_id: int
    angles: np.ndarray
    table: np.ndarray
    n_shots: int | None = None

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float).reshape(-1, 3)
        self.table = np.asarray(self.table, dtype=float)
        total = self.table.sum()
        expected = 1.0 if self.n_shots is None else self.n_shots
        if abs(total - expected) > 1e-8 * max(1, expected):
            raise ValueError(f"outcome table sums to {total}, expected {expected}")

    @property
    def n_qubits(self) -> int:
        return len(self.angles)

    def unitaries(self) -> list[np.ndarray]:
        return [angles_to_unitary(*a) for a in self.angles]

    def frequencies(self) -> np.ndarray:
        return self.table / self.table.sum()


def pipeline_state(params: ModelParams, t: float) -> np.ndarray:
    """Quenched state at time ``t`` in the site basis, as the circuits prepare it.

    Free evolution is exact in the mode basis; with interactions the
    Trotterized evolution with ``params.N_T`` steps is used.
    """
    evo = (C.build_free_evolution(params, t) if params.e == 0
           else C.build_trotter_evolution(params, t))
    circ = (C.build_preparation(params) + C.build_quench(params) + evo
            + C.build_basis_change(params))
    return apply(circ, include_phase=True)


def random_angles(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    return np.array([cue_angles(sample_cue(rng)) for _ in range(n_qubits)])


def measure_random(state: np.ndarray, n_unitaries: int, rng: np.random.Generator,
                   n_shots: int | None = None, angles: Sequence[np.ndarray] | None = None,
                   shot_rng: np.random.Generator | None = None) -> list[MeasurementRecord]:
    """Outcome tables of a pure state or density matrix under random layers.

    Parameters
    ----------
    angles : sequence of arrays, optional
        Reuse given layers (e.g. to measure a second state in the same
        bases); otherwise ``n_unitaries`` fresh Haar layers are drawn.
    shot_rng : Generator, optional
        Stream for shot sampling; defaults to ``rng``.
    """
    state = np.asarray(state, dtype=complex)
    n = int(round(math.log2(state.shape[0])))
    shot_rng = shot_rng or rng
    if angles is None:
        angles = [random_angles(n, rng) for _ in range(n_unitaries)]
    records = []
    for uid, ang in enumerate(angles):
        us = [angles_to_unitary(*a) for a in ang]
        if state.ndim == 1:
            layer = build_cue_layer(us, range(n), n)
            p = probabilities(apply(layer, state))
        else:
            p = probabilities(apply_unitary_layer_density(state, us, range(n)))
        p = np.clip(p, 0, None)
        p /= p.sum()
        if n_shots is None:
            records.append(MeasurementRecord(uid, ang, p, None))
        else:
            records.append(MeasurementRecord(uid, ang, shot_rng.multinomial(n_shots, p), n_shots))
    return records


def marginal_table(table: np.ndarray, n: int, keep: Sequence[int]) -> np.ndarray:
    keep = list(keep)
    rest = tuple(k for k in range(n) if k not in keep)
    t = np.asarray(table).reshape((2,) * n).sum(axis=rest)
    order = np.argsort(np.argsort(keep))
    return np.transpose(t, order).reshape(-1)


_HAMMING_KERNEL = np.array([[1.0, -0.5], [-0.5, 1.0]])


def _apply_hamming_kernel(p: np.ndarray, k: int) -> np.ndarray:
    """``sum_s' (-2)^(-D(s, s')) p(s')`` for a table over ``k`` bits."""
    t = p.reshape((2,) * k)
    for ax in range(k):
        t = np.moveaxis(np.tensordot(_HAMMING_KERNEL, t, axes=([1], [ax])), 0, ax)
    return t.reshape(-1)


def _pair_overlap(r1: MeasurementRecord, r2: MeasurementRecord, subsystem, same: bool) -> float:
    n = r1.n_qubits
    k = len(subsystem)
    t1 = marginal_table(r1.table, n, subsystem)
    t2 = marginal_table(r2.table, n, subsystem)
    if same and r1.n_shots is not None:
        # unbiased: drop each shot's pairing with itself
        m = r1.n_shots
        kern = _apply_hamming_kernel(t1, k)
        val = (t1 @ kern - t1.sum()) / (m * (m - 1))
    else:
        f1 = t1 / t1.sum()
        f2 = t2 / t2.sum()
        val = f1 @ _apply_hamming_kernel(f2, k)
    return 2 ** k * float(val)


def estimate_overlap(records1: Sequence[MeasurementRecord], records2: Sequence[MeasurementRecord],
                     subsystem: Sequence[int] | None = None) -> float:
    """Randomized-measurement estimate of ``Tr(rho1 rho2)`` on a subsystem.

    Records are paired by ``unitary_id``; the layers must agree.
    """
    by_id = {r.unitary_id: r for r in records2}
    if set(by_id) != {r.unitary_id for r in records1}:
        raise ValueError("records are not paired by unitary id")
    same = records1 is records2
    n = records1[0].n_qubits
    subsystem = list(range(n)) if subsystem is None else list(subsystem)
    vals = []
    for r1 in records1:
        r2 = by_id[r1.unitary_id]
        if not np.allclose(r1.angles[subsystem], r2.angles[subsystem]):
            raise ValueError(f"layer {r1.unitary_id} differs between the two record sets")
        vals.append(_pair_overlap(r1, r2, subsystem, same))
    return float(np.mean(vals))


def purity(records: Sequence[MeasurementRecord], subsystem=None) -> float:
    return estimate_overlap(records, records, subsystem)


@dataclass(frozen=True)
class EntropyEstimate:
    """Renyi-2 entropy of ``A`` (bits), its complement estimate and their spread."""

    value: float
    purity: float
    value_complement: float | None = None
    defined: bool = True

    @property
    def mean(self) -> float:
        if self.value_complement is None:
            return self.value
        return 0.5 * (self.value + self.value_complement)

    @property
    def difference(self) -> float:
        if self.value_complement is None:
            return 0.0
        return abs(self.value - self.value_complement)


def _bits(p: float) -> float:
    return -math.log2(p) if p > 0 else math.nan


def renyi2(records: Sequence[MeasurementRecord], subsystem: Sequence[int],
           with_complement: bool = True) -> EntropyEstimate:
    """Second Renyi entropy in bits, optionally also from the complement."""
    n = records[0].n_qubits
    pa = purity(records, subsystem)
    comp = None
    rest = [k for k in range(n) if k not in subsystem]
    if with_complement and rest:
        comp = _bits(purity(records, rest))
    return EntropyEstimate(_bits(pa), pa, comp, pa > 0 and (comp is None or not math.isnan(comp)))


def total_renyi(records: Sequence[MeasurementRecord]) -> EntropyEstimate:
    return renyi2(records, list(range(records[0].n_qubits)), with_complement=False)


def fidelity(records: Sequence[MeasurementRecord], rho_exact: np.ndarray,
             subsystem=None) -> float:
    """Normalized overlap of the measured state with a classical reference.

    The reference is "measured" exactly in the same random layers, so all
    three traces share the unitary ensemble.
    """
    ref = measure_random(np.asarray(rho_exact), 0, None,
                         angles=[r.angles for r in records])
    for r, rr in zip(records, ref):
        rr.unitary_id = r.unitary_id
    cross = estimate_overlap(records, ref, subsystem)
    p1 = purity(records, subsystem)
    p2 = purity(ref, subsystem)
    if p1 <= 0 or p2 <= 0:
        return math.nan
    return cross / math.sqrt(p1 * p2)


def loschmidt_from_overlap(records_t0: Sequence[MeasurementRecord],
                           records_t: Sequence[MeasurementRecord]) -> float:
    """``|L(t)|^2`` as the overlap of the initial and evolved states,
    normalized by the geometric mean of their purities."""
    cross = estimate_overlap(records_t0, records_t)
    p0 = purity(records_t0)
    pt = purity(records_t)
    if p0 <= 0 or pt <= 0:
        return math.nan
    return cross / math.sqrt(p0 * pt)


def bootstrap(records: Sequence[MeasurementRecord], n_b: int,
              estimator: Callable[[list[MeasurementRecord]], float],
              rng: np.random.Generator) -> float:
    """Shot-resampling standard error of ``estimator``.

    Each copy redraws every record's counts from its observed frequencies;
    the spread uses the ``1/n_b`` normalization.
    """
    if n_b < 2:
        raise ValueError("n_b must be >= 2")
    if any(r.n_shots is None for r in records):
        raise ValueError("bootstrap needs count records")
    vals = []
    for _ in range(n_b):
        copy = [MeasurementRecord(r.unitary_id, r.angles,
                                  rng.multinomial(r.n_shots, r.frequencies()), r.n_shots)
                for r in records]
        vals.append(estimator(copy))
    return float(np.std(vals))


# ---------------------------------------------------------------- ansatz

@dataclass
class EHAnsatz:
    """Local entanglement-Hamiltonian ansatz on a contiguous block of sites.

    ``operators`` lists ``(label, matrix)`` pairs; ``parameters`` has one
    real weight per operator.
    """

    sites: tuple
    operators: list
    parameters: np.ndarray = None

    def __post_init__(self):
        if self.parameters is None:
            self.parameters = np.zeros(len(self.operators))
        self.parameters = np.asarray(self.parameters, dtype=float)
        if len(self.parameters) != len(self.operators):
            raise ValueError("one parameter per operator")

    @property
    def labels(self) -> list[str]:
        return [lab for lab, _ in self.operators]

    def with_parameters(self, params) -> "EHAnsatz":
        return EHAnsatz(self.sites, self.operators, np.asarray(params, dtype=float))

    def hamiltonian(self, params=None) -> np.ndarray:
        params = self.parameters if params is None else params
        return sum(c * op for c, (_, op) in zip(params, self.operators))


def make_ansatz(n_sites: int, sites: Sequence[int] | None = None) -> EHAnsatz:
    """Local densities and their commutators on ``n_sites`` sites.

    Occupations (staggering absorbed in the weights), nearest-neighbour
    hopping and current, and for four or more sites next-nearest hopping
    between the inner pairs. Two sites give 4 operators, four sites 12.
    """
    cd = creation_operators(n_sites)
    dense = [c.toarray() for c in cd]
    ann = [c.conj().T for c in dense]
    ops = []
    for n in range(n_sites):
        ops.append((f"mass{n}", dense[n] @ ann[n]))
    for n in range(n_sites - 1):
        hop = dense[n] @ ann[n + 1]
        ops.append((f"hop{n}{n + 1}", hop + hop.conj().T))
    for n in range(n_sites - 1):
        hop = dense[n] @ ann[n + 1]
        ops.append((f"current{n}{n + 1}", 1j * (hop - hop.conj().T)))
    if n_sites >= 4:
        for n in range(n_sites - 2):
            hop = dense[n] @ ann[n + 2]
            ops.append((f"nnhop{n}{n + 2}", hop + hop.conj().T))
    sites = tuple(range(n_sites)) if sites is None else tuple(sites)
    return EHAnsatz(sites, ops)


def bw_density(ansatz: EHAnsatz, params=None) -> np.ndarray:
    """``exp(-H_A) / Tr exp(-H_A)`` for the ansatz weights."""
    H = ansatz.hamiltonian(params)
    w, v = np.linalg.eigh(0.5 * (H + H.conj().T))
    e = np.exp(-(w - w.min()))
    rho = (v * (e / e.sum())) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def _layer_probabilities(rho: np.ndarray, unitaries) -> np.ndarray:
    return probabilities(apply_unitary_layer_density(rho, unitaries, range(len(unitaries))))


def model_probabilities(rho_A: np.ndarray, records: Sequence[MeasurementRecord],
                        subsystem: Sequence[int]) -> np.ndarray:
    """Born probabilities of ``rho_A`` in each record's layer restricted to ``A``."""
    return np.array([_layer_probabilities(rho_A, [angles_to_unitary(*r.angles[k]) for k in subsystem])
                     for r in records])


class _Data:
    """Marginal frequencies and cached per-layer rotations of a record set."""

    def __init__(self, records, subsystem):
        n = records[0].n_qubits
        self.k = len(subsystem)
        self.freqs = np.array([marginal_table(r.frequencies(), n, subsystem) for r in records])
        rots = []
        for r in records:
            u = np.eye(1, dtype=complex)
            for q in subsystem:
                u = np.kron(u, angles_to_unitary(*r.angles[q]))
            rots.append(u)
        self.rots = np.array(rots)
        self.rots_conj = self.rots.conj()

    def model(self, rho):
        # diag(U rho U^dag) for every layer at once
        return np.real(np.sum((self.rots @ rho) * self.rots_conj, axis=2))

    def chi2(self, rho):
        return float(np.mean(np.sum((self.freqs - self.model(rho)) ** 2, axis=1)))


def chi2(records, ansatz: EHAnsatz, subsystem, params=None) -> float:
    """Mean over layers of the squared residual between measured and modelled tables."""
    return _Data(records, subsystem).chi2(bw_density(ansatz, params))


@dataclass
class FitResult:
    parameters: np.ndarray
    chi2: float
    rho_A: np.ndarray
    schmidt: SchmidtSpectrum
    noise_p: float | None = None
    converged: bool = True
    at_bound: bool = False
    labels: list = field(default_factory=list)

    def to_dict(self, reference: np.ndarray | None = None) -> dict:
        out = {
            "labels": list(self.labels),
            "parameters": [float(x) for x in self.parameters],
            "chi2": self.chi2,
            "spectrum": [float(x) for x in self.schmidt.probabilities],
            "noise_p": self.noise_p,
            "converged": self.converged,
            "at_bound": self.at_bound,
        }
        if reference is not None:
            out["delta_B"] = bhattacharyya(self.schmidt.probabilities, reference)
        return out


def _spectrum(rho: np.ndarray) -> SchmidtSpectrum:
    p = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    return SchmidtSpectrum(np.sort(p)[::-1] / p.sum())


def _minimize(fun, starts, tol, maxiter, good_enough=None):
    best = None
    for x0 in starts:
        if best is not None and good_enough is not None and best.fun < good_enough:
            break
        res = minimize(fun, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": tol, "maxiter": maxiter,
                                "maxfev": 4 * maxiter, "adaptive": True})
        # restart from the optimum until the simplex stops improving
        for _ in range(5):
            again = minimize(fun, res.x, method="Nelder-Mead",
                             options={"xatol": 1e-10, "fatol": tol, "maxiter": maxiter,
                                      "maxfev": 4 * maxiter, "adaptive": True})
            improved = res.fun - again.fun
            res = again if again.fun < res.fun else res
            if improved < tol:
                break
        if best is None or res.fun < best.fun:
            best = res
    return best


def fit_entanglement_hamiltonian(records: Sequence[MeasurementRecord], ansatz: EHAnsatz,
                                 subsystem: Sequence[int] | None = None,
                                 n_starts: int = 8, warm_start=None,
                                 rng: np.random.Generator | None = None,
                                 tol: float = 1e-10, maxiter: int = 4000,
                                 scale: float = 2.0, good_enough: float = 1e-12) -> FitResult:
    """Least-squares fit of the ansatz weights to random-measurement tables.

    Nelder-Mead from ``n_starts`` random points (normal, width ``scale``)
    plus an optional warm start; the best optimum is kept. Remaining starts
    are skipped once chi2 drops below ``good_enough``.
    """
    subsystem = list(ansatz.sites if subsystem is None else subsystem)
    data = _Data(records, subsystem)
    rng = rng or np.random.default_rng(0)
    dim = len(ansatz.operators)
    starts = ([np.asarray(warm_start, dtype=float)] if warm_start is not None else [])
    starts += [np.zeros(dim)] + [scale * rng.standard_normal(dim) for _ in range(n_starts)]
    best = _minimize(lambda x: data.chi2(bw_density(ansatz, x)), starts, tol, maxiter, good_enough)
    rho = bw_density(ansatz, best.x)
    return FitResult(best.x, float(best.fun), rho, _spectrum(rho), None,
                     bool(best.success), False, ansatz.labels)


def fit_with_noise_channel(records: Sequence[MeasurementRecord], ansatz: EHAnsatz,
                           kind: str = "depol", subsystem: Sequence[int] | None = None,
                           n_starts: int = 8, warm_start=None,
                           rng: np.random.Generator | None = None,
                           tol: float = 1e-12, maxiter: int = 4000,
                           good_enough: float = 1e-14, seed_starts: int = 3) -> FitResult:
    """Fit the ansatz through a local channel whose weight is also free.

    The weight ``p`` lives in ``[0, 1/N_A]``; it is parametrized by a
    squared sine so the simplex search stays unconstrained. Remaining
    starts are skipped once chi2 drops below ``good_enough``. A noiseless
    fit with ``seed_starts`` random starts provides the first joint starts.
    """
    subsystem = list(ansatz.sites if subsystem is None else subsystem)
    data = _Data(records, subsystem)
    k = len(subsystem)
    pmax = 1.0 / k
    rng = rng or np.random.default_rng(0)
    dim = len(ansatz.operators)
    field_name = {"depol": "p1", "bitflip": "p2", "phase": "p3"}[kind]

    def weight(u):
        return pmax * math.sin(u) ** 2

    def rho_of(x):
        noise = NoiseParams(**{field_name: weight(x[-1])})
        return apply_channel(bw_density(ansatz, x[:-1]), noise, kind)

    starts = []
    if warm_start is not None:
        starts.append(np.asarray(warm_start, dtype=float))
    # a noiseless fit seeds the joint search; u0 = 0 first so clean data exits at once
    base = fit_entanglement_hamiltonian(records, ansatz, subsystem, seed_starts,
                                        None, rng, tol, maxiter)
    for u0 in (0.0, 0.05, 0.3, 0.8):
        starts.append(np.append(base.parameters, u0))
    starts += [np.append(2.0 * rng.standard_normal(dim), rng.uniform(0, 1.5))
               for _ in range(n_starts)]
    best = _minimize(lambda x: data.chi2(rho_of(x)), starts, tol, maxiter, good_enough)
    p = weight(best.x[-1])
    rho = rho_of(best.x)
    return FitResult(best.x[:-1], float(best.fun), rho, _spectrum(rho), p, bool(best.success),
                     p > pmax * (1 - 1e-3), ansatz.labels)


def bhattacharyya(p: Sequence[float], q: Sequence[float]) -> float:
    """``-ln sum sqrt(p q)`` after descending sort and zero padding."""
    p = np.sort(np.clip(np.asarray(p, dtype=float), 0, None))[::-1]
    q = np.sort(np.clip(np.asarray(q, dtype=float), 0, None))[::-1]
    n = max(len(p), len(q))
    p = np.pad(p, (0, n - len(p)))
    q = np.pad(q, (0, n - len(q)))
    bc = float(np.sum(np.sqrt(p * q)))
    if bc <= 0:
        return math.inf
    return max(0.0, -math.log(min(bc, 1.0)))


# ---------------------------------------------------------------- serialization

def records_to_json(records: Sequence[MeasurementRecord]) -> str:
    doc = []
    for r in records:
        n = r.n_qubits
        entries = {format(i, f"0{n}b"): (float(v) if r.n_shots is None else int(v))
                   for i, v in enumerate(r.table) if v}
        doc.append({"unitary_id": r.unitary_id, "angles": r.angles.tolist(),
                    "n_shots": r.n_shots,
                    ("probabilities" if r.n_shots is None else "counts"): entries})
    return json.dumps(doc, indent=1)


def records_from_json(text: str) -> list[MeasurementRecord]:
    out = []
    for d in json.loads(text):
        angles = np.asarray(d["angles"], dtype=float)
        n = len(angles)
        table = np.zeros(2 ** n)
        entries = d.get("counts") if d.get("n_shots") is not None else d.get("probabilities")
        for key, v in entries.items():
            table[int(key, 2)] = v
        out.append(MeasurementRecord(d["unitary_id"], angles, table, d.get("n_shots")))
    return out
