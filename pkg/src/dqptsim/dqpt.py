"""Loschmidt echo, rate function, non-equal-time correlators and winding.

Estimators here turn ancilla measurement tables into complex overlaps, apply
symmetry postselection, recombine per-mode correlators and extract the
time-dependent topological index from their phase field.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import circuit as C
from . import oracle
from .model import ModelParams, momenta
from .simulator import (NoiseParams, apply, apply_noise, marginal, probabilities, sample_shots,
                        to_density)

__all__ = [
    "RamseyEstimate",
    "NecfGrid",
    "postselect_symmetry",
    "keep_mask",
    "ancilla_expectation",
    "estimate_loschmidt",
    "estimate_necf",
    "measure_circuit",
    "loschmidt_series",
    "necf_grid",
    "oracle_necf_grid",
    "topological_index",
    "index_series",
    "dqpt_time",
    "rate_series",
    "write_observable_csv",
    "write_index_table",
]


@dataclass(frozen=True)
class RamseyEstimate:
    """Complex overlap read out from an ancilla.

    ``n_total`` is ``None`` for exact-probability data, in which case the
    kept fraction is reported in ``kept_fraction`` and the sigmas are zero.
    """

    value: complex
    sigma_re: float
    sigma_im: float
    n_kept: int | None
    n_total: int | None
    kept_fraction: float = 1.0
    defined: bool = True

    @property
    def sigma(self) -> float:
        """Combined standard error of the complex value."""
        return math.hypot(self.sigma_re, self.sigma_im)


@dataclass(frozen=True)
class NecfGrid:
    """Correlators ``values[i, k] = g_{q_i}(t_k)``, ``q`` ascending."""

    qs: tuple
    t: np.ndarray
    values: np.ndarray
    params: ModelParams | None = None
    sigmas: np.ndarray | None = None

    def column(self, q: int) -> np.ndarray:
        return self.values[self.qs.index(q)]


# ---------------------------------------------------------------- postselection

def postselect_symmetry(bitstring, mode: str = "momentum-pairs") -> bool:
    """Whether a system bitstring respects the conserved occupation pattern.

    Parameters
    ----------
    bitstring : str
        System qubits only, qubit 0 first.
    mode : {"momentum-pairs", "half-filling", "off"}
        ``momentum-pairs`` keeps strings whose two-qubit mode blocks each
        hold an even number of fermions; ``half-filling`` keeps strings with
        exactly ``N/2`` fermions.
    """
    bits = [int(c) for c in str(bitstring)]
    if mode == "off":
        return True
    if mode == "momentum-pairs":
        if len(bits) % 2:
            raise ValueError("momentum-pairs postselection needs an even register")
        return all(bits[i] == bits[i + 1] for i in range(0, len(bits), 2))
    if mode == "half-filling":
        occupied = sum(1 for b in bits if b == 0)
        return 2 * occupied == len(bits)
    raise ValueError(f"unknown postselection mode {mode!r}")


def keep_mask(n: int, mode: str) -> np.ndarray:
    """Vectorized :func:`postselect_symmetry` over all ``2**n`` system strings."""
    idx = np.arange(2 ** n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))) & 1
    if mode == "off":
        return np.ones(2 ** n, dtype=bool)
    if mode == "momentum-pairs":
        return np.all(bits[:, 0::2] == bits[:, 1::2], axis=1)
    if mode == "half-filling":
        return 2 * (n - bits.sum(axis=1)) == n
    raise ValueError(f"unknown postselection mode {mode!r}")


def ancilla_expectation(table: np.ndarray, width: int, ancilla: int, postselect: str = "off"):
    """Expectation of ``Z`` on the ancilla from a probability or count table.

    Returns
    -------
    value, sigma, kept, total : float, float, float, float
        ``kept`` and ``total`` are shot counts (or probability masses).
    """
    table = np.asarray(table, dtype=float)
    system = [k for k in range(width) if k != ancilla]
    joint = marginal(table, width, [ancilla] + system).reshape(2, -1)
    mask = keep_mask(len(system), postselect)
    n0 = joint[0, mask].sum()
    n1 = joint[1, mask].sum()
    kept = n0 + n1
    total = table.sum()
    if kept <= 0:
        return math.nan, math.nan, 0.0, total
    p0, p1 = n0 / kept, n1 / kept
    return p0 - p1, 2 * math.sqrt(p0 * p1 / kept), kept, total


def estimate_loschmidt(table_x, table_y, width: int, ancilla: int, postselect: str = "off",
                       phase: float = 0.0, shots: bool = True) -> RamseyEstimate:
    """Combine x- and y-basis ancilla tables into ``L = <X> + i <Y>``.

    The circuit's classical phase is reapplied, and each component carries
    the binomial spread ``2 sqrt(p0 p1 / n_kept)``.
    """
    re, sre, kx, tx = ancilla_expectation(table_x, width, ancilla, postselect)
    im, sim, ky, ty = ancilla_expectation(table_y, width, ancilla, postselect)
    frac = float((kx + ky) / (tx + ty)) if tx + ty else 0.0
    if not (kx > 0 and ky > 0):
        return RamseyEstimate(complex(math.nan, math.nan), math.nan, math.nan,
                              int(kx + ky) if shots else None, int(tx + ty) if shots else None,
                              frac, False)
    rot = np.exp(1j * phase)
    value = complex(re, im) * rot
    # rotating by the phase mixes the two components' errors
    c, s = abs(rot.real), abs(rot.imag)
    sr = math.hypot(c * sre, s * sim)
    si = math.hypot(s * sre, c * sim)
    if not shots:
        return RamseyEstimate(value, 0.0, 0.0, None, None, frac)
    return RamseyEstimate(value, sr, si, int(round(kx + ky)), int(round(tx + ty)), frac)


def estimate_necf(components: dict) -> complex:
    """Recombine the eight Pauli correlators of one mode into ``g_q(t)``.

    Parameters
    ----------
    components : dict
        Maps ``(channel, mu, nu)`` to the complex correlator
        ``<sigma_x> + i <sigma_y>`` of the matching circuit.
    """
    missing = [c for c in C.necf_components() if c not in components]
    if missing:
        raise KeyError(f"missing correlator components {missing}")
    return complex(sum(C.necf_weight(c) * components[c] for c in C.necf_components()))


# ---------------------------------------------------------------- pipelines

def measure_circuit(circ: C.Circuit, n_shots: int | None = None,
                    rng: np.random.Generator | None = None,
                    noise: NoiseParams | None = None) -> np.ndarray:
    """Probability table (``n_shots=None``) or count table of a circuit.

    Noise is applied as a channel on the final state of the system qubits.
    """
    state = apply(circ)
    if noise is not None and not noise.is_zero:
        system = [k for k in range(circ.width) if k != circ.ancilla]
        table = probabilities(apply_noise(to_density(state), noise, system))
    else:
        table = probabilities(state)
    if n_shots is None:
        return table
    if rng is None:
        raise ValueError("shot mode needs a random generator")
    return sample_shots(table, n_shots, rng)


def _default_postselect(params: ModelParams) -> str:
    return "momentum-pairs" if params.e == 0 else "half-filling"


def _loschmidt_point(args):
    params, t, n_shots, seeds, noise, mode = args
    tables = []
    for j, basis in enumerate("xy"):
        circ = C.build_ramsey_loschmidt(params, float(t), basis)
        rng = np.random.default_rng(seeds[j]) if seeds is not None else None
        tables.append(measure_circuit(circ, n_shots, rng, noise))
    return estimate_loschmidt(tables[0], tables[1], circ.width, circ.ancilla, mode,
                              circ.phase, shots=n_shots is not None)


def _map(fn, tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(task) for task in tasks]


def loschmidt_series(params: ModelParams, t_grid: Sequence[float], n_shots: int | None = None,
                     seed: int | np.random.SeedSequence | None = None,
                     noise: NoiseParams | None = None,
                     postselect: str | bool = True, workers: int = 1) -> list[RamseyEstimate]:
    """Loschmidt echo on a time grid from the interferometric circuits.

    Each ``(t, basis)`` task draws from its own child of ``seed``, so the
    result does not depend on ``workers``.
    """
    mode = _default_postselect(params) if postselect is True else (
        "off" if postselect is False else postselect)
    seeds = _task_seeds(seed, 2 * len(t_grid)) if n_shots is not None else None
    tasks = [(params, float(t), n_shots, None if seeds is None else seeds[2 * k:2 * k + 2],
              noise, mode) for k, t in enumerate(t_grid)]
    return _map(_loschmidt_point, tasks, workers)


def _task_seeds(seed, n):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n)


def _necf_point(args):
    params, q, t, n_shots, seeds, noise = args
    parts = {}
    var = 0.0
    task = 0
    for comp in C.necf_components():
        z = []
        for basis in "xy":
            circ = C.build_ramsey_necf(params, q, float(t), comp, basis)
            rng = np.random.default_rng(seeds[task]) if seeds is not None else None
            task += 1
            table = measure_circuit(circ, n_shots, rng, noise)
            val, s, _, _ = ancilla_expectation(table, circ.width, circ.ancilla)
            z.append(val)
            var += abs(C.necf_weight(comp)) ** 2 * s ** 2
        parts[comp] = complex(z[0], z[1])
    return estimate_necf(parts), math.sqrt(var)


def necf_grid(params: ModelParams, t_grid: Sequence[float], n_shots: int | None = None,
              seed=None, noise: NoiseParams | None = None, workers: int = 1) -> NecfGrid:
    """Correlators of every mode on a time grid from the 16 circuits per point."""
    qs = tuple(momenta(params.N))
    seeds = _task_seeds(seed, len(qs) * len(t_grid) * 16) if n_shots is not None else None
    tasks = []
    for i, q in enumerate(qs):
        for k, t in enumerate(t_grid):
            first = 16 * (i * len(t_grid) + k)
            tasks.append((params, q, float(t), n_shots,
                          None if seeds is None else seeds[first:first + 16], noise))
    results = _map(_necf_point, tasks, workers)
    values = np.array([v for v, _ in results], dtype=complex).reshape(len(qs), len(t_grid))
    sig = np.array([s for _, s in results]).reshape(len(qs), len(t_grid))
    return NecfGrid(qs, np.asarray(t_grid, dtype=float), values, params, sig)


def oracle_necf_grid(params: ModelParams, t_stop: float, n_points: int = 201,
                     max_phase_step: float = math.pi / 2) -> NecfGrid:
    """Closed-form correlator grid, refined until neighbouring phases differ by
    less than ``max_phase_step``."""
    qs = tuple(momenta(params.N))
    t = np.linspace(0.0, t_stop, n_points)
    for _ in range(20):
        vals = np.array([[oracle.necf_analytic(params, q, tk) for tk in t] for q in qs])
        steps = np.abs(np.angle(vals[:, 1:] * vals[:, :-1].conj()))
        if steps.size == 0 or steps.max() < max_phase_step:
            return NecfGrid(qs, t, vals, params)
        t = np.linspace(0.0, t_stop, 2 * len(t) - 1)
    raise RuntimeError("phase field could not be resolved")


# ---------------------------------------------------------------- winding

def _truncate(grid: NecfGrid, t: float):
    ts = grid.t
    if t < ts[0] or t > ts[-1] + 1e-12:
        raise ValueError(f"t={t} outside the grid [{ts[0]}, {ts[-1]}]")
    k = int(np.searchsorted(ts, t, side="right"))
    vals = grid.values[:, :k]
    tt = ts[:k]
    if tt[-1] < t - 1e-12:
        w = (t - ts[k - 1]) / (ts[k] - ts[k - 1])
        extra = (1 - w) * grid.values[:, k - 1] + w * grid.values[:, k]
        vals = np.concatenate([vals, extra[:, None]], axis=1)
        tt = np.append(tt, t)
    return tt, vals


def _loop_winding(vals: np.ndarray, cols: Sequence[int]) -> float:
    """Phase winding of the rectangle spanned by ``cols`` and the time range.

    Bottom edge at the first time in column order, up the last column, back
    along the top, down the first column. Time edges accumulate
    nearest-branch increments; momentum edges are single finite differences.
    """
    def t_edge(c):
        g = vals[c]
        return float(np.sum(np.angle(g[1:] * g[:-1].conj())))

    def q_step(a, b, k):
        return float(np.angle(vals[b, k] * np.conj(vals[a, k])))

    total = 0.0
    for a, b in zip(cols[:-1], cols[1:]):
        total += q_step(a, b, 0)
    total += t_edge(cols[-1])
    for a, b in zip(cols[:-1], cols[1:]):
        total -= q_step(a, b, -1)
    total -= t_edge(cols[0])
    return total / (2 * math.pi)


def topological_index(grid: NecfGrid, t: float, tolerance: float = 0.05,
                      vortex_floor: float = 1e-9) -> tuple[float, int]:
    """Time-dependent topological index ``nu(t) = n_minus - n_plus``.

    Both half-plane contours are traversed in the same rotational sense,
    starting at ``t' = 0`` and moving toward larger ``q``. The momentum axis
    is periodic: the positive contour runs over ``q = 0 .. N/4`` with
    ``N/4`` identified with ``-N/4``, the negative one over ``q = -N/4 .. 0``.
    Each contour therefore spans at least two columns even for ``N = 4``.

    Returns
    -------
    raw : float
        Accumulated winding difference.
    nu : int
        Nearest integer.

    Raises
    ------
    ValueError
        If the correlator vanishes on the contour or ``raw`` is not within
        ``tolerance`` of an integer.
    """
    tt, vals = _truncate(grid, t)
    if np.min(np.abs(vals)) < vortex_floor:
        raise ValueError("correlator vanishes on the contour; refine the grid")
    qs = list(grid.qs)
    quarter = len(qs) // 2  # N/4
    zero = qs.index(0)
    edge = qs.index(-quarter)
    plus = [qs.index(q) for q in range(0, quarter)] + [edge]
    minus = [qs.index(q) for q in range(-quarter, 0)] + [zero]
    if len(tt) < 2:
        return 0.0, 0
    raw = _loop_winding(vals, minus) - _loop_winding(vals, plus)
    nu = int(round(raw))
    if abs(raw - nu) > tolerance:
        raise ValueError(f"winding {raw} is not close to an integer")
    return raw, nu


def index_series(grid: NecfGrid, times: Sequence[float] | None = None) -> list[tuple[float, float, int]]:
    """``(t, raw, nu)`` for every grid time (or the requested ones)."""
    times = grid.t if times is None else times
    return [(float(t), *topological_index(grid, float(t))) for t in times]


# ---------------------------------------------------------------- rate function

def rate_series(values: Sequence[complex], N: int) -> np.ndarray:
    return np.array([oracle.rate_function(v, N) for v in values])


def dqpt_time(t: Sequence[float], rate: Sequence[float]) -> tuple[float, float]:
    """Location of the first interior maximum of a sampled rate function.

    The grid maximum is refined by the vertex of a parabola through it and
    its two neighbours.

    Returns
    -------
    t_c : float
    resolution : float
        Local grid spacing, the uncertainty of ``t_c``.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(rate, dtype=float)
    if len(t) < 5:
        raise ValueError("need at least 5 samples")
    interior = [k for k in range(1, len(r) - 1)
                if r[k] >= r[k - 1] and r[k] > r[k + 1] and np.isfinite(r[k])]
    if not interior:
        raise ValueError("no interior maximum")
    k = interior[0]
    # the first peak may be followed by a larger one; keep the first local one
    x = t[k - 1:k + 2]
    y = r[k - 1:k + 2]
    a, b, _ = np.polyfit(x - x[1], y, 2)
    shift = -b / (2 * a) if a < 0 else 0.0
    shift = float(np.clip(shift, x[0] - x[1], x[2] - x[1]))
    return float(x[1] + shift), float(0.5 * (x[2] - x[0]))


# ---------------------------------------------------------------- output

OBSERVABLE_COLUMNS = ("t", "Re", "Im", "sigma", "sigma_re", "sigma_im", "n_kept", "n_total")


def write_observable_csv(path, t_grid, estimates: Sequence[RamseyEstimate]) -> None:
    """One row per time point; counts are empty in exact-probability mode."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVABLE_COLUMNS)
        for t, est in zip(t_grid, estimates):
            v = complex(est.value)
            w.writerow([repr(float(t)), repr(v.real), repr(v.imag), repr(float(est.sigma)),
                        repr(float(est.sigma_re)), repr(float(est.sigma_im)),
                        "" if est.n_kept is None else est.n_kept,
                        "" if est.n_total is None else est.n_total])


def write_index_table(path, series) -> None:
    """Step table of the index: one row per change (and the first point)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t_start", "nu", "raw"))
        last = None
        for t, raw, nu in series:
            if nu != last:
                w.writerow([repr(float(t)), nu, repr(float(raw))])
                last = nu
