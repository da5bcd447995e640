"""In-place state-vector kernels.

Two interchangeable implementations: stride loops compiled with numba, and
pure numpy tensor views. ``DQPTSIM_BACKEND=numpy`` forces the numpy path;
otherwise numba is used when importable.

Bit convention: qubit ``k`` of an ``n``-qubit register is bit ``n - 1 - k``
of the basis index.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by the backend choice
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def _requested_backend() -> str:
    name = os.environ.get("DQPTSIM_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"DQPTSIM_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


BACKEND = _requested_backend()


# ------------------------------------------------------------------ numba

@njit(cache=True)
def _nb_apply_1q(state, tbit, cmask, m00, m01, m10, m11):
    dim = state.shape[0]
    for i in range(dim):
        if i & tbit or (i & cmask) != cmask:
            continue
        j = i | tbit
        a = state[i]
        b = state[j]
        state[i] = m00 * a + m01 * b
        state[j] = m10 * a + m11 * b


@njit(cache=True)
def _nb_apply_zz(state, ibit, jbit, cmask, even, odd):
    dim = state.shape[0]
    for k in range(dim):
        if (k & cmask) != cmask:
            continue
        parity = ((k & ibit) != 0) ^ ((k & jbit) != 0)
        if parity:
            state[k] *= odd
        else:
            state[k] *= even


# ------------------------------------------------------------------ numpy

def _np_apply_1q(state, n, target, controls, u):
    psi = state.reshape((2,) * n)
    index = [slice(None)] * n
    for c in controls:
        index[c] = 1
    sub = psi[tuple(index)]
    axis = target - sum(1 for c in controls if c < target)
    view = np.moveaxis(sub, axis, 0)
    a = view[0].copy()
    b = view[1]
    view[0] = u[0, 0] * a + u[0, 1] * b
    view[1] = u[1, 0] * a + u[1, 1] * b


def _np_apply_zz(state, n, i, j, controls, even, odd):
    idx = np.arange(state.shape[0])
    mask = np.ones(state.shape[0], dtype=bool)
    for c in controls:
        mask &= ((idx >> (n - 1 - c)) & 1).astype(bool)
    parity = ((idx >> (n - 1 - i)) ^ (idx >> (n - 1 - j))) & 1
    factor = np.where(parity == 1, odd, even)
    state[mask] *= factor[mask]


# ------------------------------------------------------------------ dispatch

def apply_1q(state: np.ndarray, n: int, target: int, controls: tuple, u: np.ndarray,
             backend: str | None = None) -> None:
    """Apply a 2x2 matrix to ``target``, conditioned on all ``controls`` being 1."""
    backend = backend or BACKEND
    if backend == "numba":
        cmask = 0
        for c in controls:
            cmask |= 1 << (n - 1 - c)
        _nb_apply_1q(state, 1 << (n - 1 - target), cmask,
                     complex(u[0, 0]), complex(u[0, 1]), complex(u[1, 0]), complex(u[1, 1]))
    else:
        _np_apply_1q(state, n, target, controls, u)


def apply_zz_phase(state: np.ndarray, n: int, i: int, j: int, controls: tuple,
                   even: complex, odd: complex, backend: str | None = None) -> None:
    """Multiply amplitudes by ``even``/``odd`` by the parity of qubits ``i``, ``j``."""
    backend = backend or BACKEND
    if backend == "numba":
        cmask = 0
        for c in controls:
            cmask |= 1 << (n - 1 - c)
        _nb_apply_zz(state, 1 << (n - 1 - i), 1 << (n - 1 - j), cmask, complex(even), complex(odd))
    else:
        _np_apply_zz(state, n, i, j, controls, even, odd)
