"""Dense operator algebra on small qubit registers.

Operators are plain complex ``numpy`` arrays of shape ``(2**n, 2**n)`` and
pure states are 1-D complex arrays. Qubit 1 is the leftmost tensor factor
(most significant bit of the basis index); all public functions take 1-based
qubit indices.
"""
from __future__ import annotations

from functools import reduce
from typing import Iterable

import numpy as np

# Default register ceiling: 10 qubits, dim 1024.
MAX_QUBITS = 10

# Tolerance ladder.
TOL_CONSTRUCT = 1e-12
TOL_UNITARY = 1e-10
TOL_COMPOSED = 1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
for _m in PAULI.values():
    _m.setflags(write=False)


class RegisterTooLargeError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def is_hermitian(h: np.ndarray, tol: float = TOL_CONSTRUCT) -> bool:
    return h.ndim == 2 and h.shape[0] == h.shape[1] and max_abs(h - h.conj().T) <= tol


def is_unitary(u: np.ndarray, tol: float = TOL_UNITARY) -> bool:
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return max_abs(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def n_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def kron(a: np.ndarray, b: np.ndarray, max_qubits: int | None = None) -> np.ndarray:
    """Tensor product ``a ⊗ b`` with a guard on the resulting register size."""
    limit = MAX_QUBITS if max_qubits is None else max_qubits
    dim = a.shape[0] * b.shape[0]
    if dim > 2**limit:
        raise RegisterTooLargeError(
            f"kron result dim {dim} exceeds the {limit}-qubit register limit"
        )
    return np.kron(a, b)


def kron_all(factors: Iterable[np.ndarray], max_qubits: int | None = None) -> np.ndarray:
    return reduce(lambda x, y: kron(x, y, max_qubits), factors, np.ones((1, 1), dtype=complex))


def embed_pauli(letters: str) -> np.ndarray:
    """Matrix of a Pauli string such as ``"ZIIX"`` (leftmost letter = qubit 1)."""
    letters = letters.upper()
    if not letters or any(c not in PAULI for c in letters):
        raise ValueError(f"invalid Pauli string {letters!r}")
    return kron_all(PAULI[c] for c in letters)


def pauli_string(n_qubits: int, ops: dict[int, str]) -> str:
    """Build a Pauli string from ``{qubit: letter}`` with identities elsewhere."""
    letters = ["I"] * n_qubits
    for q, c in ops.items():
        if not 1 <= q <= n_qubits:
            raise IndexError(f"qubit {q} out of range 1..{n_qubits}")
        letters[q - 1] = c
    return "".join(letters)


def site_operator(n_qubits: int, ops: dict[int, str]) -> np.ndarray:
    return embed_pauli(pauli_string(n_qubits, ops))


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h`` via its eigendecomposition."""
    if not is_hermitian(h, TOL_UNITARY):
        raise NotHermitianError("expm_hermitian requires a Hermitian generator")
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def partial_trace(x: np.ndarray, keep: Iterable[int], n_qubits: int) -> np.ndarray:
    """Trace out every qubit not in ``keep`` (1-based indices).

    The kept qubits retain their relative order in the result.
    """
    keep = sorted(set(keep))
    if x.shape != (2**n_qubits, 2**n_qubits):
        raise ValueError(f"operator shape {x.shape} does not match {n_qubits} qubits")
    for q in keep:
        if not 1 <= q <= n_qubits:
            raise IndexError(f"qubit {q} out of range 1..{n_qubits}")
    k = len(keep)
    if k == n_qubits:
        return x.copy()
    axes = [q - 1 for q in keep]
    traced = [q for q in range(n_qubits) if q not in axes]
    t = x.reshape([2] * (2 * n_qubits))
    # bring kept row axes, traced row axes, kept col axes, traced col axes together
    perm = axes + traced + [n_qubits + a for a in axes] + [n_qubits + a for a in traced]
    t = t.transpose(perm).reshape(2**k, 2 ** (n_qubits - k), 2**k, 2 ** (n_qubits - k))
    return np.einsum("ajbj->ab", t)


def basis_state(label: str | int, n_qubits: int) -> np.ndarray:
    """Computational basis state from a bit string ``"0101"`` or an integer index."""
    if isinstance(label, str):
        if len(label) != n_qubits or set(label) - {"0", "1"}:
            raise ValueError(f"basis label {label!r} is not a {n_qubits}-bit string")
        index = int(label, 2)
    else:
        index = int(label)
    if not 0 <= index < 2**n_qubits:
        raise ValueError(f"basis index {index} out of range")
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def expectation(state: np.ndarray, obs: np.ndarray, tol: float = TOL_UNITARY) -> float:
    """Return the real expectation value <state|obs|state>."""
    if obs.shape != (state.shape[0], state.shape[0]):
        raise ValueError(f"state dim {state.shape[0]} does not match observable {obs.shape}")
    val = np.vdot(state, obs @ state)
    if abs(val.imag) > tol:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)
