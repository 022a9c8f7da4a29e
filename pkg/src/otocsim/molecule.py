"""Nuclear-spin molecule description and its text file format.

File format (``#`` starts a comment, blank lines ignored)::

    units: Hz
    offsets:
    C1   1250.0
    C2  -2730.0
    couplings:
    C2   41.64
    C3   0.0   69.67

``offsets`` holds one line per spin: a label and the offset frequency in Hz.
``couplings`` is the strictly lower triangle of the symmetric J table, one
row per spin starting from the second: row ``i`` lists ``J[i,1] .. J[i,i-1]``
in Hz. The ``units`` header is mandatory and only ``Hz`` is accepted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .operators import site_operator


class MoleculeFileError(ValueError):
    pass


@dataclass(frozen=True)
class MoleculeSpec:
    offsets_hz: tuple[float, ...]
    j_hz: tuple[tuple[float, ...], ...]
    labels: tuple[str, ...] = field(default=())
    name: str = "molecule"

    def __post_init__(self):
        n = len(self.offsets_hz)
        if n < 2:
            raise ValueError("a molecule needs at least 2 spins")
        j = np.asarray(self.j_hz, dtype=float)
        if j.shape != (n, n):
            raise ValueError(f"coupling table must be {n}x{n}, got {j.shape}")
        if not np.allclose(j, j.T, rtol=0, atol=0):
            raise ValueError("coupling table must be symmetric")
        if np.any(np.diag(j) != 0):
            raise ValueError("coupling table must have a zero diagonal")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"C{i + 1}" for i in range(n)))
        elif len(self.labels) != n:
            raise ValueError("one label per spin required")

    @classmethod
    def from_arrays(cls, offsets_hz, j_hz, labels=(), name="molecule") -> "MoleculeSpec":
        j = np.asarray(j_hz, dtype=float)
        return cls(
            tuple(float(x) for x in offsets_hz),
            tuple(tuple(float(x) for x in row) for row in j),
            tuple(labels),
            name,
        )

    @property
    def n_spins(self) -> int:
        return len(self.offsets_hz)

    @property
    def offsets(self) -> np.ndarray:
        return np.asarray(self.offsets_hz, dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.asarray(self.j_hz, dtype=float)

    @property
    def omegas(self) -> np.ndarray:
        """Angular offset frequencies in rad/s."""
        return 2 * math.pi * self.offsets

    def j(self, i: int, k: int) -> float:
        """Coupling between 1-based spins ``i`` and ``k``."""
        return float(self.j_hz[i - 1][k - 1])

    def with_couplings(self, j_hz) -> "MoleculeSpec":
        return MoleculeSpec.from_arrays(self.offsets_hz, j_hz, self.labels, self.name)

    def with_offsets(self, offsets_hz) -> "MoleculeSpec":
        return MoleculeSpec.from_arrays(offsets_hz, self.j_hz, self.labels, self.name)

    def nearest_neighbour_only(self) -> "MoleculeSpec":
        j = self.couplings.copy()
        n = self.n_spins
        mask = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) == 1
        return self.with_couplings(np.where(mask, j, 0.0))


# Refocusing times printed for JT = 1.6; the default couplings are obtained by
# inverting the three timing equations at these values.
CROTONIC_JT = 1.6
CROTONIC_TAU_MS = (12.23, 9.77, 7.17)

# Synthetic placeholder offsets (Hz). They only need to be non-zero and of
# kHz scale for the alternating Z/X design Hamiltonian to break the global
# parity symmetries of a pure-coupling evolution.
CROTONIC_SYNTHETIC_OFFSETS_HZ = (1250.0, -2730.0, 3890.0, -4410.0)


def derived_crotonic_couplings(
    jt: float = CROTONIC_JT, taus_ms: tuple[float, float, float] = CROTONIC_TAU_MS
) -> tuple[float, float, float]:
    """(J12, J23, J34) in Hz that reproduce the given refocusing times."""
    tau, tau1, tau2 = (x * 1e-3 for x in taus_ms)
    j12 = jt / (math.pi * tau)
    j23 = j12 * tau / (2 * tau1 - tau)
    j34 = j12 * tau / (2 * (tau2 - tau1) + tau)
    return j12, j23, j34


def crotonic_default(offsets_hz=CROTONIC_SYNTHETIC_OFFSETS_HZ) -> MoleculeSpec:
    """Four-carbon chain with derived nearest-neighbour couplings.

    Long-range couplings J13, J24, J14 are zero.
    """
    j12, j23, j34 = derived_crotonic_couplings()
    j = np.zeros((4, 4))
    j[0, 1] = j[1, 0] = j12
    j[1, 2] = j[2, 1] = j23
    j[2, 3] = j[3, 2] = j34
    return MoleculeSpec.from_arrays(offsets_hz, j, name="crotonic-carbon")


def natural_hamiltonian(
    omegas: np.ndarray, couplings: np.ndarray, basis: str = "Z"
) -> np.ndarray:
    """``-sum_i (w_i/2) P_i + pi * sum_{i<j} (J_ij/2) P_i P_j`` with ``P`` the basis Pauli.

    ``omegas`` in rad/s and ``couplings`` in Hz; the result is in rad/s.
    """
    n = len(omegas)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        if omegas[i]:
            h -= 0.5 * omegas[i] * site_operator(n, {i + 1: basis})
        for k in range(i + 1, n):
            if couplings[i, k]:
                h += 0.5 * math.pi * couplings[i, k] * site_operator(n, {i + 1: basis, k + 1: basis})
    return h


def load_molecule(path: str | Path) -> MoleculeSpec:
    path = Path(path)
    units = None
    section = None
    labels: list[str] = []
    offsets: list[float] = []
    rows: list[tuple[int, list[float]]] = []

    def fail(lineno: int, msg: str):
        raise MoleculeFileError(f"{path}:{lineno}: {msg}")

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        low = line.lower()
        if low.startswith("units:"):
            units = line.split(":", 1)[1].strip()
            if units.lower() != "hz":
                fail(lineno, f"unsupported units {units!r}; only Hz is accepted")
            continue
        if low in ("offsets:", "couplings:"):
            section = low[:-1]
            continue
        parts = line.split()
        if section is None:
            fail(lineno, "data line before an 'offsets:' or 'couplings:' section")
        try:
            values = [float(x) for x in parts[1:]]
        except ValueError:
            fail(lineno, f"non-numeric value in {line!r}")
        if section == "offsets":
            if len(values) != 1:
                fail(lineno, "offset lines are '<label> <Hz>'")
            labels.append(parts[0])
            offsets.append(values[0])
        else:
            rows.append((lineno, values))

    if units is None:
        raise MoleculeFileError(f"{path}: missing 'units: Hz' header")
    n = len(offsets)
    if n < 2:
        raise MoleculeFileError(f"{path}: need at least 2 spins in 'offsets:'")
    if len(rows) != n - 1:
        raise MoleculeFileError(f"{path}: expected {n - 1} coupling rows, found {len(rows)}")
    j = np.zeros((n, n))
    for i, (lineno, values) in enumerate(rows, start=1):
        if len(values) != i:
            fail(lineno, f"coupling row for spin {i + 1} needs {i} values, got {len(values)}")
        j[i, :i] = values
        j[:i, i] = values
    return MoleculeSpec.from_arrays(offsets, j, labels, name=path.stem)


def dump_molecule(m: MoleculeSpec) -> str:
    lines = [f"# {m.name}", "units: Hz", "offsets:"]
    for label, off in zip(m.labels, m.offsets_hz):
        lines.append(f"{label}  {float(off)!r}")
    lines.append("couplings:")
    for i in range(1, m.n_spins):
        lines.append(m.labels[i] + "  " + "  ".join(repr(float(m.j_hz[i][k])) for k in range(i)))
    return "\n".join(lines) + "\n"


def save_molecule(m: MoleculeSpec, path: str | Path) -> None:
    Path(path).write_text(dump_molecule(m))
