"""Random-unitary ensembles: Haar, local products, and design-Hamiltonian sequences.

A design-Hamiltonian unitary is a product of ``n_segments`` random refocusing
segments of length ``T/2`` each. Segment ``m`` evolves under an effective
Hamiltonian whose offsets and couplings are rescaled by uniformly drawn pulse
positions ``lambda``; even segments act in the Z basis, odd ones in X.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .molecule import MoleculeSpec, crotonic_default, natural_hamiltonian
from .operators import PAULI, kron_all
from .parallel import indexed_map, rng_stream


class Kind(str, enum.Enum):
    GLOBAL_HAAR = "global_haar"
    LOCAL_HAAR = "local_haar"
    LOCAL_AXIS_ANGLE = "local_axis_angle"
    DESIGN_HAMILTONIAN = "design_hamiltonian"


COUPLING_RULES = ("linear", "toggling")


@dataclass(frozen=True)
class RandomizationScheme:
    kind: Kind = Kind.GLOBAL_HAAR
    period_ms: float = 20.0
    n_segments: int = 4
    molecule: MoleculeSpec | None = None
    coupling_rule: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.DESIGN_HAMILTONIAN:
            if self.period_ms < 0:
                raise ValueError("period_ms must be non-negative")
            if self.n_segments < 2 or self.n_segments % 2:
                raise ValueError("n_segments must be a positive even number")
            if self.molecule is None:
                object.__setattr__(self, "molecule", crotonic_default())
        if self.coupling_rule not in COUPLING_RULES:
            raise ValueError(f"coupling_rule must be one of {COUPLING_RULES}")

    def describe(self) -> str:
        if self.kind is not Kind.DESIGN_HAMILTONIAN:
            return f"kind={self.kind.value}"
        return (
            f"kind={self.kind.value} period_ms={self.period_ms!r} n_segments={self.n_segments} "
            f"molecule={self.molecule.name} coupling_rule={self.coupling_rule}"
        )


def design_scheme(period_ms=20.0, n_segments=4, molecule=None, coupling_rule="linear"):
    return RandomizationScheme(Kind.DESIGN_HAMILTONIAN, period_ms, n_segments, molecule, coupling_rule)


def sample_haar(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix.

    Columns of ``Q`` are rescaled by the phases of ``diag(R)`` so that the
    decomposition is unique and the result exactly Haar distributed.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def axis_angle_unitary(rng: np.random.Generator) -> np.ndarray:
    """``exp(-i theta/2 n.sigma)`` with ``n`` uniform on the sphere, ``theta`` uniform on [0, 2pi)."""
    n = rng.standard_normal(3)
    n /= np.linalg.norm(n)
    theta = rng.uniform(0.0, 2 * math.pi)
    gen = n[0] * PAULI["X"] + n[1] * PAULI["Y"] + n[2] * PAULI["Z"]
    return math.cos(theta / 2) * PAULI["I"] - 1j * math.sin(theta / 2) * gen


def local_factors(n_spins: int, mode: Kind, rng: np.random.Generator) -> list[np.ndarray]:
    mode = Kind(mode)
    if n_spins < 1:
        raise ValueError("n_spins must be positive")
    if mode is Kind.LOCAL_HAAR:
        return [sample_haar(2, rng) for _ in range(n_spins)]
    if mode is Kind.LOCAL_AXIS_ANGLE:
        return [axis_angle_unitary(rng) for _ in range(n_spins)]
    raise ValueError(f"{mode.value} is not a local mode")


def sample_local_product(n_spins: int, mode: Kind, rng: np.random.Generator) -> np.ndarray:
    return kron_all(local_factors(n_spins, mode, rng))


def draw_schedule(rng: np.random.Generator, n_segments: int, n_spins: int) -> np.ndarray:
    """Pulse positions ``lambda[m, i]``, uniform on [0, 1)."""
    return rng.random((n_segments, n_spins))


def effective_coefficients(lambdas, molecule: MoleculeSpec, coupling_rule: str = "linear"):
    """Rescaled ``(omegas [rad/s], couplings [Hz])`` for one refocusing segment.

    Offsets scale by ``1 - 2 lambda_i``. Couplings scale by
    ``1 - |lambda_i - lambda_j|`` under the ``"linear"`` rule, or by the
    toggling-frame factor ``1 - 2|lambda_i - lambda_j|`` that a single ideal
    pi pulse per spin actually produces (``"toggling"``).
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (molecule.n_spins,):
        raise ValueError(f"need {molecule.n_spins} lambdas, got shape {lam.shape}")
    if np.any(lam < 0) or np.any(lam >= 1):
        raise ValueError("lambdas must lie in [0, 1)")
    gap = np.abs(np.subtract.outer(lam, lam))
    if coupling_rule == "linear":
        scale = 1 - gap
    elif coupling_rule == "toggling":
        scale = 1 - 2 * gap
    else:
        raise ValueError(f"unknown coupling rule {coupling_rule!r}")
    return (1 - 2 * lam) * molecule.omegas, scale * molecule.couplings


def effective_hamiltonian(lambdas, basis: str, molecule: MoleculeSpec, coupling_rule: str = "linear"):
    """Effective Hamiltonian (rad/s) of one refocusing segment in basis ``"Z"`` or ``"X"``.

    Same normalisation as the natural Hamiltonian: ``-sum w_eff/2 P_i +
    pi sum_{i<j} J_eff/2 P_i P_j``, summed over all pairs.
    """
    if basis not in ("Z", "X"):
        raise ValueError("basis must be 'Z' or 'X'")
    omegas, couplings = effective_coefficients(lambdas, molecule, coupling_rule)
    return natural_hamiltonian(omegas, couplings, basis)


def _segment_eigs(schedule: np.ndarray, scheme: RandomizationScheme):
    out = []
    for m, row in enumerate(schedule):
        basis = "Z" if m % 2 == 0 else "X"
        h = effective_hamiltonian(row, basis, scheme.molecule, scheme.coupling_rule)
        out.append(np.linalg.eigh(h))
    return out


def _segment_unitary(eig, seconds: float) -> np.ndarray:
    w, v = eig
    return (v * np.exp(-1j * seconds * w)) @ v.conj().T


def design_unitary(schedule: np.ndarray, scheme: RandomizationScheme) -> np.ndarray:
    """Ordered product of the segment evolutions; segment 0 acts first."""
    half = scheme.period_ms * 1e-3 / 2
    d = 2**scheme.molecule.n_spins
    u = np.eye(d, dtype=complex)
    for eig in _segment_eigs(schedule, scheme):
        u = _segment_unitary(eig, half) @ u
    return u


def sample_design_unitary(scheme: RandomizationScheme, rng: np.random.Generator) -> np.ndarray:
    sched = draw_schedule(rng, scheme.n_segments, scheme.molecule.n_spins)
    return design_unitary(sched, scheme)


def sample_unitary(scheme: RandomizationScheme, n_spins: int, rng: np.random.Generator) -> np.ndarray:
    kind = scheme.kind
    if kind is Kind.GLOBAL_HAAR:
        return sample_haar(2**n_spins, rng)
    if kind in (Kind.LOCAL_HAAR, Kind.LOCAL_AXIS_ANGLE):
        return sample_local_product(n_spins, kind, rng)
    if scheme.molecule.n_spins != n_spins:
        raise ValueError(
            f"molecule has {scheme.molecule.n_spins} spins but the register has {n_spins}"
        )
    return sample_design_unitary(scheme, rng)


def _indexed_sample(scheme, n_spins, seed, i):
    return sample_unitary(scheme, n_spins, rng_stream(seed, i))


@dataclass
class UnitaryEnsemble:
    members: np.ndarray  # shape (count, dim, dim)
    scheme: RandomizationScheme = field(default_factory=RandomizationScheme)
    seed: int = 0

    def __len__(self):
        return len(self.members)

    @property
    def dim(self) -> int:
        return self.members.shape[1]


def sample_ensemble(
    scheme: RandomizationScheme, n_spins: int, count: int, seed: int, workers: int = 1
) -> UnitaryEnsemble:
    """``count`` unitaries; member ``i`` is drawn from stream ``(seed, i)``."""
    fn = partial(_indexed_sample, scheme, n_spins, seed)
    members = np.array(indexed_map(fn, count, workers))
    return UnitaryEnsemble(members.reshape(count, 2**n_spins, 2**n_spins), scheme, seed)


def pair_traces(members: np.ndarray) -> np.ndarray:
    """Matrix of ``|Tr(u_a^dagger u_b)|`` over all ordered pairs."""
    m = np.asarray(members).reshape(len(members), -1)
    return np.abs(m.conj() @ m.T)


def frame_potential(ens, k: int, include_self_pairs: bool = False) -> float:
    """k-th frame potential of an ensemble (``UnitaryEnsemble`` or stacked array).

    By default self-pairs ``u = v`` are excluded, which makes the estimate
    unbiased for the ensemble's true frame potential (Haar value ``k!`` when
    ``k <= dim``). ``include_self_pairs=True`` gives the plain double average
    ``|E|^-2 sum_{u,v}``, which carries a ``dim^(2k)/|E|`` self-pair floor.
    """
    members = ens.members if isinstance(ens, UnitaryEnsemble) else np.asarray(ens)
    n = len(members)
    if n == 0:
        raise ValueError("empty ensemble")
    if k < 1:
        raise ValueError("k must be a positive integer")
    vals = pair_traces(members) ** (2 * k)
    if include_self_pairs:
        return math.fsum(vals.ravel()) / n**2
    if n < 2:
        raise ValueError("need at least two members to exclude self-pairs")
    iu = np.triu_indices(n, 1)
    return 2 * math.fsum(vals[iu]) / (n * (n - 1))


def _trajectory_at_times(scheme, n_segments_total, times_ms, seed, i):
    rng = rng_stream(seed, i)
    sched = draw_schedule(rng, n_segments_total, scheme.molecule.n_spins)
    eigs = _segment_eigs(sched, scheme)
    half_ms = scheme.period_ms / 2
    d = 2**scheme.molecule.n_spins
    out = np.empty((len(times_ms), d, d), dtype=complex)
    if half_ms <= 0:
        out[:] = np.eye(d)
        return out
    done = np.eye(d, dtype=complex)  # product of completed segments
    n_done = 0
    for j, t in enumerate(times_ms):
        n_full = min(int(math.floor(t / half_ms + 1e-12)), n_segments_total)
        while n_done < n_full:
            done = _segment_unitary(eigs[n_done], half_ms * 1e-3) @ done
            n_done += 1
        rest = t - n_full * half_ms
        if rest > 1e-12 and n_full < n_segments_total:
            out[j] = _segment_unitary(eigs[n_full], rest * 1e-3) @ done
        else:
            out[j] = done
    return out


def frame_potential_trace(
    scheme: RandomizationScheme,
    times_ms: Sequence[float],
    n_samples: int,
    k: int | Sequence[int] = (1, 2),
    seed: int = 0,
    workers: int = 1,
    include_self_pairs: bool = False,
) -> np.ndarray:
    """Frame potential of the design trajectories truncated at each time.

    Trajectories keep alternating Z/X segments (fresh pulse positions per
    segment) for as long as the largest requested time needs. The first
    ``n_segments`` rows of every schedule coincide with
    ``sample_design_unitary`` draws on the same stream. Returns an array of
    shape ``(len(times_ms), len(ks))``.
    """
    times = [float(t) for t in times_ms]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted ascending")
    if times and times[0] < 0:
        raise ValueError("times must be non-negative")
    ks = (k,) if isinstance(k, int) else tuple(k)
    half = scheme.period_ms / 2
    needed = math.ceil(times[-1] / half - 1e-12) if times and half > 0 else 0
    n_seg = max(scheme.n_segments, needed)
    fn = partial(_trajectory_at_times, scheme, n_seg, times, seed)
    traj = np.array(indexed_map(fn, n_samples, workers))  # (samples, times, d, d)
    out = np.empty((len(times), len(ks)))
    for j in range(len(times)):
        for c, kk in enumerate(ks):
            out[j, c] = frame_potential(traj[:, j], kk, include_self_pairs)
    return out


ENSEMBLE_MAGIC = "# otocsim unitary ensemble v1"


def save_ensemble(ens: UnitaryEnsemble, path: str | Path) -> None:
    """Write an ensemble as text; see ``load_ensemble`` for the layout."""
    d = ens.dim
    lines = [
        ENSEMBLE_MAGIC,
        f"dim {d}",
        f"count {len(ens)}",
        f"seed {ens.seed}",
        f"scheme {ens.scheme.describe()}",
    ]
    for idx, u in enumerate(ens.members):
        lines.append(f"matrix {idx}")
        for row in u:
            lines.append(" ".join(f"{float(x.real)!r} {float(x.imag)!r}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_ensemble(path: str | Path) -> UnitaryEnsemble:
    """Read an ensemble written by ``save_ensemble``.

    Layout: a magic line, then ``dim D``, ``count C``, ``seed S`` and
    ``scheme key=value ...`` header lines, then for each member a
    ``matrix <index>`` line followed by ``D`` rows of ``2D`` floats
    (real and imaginary parts interleaved). Design-Hamiltonian molecules are
    recorded by name only; the loaded scheme carries the default molecule.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != ENSEMBLE_MAGIC:
        raise ValueError(f"{path}: not an ensemble file")
    header = {}
    for line in lines[1:5]:
        key, _, value = line.partition(" ")
        header[key] = value
    d, count, seed = int(header["dim"]), int(header["count"]), int(header["seed"])
    desc = dict(item.split("=", 1) for item in header["scheme"].split())
    kind = Kind(desc["kind"])
    if kind is Kind.DESIGN_HAMILTONIAN:
        scheme = design_scheme(
            float(desc["period_ms"]), int(desc["n_segments"]), None, desc["coupling_rule"]
        )
    else:
        scheme = RandomizationScheme(kind)
    members = np.empty((count, d, d), dtype=complex)
    pos = 5
    for idx in range(count):
        if lines[pos] != f"matrix {idx}":
            raise ValueError(f"{path}:{pos + 1}: expected 'matrix {idx}'")
        block = np.array([[float(x) for x in lines[pos + 1 + r].split()] for r in range(d)])
        members[idx] = block[:, 0::2] + 1j * block[:, 1::2]
        pos += d + 1
    return UnitaryEnsemble(members, scheme, seed)
